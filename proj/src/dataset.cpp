#include "resflow/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace resflow {

void WindowSpec::validate() const {
  grid.validate();
  if (input_days < 1) throw ConfigError("window: input_days must be >= 1");
  if (horizon_days < 1) throw ConfigError("window: horizon_days must be >= 1");
  if (out_channels != 1 && out_channels != 2) {
    throw ConfigError("window: out_channels must be 1 or 2");
  }
  if (res_feature_lags.empty()) {
    throw ConfigError("window: res_feature_lags must not be empty");
  }
  for (int lag : res_feature_lags) {
    if (lag < 0) throw ConfigError("window: res_feature_lags must be >= 0");
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

long long parse_int_field(const std::string& s, const char* what, int line_no) {
  long long v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc{} || r.ptr != e || s.empty()) {
    throw ParseError(std::string("line ") + std::to_string(line_no) + ": bad " + what +
                     " '" + s + "'");
  }
  return v;
}

Date parse_date_field(const std::string& s, const char* what, int line_no) {
  try {
    return Date::parse(s);
  } catch (const DateError& e) {
    throw ParseError(std::string("line ") + std::to_string(line_no) + ": bad " + what +
                     ": " + e.what());
  }
}

struct EntranceRow {
  Date date;
  int slot;
  std::string gate;
  long long count;
  int line_no;
};

}  // namespace

SlotSeries load_entrance_csv(const std::string& path, const SlotGrid& grid,
                             std::optional<SpanHint> hint) {
  grid.validate();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header");
  if (line == "date,slot,gate,count\r") line.pop_back();
  if (line != "date,slot,gate,count") {
    throw ParseError(path + ": expected header 'date,slot,gate,count'");
  }

  std::vector<EntranceRow> rows;
  std::set<std::string> gate_set;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_line(line);
    if (f.size() != 4) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                       std::to_string(f.size()));
    }
    EntranceRow r;
    r.date = parse_date_field(f[0], "date", line_no);
    r.slot = static_cast<int>(parse_int_field(f[1], "slot", line_no));
    if (r.slot < 0 || r.slot >= grid.slots_per_day) {
      throw ParseError("line " + std::to_string(line_no) + ": slot " +
                       std::to_string(r.slot) + " out of range [0, " +
                       std::to_string(grid.slots_per_day - 1) + "]");
    }
    r.gate = f[2];
    if (r.gate.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty gate");
    }
    r.count = parse_int_field(f[3], "count", line_no);
    if (r.count < 0) {
      throw ValidationError("line " + std::to_string(line_no) + ": negative count " +
                            std::to_string(r.count));
    }
    r.line_no = line_no;
    gate_set.insert(r.gate);
    rows.push_back(std::move(r));
  }

  Date start;
  int num_days = 0;
  std::vector<std::string> channels;
  if (hint) {
    start = hint->start;
    num_days = hint->num_days;
    channels = hint->channels;
  } else {
    if (rows.empty()) {
      throw ParseError(path + ": empty body and no span hint");
    }
    Date lo = rows.front().date, hi = lo;
    for (const auto& r : rows) {
      lo = std::min(lo, r.date);
      hi = std::max(hi, r.date);
    }
    start = lo;
    num_days = hi.days_since(lo) + 1;
    channels.assign(gate_set.begin(), gate_set.end());  // sorted, deterministic
  }

  SlotSeries series = SlotSeries::zeros(start, num_days, grid, channels);
  std::map<std::string, int> ch_index;
  for (int c = 0; c < series.num_channels(); ++c) ch_index[series.channels[c]] = c;

  std::set<std::tuple<int, int, int>> seen;
  for (const auto& r : rows) {
    const int day = series.day_index(r.date);
    if (day < 0) {
      throw ValidationError("line " + std::to_string(r.line_no) + ": date " + r.date.iso() +
                            " outside declared span");
    }
    auto it = ch_index.find(r.gate);
    if (it == ch_index.end()) {
      throw ValidationError("line " + std::to_string(r.line_no) + ": unknown gate '" +
                            r.gate + "'");
    }
    if (!seen.insert({day, r.slot, it->second}).second) {
      throw ValidationError("line " + std::to_string(r.line_no) + ": duplicate key " +
                            r.date.iso() + "," + std::to_string(r.slot) + "," + r.gate);
    }
    series.at(day, r.slot, it->second) = static_cast<double>(r.count);
  }
  series.validate();
  return series;
}

ReservationLog load_reservations_csv(const std::string& path, const SlotGrid& grid) {
  grid.validate();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "booking_date,target_date,slot,gate,delta") {
    throw ParseError(path + ": expected header 'booking_date,target_date,slot,gate,delta'");
  }

  struct RawEvent {
    Date booking, target;
    int slot;
    std::string gate;
    int delta;
  };
  std::vector<RawEvent> raw;
  std::set<std::string> gate_set;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_line(line);
    if (f.size() != 5) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                       std::to_string(f.size()));
    }
    RawEvent e;
    e.booking = parse_date_field(f[0], "booking_date", line_no);
    e.target = parse_date_field(f[1], "target_date", line_no);
    e.slot = static_cast<int>(parse_int_field(f[2], "slot", line_no));
    if (e.slot < 0 || e.slot >= grid.slots_per_day) {
      throw ParseError("line " + std::to_string(line_no) + ": slot out of range");
    }
    e.gate = f[3];
    if (e.gate.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty gate");
    e.delta = static_cast<int>(parse_int_field(f[4], "delta", line_no));
    gate_set.insert(e.gate);
    raw.push_back(std::move(e));
  }

  ReservationLog log;
  log.gates.assign(gate_set.begin(), gate_set.end());
  std::map<std::string, int> gate_index;
  for (int g = 0; g < static_cast<int>(log.gates.size()); ++g) gate_index[log.gates[g]] = g;
  log.events.reserve(raw.size());
  for (const auto& e : raw) {
    log.events.push_back(ResEvent{e.booking, e.target, e.slot, gate_index[e.gate], e.delta});
  }
  return log;
}

void write_entrance_csv(const std::string& path, const SlotSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "date,slot,gate,count\n";
  for (int day = 0; day < series.num_days; ++day) {
    const std::string date = series.date_of_day(day).iso();
    for (int slot = 0; slot < series.grid.slots_per_day; ++slot) {
      for (int c = 0; c < series.num_channels(); ++c) {
        out << date << ',' << slot << ',' << series.channels[c] << ','
            << static_cast<long long>(std::llround(series.at(day, slot, c))) << '\n';
      }
    }
  }
  if (!out) throw IoError("error writing " + path);
}

void write_reservations_csv(const std::string& path, const ReservationLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "booking_date,target_date,slot,gate,delta\n";
  for (const auto& e : log.events) {
    out << e.booking_date.iso() << ',' << e.target_date.iso() << ',' << e.slot << ','
        << log.gates[e.gate] << ',' << e.delta << '\n';
  }
  if (!out) throw IoError("error writing " + path);
}

namespace {

// Maps log gates onto the entrance channel layout: per-gate when the labels
// match, summed when the entrance series is single-channel.
Mat reservation_block(const SlotSeries& agg, const SlotSeries& entrance, int first_row,
                      int num_rows) {
  const int c_out = entrance.num_channels();
  Mat block = Mat::Zero(num_rows, c_out);
  if (agg.num_days == 0) return block;
  if (c_out == 1) {
    block.col(0) = agg.values.middleRows(first_row, num_rows).rowwise().sum();
    return block;
  }
  for (int c = 0; c < c_out; ++c) {
    auto it = std::find(agg.channels.begin(), agg.channels.end(), entrance.channels[c]);
    if (it == agg.channels.end()) {
      throw ShapeError("reservation log lacks gate '" + entrance.channels[c] + "'");
    }
    const int g = static_cast<int>(it - agg.channels.begin());
    block.col(c) = agg.values.middleRows(first_row, num_rows).col(g);
  }
  return block;
}

Mat marks_for(const SlotSeries& ref, int first_day, int num_days) {
  const int T = ref.grid.slots_per_day;
  Mat m(num_days * T, 4);
  for (int d = 0; d < num_days; ++d) {
    const Date date = ref.start_date.add_days(first_day + d);
    for (int s = 0; s < T; ++s) {
      const CalendarMark mark = build_mark(date, s, ref.grid);
      const int r = d * T + s;
      m(r, 0) = mark.hour_norm;
      m(r, 1) = mark.weekday_norm;
      m(r, 2) = mark.month_norm;
      m(r, 3) = mark.day_norm;
    }
  }
  return m;
}

using AggCache = std::map<int, SlotSeries>;  // keyed by as_of day offset from start

const SlotSeries& cached_aggregate(AggCache& cache, const ReservationLog& log,
                                   const SlotSeries& entrance, const Date& as_of,
                                   int span_days) {
  const int key = as_of.days_since(entrance.start_date);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, aggregate_reservations(log, as_of, entrance.grid,
                                                   entrance.start_date, span_days))
             .first;
  }
  return it->second;
}

ForecastSample make_sample(const SlotSeries& entrance, const ReservationLog& reservations,
                           const WindowSpec& spec, int issue_idx, bool require_target,
                           AggCache& cache) {
  const int T = spec.grid.slots_per_day;
  const int c_out = entrance.num_channels();
  ForecastSample s;
  s.issue_date = entrance.date_of_day(issue_idx);

  const int enc_first_day = issue_idx - spec.input_days + 1;
  s.x_enc = entrance.values.middleRows(enc_first_day * T, spec.enc_len());
  s.x_enc_mark = marks_for(entrance, enc_first_day, spec.input_days);

  const int target_first_day = issue_idx + 1;
  s.x_dec_mark = marks_for(entrance, target_first_day, spec.horizon_days);

  const bool target_covered = target_first_day + spec.horizon_days <= entrance.num_days;
  if (target_covered) {
    s.y = entrance.values.middleRows(target_first_day * T, spec.dec_len());
  } else if (require_target) {
    throw WindowError("target window for issue date " + s.issue_date.iso() +
                      " leaves the data span");
  } else {
    s.y = Mat::Zero(spec.dec_len(), c_out);
  }

  // Reservation features: cumulative bookings as of issue_date - lag, per
  // (gate channel, lag), gate-major column order.
  const int span_days = std::max(entrance.num_days, target_first_day + spec.horizon_days);
  s.x_dec = Mat::Zero(spec.dec_len(), spec.res_channels());
  for (int li = 0; li < spec.num_lags(); ++li) {
    const Date as_of = s.issue_date.add_days(-spec.res_feature_lags[li]);
    const SlotSeries& agg = cached_aggregate(cache, reservations, entrance, as_of, span_days);
    const Mat block = reservation_block(agg, entrance, target_first_day * T, spec.dec_len());
    for (int c = 0; c < c_out; ++c) {
      s.x_dec.col(c * spec.num_lags() + li) = block.col(c);
    }
  }
  return s;
}

}  // namespace

ForecastSample build_sample_at(const SlotSeries& entrance, const ReservationLog& reservations,
                               const WindowSpec& spec, const Date& issue_date,
                               bool require_target) {
  spec.validate();
  if (entrance.num_channels() != spec.out_channels) {
    throw ShapeError("entrance series has " + std::to_string(entrance.num_channels()) +
                     " channels but window expects " + std::to_string(spec.out_channels));
  }
  const int issue_idx = entrance.day_index(issue_date);
  if (issue_idx < 0) {
    throw WindowError("issue date " + issue_date.iso() + " outside the data span");
  }
  if (issue_idx < spec.input_days - 1) {
    throw WindowError("issue date " + issue_date.iso() + " lacks " +
                      std::to_string(spec.input_days) + " days of history");
  }
  AggCache cache;
  return make_sample(entrance, reservations, spec, issue_idx, require_target, cache);
}

std::vector<ForecastSample> build_samples(const SlotSeries& entrance,
                                          const ReservationLog& reservations,
                                          const WindowSpec& spec) {
  spec.validate();
  if (entrance.num_channels() != spec.out_channels) {
    throw ShapeError("entrance series has " + std::to_string(entrance.num_channels()) +
                     " channels but window expects " + std::to_string(spec.out_channels));
  }
  const int n_days = entrance.num_days;
  if (n_days < spec.input_days + spec.horizon_days) {
    throw WindowError("span of " + std::to_string(n_days) + " days cannot fit input_days=" +
                      std::to_string(spec.input_days) + " + horizon_days=" +
                      std::to_string(spec.horizon_days));
  }
  AggCache cache;
  std::vector<ForecastSample> samples;
  for (int issue = spec.input_days - 1; issue + spec.horizon_days < n_days; ++issue) {
    samples.push_back(make_sample(entrance, reservations, spec, issue, true, cache));
  }
  return samples;
}

std::pair<std::vector<ForecastSample>, std::vector<ForecastSample>> chrono_split(
    const std::vector<ForecastSample>& samples, double train_fraction,
    const WindowSpec& spec) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must be in (0, 1)");
  }
  const int n = static_cast<int>(samples.size());
  const int n_train = static_cast<int>(std::floor(n * train_fraction));
  if (n_train < 1 || n_train >= n) {
    throw SplitError("split of " + std::to_string(n) + " samples at fraction " +
                     std::to_string(train_fraction) + " leaves an empty side");
  }
  std::vector<ForecastSample> test(samples.begin() + n_train, samples.end());

  // Purge train samples whose target window [issue+1, issue+H] overlaps any
  // test target window. Test windows are contiguous from the first one.
  const Date first_test_target = test.front().issue_date.add_days(1);
  std::vector<ForecastSample> train;
  for (int i = 0; i < n_train; ++i) {
    const Date target_end = samples[i].issue_date.add_days(spec.horizon_days);
    if (target_end >= first_test_target) continue;
    train.push_back(samples[i]);
  }
  if (train.empty()) {
    throw SplitError("boundary purge removed every train sample; span too short for horizon " +
                     std::to_string(spec.horizon_days));
  }
  return {std::move(train), std::move(test)};
}

Standardizer Standardizer::fit(const std::vector<ForecastSample>& train) {
  if (train.empty()) throw ConfigError("standardizer: empty train set");
  const int c_enc = static_cast<int>(train.front().x_enc.cols());
  const int c_dec = static_cast<int>(train.front().x_dec.cols());

  auto fit_block = [&](int cols, auto&& getter) {
    std::vector<ChannelStat> stats(cols);
    for (int c = 0; c < cols; ++c) {
      double sum = 0.0, sumsq = 0.0;
      long long n = 0;
      for (const auto& s : train) {
        const Mat& x = getter(s);
        for (int i = 0; i < x.rows(); ++i) {
          sum += x(i, c);
          sumsq += x(i, c) * x(i, c);
          ++n;
        }
      }
      const double mean = sum / static_cast<double>(n);
      const double var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
      stats[c].mean = mean;
      stats[c].stddev = std::sqrt(var);
      stats[c].active = stats[c].stddev > 1e-12;
    }
    return stats;
  };

  Standardizer st;
  st.enc = fit_block(c_enc, [](const ForecastSample& s) -> const Mat& { return s.x_enc; });
  st.dec = fit_block(c_dec, [](const ForecastSample& s) -> const Mat& { return s.x_dec; });
  for (int c = 0; c < c_enc; ++c) {
    if (!st.enc[c].active) {
      st.warnings.push_back("encoder channel " + std::to_string(c) +
                            " has zero variance; left unstandardized");
    }
  }
  for (int c = 0; c < c_dec; ++c) {
    if (!st.dec[c].active) {
      st.warnings.push_back("decoder channel " + std::to_string(c) +
                            " has zero variance; left unstandardized");
    }
  }
  return st;
}

Mat Standardizer::apply(const Mat& x, const std::vector<ChannelStat>& stats) {
  if (x.cols() != static_cast<Eigen::Index>(stats.size())) {
    throw ShapeError("standardizer: channel count mismatch");
  }
  Mat z = x;
  for (int c = 0; c < x.cols(); ++c) {
    if (!stats[c].active) continue;
    z.col(c) = (x.col(c).array() - stats[c].mean) / stats[c].stddev;
  }
  return z;
}

Mat Standardizer::invert(const Mat& z, const std::vector<ChannelStat>& stats) {
  if (z.cols() != static_cast<Eigen::Index>(stats.size())) {
    throw ShapeError("standardizer: channel count mismatch");
  }
  Mat x = z;
  for (int c = 0; c < z.cols(); ++c) {
    if (!stats[c].active) continue;
    x.col(c) = z.col(c).array() * stats[c].stddev + stats[c].mean;
  }
  return x;
}

}  // namespace resflow
