#include "resflow/evalkit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

namespace resflow {

Metrics compute_metrics(const Mat& yhat, const Mat& y) {
  if (yhat.rows() != y.rows() || yhat.cols() != y.cols()) {
    throw ShapeError("compute_metrics: shape mismatch");
  }
  Metrics m;
  double abs_sum = 0.0, pct_sum = 0.0;
  long long n_pct = 0;
  for (int i = 0; i < y.rows(); ++i) {
    for (int j = 0; j < y.cols(); ++j) {
      const double diff = std::abs(yhat(i, j) - y(i, j));
      abs_sum += diff;
      if (y(i, j) != 0.0) {
        pct_sum += diff / std::abs(y(i, j));
        ++n_pct;
      } else {
        ++m.n_skipped;
      }
    }
  }
  m.mae = abs_sum / static_cast<double>(y.size());
  if (n_pct == 0) {
    throw MetricError("MAPE undefined: every target entry is zero");
  }
  m.n_used = n_pct;
  m.mape_raw = pct_sum / static_cast<double>(n_pct);
  m.mape_pct = 100.0 * m.mape_raw;
  return m;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

BaselineKind baseline_by_name(const std::string& name) {
  if (name == "seasonal_naive") return BaselineKind::seasonal_naive;
  if (name == "persistence") return BaselineKind::persistence;
  if (name == "ar_p") return BaselineKind::ar_p;
  if (name == "res_ridge") return BaselineKind::res_ridge;
  throw UsageError("unknown baseline '" + name + "'");
}

BaselineSuite::BaselineSuite(const SlotSeries& entrance,
                             const std::vector<ForecastSample>& train,
                             const WindowSpec& spec, double ridge_lambda)
    : entrance_(entrance), spec_(spec) {
  if (train.empty()) throw ConfigError("baselines: empty train set");
  cutoff_idx_ = entrance.day_index(train.back().issue_date);
  if (cutoff_idx_ < 0) throw WindowError("baselines: train issue date outside entrance span");

  const int T = spec.grid.slots_per_day;
  const int C = entrance.num_channels();

  // AR(p) per (slot, channel) over the train span, ordinary least squares.
  const int p = kArOrder;
  ar_ok_ = cutoff_idx_ >= p + 1;
  if (ar_ok_) {
    ar_coefs_.resize(static_cast<std::size_t>(T) * C);
    const int rows = cutoff_idx_ - p + 1;
    for (int slot = 0; slot < T; ++slot) {
      for (int c = 0; c < C; ++c) {
        Mat X(rows, p + 1);
        Eigen::VectorXd b(rows);
        for (int d = p; d <= cutoff_idx_; ++d) {
          const int r = d - p;
          X(r, 0) = 1.0;
          for (int l = 1; l <= p; ++l) X(r, l) = entrance.at(d - l, slot, c);
          b(r) = entrance.at(d, slot, c);
        }
        ar_coefs_[static_cast<std::size_t>(slot) * C + c] =
            X.colPivHouseholderQr().solve(b);
      }
    }
  }

  // Ridge from (reservation features, marks) to targets, intercept left
  // unpenalized by centering.
  const int F = static_cast<int>(train.front().x_dec.cols()) + 4;
  long long rows = 0;
  for (const auto& s : train) rows += s.y.rows();
  Mat X(rows, F);
  Mat Y(rows, C);
  long long r = 0;
  for (const auto& s : train) {
    for (int i = 0; i < s.y.rows(); ++i, ++r) {
      X.block(r, 0, 1, s.x_dec.cols()) = s.x_dec.row(i);
      X.block(r, s.x_dec.cols(), 1, 4) = s.x_dec_mark.row(i);
      Y.row(r) = s.y.row(i);
    }
  }
  ridge_x_mean_ = X.colwise().mean();
  ridge_y_mean_ = Y.colwise().mean();
  const Mat Xc = X.rowwise() - ridge_x_mean_;
  const Mat Yc = Y.rowwise() - ridge_y_mean_;
  const Mat gram = Xc.transpose() * Xc + ridge_lambda * Mat::Identity(F, F);
  ridge_beta_ = gram.ldlt().solve(Xc.transpose() * Yc);
}

Mat BaselineSuite::predict_persistence(const ForecastSample& sample) const {
  const int T = spec_.grid.slots_per_day;
  const int C = entrance_.num_channels();
  const int issue = entrance_.day_index(sample.issue_date);
  Mat out(spec_.dec_len(), C);
  for (int j = 0; j < spec_.horizon_days; ++j) {
    out.middleRows(j * T, T) = entrance_.values.middleRows(issue * T, T);
  }
  return out;
}

Mat BaselineSuite::predict(BaselineKind kind, const ForecastSample& sample,
                           bool* fellback) const {
  const int T = spec_.grid.slots_per_day;
  const int C = entrance_.num_channels();
  const int issue = entrance_.day_index(sample.issue_date);
  if (issue < 0) throw WindowError("baselines: sample issue date outside entrance span");
  if (fellback != nullptr) *fellback = false;

  switch (kind) {
    case BaselineKind::persistence:
      return predict_persistence(sample);

    case BaselineKind::seasonal_naive: {
      Mat out(spec_.dec_len(), C);
      for (int j = 1; j <= spec_.horizon_days; ++j) {
        const int k = (j + 6) / 7;  // smallest k with j - 7k <= 0
        const int src_day = issue + j - 7 * k;
        if (src_day < 0) {
          if (fellback != nullptr) *fellback = true;
          out.middleRows((j - 1) * T, T) = entrance_.values.middleRows(issue * T, T);
        } else {
          out.middleRows((j - 1) * T, T) = entrance_.values.middleRows(src_day * T, T);
        }
      }
      return out;
    }

    case BaselineKind::ar_p: {
      if (!ar_ok_) {
        if (fellback != nullptr) *fellback = true;
        return predict_persistence(sample);
      }
      const int p = kArOrder;
      if (issue + 1 < p) {
        if (fellback != nullptr) *fellback = true;
        return predict_persistence(sample);
      }
      Mat out(spec_.dec_len(), C);
      for (int slot = 0; slot < T; ++slot) {
        for (int c = 0; c < C; ++c) {
          const auto& coef = ar_coefs_[static_cast<std::size_t>(slot) * C + c];
          std::vector<double> hist(p);
          for (int l = 1; l <= p; ++l) hist[l - 1] = entrance_.at(issue + 1 - l, slot, c);
          for (int j = 0; j < spec_.horizon_days; ++j) {
            double v = coef(0);
            for (int l = 1; l <= p; ++l) v += coef(l) * hist[l - 1];
            out(j * T + slot, c) = v;
            for (int l = p - 1; l >= 1; --l) hist[l] = hist[l - 1];
            hist[0] = v;
          }
        }
      }
      return out;
    }

    case BaselineKind::res_ridge: {
      Mat out(spec_.dec_len(), C);
      for (int i = 0; i < out.rows(); ++i) {
        Eigen::RowVectorXd f(ridge_x_mean_.cols());
        f.head(sample.x_dec.cols()) = sample.x_dec.row(i);
        f.tail(4) = sample.x_dec_mark.row(i);
        out.row(i) = (f - ridge_x_mean_) * ridge_beta_ + ridge_y_mean_;
      }
      return out;
    }
  }
  throw UsageError("unhandled baseline kind");
}

// ---------------------------------------------------------------------------
// Lag correlation
// ---------------------------------------------------------------------------

std::string MonthRef::label() const {
  char buf[12];
  std::snprintf(buf, sizeof(buf), "%04d-%02u", year, month);
  return buf;
}

bool MonthRef::contains(const Date& d) const {
  return d.year() == year && d.month() == month;
}

std::vector<MonthRef> full_months_in_span(const SlotSeries& series) {
  std::vector<MonthRef> out;
  if (series.num_days <= 0) return out;
  const Date start = series.start_date;
  const Date end = series.date_of_day(series.num_days - 1);
  MonthRef m{start.year(), start.month()};
  while (true) {
    const Date first(m.year, m.month, 1);
    const Date next_first = m.month == 12 ? Date(m.year + 1, 1, 1) : Date(m.year, m.month + 1, 1);
    const Date last = next_first.add_days(-1);
    if (first > end) break;
    if (first >= start && last <= end) out.push_back(m);
    m = MonthRef{next_first.year(), next_first.month()};
  }
  return out;
}

namespace {

void check_lags(const SlotSeries& series, const std::vector<int>& lags) {
  int max_lag = 0;
  for (int l : lags) {
    if (l < 0) throw RangeError("lag values must be >= 0");
    max_lag = std::max(max_lag, l);
  }
  if (max_lag >= series.num_days) {
    throw RangeError("max lag " + std::to_string(max_lag) + " exceeds span; feasible lags: 0.." +
                     std::to_string(series.num_days - 1));
  }
}

std::vector<double> daily_totals(const SlotSeries& series) {
  std::vector<double> t(series.num_days);
  for (int d = 0; d < series.num_days; ++d) t[d] = series.daily_total(d);
  return t;
}

}  // namespace

CorrMatrix lag_correlation_visits(const SlotSeries& entrance, const std::vector<int>& lags,
                                  const std::vector<MonthRef>& months) {
  check_lags(entrance, lags);
  const std::vector<double> totals = daily_totals(entrance);
  CorrMatrix cm;
  cm.mode = "visits";
  cm.months = months;
  cm.lags = lags;
  cm.cells.assign(months.size(), std::vector<CorrCell>(lags.size()));
  for (std::size_t mi = 0; mi < months.size(); ++mi) {
    for (std::size_t li = 0; li < lags.size(); ++li) {
      const int lag = lags[li];
      std::vector<double> x, y;
      for (int d = 0; d < entrance.num_days; ++d) {
        if (!months[mi].contains(entrance.date_of_day(d))) continue;
        if (d - lag < 0) continue;
        x.push_back(totals[d - lag]);
        y.push_back(totals[d]);
      }
      if (auto r = pearson(x, y)) {
        cm.cells[mi][li] = CorrCell{true, *r};
      }
    }
  }
  return cm;
}

CorrMatrix lag_correlation_reservations(const SlotSeries& entrance,
                                        const ReservationLog& log,
                                        const std::vector<int>& lags,
                                        const std::vector<MonthRef>& months) {
  check_lags(entrance, lags);
  int max_lag = 0;
  for (int l : lags) max_lag = std::max(max_lag, l);

  // Per target day, bucket booking deltas by lead time; the cumulative count
  // as of (day - lag) is the suffix sum over leads >= lag.
  const int buckets = max_lag + 2;  // last bucket: lead > max_lag
  std::vector<std::vector<double>> by_lead(entrance.num_days,
                                           std::vector<double>(buckets, 0.0));
  for (const auto& e : log.events) {
    const int day = entrance.day_index(e.target_date);
    if (day < 0) continue;
    int lead = e.target_date.days_since(e.booking_date);
    if (lead < 0) lead = 0;
    by_lead[day][std::min(lead, max_lag + 1)] += e.delta;
  }
  std::vector<std::vector<double>> cum(entrance.num_days,
                                       std::vector<double>(max_lag + 1, 0.0));
  for (int d = 0; d < entrance.num_days; ++d) {
    double suffix = by_lead[d][max_lag + 1];
    for (int l = max_lag; l >= 0; --l) {
      suffix += by_lead[d][l];
      cum[d][l] = suffix;
    }
  }

  const std::vector<double> totals = daily_totals(entrance);
  CorrMatrix cm;
  cm.mode = "reservations";
  cm.months = months;
  cm.lags = lags;
  cm.cells.assign(months.size(), std::vector<CorrCell>(lags.size()));
  for (std::size_t mi = 0; mi < months.size(); ++mi) {
    for (std::size_t li = 0; li < lags.size(); ++li) {
      const int lag = lags[li];
      std::vector<double> x, y;
      for (int d = 0; d < entrance.num_days; ++d) {
        if (!months[mi].contains(entrance.date_of_day(d))) continue;
        x.push_back(cum[d][lag]);
        y.push_back(totals[d]);
      }
      if (auto r = pearson(x, y)) {
        cm.cells[mi][li] = CorrCell{true, *r};
      }
    }
  }
  return cm;
}

// ---------------------------------------------------------------------------
// Grid evaluation
// ---------------------------------------------------------------------------

namespace {

struct CellSpec {
  std::string variant;
  std::string setting;
  int input_days;
  int horizon_days;
};

struct CellOutcome {
  bool has_row = false;
  EvalRow row;
  std::vector<PredRecord> preds;
  std::string skip_reason;
  std::exception_ptr fatal;
};

CellOutcome run_cell(const CellSpec& cell, const SlotSeries& two_series,
                     const SlotSeries& single_series, const ReservationLog& log,
                     const ModelConfig& base_model, const TrainConfig& tc,
                     double train_fraction, bool capture) {
  CellOutcome out;
  try {
    const SlotSeries& series = cell.setting == "single" ? single_series : two_series;
    WindowSpec window = base_model.spec;
    window.input_days = cell.input_days;
    window.horizon_days = cell.horizon_days;
    window.out_channels = series.num_channels();

    auto samples = build_samples(series, log, window);
    auto [train_set, test_set] = chrono_split(samples, train_fraction, window);
    const Standardizer st = Standardizer::fit(train_set);

    ModelConfig mc = make_variant(cell.variant, base_model);
    mc.spec = window;
    auto [model, train_report] = train(mc, train_set, st, tc);

    // Two-channel predictions are aggregated over gates so the reported
    // error is comparable with the single-channel setting.
    const bool aggregate = series.num_channels() > 1;
    Mat all_yhat(static_cast<Eigen::Index>(test_set.size()) * window.dec_len(), 1);
    Mat all_y(all_yhat.rows(), 1);
    Eigen::Index r = 0;
    for (const auto& s : test_set) {
      Tape tape;
      const auto f = model.forward(tape, s, st, false, nullptr);
      const Mat& yhat = tape.val(f.yhat);
      const Mat yh = aggregate ? Mat(yhat.rowwise().sum()) : yhat;
      const Mat yt = aggregate ? Mat(s.y.rowwise().sum()) : s.y;
      for (int i = 0; i < yh.rows(); ++i, ++r) {
        all_yhat(r, 0) = yh(i, 0);
        all_y(r, 0) = yt(i, 0);
        if (capture) {
          out.preds.push_back(PredRecord{s.issue_date, i, 0, yh(i, 0), yt(i, 0)});
        }
      }
    }
    const Metrics m = compute_metrics(all_yhat, all_y);
    out.row = EvalRow{variant_by_name(cell.variant).display, cell.setting,
                      cell.input_days, cell.horizon_days, m.mae, m.mape_raw, m.mape_pct,
                      static_cast<long long>(test_set.size())};
    out.has_row = true;
  } catch (const WindowError& e) {
    out.skip_reason = e.what();
  } catch (const SplitError& e) {
    out.skip_reason = e.what();
  } catch (const ConfigError& e) {
    out.skip_reason = e.what();
  } catch (const MetricError& e) {
    out.skip_reason = e.what();
  } catch (...) {
    out.fatal = std::current_exception();
  }
  return out;
}

}  // namespace

EvalReport grid_eval(const SlotSeries& entrance_gates, const ReservationLog& log,
                     const GridSpec& grid, const ModelConfig& base_model,
                     const TrainConfig& train_config, double train_fraction, int jobs,
                     bool capture_predictions) {
  if (jobs < 1) jobs = 1;
  for (const auto& s : grid.settings) {
    if (s != "single" && s != "two") {
      throw UsageError("grid setting must be 'single' or 'two', got '" + s + "'");
    }
  }
  for (const auto& v : grid.variants) variant_by_name(v);  // validate early

  const SlotSeries single_series = entrance_gates.sum_channels();

  std::vector<CellSpec> cells;
  for (const auto& variant : grid.variants) {
    for (const auto& setting : grid.settings) {
      for (int iw : grid.input_days) {
        for (int h : grid.horizon_days) {
          cells.push_back(CellSpec{variant, setting, iw, h});
        }
      }
    }
  }

  std::vector<CellOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      outcomes[i] = run_cell(cells[i], entrance_gates, single_series, log, base_model,
                             train_config, train_fraction, capture_predictions);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n_threads = std::min<std::size_t>(jobs, cells.size());
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  EvalReport report;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& o = outcomes[i];
    if (o.fatal) std::rethrow_exception(o.fatal);
    if (o.has_row) {
      report.rows.push_back(o.row);
      if (capture_predictions) report.predictions.push_back(std::move(o.preds));
    } else {
      const auto& c = cells[i];
      report.skipped.push_back(c.variant + "|" + c.setting + "|iw=" +
                               std::to_string(c.input_days) + "|h=" +
                               std::to_string(c.horizon_days) + ": " + o.skip_reason);
    }
  }
  return report;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "variant,setting,input_days,horizon_days,mae,mape_raw,mape_pct,n_samples\n";
  for (const auto& r : report.rows) {
    out << r.variant << ',' << r.setting << ',' << r.input_days << ',' << r.horizon_days
        << ',' << fmt_double(r.mae) << ',' << fmt_double(r.mape_raw) << ','
        << fmt_double(r.mape_pct) << ',' << r.n_samples << '\n';
  }
  if (!out) throw IoError("error writing " + path);
}

void write_corr_csv(const std::string& path, const std::vector<CorrMatrix>& matrices) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "mode,month,lag,pearson,defined\n";
  for (const auto& cm : matrices) {
    for (std::size_t mi = 0; mi < cm.months.size(); ++mi) {
      for (std::size_t li = 0; li < cm.lags.size(); ++li) {
        const CorrCell& cell = cm.cells[mi][li];
        out << cm.mode << ',' << cm.months[mi].label() << ',' << cm.lags[li] << ',';
        if (cell.defined) out << fmt_double(cell.value);
        out << ',' << (cell.defined ? 1 : 0) << '\n';
      }
    }
  }
  if (!out) throw IoError("error writing " + path);
}

}  // namespace resflow
