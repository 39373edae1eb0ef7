#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "resflow/dataset.hpp"

using namespace resflow;

namespace {

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

GeneratorConfig small_config(int days = 20) {
  GeneratorConfig c;
  c.num_days = days;
  c.base_daily_mean = {200.0, 150.0};
  c.noise_cv = 0.05;
  c.shock_calendar.clear();
  c.seed = 99;
  return c;
}

}  // namespace

TEST_CASE("load_entrance_csv") {
  SlotGrid grid;

  SUBCASE("empty body with a span hint yields an all-zero series") {
    const std::string p = temp_file("rf_empty.csv");
    write_file(p, "date,slot,gate,count\n");
    const SlotSeries s =
        load_entrance_csv(p, grid, SpanHint{Date(2025, 6, 1), 1, {"East", "West"}});
    CHECK(s.num_days == 1);
    CHECK(s.num_channels() == 2);
    CHECK(s.values.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("one day with counts 1..14 sums to 105") {
    std::string body = "date,slot,gate,count\n";
    for (int slot = 0; slot < 14; ++slot) {
      body += "2025-06-01," + std::to_string(slot) + ",East," + std::to_string(slot + 1) + "\n";
    }
    const std::string p = temp_file("rf_oneday.csv");
    write_file(p, body);
    const SlotSeries s = load_entrance_csv(p, grid);
    CHECK(s.num_days == 1);
    CHECK(s.daily_total(0) == doctest::Approx(105.0));  // sum 1..14
  }

  SUBCASE("slot out of range names the line") {
    const std::string p = temp_file("rf_badslot.csv");
    write_file(p, "date,slot,gate,count\n2025-04-23,14,East,5\n");
    CHECK_THROWS_WITH_AS(load_entrance_csv(p, grid),
                         "line 2: slot 14 out of range [0, 13]", ParseError);
  }

  SUBCASE("duplicate keys and negative counts are rejected") {
    const std::string p = temp_file("rf_dup.csv");
    write_file(p, "date,slot,gate,count\n2025-06-01,3,East,5\n2025-06-01,3,East,7\n");
    CHECK_THROWS_AS(load_entrance_csv(p, grid), ValidationError);
    write_file(p, "date,slot,gate,count\n2025-06-01,3,East,-1\n");
    CHECK_THROWS_AS(load_entrance_csv(p, grid), ValidationError);
  }

  SUBCASE("malformed rows carry line numbers") {
    const std::string p = temp_file("rf_malformed.csv");
    write_file(p, "date,slot,gate,count\n2025-06-01,3,East,5\nnot-a-date,1,East,2\n");
    try {
      load_entrance_csv(p, grid);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  SUBCASE("absent rows read back as zeros") {
    const std::string p = temp_file("rf_sparse.csv");
    write_file(p, "date,slot,gate,count\n2025-06-01,0,East,5\n2025-06-03,2,West,7\n");
    const SlotSeries s = load_entrance_csv(p, grid);
    CHECK(s.num_days == 3);
    CHECK(s.at(0, 0, 0) == 5.0);
    CHECK(s.at(2, 2, 1) == 7.0);
    CHECK(s.at(1, 5, 0) == 0.0);
  }
}

TEST_CASE("entrance and reservation CSVs round-trip through write/load") {
  GeneratorConfig c = small_config(10);
  const SlotSeries att = generate_attendance(c);
  const ReservationLog log = generate_reservations(att, c);

  const std::string ep = temp_file("rf_rt_entrance.csv");
  const std::string rp = temp_file("rf_rt_res.csv");
  write_entrance_csv(ep, att);
  write_reservations_csv(rp, log);

  const SlotSeries att2 = load_entrance_csv(ep, c.grid);
  CHECK(att2.start_date == att.start_date);
  CHECK(att2.num_days == att.num_days);
  CHECK(att2.channels == att.channels);
  CHECK((att2.values - att.values).cwiseAbs().maxCoeff() == 0.0);

  const ReservationLog log2 = load_reservations_csv(rp, c.grid);
  CHECK(log2.gates == log.gates);
  REQUIRE(log2.events.size() == log.events.size());
  const Date last = att.date_of_day(att.num_days - 1);
  const SlotSeries agg1 = aggregate_reservations(log, last, c.grid, att.start_date, 10);
  const SlotSeries agg2 = aggregate_reservations(log2, last, c.grid, att.start_date, 10);
  CHECK((agg1.values - agg2.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_samples windowing") {
  GeneratorConfig c = small_config(12);
  const SlotSeries att = generate_attendance(c);
  const ReservationLog log = generate_reservations(att, c);
  WindowSpec spec;
  spec.input_days = 7;
  spec.horizon_days = 5;
  spec.out_channels = 2;

  SUBCASE("boundary span gives exactly one sample") {
    const auto samples = build_samples(att, log, spec);  // 12 == 7 + 5
    CHECK(samples.size() == 1);
    CHECK(samples[0].issue_date == att.date_of_day(6));
  }

  SUBCASE("sample count matches N - Din - Dout + 1 for many shapes") {
    for (int n : {12, 13, 15, 20}) {
      GeneratorConfig cc = small_config(n);
      const SlotSeries a = generate_attendance(cc);
      const ReservationLog l = generate_reservations(a, cc);
      for (int din : {1, 3, 7}) {
        for (int dout : {1, 2, 5}) {
          WindowSpec w;
          w.input_days = din;
          w.horizon_days = dout;
          w.out_channels = 2;
          const auto got = build_samples(a, l, w);
          // Count oracle: enumerate feasible issue days directly.
          int expect = 0;
          for (int issue = 0; issue < n; ++issue) {
            if (issue >= din - 1 && issue + dout < n) ++expect;
          }
          CHECK(static_cast<int>(got.size()) == expect);
          CHECK(expect == n - din - dout + 1);
        }
      }
    }
  }

  SUBCASE("insufficient span raises WindowError") {
    GeneratorConfig cc = small_config(11);
    const SlotSeries a = generate_attendance(cc);
    const ReservationLog l = generate_reservations(a, cc);
    CHECK_THROWS_AS(build_samples(a, l, spec), WindowError);
  }

  SUBCASE("sample contents: encoder block, target block, marks") {
    const auto samples = build_samples(att, log, spec);
    const ForecastSample& s = samples[0];
    CHECK(s.x_enc.rows() == 7 * 14);
    CHECK(s.x_enc.cols() == 2);
    CHECK(s.y.rows() == 5 * 14);
    CHECK(s.x_dec.cols() == 4);  // 2 gates x 2 lags
    CHECK(s.x_enc(0, 0) == att.at(0, 0, 0));
    CHECK(s.y(0, 1) == att.at(7, 0, 1));
    CHECK(s.x_enc_mark.minCoeff() >= 0.0);
    CHECK(s.x_enc_mark.maxCoeff() <= 1.0);
    // Decoder mark of the first target step reflects the issue date + 1.
    const CalendarMark m = build_mark(s.issue_date.add_days(1), 0, spec.grid);
    CHECK(s.x_dec_mark(0, 1) == m.weekday_norm);
    CHECK(s.x_dec_mark(0, 3) == m.day_norm);
  }

  SUBCASE("decoder features equal an aggregate_reservations oracle") {
    const auto samples = build_samples(att, log, spec);
    const ForecastSample& s = samples[0];
    for (int li = 0; li < spec.num_lags(); ++li) {
      const Date as_of = s.issue_date.add_days(-spec.res_feature_lags[li]);
      const SlotSeries agg =
          aggregate_reservations(log, as_of, spec.grid, att.start_date, att.num_days);
      for (int j = 0; j < spec.horizon_days; ++j) {
        for (int slot = 0; slot < 14; ++slot) {
          for (int g = 0; g < 2; ++g) {
            const int day = att.day_index(s.issue_date) + 1 + j;
            CHECK(s.x_dec(j * 14 + slot, g * spec.num_lags() + li) ==
                  agg.at(day, slot, g));
          }
        }
      }
    }
  }

  SUBCASE("no leakage: every decoder feature is reproducible from events dated <= issue") {
    const auto samples = build_samples(att, log, spec);
    ReservationLog censored;
    censored.gates = log.gates;
    for (const auto& s : samples) {
      censored.events.clear();
      for (const auto& e : log.events) {
        if (e.booking_date <= s.issue_date) censored.events.push_back(e);
      }
      const ForecastSample rebuilt = build_sample_at(att, censored, spec, s.issue_date);
      CHECK((rebuilt.x_dec - s.x_dec).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("single-channel setting sums gates") {
    const SlotSeries total = att.sum_channels();
    WindowSpec w1 = spec;
    w1.out_channels = 1;
    const auto samples = build_samples(total, log, w1);
    CHECK(samples[0].x_enc.cols() == 1);
    CHECK(samples[0].x_dec.cols() == 2);  // 1 channel x 2 lags
    CHECK(samples[0].x_enc(5, 0) == att.values.row(5).sum());
  }
}

TEST_CASE("chrono_split") {
  GeneratorConfig c = small_config(30);
  const SlotSeries att = generate_attendance(c);
  const ReservationLog log = generate_reservations(att, c);
  WindowSpec spec;
  spec.input_days = 3;
  spec.horizon_days = 5;
  spec.out_channels = 2;
  const auto samples = build_samples(att, log, spec);  // 23 samples

  SUBCASE("80/20 split counts before purge") {
    std::vector<ForecastSample> ten(samples.begin(), samples.begin() + 10);
    auto [train, test] = chrono_split(ten, 0.8, spec);
    CHECK(test.size() == 2);   // floor(10 * 0.8) = 8 train before purging
    CHECK(train.size() == 8 - (spec.horizon_days - 1));
  }

  SUBCASE("one sample cannot be split") {
    std::vector<ForecastSample> one(samples.begin(), samples.begin() + 1);
    CHECK_THROWS_AS(chrono_split(one, 0.8, spec), SplitError);
  }

  SUBCASE("purge removes exactly the overlapping boundary samples") {
    auto [train, test] = chrono_split(samples, 0.8, spec);
    REQUIRE(!train.empty());
    REQUIRE(!test.empty());
    // Oracle: pairwise interval overlap scan.
    for (const auto& tr : train) {
      const Date tr_start = tr.issue_date.add_days(1);
      const Date tr_end = tr.issue_date.add_days(spec.horizon_days);
      for (const auto& te : test) {
        const Date te_start = te.issue_date.add_days(1);
        const Date te_end = te.issue_date.add_days(spec.horizon_days);
        const bool overlap = !(tr_end < te_start || te_end < tr_start);
        CHECK_FALSE(overlap);
      }
    }
    // The purge dropped horizon-1 samples off the train tail and nothing else.
    const int kept = static_cast<int>(train.size());
    const int original = static_cast<int>(std::floor(samples.size() * 0.8));
    CHECK(original - kept == spec.horizon_days - 1);
  }

  SUBCASE("chronological order is preserved end to end") {
    auto [train, test] = chrono_split(samples, 0.8, spec);
    CHECK(train.back().issue_date < test.front().issue_date);
    for (std::size_t i = 1; i < test.size(); ++i) {
      CHECK(test[i - 1].issue_date < test[i].issue_date);
    }
  }
}

TEST_CASE("standardizer") {
  GeneratorConfig c = small_config(25);
  const SlotSeries att = generate_attendance(c);
  const ReservationLog log = generate_reservations(att, c);
  WindowSpec spec;
  spec.input_days = 3;
  spec.horizon_days = 2;
  spec.out_channels = 2;
  const auto samples = build_samples(att, log, spec);
  const Standardizer st = Standardizer::fit(samples);

  SUBCASE("apply/invert round trip within 1e-10") {
    const Mat x = samples[3].x_enc;
    CHECK((st.invert_enc(st.apply_enc(x)) - x).cwiseAbs().maxCoeff() < 1e-10);
    const Mat d = samples[3].x_dec;
    CHECK((st.invert_dec(st.apply_dec(d)) - d).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("train moments of applied data are ~0 mean, ~1 std") {
    for (int c2 = 0; c2 < 2; ++c2) {
      double sum = 0.0, sumsq = 0.0;
      long long n = 0;
      for (const auto& s : samples) {
        const Mat z = st.apply_enc(s.x_enc);
        sum += z.col(c2).sum();
        sumsq += z.col(c2).squaredNorm();
        n += z.rows();
      }
      const double mean = sum / n;
      CHECK(std::abs(mean) < 1e-9);
      CHECK(sumsq / n - mean * mean == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  SUBCASE("constant channel is left alone with a warning") {
    auto degenerate = samples;
    for (auto& s : degenerate) s.x_enc.col(1).setConstant(7.0);
    const Standardizer st2 = Standardizer::fit(degenerate);
    CHECK(!st2.warnings.empty());
    CHECK_FALSE(st2.enc[1].active);
    const Mat z = st2.apply_enc(degenerate[0].x_enc);
    CHECK(z.col(1).isConstant(7.0));   // untouched
    CHECK_FALSE(z.col(0).isConstant(degenerate[0].x_enc(0, 0)));
  }

  SUBCASE("empty train set is rejected") {
    CHECK_THROWS_AS(Standardizer::fit({}), ConfigError);
  }
}
