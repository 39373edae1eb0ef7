#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "resflow/synthgen.hpp"
#include "resflow/timegrid.hpp"

namespace resflow {

// Windowing contract: input_days of entrance history feed the encoder,
// horizon_days are predicted, out_channels selects the single-total vs
// per-gate setting, res_feature_lags lists the issue-time offsets (days)
// at which cumulative reservations become decoder channels.
struct WindowSpec {
  int input_days = 7;
  int horizon_days = 5;
  SlotGrid grid{};
  int out_channels = 2;
  std::vector<int> res_feature_lags{0, 1};

  int enc_len() const { return input_days * grid.slots_per_day; }
  int dec_len() const { return horizon_days * grid.slots_per_day; }
  int num_lags() const { return static_cast<int>(res_feature_lags.size()); }
  // Decoder value channels: one per (gate channel, lag).
  int res_channels() const { return out_channels * num_lags(); }

  void validate() const;
  bool operator==(const WindowSpec&) const = default;
};

// One training/inference example. Values are raw counts; marks in [0,1].
struct ForecastSample {
  Mat x_enc;       // enc_len x C_real
  Mat x_enc_mark;  // enc_len x 4
  Mat x_dec;       // dec_len x C_res (cumulative reservations, raw)
  Mat x_dec_mark;  // dec_len x 4
  Mat y;           // dec_len x C_out
  Date issue_date;
};

// ---------------------------------------------------------------------------
// CSV formats
//   entrance.csv:     date,slot,gate,count          (count >= 0)
//   reservations.csv: booking_date,target_date,slot,gate,delta
// ---------------------------------------------------------------------------

struct SpanHint {
  Date start;
  int num_days = 0;
  std::vector<std::string> channels;
};

SlotSeries load_entrance_csv(const std::string& path, const SlotGrid& grid,
                             std::optional<SpanHint> hint = {});
ReservationLog load_reservations_csv(const std::string& path, const SlotGrid& grid);
void write_entrance_csv(const std::string& path, const SlotSeries& series);
void write_reservations_csv(const std::string& path, const ReservationLog& log);

// Builds the sample issued at `issue_date`. Decoder features only use
// events with booking_date <= issue_date - lag. When require_target is
// false (inference), y is zero-filled if the target window leaves the span.
ForecastSample build_sample_at(const SlotSeries& entrance, const ReservationLog& reservations,
                               const WindowSpec& spec, const Date& issue_date,
                               bool require_target = true);

// All samples with full encoder context and target coverage, ordered by
// issue date.
std::vector<ForecastSample> build_samples(const SlotSeries& entrance,
                                          const ReservationLog& reservations,
                                          const WindowSpec& spec);

// Chronological split: first floor(n * train_fraction) samples train, rest
// test; train samples whose target windows overlap any test target window
// are purged.
std::pair<std::vector<ForecastSample>, std::vector<ForecastSample>> chrono_split(
    const std::vector<ForecastSample>& samples, double train_fraction,
    const WindowSpec& spec);

// Per-channel z-scoring fitted on train samples only. Channels with zero
// variance are left untouched and recorded in `warnings`.
struct Standardizer {
  struct ChannelStat {
    double mean = 0.0;
    double stddev = 1.0;
    bool active = false;
  };
  std::vector<ChannelStat> enc;
  std::vector<ChannelStat> dec;
  std::vector<std::string> warnings;

  static Standardizer fit(const std::vector<ForecastSample>& train);

  Mat apply_enc(const Mat& x) const { return apply(x, enc); }
  Mat apply_dec(const Mat& x) const { return apply(x, dec); }
  Mat invert_enc(const Mat& z) const { return invert(z, enc); }
  Mat invert_dec(const Mat& z) const { return invert(z, dec); }

 private:
  static Mat apply(const Mat& x, const std::vector<ChannelStat>& stats);
  static Mat invert(const Mat& z, const std::vector<ChannelStat>& stats);
};

}  // namespace resflow
