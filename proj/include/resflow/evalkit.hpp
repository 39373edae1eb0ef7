#pragma once

#include <optional>
#include <string>
#include <vector>

#include "resflow/dataset.hpp"
#include "resflow/training.hpp"

namespace resflow {

// MAE over all entries; MAPE over entries with nonzero target (skipped
// entries are counted). MAPE is reported both raw and x100.
struct Metrics {
  double mae = 0.0;
  double mape_raw = 0.0;
  double mape_pct = 0.0;
  long long n_used = 0;
  long long n_skipped = 0;
};

Metrics compute_metrics(const Mat& yhat, const Mat& y);

// Pearson correlation; nullopt when fewer than 3 pairs or either side has
// zero variance.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Statistical baselines
// ---------------------------------------------------------------------------

enum class BaselineKind { seasonal_naive, persistence, ar_p, res_ridge };

BaselineKind baseline_by_name(const std::string& name);

// Baselines fitted on the train split only. Predictions read entrance truth
// no later than each sample's issue date.
class BaselineSuite {
 public:
  BaselineSuite(const SlotSeries& entrance, const std::vector<ForecastSample>& train,
                const WindowSpec& spec, double ridge_lambda = 1.0);

  // dec_len x C_out prediction; *fellback set when a lag-7 lookup or AR fit
  // had to fall back to persistence.
  Mat predict(BaselineKind kind, const ForecastSample& sample, bool* fellback = nullptr) const;

  static constexpr int kArOrder = 7;

 private:
  Mat predict_persistence(const ForecastSample& sample) const;

  const SlotSeries& entrance_;
  WindowSpec spec_;
  int cutoff_idx_;  // last train-issue day index; fits never look past it
  bool ar_ok_ = false;
  std::vector<Eigen::VectorXd> ar_coefs_;  // per (slot, channel): [c, phi_1..phi_p]
  Mat ridge_beta_;                         // F x C_out on centered features
  Eigen::RowVectorXd ridge_x_mean_;
  Eigen::RowVectorXd ridge_y_mean_;
};

// ---------------------------------------------------------------------------
// Lag-correlation analysis
// ---------------------------------------------------------------------------

struct MonthRef {
  int year = 0;
  unsigned month = 1;
  std::string label() const;  // "YYYY-MM"
  bool contains(const Date& d) const;
  auto operator<=>(const MonthRef&) const = default;
};

struct CorrCell {
  bool defined = false;
  double value = 0.0;
};

struct CorrMatrix {
  std::string mode;  // "visits" or "reservations"
  std::vector<MonthRef> months;
  std::vector<int> lags;
  std::vector<std::vector<CorrCell>> cells;  // cells[month][lag]
};

// Months fully covered by the series span.
std::vector<MonthRef> full_months_in_span(const SlotSeries& series);

// Correlation between daily totals and the same totals lagged by each value
// in `lags`, per month.
CorrMatrix lag_correlation_visits(const SlotSeries& entrance, const std::vector<int>& lags,
                                  const std::vector<MonthRef>& months);

// Correlation between daily totals and cumulative reservations for each
// target day snapshotted `lag` days before it.
CorrMatrix lag_correlation_reservations(const SlotSeries& entrance,
                                        const ReservationLog& log,
                                        const std::vector<int>& lags,
                                        const std::vector<MonthRef>& months);

// ---------------------------------------------------------------------------
// Input-window x horizon grid evaluation
// ---------------------------------------------------------------------------

struct EvalRow {
  std::string variant;
  std::string setting;  // "single" or "two"
  int input_days = 0;
  int horizon_days = 0;
  double mae = 0.0;
  double mape_raw = 0.0;
  double mape_pct = 0.0;
  long long n_samples = 0;
};

// One persisted per-entry prediction, for MAE recomputation.
struct PredRecord {
  Date issue_date;
  int row = 0;
  int col = 0;
  double yhat = 0.0;
  double y = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<std::string> skipped;
  // Parallel to rows when capture_predictions was set, else empty.
  std::vector<std::vector<PredRecord>> predictions;
};

struct GridSpec {
  std::vector<std::string> variants{"full"};
  std::vector<std::string> settings{"single", "two"};
  std::vector<int> input_days{1, 3, 5, 7, 14};
  std::vector<int> horizon_days{1, 3, 5, 7, 14};
};

// Trains and evaluates one model per (variant, setting, input window,
// horizon) cell. Two-channel predictions are summed over gates before
// computing metrics, making rows comparable with the single setting. Cells
// whose span is insufficient are recorded in `skipped`. Deterministic for
// any jobs count.
EvalReport grid_eval(const SlotSeries& entrance_gates, const ReservationLog& log,
                     const GridSpec& grid, const ModelConfig& base_model,
                     const TrainConfig& train_config, double train_fraction,
                     int jobs = 1, bool capture_predictions = false);

void write_report_csv(const std::string& path, const EvalReport& report);
void write_corr_csv(const std::string& path, const std::vector<CorrMatrix>& matrices);

}  // namespace resflow
