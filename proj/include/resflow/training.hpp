#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "resflow/net.hpp"

namespace resflow {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 4;
  int max_epochs = 200;
  int patience = 10;
  double val_fraction_of_train = 0.1;  // chronological tail
  std::uint64_t seed = 3407;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip_norm = 5.0;  // global norm; <= 0 disables

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;
  int stopped_epoch = 0;  // 1-based
  int best_epoch = 0;
  double wall_seconds = 0.0;
};

// Mean absolute error over all entries (plain evaluation path).
double mae_loss(const Mat& yhat, const Mat& y);

// Adam with bias correction; lazily sizes its moment buffers on first step.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

// Scales all gradients so their global L2 norm is at most max_norm.
void clip_global_norm(ParamStore& params, double max_norm);

// Trains `variant_config` on the given samples: chronological mini-batches,
// validation on the chronological tail, early stopping on validation MAE,
// parameters restored from the best epoch. Deterministic under config.seed.
std::pair<Model, TrainReport> train(const ModelConfig& model_config,
                                    const std::vector<ForecastSample>& train_samples,
                                    const Standardizer& st, const TrainConfig& config);

// Table-row ablation variants.
struct Variant {
  std::string display;  // "Full", "w/o Inv", "DecOnly", "w/o AF", "DecOnly w/o AF"
  std::string slug;     // full, no-inv, dec-only, no-af, dec-only-no-af
  bool use_encoder = true;
  bool use_inverse_embedding = true;
  bool use_adaptive_fusion = true;
};

// Accepts either the display name or the CLI slug; throws UsageError.
Variant variant_by_name(const std::string& name);
const std::vector<Variant>& all_variants();
ModelConfig make_variant(const std::string& name, ModelConfig base);

}  // namespace resflow
