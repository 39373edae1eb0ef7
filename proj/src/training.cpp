#include "resflow/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace resflow {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (val_fraction_of_train <= 0.0 || val_fraction_of_train >= 1.0) {
    throw ConfigError("train: val_fraction_of_train must be in (0, 1)");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("train: adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be > 0");
}

double mae_loss(const Mat& yhat, const Mat& y) {
  if (yhat.rows() != y.rows() || yhat.cols() != y.cols()) {
    throw ShapeError("mae_loss: shape mismatch");
  }
  return (yhat - y).cwiseAbs().sum() / static_cast<double>(y.size());
}

void Adam::step(ParamStore& params) {
  auto& items = params.items();
  if (m_.empty()) {
    for (const auto& p : items) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Mat& g = items[i]->grad;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const Mat mhat = m_[i] / bc1;
    const Mat vhat = v_[i] / bc2;
    items[i]->value -= lr_ * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
  }
}

void clip_global_norm(ParamStore& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& p : params.items()) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double s = max_norm / norm;
  for (auto& p : params.items()) p->grad *= s;
}

namespace {

double eval_mae(const Model& model, const std::vector<ForecastSample>& samples,
                const Standardizer& st) {
  double total = 0.0;
  for (const auto& s : samples) {
    Tape tape;
    const auto f = model.forward(tape, s, st, /*train=*/false, nullptr);
    total += mae_loss(tape.val(f.yhat), s.y);
  }
  return total / static_cast<double>(samples.size());
}

std::vector<Mat> snapshot(const ParamStore& params) {
  std::vector<Mat> vals;
  vals.reserve(params.items().size());
  for (const auto& p : params.items()) vals.push_back(p->value);
  return vals;
}

void restore(ParamStore& params, const std::vector<Mat>& vals) {
  for (std::size_t i = 0; i < vals.size(); ++i) params.items()[i]->value = vals[i];
}

}  // namespace

std::pair<Model, TrainReport> train(const ModelConfig& model_config,
                                    const std::vector<ForecastSample>& train_samples,
                                    const Standardizer& st, const TrainConfig& config) {
  config.validate();
  model_config.validate();
  const int n = static_cast<int>(train_samples.size());
  if (n < 2) {
    throw ConfigError("train: need at least 2 samples to carve a validation tail");
  }
  int n_val = static_cast<int>(std::floor(n * config.val_fraction_of_train));
  n_val = std::clamp(n_val, 1, n - 1);
  const int n_fit = n - n_val;
  const std::vector<ForecastSample> fit(train_samples.begin(), train_samples.begin() + n_fit);
  const std::vector<ForecastSample> val(train_samples.begin() + n_fit, train_samples.end());

  const auto t0 = std::chrono::steady_clock::now();
  Model model(model_config, config.seed);
  Rng dropout_rng(config.seed ^ 0xD1B54A32D192ED03ULL);
  Adam opt(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps);

  TrainReport report;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Mat> best_params = snapshot(model.params());
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double epoch_loss = 0.0;
    long long seen = 0;
    for (int start = 0; start < n_fit; start += config.batch_size) {
      const int bsz = std::min(config.batch_size, n_fit - start);
      model.params().zero_grads();
      double batch_loss = 0.0;
      for (int i = 0; i < bsz; ++i) {
        const ForecastSample& s = fit[start + i];
        Tape tape;
        const auto f = model.forward(tape, s, st, /*train=*/true, &dropout_rng);
        const int loss = tape.mae_against(f.yhat, s.y);
        const double value = tape.val(loss)(0, 0);
        if (!std::isfinite(value)) {
          throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch offset " + std::to_string(start));
        }
        batch_loss += value;
        tape.backward(loss, 1.0 / bsz);
      }
      clip_global_norm(model.params(), config.grad_clip_norm);
      opt.step(model.params());
      epoch_loss += batch_loss;
      seen += bsz;
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(seen));

    const double val_mae = eval_mae(model, val, st);
    report.val_loss.push_back(val_mae);
    report.stopped_epoch = epoch;
    if (val_mae < best_val) {
      best_val = val_mae;
      best_params = snapshot(model.params());
      report.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= config.patience) break;
    }
  }

  restore(model.params(), best_params);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report)};
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> variants = {
      {"Full", "full", true, true, true},
      {"w/o Inv", "no-inv", true, false, true},
      {"DecOnly", "dec-only", false, true, true},
      {"w/o AF", "no-af", true, true, false},
      {"DecOnly w/o AF", "dec-only-no-af", false, true, false},
  };
  return variants;
}

Variant variant_by_name(const std::string& name) {
  for (const auto& v : all_variants()) {
    if (name == v.display || name == v.slug) return v;
  }
  throw UsageError("unknown variant '" + name +
                   "' (expected full, no-inv, dec-only, no-af or dec-only-no-af)");
}

ModelConfig make_variant(const std::string& name, ModelConfig base) {
  const Variant v = variant_by_name(name);
  base.use_encoder = v.use_encoder;
  base.use_inverse_embedding = v.use_inverse_embedding;
  base.use_adaptive_fusion = v.use_adaptive_fusion;
  return base;
}

}  // namespace resflow
