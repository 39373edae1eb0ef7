#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "resflow/dataset.hpp"
#include "resflow/fusion.hpp"
#include "resflow/tape.hpp"

namespace resflow {

struct ModelConfig {
  int d_model = 16;
  int n_enc_layers = 1;
  int n_dec_layers = 1;
  int n_heads = 2;
  int ffn_dim = 64;
  int kernel_size = 5;  // fusion smoothing kernel, odd
  double dropout = 0.1;
  bool use_encoder = true;
  bool use_inverse_embedding = true;
  bool use_adaptive_fusion = true;
  WindowSpec spec;

  // Entrance history channels equal the output channels in both settings.
  int c_real() const { return spec.out_channels; }
  int c_res() const { return spec.res_channels(); }
  int enc_tokens() const {
    return use_inverse_embedding ? c_real() + 4 : spec.enc_len();
  }
  int dec_tokens() const {
    return use_inverse_embedding ? c_res() + 4 : spec.dec_len();
  }

  void validate() const;
};

// Owns named parameter tensors in a fixed creation order (the order drives
// deterministic initialization and the checkpoint tensor table).
class ParamStore {
 public:
  Param& add(const std::string& name, int rows, int cols);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Param>>& items() const { return items_; }
  std::vector<std::unique_ptr<Param>>& items() { return items_; }
  void zero_grads();
  std::int64_t num_coords() const;

 private:
  std::vector<std::unique_ptr<Param>> items_;
};

struct LinearParams {
  Param* w = nullptr;
  Param* b = nullptr;
};

struct AttentionParams {
  LinearParams q, k, v, o;
};

struct EncoderLayerParams {
  Param* ln1_g;
  Param* ln1_b;
  AttentionParams self_attn;
  Param* ln2_g;
  Param* ln2_b;
  LinearParams ffn1, ffn2;
};

struct DecoderLayerParams {
  Param* ln_self_g;
  Param* ln_self_b;
  AttentionParams self_attn;
  Param* ln_cross_g;
  Param* ln_cross_b;
  AttentionParams cross_attn;  // created for every decoder; untouched in DecOnly
  Param* ln_ffn_g;
  Param* ln_ffn_b;
  LinearParams ffn1, ffn2;
};

// The forecasting network: shared channel-as-token temporal embedding,
// Transformer encoder, decoder with optional cross-attention, token-to-time
// bridge and the output head. All math is double precision.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t init_seed);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct ForwardNodes {
    int yhat = -1;
    int baseline = -1;  // -1 when the plain head is active
    int gate = -1;
    int smoothed = -1;
    std::vector<int> attn_probs;  // row-stochastic attention nodes
  };

  // Standardizes x_enc/x_dec for the embeddings; the fusion head sees raw
  // x_dec. Dropout fires only when train && dropout > 0.
  ForwardNodes forward(Tape& tape, const ForecastSample& sample, const Standardizer& st,
                       bool train = false, Rng* dropout_rng = nullptr) const;

  // Pieces, exposed for targeted tests. `values` must already be standardized.
  enum class Side { encoder, decoder };
  int temp_embed(Tape& tape, const Mat& values, const Mat& marks, Side side,
                 bool train = false, Rng* dropout_rng = nullptr) const;
  int encoder_forward(Tape& tape, int h_enc, std::vector<int>* attn_nodes = nullptr) const;
  int decoder_forward(Tape& tape, int h_dec, std::optional<int> o_enc,
                      std::vector<int>* attn_nodes = nullptr) const;
  // Learned bridge from decoder tokens to the (D_out*T) time axis in inverse
  // mode; the identity otherwise (tokens already are time steps).
  int tokens_to_time(Tape& tape, int o_dec_tokens) const;

  const FusionParams& fusion() const { return fusion_; }
  const PlainHeadParams& plain() const { return plain_; }

 private:
  LinearParams add_linear(const std::string& name, int in_dim, int out_dim, Rng& rng);
  Param& add_layer_norm_gain(const std::string& name, int dim);
  Param& add_layer_norm_shift(const std::string& name, int dim);
  int attention(Tape& tape, int q_src, int kv_src, const AttentionParams& p,
                std::vector<int>* attn_nodes) const;
  int linear(Tape& tape, int x, const LinearParams& p) const;

  ModelConfig cfg_;
  ParamStore params_;
  LinearParams enc_embed_, dec_embed_;
  std::vector<EncoderLayerParams> enc_layers_;
  Param* enc_final_g_ = nullptr;
  Param* enc_final_b_ = nullptr;
  std::vector<DecoderLayerParams> dec_layers_;
  Param* dec_final_g_ = nullptr;
  Param* dec_final_b_ = nullptr;
  LinearParams bridge_;
  FusionParams fusion_;
  PlainHeadParams plain_;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  int n_coords = 0;
};

// Central finite differences against the analytic gradient of the MAE loss
// on `sample`, over >= min_coords coordinates spanning every named tensor.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(Model& model, const ForecastSample& sample,
                           const Standardizer& st, double epsilon = 1e-5,
                           int min_coords = 200, std::uint64_t seed = 17);

}  // namespace resflow
