#include "resflow/net.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace resflow {

void ModelConfig::validate() const {
  spec.validate();
  if (d_model < 1) throw ConfigError("model: d_model must be >= 1");
  if (n_heads < 1 || d_model % n_heads != 0) {
    throw ConfigError("model: d_model must be divisible by n_heads");
  }
  if (n_enc_layers < 1 || n_dec_layers < 1) {
    throw ConfigError("model: layer counts must be >= 1");
  }
  if (ffn_dim < 1) throw ConfigError("model: ffn_dim must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("model: kernel_size must be odd and >= 1");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("model: dropout must be in [0, 1)");
  }
}

Param& ParamStore::add(const std::string& name, int rows, int cols) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name " + name);
  items_.push_back(std::make_unique<Param>(name, rows, cols));
  return *items_.back();
}

Param* ParamStore::find(const std::string& name) {
  for (auto& p : items_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Param* ParamStore::find(const std::string& name) const {
  for (const auto& p : items_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

void ParamStore::zero_grads() {
  for (auto& p : items_) p->zero_grad();
}

std::int64_t ParamStore::num_coords() const {
  std::int64_t n = 0;
  for (const auto& p : items_) n += p->value.size();
  return n;
}

namespace {

void init_uniform(Param& p, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  for (int i = 0; i < p.value.rows(); ++i) {
    for (int j = 0; j < p.value.cols(); ++j) {
      p.value(i, j) = rng.uniform(-bound, bound);
    }
  }
}

}  // namespace

LinearParams Model::add_linear(const std::string& name, int in_dim, int out_dim, Rng& rng) {
  LinearParams lp;
  lp.w = &params_.add(name + ".w", in_dim, out_dim);
  lp.b = &params_.add(name + ".b", 1, out_dim);
  init_uniform(*lp.w, in_dim, rng);
  init_uniform(*lp.b, in_dim, rng);
  return lp;
}

Param& Model::add_layer_norm_gain(const std::string& name, int dim) {
  Param& p = params_.add(name, 1, dim);
  p.value.setOnes();
  return p;
}

Param& Model::add_layer_norm_shift(const std::string& name, int dim) {
  return params_.add(name, 1, dim);  // zeros
}

Model::Model(ModelConfig config, std::uint64_t init_seed) : cfg_(std::move(config)) {
  cfg_.validate();
  Rng rng(init_seed);
  const int d = cfg_.d_model;

  auto add_attention = [&](const std::string& prefix) {
    AttentionParams a;
    a.q = add_linear(prefix + ".q", d, d, rng);
    a.k = add_linear(prefix + ".k", d, d, rng);
    a.v = add_linear(prefix + ".v", d, d, rng);
    a.o = add_linear(prefix + ".o", d, d, rng);
    return a;
  };

  if (cfg_.use_encoder) {
    const int in_dim = cfg_.use_inverse_embedding ? cfg_.spec.enc_len() : cfg_.c_real() + 4;
    enc_embed_ = add_linear("enc.embed", in_dim, d, rng);
    for (int l = 0; l < cfg_.n_enc_layers; ++l) {
      const std::string base = "enc.l" + std::to_string(l);
      EncoderLayerParams layer;
      layer.ln1_g = &add_layer_norm_gain(base + ".ln1.g", d);
      layer.ln1_b = &add_layer_norm_shift(base + ".ln1.b", d);
      layer.self_attn = add_attention(base + ".self");
      layer.ln2_g = &add_layer_norm_gain(base + ".ln2.g", d);
      layer.ln2_b = &add_layer_norm_shift(base + ".ln2.b", d);
      layer.ffn1 = add_linear(base + ".ffn1", d, cfg_.ffn_dim, rng);
      layer.ffn2 = add_linear(base + ".ffn2", cfg_.ffn_dim, d, rng);
      enc_layers_.push_back(layer);
    }
    enc_final_g_ = &add_layer_norm_gain("enc.final.g", d);
    enc_final_b_ = &add_layer_norm_shift("enc.final.b", d);
  }

  {
    const int in_dim = cfg_.use_inverse_embedding ? cfg_.spec.dec_len() : cfg_.c_res() + 4;
    dec_embed_ = add_linear("dec.embed", in_dim, d, rng);
  }
  for (int l = 0; l < cfg_.n_dec_layers; ++l) {
    const std::string base = "dec.l" + std::to_string(l);
    DecoderLayerParams layer;
    layer.ln_self_g = &add_layer_norm_gain(base + ".ln_self.g", d);
    layer.ln_self_b = &add_layer_norm_shift(base + ".ln_self.b", d);
    layer.self_attn = add_attention(base + ".self");
    layer.ln_cross_g = &add_layer_norm_gain(base + ".ln_cross.g", d);
    layer.ln_cross_b = &add_layer_norm_shift(base + ".ln_cross.b", d);
    layer.cross_attn = add_attention(base + ".cross");
    layer.ln_ffn_g = &add_layer_norm_gain(base + ".ln_ffn.g", d);
    layer.ln_ffn_b = &add_layer_norm_shift(base + ".ln_ffn.b", d);
    layer.ffn1 = add_linear(base + ".ffn1", d, cfg_.ffn_dim, rng);
    layer.ffn2 = add_linear(base + ".ffn2", cfg_.ffn_dim, d, rng);
    dec_layers_.push_back(layer);
  }
  dec_final_g_ = &add_layer_norm_gain("dec.final.g", d);
  dec_final_b_ = &add_layer_norm_shift("dec.final.b", d);

  if (cfg_.use_inverse_embedding) {
    bridge_ = add_linear("bridge", cfg_.dec_tokens(), cfg_.spec.dec_len(), rng);
  }

  const int c_out = cfg_.spec.out_channels;
  if (cfg_.use_adaptive_fusion) {
    auto b1 = add_linear("fusion.mlp_b.l1", d, d, rng);
    auto b2 = add_linear("fusion.mlp_b.l2", d, c_out, rng);
    auto r1 = add_linear("fusion.mlp_r.l1", d, d, rng);
    auto r2 = add_linear("fusion.mlp_r.l2", d, c_out, rng);
    fusion_.b_w1 = b1.w;
    fusion_.b_b1 = b1.b;
    fusion_.b_w2 = b2.w;
    fusion_.b_b2 = b2.b;
    fusion_.r_w1 = r1.w;
    fusion_.r_b1 = r1.b;
    fusion_.r_w2 = r2.w;
    fusion_.r_b2 = r2.b;
    fusion_.w_res = &params_.add("fusion.w_res", cfg_.c_res(), c_out);
    init_uniform(*fusion_.w_res, cfg_.c_res(), rng);
    fusion_.kernel_logits = &params_.add("fusion.kernel_logits", cfg_.kernel_size, 1);
  } else {
    auto head = add_linear("head", d, c_out, rng);
    plain_.w = head.w;
    plain_.b = head.b;
  }
}

int Model::linear(Tape& tape, int x, const LinearParams& p) const {
  return tape.add_rowvec(tape.matmul(x, tape.param(*p.w)), tape.param(*p.b));
}

int Model::temp_embed(Tape& tape, const Mat& values, const Mat& marks, Side side,
                      bool train, Rng* dropout_rng) const {
  const bool enc = side == Side::encoder;
  if (enc && !cfg_.use_encoder) {
    throw ConfigError("temp_embed: encoder side requested but encoder disabled");
  }
  const int expect_len = enc ? cfg_.spec.enc_len() : cfg_.spec.dec_len();
  const int expect_ch = enc ? cfg_.c_real() : cfg_.c_res();
  if (values.rows() != expect_len || marks.rows() != expect_len) {
    throw ShapeError("temp_embed: time length does not match D*T");
  }
  if (values.cols() != expect_ch || marks.cols() != 4) {
    throw ShapeError("temp_embed: channel count mismatch");
  }

  Mat z(expect_len, expect_ch + 4);
  z << values, marks;
  const LinearParams& embed = enc ? enc_embed_ : dec_embed_;
  // Inverse mode: one token per channel, projected along the time axis.
  // Otherwise one token per time step, projected along the channel axis.
  const int zi = cfg_.use_inverse_embedding ? tape.leaf(z.transpose()) : tape.leaf(z);
  const int h = linear(tape, zi, embed);
  return tape.dropout(h, cfg_.dropout, train, dropout_rng);
}

int Model::attention(Tape& tape, int q_src, int kv_src, const AttentionParams& p,
                     std::vector<int>* attn_nodes) const {
  const int d = cfg_.d_model;
  const int dh = d / cfg_.n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  const int q = linear(tape, q_src, p.q);
  const int k = linear(tape, kv_src, p.k);
  const int v = linear(tape, kv_src, p.v);

  std::vector<int> heads;
  heads.reserve(cfg_.n_heads);
  for (int h = 0; h < cfg_.n_heads; ++h) {
    const int qh = tape.slice_cols(q, h * dh, dh);
    const int kh = tape.slice_cols(k, h * dh, dh);
    const int vh = tape.slice_cols(v, h * dh, dh);
    const int scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt);
    const int probs = tape.softmax_rows(scores);
    if (attn_nodes != nullptr) attn_nodes->push_back(probs);
    heads.push_back(tape.matmul(probs, vh));
  }
  return linear(tape, tape.concat_cols(heads), p.o);
}

int Model::encoder_forward(Tape& tape, int h_enc, std::vector<int>* attn_nodes) const {
  if (!cfg_.use_encoder) throw ConfigError("encoder_forward: encoder disabled");
  int x = h_enc;
  for (const auto& layer : enc_layers_) {
    const int n1 = tape.layer_norm_rows(x, tape.param(*layer.ln1_g), tape.param(*layer.ln1_b));
    x = tape.add(x, attention(tape, n1, n1, layer.self_attn, attn_nodes));
    const int n2 = tape.layer_norm_rows(x, tape.param(*layer.ln2_g), tape.param(*layer.ln2_b));
    const int f = linear(tape, tape.gelu(linear(tape, n2, layer.ffn1)), layer.ffn2);
    x = tape.add(x, f);
  }
  const int out =
      tape.layer_norm_rows(x, tape.param(*enc_final_g_), tape.param(*enc_final_b_));
  tape.check_finite(out, "encoder output");
  return out;
}

int Model::decoder_forward(Tape& tape, int h_dec, std::optional<int> o_enc,
                           std::vector<int>* attn_nodes) const {
  if (o_enc.has_value() != cfg_.use_encoder) {
    throw ConfigError("decoder_forward: encoder memory must be present iff encoder enabled");
  }
  int x = h_dec;
  for (const auto& layer : dec_layers_) {
    const int n1 =
        tape.layer_norm_rows(x, tape.param(*layer.ln_self_g), tape.param(*layer.ln_self_b));
    x = tape.add(x, attention(tape, n1, n1, layer.self_attn, attn_nodes));
    if (o_enc) {
      const int n2 = tape.layer_norm_rows(x, tape.param(*layer.ln_cross_g),
                                          tape.param(*layer.ln_cross_b));
      x = tape.add(x, attention(tape, n2, *o_enc, layer.cross_attn, attn_nodes));
    }
    const int n3 =
        tape.layer_norm_rows(x, tape.param(*layer.ln_ffn_g), tape.param(*layer.ln_ffn_b));
    const int f = linear(tape, tape.gelu(linear(tape, n3, layer.ffn1)), layer.ffn2);
    x = tape.add(x, f);
  }
  const int out =
      tape.layer_norm_rows(x, tape.param(*dec_final_g_), tape.param(*dec_final_b_));
  tape.check_finite(out, "decoder output");
  return out;
}

int Model::tokens_to_time(Tape& tape, int o_dec_tokens) const {
  if (!cfg_.use_inverse_embedding) return o_dec_tokens;  // already L_dec x d
  if (tape.val(o_dec_tokens).rows() != cfg_.dec_tokens()) {
    throw ShapeError("tokens_to_time: unexpected token count");
  }
  const int t = tape.transpose(o_dec_tokens);  // d x N_tokens
  const int mapped = linear(tape, t, bridge_); // d x L_dec
  return tape.transpose(mapped);
}

Model::ForwardNodes Model::forward(Tape& tape, const ForecastSample& sample,
                                   const Standardizer& st, bool train,
                                   Rng* dropout_rng) const {
  ForwardNodes out;
  std::optional<int> o_enc;
  if (cfg_.use_encoder) {
    const int h_enc = temp_embed(tape, st.apply_enc(sample.x_enc), sample.x_enc_mark,
                                 Side::encoder, train, dropout_rng);
    o_enc = encoder_forward(tape, h_enc, &out.attn_probs);
  }
  const int h_dec = temp_embed(tape, st.apply_dec(sample.x_dec), sample.x_dec_mark,
                               Side::decoder, train, dropout_rng);
  const int o_dec_tokens = decoder_forward(tape, h_dec, o_enc, &out.attn_probs);
  const int o_dec = tokens_to_time(tape, o_dec_tokens);

  if (cfg_.use_adaptive_fusion) {
    const FusionOut f = fuse(tape, o_dec, sample.x_dec, fusion_);
    out.yhat = f.yhat;
    out.baseline = f.baseline;
    out.gate = f.gate;
    out.smoothed = f.smoothed;
  } else {
    out.yhat = plain_head(tape, o_dec, plain_);
  }
  tape.check_finite(out.yhat, "prediction");
  return out;
}

GradCheckResult grad_check(Model& model, const ForecastSample& sample,
                           const Standardizer& st, double epsilon, int min_coords,
                           std::uint64_t seed) {
  auto loss_at = [&]() {
    Tape tape;
    auto f = model.forward(tape, sample, st, /*train=*/false, nullptr);
    return tape.val(tape.mae_against(f.yhat, sample.y))(0, 0);
  };

  // Analytic gradient.
  model.params().zero_grads();
  {
    Tape tape;
    auto f = model.forward(tape, sample, st, false, nullptr);
    const int loss = tape.mae_against(f.yhat, sample.y);
    tape.backward(loss);
  }
  std::vector<Mat> analytic;
  for (const auto& p : model.params().items()) {
    if (!p->grad.allFinite()) {
      throw NumericError("non-finite gradient in tensor " + p->name);
    }
    analytic.push_back(p->grad);
  }

  // Coordinate sample covering every tensor.
  Rng rng(seed);
  const auto& items = model.params().items();
  const int n_tensors = static_cast<int>(items.size());
  const int per_tensor = std::max(1, (min_coords + n_tensors - 1) / n_tensors);
  std::vector<std::tuple<int, int, int>> coords;
  for (int t = 0; t < n_tensors; ++t) {
    const int rows = static_cast<int>(items[t]->value.rows());
    const int cols = static_cast<int>(items[t]->value.cols());
    const int total = rows * cols;
    const int take = std::min(per_tensor, total);
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < take) {
      chosen.insert(static_cast<int>(rng.uniform_int(0, total - 1)));
    }
    for (int flat : chosen) coords.emplace_back(t, flat / cols, flat % cols);
  }

  GradCheckResult result;
  result.n_coords = static_cast<int>(coords.size());
  for (const auto& [t, i, j] : coords) {
    Param& p = *model.params().items()[t];
    const double saved = p.value(i, j);
    p.value(i, j) = saved + epsilon;
    const double up = loss_at();
    p.value(i, j) = saved - epsilon;
    const double down = loss_at();
    p.value(i, j) = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[t](i, j);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    result.max_rel_err = std::max(result.max_rel_err, std::abs(a - numeric) / denom);
  }
  return result;
}

}  // namespace resflow
