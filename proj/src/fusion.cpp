#include "resflow/fusion.hpp"

#include <cmath>

namespace resflow {

int kernel_weights_node(Tape& tape, Param& logits) {
  if (logits.value.cols() != 1 || logits.value.rows() % 2 == 0) {
    throw ShapeError("kernel_logits must be an odd-length K x 1 tensor");
  }
  const int raw = tape.param(logits);
  return tape.transpose(tape.softmax_rows(tape.transpose(raw)));
}

Mat kernel_weights(const Mat& logits) {
  Mat k = logits;
  const double mx = k.maxCoeff();
  k = (k.array() - mx).exp();
  k /= k.sum();
  return k;
}

namespace {

int mlp2(Tape& tape, int x, Param& w1, Param& b1, Param& w2, Param& b2) {
  const int h = tape.gelu(tape.add_rowvec(tape.matmul(x, tape.param(w1)), tape.param(b1)));
  return tape.add_rowvec(tape.matmul(h, tape.param(w2)), tape.param(b2));
}

}  // namespace

FusionOut fuse(Tape& tape, int o_dec, const Mat& x_dec_raw, const FusionParams& p) {
  if (x_dec_raw.rows() != tape.val(o_dec).rows()) {
    throw ShapeError("fuse: x_dec_raw and o_dec disagree on sequence length");
  }
  if (x_dec_raw.cols() != p.w_res->value.rows()) {
    throw ShapeError("fuse: x_dec_raw channel count does not match W_res");
  }

  FusionOut out{};
  out.baseline = tape.softplus(mlp2(tape, o_dec, *p.b_w1, *p.b_b1, *p.b_w2, *p.b_b2));
  out.gate = tape.sigmoid(mlp2(tape, o_dec, *p.r_w1, *p.r_b1, *p.r_w2, *p.r_b2));

  const int a1 = tape.matmul(tape.leaf(x_dec_raw), tape.param(*p.w_res));
  const int k = kernel_weights_node(tape, *p.kernel_logits);
  out.smoothed = tape.conv1d_same(a1, k);

  out.yhat = tape.add(out.baseline, tape.mul(out.gate, out.smoothed));
  tape.check_finite(out.yhat, "fusion output");
  return out;
}

int plain_head(Tape& tape, int o_dec, const PlainHeadParams& p) {
  return tape.add_rowvec(tape.matmul(o_dec, tape.param(*p.w)), tape.param(*p.b));
}

}  // namespace resflow
