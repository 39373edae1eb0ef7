#pragma once

#include "resflow/tape.hpp"

namespace resflow {

// Output head combining a nonnegative learned baseline, a sigmoid
// reliability gate and a softmax-normalized smoothing kernel applied to the
// linearly aggregated reservation signal:
//   yhat_h = b_h + r_h * sum_u k_u * a1[h-u],  a1 = x_dec_raw * W_res.
// Both MLPs have one GELU hidden layer of width d.
struct FusionParams {
  Param* b_w1 = nullptr;
  Param* b_b1 = nullptr;
  Param* b_w2 = nullptr;
  Param* b_b2 = nullptr;
  Param* r_w1 = nullptr;
  Param* r_b1 = nullptr;
  Param* r_w2 = nullptr;
  Param* r_b2 = nullptr;
  Param* w_res = nullptr;         // C_res x C_out
  Param* kernel_logits = nullptr; // K x 1, K odd
};

// Softmax of the kernel logits as a tape node (K x 1).
int kernel_weights_node(Tape& tape, Param& logits);

// Plain evaluation of the same, for inspection and tests.
Mat kernel_weights(const Mat& logits);

struct FusionOut {
  int yhat;      // L_dec x C_out
  int baseline;  // b_h >= 0
  int gate;      // r_h in (0,1)
  int smoothed;  // kernel-smoothed reservation term
};

// x_dec_raw must be in raw count units; the reservation branch adds directly
// onto a count-scale baseline.
FusionOut fuse(Tape& tape, int o_dec, const Mat& x_dec_raw, const FusionParams& p);

// Head used by the no-adaptive-fusion ablation: one linear map per step.
struct PlainHeadParams {
  Param* w = nullptr;  // d x C_out
  Param* b = nullptr;  // 1 x C_out
};

int plain_head(Tape& tape, int o_dec, const PlainHeadParams& p);

}  // namespace resflow
