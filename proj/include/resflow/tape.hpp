#pragma once

#include <functional>
#include <string>
#include <vector>

#include "resflow/rng.hpp"
#include "resflow/timegrid.hpp"

namespace resflow {

// A learnable tensor. Gradients accumulate across backward passes until
// zero_grad(); the optimizer consumes and the tape writes `grad`.
struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param(std::string n, int rows, int cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

// Reverse-mode tape over dense matrices. Each op appends one node; backward
// walks the nodes in reverse creation order (creation order is already
// topological). Built per forward pass and discarded afterwards.
class Tape {
 public:
  int leaf(Mat v);            // constant input, no gradient tracked outward
  int param(Param& p);        // leaf bound to a Param; backward adds into p.grad

  int add(int a, int b);              // elementwise, same shape
  int add_rowvec(int a, int row);     // broadcast a 1 x m row over every row of a
  int mul(int a, int b);              // elementwise (Hadamard)
  int scale(int a, double s);
  int matmul(int a, int b);
  int transpose(int a);
  int slice_cols(int a, int col0, int ncols);
  int concat_cols(const std::vector<int>& parts);
  int softmax_rows(int a);
  int layer_norm_rows(int x, int gain, int shift, double eps = 1e-5);
  int gelu(int a);     // exact: x * Phi(x)
  int sigmoid(int a);
  int softplus(int a); // overflow-stable
  // Inverted dropout; identity (same node) when !train or rate == 0.
  int dropout(int a, double rate, bool train, Rng* rng);
  // 1-D convolution down each column with an odd-length K x 1 kernel,
  // zero padding, output length preserved: out[h] = sum_u k[u+K/2] * a[h-u].
  int conv1d_same(int a, int kernel);
  // Scalar node: mean absolute error against a constant target. The
  // subgradient of |r| at r = 0 is taken as 0.
  int mae_against(int a, const Mat& target);

  const Mat& val(int id) const { return nodes_[id].val; }
  const Mat& grad_of(int id) const { return nodes_[id].grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Seeds d(node)/d(node) = seed on every entry and propagates to all
  // parents, then flushes bound-param gradients into their Params.
  void backward(int node, double seed = 1.0);

  // Throws NumericError naming `what` if the node holds any non-finite value.
  void check_finite(int id, const std::string& what) const;

 private:
  struct Node {
    Mat val;
    Mat grad;
    Param* bound = nullptr;
    std::function<void(Tape&, const Node&)> back;  // null for leaves
  };

  int push(Mat val, std::function<void(Tape&, const Node&)> back = nullptr);
  Mat& g(int id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
};

}  // namespace resflow
