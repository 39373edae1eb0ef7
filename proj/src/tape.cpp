#include "resflow/tape.hpp"

#include <cmath>

namespace resflow {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ShapeError(msg);
}

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

double stable_softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int Tape::push(Mat val, std::function<void(Tape&, const Node&)> back) {
  Node n;
  n.val = std::move(val);
  n.grad = Mat::Zero(n.val.rows(), n.val.cols());
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Mat v) { return push(std::move(v)); }

int Tape::param(Param& p) {
  const int id = push(p.value);
  nodes_[id].bound = &p;
  return id;
}

int Tape::add(int a, int b) {
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
          "add: shape mismatch");
  return push(val(a) + val(b), [a, b](Tape& t, const Node& n) {
    t.g(a) += n.grad;
    t.g(b) += n.grad;
  });
}

int Tape::add_rowvec(int a, int row) {
  require(val(row).rows() == 1 && val(row).cols() == val(a).cols(),
          "add_rowvec: row must be 1 x cols(a)");
  Mat out = val(a);
  out.rowwise() += val(row).row(0);
  return push(std::move(out), [a, row](Tape& t, const Node& n) {
    t.g(a) += n.grad;
    t.g(row) += n.grad.colwise().sum();
  });
}

int Tape::mul(int a, int b) {
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
          "mul: shape mismatch");
  return push(val(a).cwiseProduct(val(b)), [a, b](Tape& t, const Node& n) {
    t.g(a) += n.grad.cwiseProduct(t.val(b));
    t.g(b) += n.grad.cwiseProduct(t.val(a));
  });
}

int Tape::scale(int a, double s) {
  return push(val(a) * s, [a, s](Tape& t, const Node& n) { t.g(a) += s * n.grad; });
}

int Tape::matmul(int a, int b) {
  require(val(a).cols() == val(b).rows(), "matmul: inner dimension mismatch");
  return push(val(a) * val(b), [a, b](Tape& t, const Node& n) {
    t.g(a) += n.grad * t.val(b).transpose();
    t.g(b) += t.val(a).transpose() * n.grad;
  });
}

int Tape::transpose(int a) {
  return push(val(a).transpose(),
              [a](Tape& t, const Node& n) { t.g(a) += n.grad.transpose(); });
}

int Tape::slice_cols(int a, int col0, int ncols) {
  require(col0 >= 0 && ncols >= 0 && col0 + ncols <= val(a).cols(),
          "slice_cols: range out of bounds");
  return push(val(a).middleCols(col0, ncols), [a, col0, ncols](Tape& t, const Node& n) {
    t.g(a).middleCols(col0, ncols) += n.grad;
  });
}

int Tape::concat_cols(const std::vector<int>& parts) {
  require(!parts.empty(), "concat_cols: empty part list");
  const Eigen::Index rows = val(parts[0]).rows();
  Eigen::Index total = 0;
  for (int p : parts) {
    require(val(p).rows() == rows, "concat_cols: row mismatch");
    total += val(p).cols();
  }
  Mat out(rows, total);
  Eigen::Index off = 0;
  for (int p : parts) {
    out.middleCols(off, val(p).cols()) = val(p);
    off += val(p).cols();
  }
  return push(std::move(out), [parts](Tape& t, const Node& n) {
    Eigen::Index off = 0;
    for (int p : parts) {
      const Eigen::Index w = t.val(p).cols();
      t.g(p) += n.grad.middleCols(off, w);
      off += w;
    }
  });
}

int Tape::softmax_rows(int a) {
  Mat out = val(a);
  for (int i = 0; i < out.rows(); ++i) {
    const double mx = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return push(std::move(out), [a](Tape& t, const Node& n) {
    // d softmax: dx = s .* (dy - <dy, s>)
    Mat& ga = t.g(a);
    for (int i = 0; i < n.val.rows(); ++i) {
      const double dot = n.grad.row(i).cwiseProduct(n.val.row(i)).sum();
      ga.row(i) += (n.val.row(i).array() * (n.grad.row(i).array() - dot)).matrix();
    }
  });
}

int Tape::layer_norm_rows(int x, int gain, int shift, double eps) {
  const Mat& in = val(x);
  const int cols = static_cast<int>(in.cols());
  require(val(gain).rows() == 1 && val(gain).cols() == cols, "layer_norm: bad gain shape");
  require(val(shift).rows() == 1 && val(shift).cols() == cols, "layer_norm: bad shift shape");

  Mat xhat(in.rows(), cols);
  Eigen::VectorXd inv_sigma(in.rows());
  for (int i = 0; i < in.rows(); ++i) {
    const double mu = in.row(i).mean();
    const double var = (in.row(i).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (in.row(i).array() - mu) * is;
    inv_sigma(i) = is;
  }
  Mat out = xhat;
  for (int i = 0; i < out.rows(); ++i) {
    out.row(i) = out.row(i).cwiseProduct(val(gain).row(0)) + val(shift).row(0);
  }
  return push(std::move(out),
              [x, gain, shift, xhat, inv_sigma](Tape& t, const Node& n) {
                const int cols = static_cast<int>(xhat.cols());
                for (int i = 0; i < xhat.rows(); ++i) {
                  const auto gy = n.grad.row(i);
                  t.g(gain) += gy.cwiseProduct(xhat.row(i));
                  t.g(shift) += gy;
                  const Eigen::RowVectorXd dxhat = gy.cwiseProduct(t.val(gain).row(0));
                  const double m1 = dxhat.mean();
                  const double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
                  t.g(x).row(i) += inv_sigma(i) *
                                   (dxhat.array() - m1 - xhat.row(i).array() * m2).matrix();
                  (void)cols;
                }
              });
}

int Tape::gelu(int a) {
  Mat out = val(a).unaryExpr([](double x) { return x * norm_cdf(x); });
  return push(std::move(out), [a](Tape& t, const Node& n) {
    const Mat& x = t.val(a);
    t.g(a) += n.grad.cwiseProduct(
        x.unaryExpr([](double v) { return norm_cdf(v) + v * norm_pdf(v); }));
  });
}

int Tape::sigmoid(int a) {
  Mat out = val(a).unaryExpr([](double x) { return stable_sigmoid(x); });
  return push(std::move(out), [a](Tape& t, const Node& n) {
    t.g(a) += n.grad.cwiseProduct(
        n.val.unaryExpr([](double s) { return s * (1.0 - s); }));
  });
}

int Tape::softplus(int a) {
  Mat out = val(a).unaryExpr([](double x) { return stable_softplus(x); });
  return push(std::move(out), [a](Tape& t, const Node& n) {
    const Mat& x = t.val(a);
    t.g(a) += n.grad.cwiseProduct(
        x.unaryExpr([](double v) { return stable_sigmoid(v); }));
  });
}

int Tape::dropout(int a, double rate, bool train, Rng* rng) {
  if (!train || rate <= 0.0) return a;  // eval mode is the identity
  if (rate >= 1.0) throw ConfigError("dropout: rate must be < 1");
  if (rng == nullptr) throw ConfigError("dropout: train mode requires an RNG");
  const double keep = 1.0 - rate;
  Mat mask(val(a).rows(), val(a).cols());
  for (int i = 0; i < mask.rows(); ++i) {
    for (int j = 0; j < mask.cols(); ++j) {
      mask(i, j) = rng->bernoulli(rate) ? 0.0 : 1.0 / keep;
    }
  }
  return push(val(a).cwiseProduct(mask), [a, mask](Tape& t, const Node& n) {
    t.g(a) += n.grad.cwiseProduct(mask);
  });
}

int Tape::conv1d_same(int a, int kernel) {
  const Mat& k = val(kernel);
  require(k.cols() == 1 && k.rows() % 2 == 1, "conv1d_same: kernel must be odd K x 1");
  const int K = static_cast<int>(k.rows());
  const int half = K / 2;
  const Mat& x = val(a);
  const int L = static_cast<int>(x.rows());

  Mat out = Mat::Zero(L, x.cols());
  for (int h = 0; h < L; ++h) {
    for (int u = -half; u <= half; ++u) {
      const int src = h - u;
      if (src < 0 || src >= L) continue;
      out.row(h) += k(u + half, 0) * x.row(src);
    }
  }
  return push(std::move(out), [a, kernel, K, half, L](Tape& t, const Node& n) {
    const Mat& k = t.val(kernel);
    const Mat& x = t.val(a);
    for (int h = 0; h < L; ++h) {
      for (int u = -half; u <= half; ++u) {
        const int src = h - u;
        if (src < 0 || src >= L) continue;
        t.g(a).row(src) += k(u + half, 0) * n.grad.row(h);
        t.g(kernel)(u + half, 0) += n.grad.row(h).dot(x.row(src));
      }
    }
    (void)K;
  });
}

int Tape::mae_against(int a, const Mat& target) {
  require(val(a).rows() == target.rows() && val(a).cols() == target.cols(),
          "mae_against: shape mismatch");
  const double denom = static_cast<double>(target.size());
  const Mat resid = val(a) - target;
  Mat out(1, 1);
  out(0, 0) = resid.cwiseAbs().sum() / denom;
  return push(std::move(out), [a, resid, denom](Tape& t, const Node& n) {
    const double gy = n.grad(0, 0) / denom;
    t.g(a) += gy * resid.unaryExpr([](double r) {
      return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    });
  });
}

void Tape::backward(int node, double seed) {
  nodes_[node].grad.setConstant(seed);
  for (int i = node; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this, nodes_[i]);
  }
  for (auto& n : nodes_) {
    if (n.bound != nullptr) n.bound->grad += n.grad;
  }
}

void Tape::check_finite(int id, const std::string& what) const {
  if (!val(id).allFinite()) {
    throw NumericError("non-finite values in " + what);
  }
}

}  // namespace resflow
