#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "resflow/tape.hpp"

using namespace resflow;

namespace {

Mat random_mat(int rows, int cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.uniform(-1.0, 1.0);
  }
  return m;
}

// Central finite differences of a scalar-valued graph with respect to one
// Param; compares against the tape's analytic gradient.
double max_fd_error(Param& p, const std::function<double()>& scalar_fn,
                    const Mat& analytic, double eps = 1e-6) {
  double worst = 0.0;
  for (int i = 0; i < p.value.rows(); ++i) {
    for (int j = 0; j < p.value.cols(); ++j) {
      const double saved = p.value(i, j);
      p.value(i, j) = saved + eps;
      const double up = scalar_fn();
      p.value(i, j) = saved - eps;
      const double down = scalar_fn();
      p.value(i, j) = saved;
      const double num = (up - down) / (2.0 * eps);
      const double den = std::max({std::abs(num), std::abs(analytic(i, j)), 1e-8});
      worst = std::max(worst, std::abs(num - analytic(i, j)) / den);
    }
  }
  return worst;
}

// Builds the graph twice: once for the analytic gradient, then repeatedly
// for finite differences.
void check_gradients(Param& p, const std::function<int(Tape&)>& build, double tol = 1e-6) {
  p.zero_grad();
  Mat analytic;
  {
    Tape t;
    const int out = build(t);
    REQUIRE(t.val(out).size() == 1);
    t.backward(out);
    analytic = p.grad;
  }
  auto scalar_fn = [&]() {
    Tape t;
    return t.val(build(t))(0, 0);
  };
  CHECK(max_fd_error(p, scalar_fn, analytic) < tol);
}

// Sums all entries so every op can be reduced to a scalar output.
int sum_all(Tape& t, int node) {
  const Mat& v = t.val(node);
  const int ones_row = t.leaf(Mat::Ones(1, v.rows()));
  const int ones_col = t.leaf(Mat::Ones(v.cols(), 1));
  return t.matmul(t.matmul(ones_row, node), ones_col);
}

}  // namespace

TEST_CASE("gradients of every primitive match finite differences") {
  Rng rng(42);
  Param p("p", 4, 3);
  p.value = random_mat(4, 3, rng);
  const Mat other = random_mat(4, 3, rng);
  const Mat right = random_mat(3, 5, rng);

  SUBCASE("matmul") {
    check_gradients(p, [&](Tape& t) {
      return sum_all(t, t.matmul(t.param(p), t.leaf(right)));
    });
  }
  SUBCASE("add and scale") {
    check_gradients(p, [&](Tape& t) {
      return sum_all(t, t.scale(t.add(t.param(p), t.leaf(other)), -2.5));
    });
  }
  SUBCASE("hadamard") {
    check_gradients(p, [&](Tape& t) {
      return sum_all(t, t.mul(t.param(p), t.leaf(other)));
    });
  }
  SUBCASE("transpose") {
    check_gradients(p, [&](Tape& t) {
      return sum_all(t, t.mul(t.transpose(t.param(p)), t.leaf(other.transpose())));
    });
  }
  SUBCASE("add_rowvec") {
    Param bias("b", 1, 3);
    bias.value = random_mat(1, 3, rng);
    check_gradients(bias, [&](Tape& t) {
      return sum_all(t, t.gelu(t.add_rowvec(t.leaf(p.value), t.param(bias))));
    });
  }
  SUBCASE("slice and concat") {
    check_gradients(p, [&](Tape& t) {
      const int x = t.param(p);
      const int left = t.slice_cols(x, 0, 2);
      const int rightcol = t.slice_cols(x, 2, 1);
      return sum_all(t, t.mul(t.concat_cols({rightcol, left}), t.leaf(other)));
    });
  }
  SUBCASE("softmax rows") {
    check_gradients(p, [&](Tape& t) {
      return sum_all(t, t.mul(t.softmax_rows(t.param(p)), t.leaf(other)));
    });
  }
  SUBCASE("gelu") {
    check_gradients(p, [&](Tape& t) { return sum_all(t, t.gelu(t.param(p))); });
  }
  SUBCASE("sigmoid") {
    check_gradients(p, [&](Tape& t) {
      return sum_all(t, t.mul(t.sigmoid(t.param(p)), t.leaf(other)));
    });
  }
  SUBCASE("softplus") {
    check_gradients(p, [&](Tape& t) {
      return sum_all(t, t.mul(t.softplus(t.param(p)), t.leaf(other)));
    });
  }
  SUBCASE("layer norm") {
    Param gain("g", 1, 3), shift("s", 1, 3);
    gain.value = random_mat(1, 3, rng, 0.8);
    gain.value.array() += 1.0;
    shift.value = random_mat(1, 3, rng, 0.3);
    check_gradients(p, [&](Tape& t) {
      return sum_all(
          t, t.mul(t.layer_norm_rows(t.param(p), t.param(gain), t.param(shift)),
                   t.leaf(other)));
    });
    check_gradients(gain, [&](Tape& t) {
      return sum_all(
          t, t.mul(t.layer_norm_rows(t.leaf(p.value), t.param(gain), t.param(shift)),
                   t.leaf(other)));
    });
  }
  SUBCASE("conv1d_same") {
    Param kernel("k", 5, 1);
    kernel.value = random_mat(5, 1, rng);
    check_gradients(p, [&](Tape& t) {
      return sum_all(t, t.mul(t.conv1d_same(t.param(p), t.leaf(kernel.value)),
                              t.leaf(other)));
    });
    check_gradients(kernel, [&](Tape& t) {
      return sum_all(t, t.mul(t.conv1d_same(t.leaf(p.value), t.param(kernel)),
                              t.leaf(other)));
    });
  }
  SUBCASE("mae (off the kink)") {
    const Mat target = random_mat(4, 3, rng, 10.0);  // far from p, no |0| kink
    check_gradients(p, [&](Tape& t) { return t.mae_against(t.param(p), target); });
  }
}

TEST_CASE("softmax rows are row-stochastic") {
  Rng rng(7);
  Tape t;
  const int s = t.softmax_rows(t.leaf(random_mat(6, 9, rng, 4.0)));
  const Mat& v = t.val(s);
  for (int i = 0; i < v.rows(); ++i) {
    CHECK(v.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("conv1d_same matches the hand-computed oracle") {
  // k = (0.25, 0.5, 0.25) over (0, 4, 0, 0) with zero padding -> (1, 2, 1, 0)
  Tape t;
  Mat k(3, 1);
  k << 0.25, 0.5, 0.25;
  Mat a(4, 1);
  a << 0, 4, 0, 0;
  const Mat& out = t.val(t.conv1d_same(t.leaf(a), t.leaf(k)));
  CHECK(out(0, 0) == doctest::Approx(1.0));
  CHECK(out(1, 0) == doctest::Approx(2.0));
  CHECK(out(2, 0) == doctest::Approx(1.0));
  CHECK(out(3, 0) == doctest::Approx(0.0));
}

TEST_CASE("conv1d orientation: yhat_h picks up a1[h-u] with k indexed by u") {
  // Asymmetric kernel pins the sign convention: k_{-1}=0.7 (future tap),
  // k_0=0.2, k_{+1}=0.1. For a spike at position 1: out[0] = k_{-1}*a[1].
  Tape t;
  Mat k(3, 1);
  k << 0.7, 0.2, 0.1;
  Mat a(3, 1);
  a << 0, 1, 0;
  const Mat& out = t.val(t.conv1d_same(t.leaf(a), t.leaf(k)));
  CHECK(out(0, 0) == doctest::Approx(0.7));
  CHECK(out(1, 0) == doctest::Approx(0.2));
  CHECK(out(2, 0) == doctest::Approx(0.1));
}

TEST_CASE("mae value and subgradient at zero") {
  Tape t;
  Mat a(2, 1), y(2, 1);
  a << 2, 4;
  y << 1, 2;
  const int loss = t.mae_against(t.leaf(a), y);
  CHECK(t.val(loss)(0, 0) == doctest::Approx(1.5));

  Param p("p", 1, 1);
  p.value(0, 0) = 3.0;
  Tape t2;
  const int l2 = t2.mae_against(t2.param(p), Mat::Constant(1, 1, 3.0));
  t2.backward(l2);
  CHECK(p.grad(0, 0) == 0.0);  // subgradient at the kink is 0
}

TEST_CASE("dropout") {
  Rng rng(11);
  const Mat x = random_mat(30, 20, rng);

  SUBCASE("eval mode is the identity node") {
    Tape t;
    const int a = t.leaf(x);
    CHECK(t.dropout(a, 0.5, false, nullptr) == a);
    CHECK(t.dropout(a, 0.0, true, &rng) == a);
  }

  SUBCASE("train mode zeroes entries and rescales the rest") {
    Tape t;
    const int d = t.dropout(t.leaf(x), 0.25, true, &rng);
    const Mat& v = t.val(d);
    int zeros = 0;
    for (int i = 0; i < v.rows(); ++i) {
      for (int j = 0; j < v.cols(); ++j) {
        if (v(i, j) == 0.0) {
          ++zeros;
        } else {
          CHECK(v(i, j) == doctest::Approx(x(i, j) / 0.75));
        }
      }
    }
    CHECK(zeros > 60);   // ~150 expected of 600
    CHECK(zeros < 300);
  }
}

TEST_CASE("check_finite raises NumericError with the stage name") {
  Tape t;
  Mat bad(1, 2);
  bad << 1.0, std::nan("");
  const int n = t.leaf(bad);
  CHECK_THROWS_WITH_AS(t.check_finite(n, "encoder output"),
                       "non-finite values in encoder output", NumericError);
}

TEST_CASE("shape errors on malformed op inputs") {
  Tape t;
  const int a = t.leaf(Mat::Zero(2, 3));
  const int b = t.leaf(Mat::Zero(3, 2));
  CHECK_THROWS_AS(t.add(a, b), ShapeError);
  CHECK_THROWS_AS(t.matmul(a, a), ShapeError);
  CHECK_THROWS_AS(t.slice_cols(a, 2, 2), ShapeError);
  CHECK_THROWS_AS(t.conv1d_same(a, t.leaf(Mat::Zero(4, 1))), ShapeError);  // even K
  CHECK_THROWS_AS(t.mae_against(a, Mat::Zero(3, 2)), ShapeError);
}
