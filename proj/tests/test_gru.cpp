#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "seqset/grad_check.hpp"
#include "seqset/gru.hpp"
#include "seqset/rng.hpp"
#include "seqset/tensor.hpp"
#include "test_util.hpp"

using namespace seqset;
using test_util::probe_coeffs;
using test_util::random_matrix;
using test_util::weighted_sum;

namespace {

GruParams zero_params(std::size_t in, std::size_t hidden) {
  GruParams p;
  p.w_z = Tensor::zeros(in, hidden);
  p.u_z = Tensor::zeros(hidden, hidden);
  p.b_z = Tensor::zeros(1, hidden);
  p.w_r = Tensor::zeros(in, hidden);
  p.u_r = Tensor::zeros(hidden, hidden);
  p.b_r = Tensor::zeros(1, hidden);
  p.w_h = Tensor::zeros(in, hidden);
  p.u_h = Tensor::zeros(hidden, hidden);
  p.b_h = Tensor::zeros(1, hidden);
  return p;
}

}  // namespace

TEST_CASE("gru cell with all-zero weights halves the previous state") {
  // z = sigmoid(0) = 0.5 and the candidate is tanh(0) = 0, so the update
  // rule collapses to h' = 0.5 * h_prev exactly.
  GruParams p = zero_params(3, 4);
  Tensor x = Tensor::matrix(1, 3, {0.7, -0.2, 1.5});
  Tensor h = Tensor::matrix(1, 4, {1.0, -2.0, 0.5, 0.0});
  Tensor out = gru_cell(x, h, p);
  REQUIRE(out.cols() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(out.value()[i] == 0.5 * h.value()[i]);
}

TEST_CASE("gru cell maps zero state and zero weights to zero") {
  GruParams p = zero_params(2, 3);
  Tensor x = Tensor::matrix(1, 2, {0.3, 0.9});
  Tensor h = Tensor::zeros(1, 3);
  Tensor out = gru_cell(x, h, p);
  for (double v : out.value()) CHECK(v == 0.0);
}

TEST_CASE("gru cell gradients agree with central differences") {
  Rng rng(1234);
  GruParams p = GruParams::init(3, 4, rng, "gru");
  Tensor x = random_matrix(1, 3, rng);
  Tensor h = random_matrix(1, 4, rng, 0.8);
  x.mark_parameter("x");
  h.mark_parameter("h");
  std::vector<Tensor> params = p.parameters();
  params.push_back(x);
  params.push_back(h);
  const auto coeffs = probe_coeffs(4);
  auto builder = [&]() { return weighted_sum(gru_cell(x, h, p), coeffs); };
  const auto report = grad_check(builder, params, 1e-5);
  INFO("max rel err " << report.max_rel_err);
  CHECK(report.pass);
}

TEST_CASE("gru output never exceeds max of previous state magnitude and one") {
  // h' is a convex blend of h_prev and a tanh value, so per coordinate
  // |h'| <= max(|h_prev|, 1).
  Rng rng(88);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t in = 1 + rng.below(4);
    const std::size_t hidden = 1 + rng.below(5);
    GruParams p = GruParams::init(in, hidden, rng, "g");
    Tensor x = random_matrix(1, in, rng, 10.0);
    Tensor h = random_matrix(1, hidden, rng, 10.0);
    Tensor out = gru_cell(x, h, p);
    double h_inf = 0.0;
    for (double v : h.value()) h_inf = std::max(h_inf, std::abs(v));
    const double bound = std::max(h_inf, 1.0) + 1e-12;
    for (double v : out.value()) REQUIRE(std::abs(v) <= bound);
  }
}

TEST_CASE("gru cell rejects mismatched input and state shapes") {
  Rng rng(9);
  GruParams p = GruParams::init(3, 4, rng, "g");
  CHECK_THROWS_AS(
      gru_cell(Tensor::zeros(1, 2), Tensor::zeros(1, 4), p), DimensionError);
  CHECK_THROWS_AS(
      gru_cell(Tensor::zeros(1, 3), Tensor::zeros(1, 5), p), DimensionError);
}

TEST_CASE("glorot initialization respects the fan-based limit") {
  Rng rng(777);
  Tensor w = Tensor::glorot(30, 50, rng);
  const double limit = std::sqrt(6.0 / 80.0);
  double spread = 0.0;
  for (double v : w.value()) {
    REQUIRE(std::abs(v) <= limit);
    spread = std::max(spread, std::abs(v));
  }
  CHECK(spread > 0.5 * limit);  // values actually use the range
}
