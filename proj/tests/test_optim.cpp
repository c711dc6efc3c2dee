#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "seqset/adam.hpp"
#include "seqset/grad_check.hpp"
#include "seqset/tensor.hpp"
#include "test_util.hpp"

using namespace seqset;
using test_util::probe_coeffs;
using test_util::weighted_sum;

TEST_CASE("adam leaves parameters and fresh moments untouched on zero gradient") {
  Tensor w = Tensor::matrix(1, 3, {0.5, -0.25, 1.0});
  w.mark_parameter("w");
  Adam opt({w});
  w.zero_grad();
  opt.step({w});
  CHECK(w.value() == std::vector<double>{0.5, -0.25, 1.0});
  CHECK(opt.first_moment(0) == std::vector<double>(3, 0.0));
  CHECK(opt.second_moment(0) == std::vector<double>(3, 0.0));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam first step moves a scalar by almost exactly the learning rate") {
  Tensor w = Tensor::matrix(1, 1, {2.0});
  w.mark_parameter("w");
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam opt({w}, cfg);
  w.mutable_grad()[0] = 1.0;
  opt.step({w});
  // Bias correction makes m_hat = g and v_hat = g^2, so the step is
  // lr * g / (|g| + eps).
  CHECK(w.value()[0] == Catch::Approx(2.0 - 0.1).margin(1e-8));
}

TEST_CASE("adam drives a quadratic toward its minimum") {
  Tensor w = Tensor::matrix(1, 1, {1.0});
  w.mark_parameter("w");
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  Adam opt({w}, cfg);
  for (int i = 0; i < 100; ++i) {
    w.zero_grad();
    w.mutable_grad()[0] = 2.0 * w.value()[0];  // d/dw of w^2
    opt.step({w});
  }
  CHECK(std::abs(w.value()[0]) < 0.1);
}

TEST_CASE("adam names the offending parameter on non-finite gradients") {
  Tensor w = Tensor::matrix(1, 2, {0.0, 0.0});
  w.mark_parameter("w_out");
  Adam opt({w});
  w.mutable_grad()[1] = std::nan("");
  try {
    opt.step({w});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("w_out") != std::string::npos);
  }
}

TEST_CASE("adam validates its configuration") {
  Tensor w = Tensor::scalar(0.0);
  w.mark_parameter("w");
  AdamConfig bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(Adam({w}, bad), ConfigError);
}

TEST_CASE("grad_check accepts an exact linear gradient with tiny error") {
  Tensor w = Tensor::matrix(1, 4, {0.3, -0.2, 0.9, 0.05});
  w.mark_parameter("w");
  const std::vector<double> ones(4, 1.0);
  auto builder = [&]() { return weighted_sum(w, ones); };
  const auto report = grad_check(builder, {w}, 1e-6);
  REQUIRE(report.pass);
  CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("grad_check flags a deliberately corrupted gradient") {
  Tensor w = Tensor::matrix(1, 3, {0.4, -0.6, 0.2});
  w.mark_parameter("w");
  // An op whose backward doubles the true gradient.
  auto corrupted_sum = [&]() {
    double total = 0.0;
    for (double v : w.value()) total += v;
    return detail::make_op(
        {1, 1}, {total}, {w}, [](detail::Node& self) {
          auto& p = *self.parents[0];
          p.ensure_grad();
          for (auto& g : p.grad) g += 2.0 * self.grad[0];
        });
  };
  const auto report = grad_check(corrupted_sum, {w}, 1e-4);
  CHECK_FALSE(report.pass);
  CHECK(report.max_rel_err > 0.4);
}

TEST_CASE("grad_check refuses a non-deterministic loss") {
  Tensor w = Tensor::scalar(1.0);
  w.mark_parameter("w");
  int calls = 0;
  auto flaky = [&]() {
    ++calls;
    return Tensor::scalar(static_cast<double>(calls));
  };
  CHECK_THROWS_AS(grad_check(flaky, {w}, 1e-4), CheckError);
}

TEST_CASE("grad_check validates tolerance and step") {
  Tensor w = Tensor::scalar(1.0);
  w.mark_parameter("w");
  auto builder = [&]() { return weighted_sum(w, {1.0}); };
  CHECK_THROWS_AS(grad_check(builder, {w}, 0.0), ConfigError);
  CHECK_THROWS_AS(grad_check(builder, {w}, 1e-4, 0.0), ConfigError);
}
