#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seqset/gru.hpp"
#include "seqset/rng.hpp"
#include "seqset/tensor.hpp"

namespace test_util {

// Fixed nonzero coefficients so linear functionals of op outputs have
// non-trivial gradients everywhere.
inline std::vector<double> probe_coeffs(std::size_t n, std::uint64_t seed = 7) {
  seqset::Rng rng(seed);
  std::vector<double> c(n);
  for (auto& v : c) v = rng.uniform(0.5, 1.5);
  return c;
}

// Reduces any tensor to a scalar through the tape: sum_i coeffs[i] * t[i].
inline seqset::Tensor weighted_sum(const seqset::Tensor& t,
                                   const std::vector<double>& coeffs) {
  seqset::Tensor flat = seqset::reshape(t, 1, t.size());
  seqset::Tensor c =
      seqset::Tensor::matrix(coeffs.size(), 1, std::vector<double>(coeffs));
  return seqset::matmul(flat, c);
}

inline seqset::Tensor random_matrix(std::size_t r, std::size_t c,
                                    seqset::Rng& rng, double span = 2.0) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.uniform(-span, span);
  return seqset::Tensor::matrix(r, c, std::move(v));
}

inline seqset::Tensor find_param(
    const std::vector<std::pair<std::string, seqset::Tensor>>& named,
    const std::string& name) {
  for (const auto& [n, t] : named)
    if (n == name) return t;
  throw std::runtime_error("test: no parameter named " + name);
}

inline seqset::GruParams gru_from(
    const std::vector<std::pair<std::string, seqset::Tensor>>& named,
    const std::string& prefix) {
  seqset::GruParams p;
  p.w_z = find_param(named, prefix + ".w_z");
  p.u_z = find_param(named, prefix + ".u_z");
  p.b_z = find_param(named, prefix + ".b_z");
  p.w_r = find_param(named, prefix + ".w_r");
  p.u_r = find_param(named, prefix + ".u_r");
  p.b_r = find_param(named, prefix + ".b_r");
  p.w_h = find_param(named, prefix + ".w_h");
  p.u_h = find_param(named, prefix + ".u_h");
  p.b_h = find_param(named, prefix + ".b_h");
  return p;
}

}  // namespace test_util
