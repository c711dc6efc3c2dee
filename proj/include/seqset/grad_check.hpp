#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "seqset/errors.hpp"
#include "seqset/tensor.hpp"

namespace seqset {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  double max_rel_err = 0.0;
  bool pass = true;
  std::vector<GradCheckEntry> per_parameter;
};

// Compares reverse-mode gradients against central differences
// (L(x+h) - L(x-h)) / 2h evaluated in 64-bit precision.
//
// loss_builder must be a pure function of the current parameter values that
// returns a scalar Tensor; it is re-run many times with perturbed values. A
// bitwise-unequal result for two evaluations at the same point means finite
// differences are meaningless, reported as CheckError.
//
// Relative error per element is |a - n| / max(|a|, |n|); elements where both
// magnitudes fall below `guard` count as agreeing, because finite-difference
// noise (~1e-8 absolute through a full model forward) dominates there. The
// default guard of 1e-3 keeps that noise three orders of magnitude below the
// judgement threshold while still exposing any real gradient bug on
// parameters that matter.
template <typename LossBuilder>
GradCheckReport grad_check(LossBuilder&& loss_builder,
                           const std::vector<Tensor>& params, double tolerance,
                           double fd_step = 1e-6, double guard = 1e-3) {
  if (tolerance <= 0.0) throw ConfigError("grad_check: tolerance must be positive");
  if (fd_step <= 0.0) throw ConfigError("grad_check: step must be positive");

  const auto eval = [&]() -> double {
    NoGradGuard off;
    Tensor loss = loss_builder();
    if (loss.size() != 1)
      throw CheckError("grad_check: loss builder must return a scalar");
    return loss.item();
  };

  const double probe1 = eval();
  const double probe2 = eval();
  if (!(probe1 == probe2))  // bitwise; also catches NaN
    throw CheckError("grad_check: loss is not deterministic (" +
                     std::to_string(probe1) + " vs " + std::to_string(probe2) +
                     ")");

  for (const auto& p : params) {
    Tensor t = p;
    t.zero_grad();
  }
  Tensor loss = loss_builder();
  if (loss.size() != 1)
    throw CheckError("grad_check: loss builder must return a scalar");
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad());

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor param = params[pi];
    GradCheckEntry entry;
    entry.name = param.name().empty() ? "param" + std::to_string(pi)
                                      : param.name();
    auto& values = param.mutable_value();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + fd_step;
      const double plus = eval();
      values[i] = saved - fd_step;
      const double minus = eval();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * fd_step);
      const double a = analytic[pi][i];
      const double denom = std::max(std::abs(a), std::abs(numeric));
      if (denom <= guard) continue;
      const double rel = std::abs(a - numeric) / denom;
      if (rel > entry.max_rel_err) entry.max_rel_err = rel;
    }
    entry.pass = entry.max_rel_err < tolerance;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.pass = report.pass && entry.pass;
    report.per_parameter.push_back(std::move(entry));
  }
  return report;
}

}  // namespace seqset
