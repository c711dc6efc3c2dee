#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "seqset/errors.hpp"
#include "seqset/tensor.hpp"

namespace seqset {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam (Kingma & Ba) with bias correction. Moment vectors are stored per
// parameter, aligned with the parameter list given at construction; step()
// must be called with that same list.
class Adam {
 public:
  explicit Adam(const std::vector<Tensor>& params, AdamConfig config = {})
      : config_(config) {
    if (config_.learning_rate <= 0.0)
      throw ConfigError("adam: learning rate must be positive");
    if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
        config_.beta2 >= 1.0)
      throw ConfigError("adam: betas must lie in [0, 1)");
    first_.reserve(params.size());
    second_.reserve(params.size());
    for (const auto& p : params) {
      first_.emplace_back(p.size(), 0.0);
      second_.emplace_back(p.size(), 0.0);
    }
  }

  // Applies one update in place using each parameter's accumulated gradient.
  void step(const std::vector<Tensor>& params) {
    if (params.size() != first_.size())
      throw ContractError("adam: parameter list size changed since init");
    ++steps_;
    const double bc1 = 1.0 - std::pow(config_.beta1, steps_);
    const double bc2 = 1.0 - std::pow(config_.beta2, steps_);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      Tensor param = params[pi];
      auto& value = param.mutable_value();
      const auto& grad = param.grad();
      auto& m = first_[pi];
      auto& v = second_[pi];
      if (value.size() != m.size())
        throw ContractError("adam: parameter '" + param.name() +
                            "' changed size since init");
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = grad[i];
        if (!std::isfinite(g))
          throw NumericError("adam: non-finite gradient for parameter '" +
                             (param.name().empty() ? std::string("<unnamed>")
                                                   : param.name()) +
                             "'");
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        value[i] -=
            config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      }
    }
  }

  long step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<double>& first_moment(std::size_t i) const {
    return first_[i];
  }
  const std::vector<double>& second_moment(std::size_t i) const {
    return second_[i];
  }

 private:
  AdamConfig config_;
  long steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace seqset
