#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqset/adam.hpp"
#include "seqset/encoder.hpp"
#include "seqset/errors.hpp"
#include "seqset/tensor.hpp"

namespace seqset {

struct MultiLabelConfig {
  std::size_t source_vocab_size = 0;
  std::size_t herb_count = 0;
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 300;
  std::size_t top_k = 20;
  double threshold = 0.5;

  void validate() const {
    if (source_vocab_size == 0)
      throw ConfigError("multilabel: source vocabulary must be non-empty");
    if (herb_count == 0)
      throw ConfigError("multilabel: herb count must be positive");
    if (embed_dim == 0 || hidden_dim == 0)
      throw ConfigError("multilabel: embedding and hidden dims must be positive");
    if (top_k < 1 || top_k > herb_count)
      throw ConfigError("multilabel: top_k must lie in [1, herb_count]");
    if (threshold < 0.0 || threshold > 1.0)
      throw ConfigError("multilabel: threshold must lie in [0, 1]");
  }
};

// Pairwise max-margin loss over herb scores: for every (positive, negative)
// pair, max(0, 1 - (s_pos - s_neg)), summed and divided by the number of
// classes. Zero exactly when every positive outranks every negative by the
// full margin.
inline Tensor maxmargin_loss(const Tensor& scores, std::span<const int> gold) {
  if (scores.rows() != 1)
    throw DimensionError("maxmargin_loss: expected a score row, got " +
                         detail::shape_str(scores.shape()));
  const std::size_t V = scores.cols();
  if (gold.empty()) throw ContractError("maxmargin_loss: empty gold set");
  std::vector<bool> positive(V, false);
  for (const int g : gold) {
    if (g < 0 || static_cast<std::size_t>(g) >= V)
      throw ContractError("maxmargin_loss: gold index " + std::to_string(g) +
                          " out of range");
    if (positive[static_cast<std::size_t>(g)])
      throw ContractError("maxmargin_loss: duplicate gold index " +
                          std::to_string(g));
    positive[static_cast<std::size_t>(g)] = true;
  }

  const auto& s = scores.value();
  double total = 0.0;
  for (std::size_t p = 0; p < V; ++p) {
    if (!positive[p]) continue;
    for (std::size_t n = 0; n < V; ++n) {
      if (positive[n]) continue;
      total += std::max(0.0, 1.0 - (s[p] - s[n]));
    }
  }
  total /= static_cast<double>(V);

  return detail::make_op(
      {1, 1}, {total}, {scores}, [positive, V](detail::Node& self) {
        auto& parent = *self.parents[0];
        if (!parent.requires_grad) return;
        parent.ensure_grad();
        const double upstream = self.grad[0] / static_cast<double>(V);
        for (std::size_t p = 0; p < V; ++p) {
          if (!positive[p]) continue;
          for (std::size_t n = 0; n < V; ++n) {
            if (positive[n]) continue;
            if (1.0 - (parent.value[p] - parent.value[n]) > 0.0) {
              parent.grad[p] -= upstream;
              parent.grad[n] += upstream;
            }
          }
        }
      });
}

// Herb selection rule: rank herbs by probability (ties broken by smaller
// index), keep the top k, then keep those strictly above the threshold.
// Returned indices are sorted ascending; the result is a set.
inline std::vector<int> select_herbs(std::span<const double> probs,
                                     std::size_t k, double threshold) {
  const std::size_t V = probs.size();
  if (V == 0) throw InputError("select_herbs: empty probability vector");
  if (k < 1 || k > V)
    throw ConfigError("select_herbs: k must lie in [1, " + std::to_string(V) +
                      "]");
  if (threshold < 0.0 || threshold > 1.0)
    throw ConfigError("select_herbs: threshold must lie in [0, 1]");
  std::vector<std::size_t> order(V);
  for (std::size_t i = 0; i < V; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&probs](std::size_t a, std::size_t b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });
  std::vector<int> chosen;
  for (std::size_t r = 0; r < k; ++r)
    if (probs[order[r]] > threshold) chosen.push_back(static_cast<int>(order[r]));
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// Multi-label baseline: the same bidirectional encoder as the generator, a
// single sigmoid output layer over herbs (no bias), trained with the pairwise
// max-margin loss. Prediction takes top-k herbs above the threshold.
class MultiLabelModel {
 public:
  MultiLabelModel(const MultiLabelConfig& config, Rng& rng) : cfg_(config) {
    cfg_.validate();
    encoder_ = EncoderParams::init(cfg_.source_vocab_size, cfg_.embed_dim,
                                   cfg_.hidden_dim, rng, "enc");
    out_w_ = Tensor::glorot(2 * cfg_.hidden_dim, cfg_.herb_count, rng)
                 .mark_parameter("out.w");
  }

  const MultiLabelConfig& config() const { return cfg_; }

  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    auto out = encoder_.named_parameters();
    out.emplace_back(out_w_.name(), out_w_);
    return out;
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  void load_parameters(const std::map<std::string, std::vector<double>>& data) {
    for (auto& [name, tensor] : named_parameters()) {
      const auto it = data.find(name);
      if (it == data.end())
        throw DataError("multilabel: checkpoint is missing parameter '" + name +
                        "'");
      Tensor t = tensor;
      if (it->second.size() != t.size())
        throw DataError("multilabel: checkpoint parameter '" + name +
                        "' has wrong size");
      t.mutable_value() = it->second;
    }
  }

  // Raw (pre-sigmoid) herb scores from the final bidirectional state.
  Tensor scores(std::span<const int> source_ids) const {
    const EncodedSource enc = encode_source(source_ids, encoder_);
    Tensor h_final = concat_cols({enc.final_forward, enc.final_backward});
    return matmul(h_final, out_w_);
  }

  std::vector<double> predict_probs(std::span<const int> source_ids) const {
    NoGradGuard off;
    return sigmoid(scores(source_ids)).value();
  }

  std::vector<int> predict(std::span<const int> source_ids) const {
    return select_herbs(predict_probs(source_ids), cfg_.top_k, cfg_.threshold);
  }

  double train_step(const std::vector<std::pair<std::vector<int>,
                                                std::vector<int>>>& batch,
                    Adam& optimizer) {
    if (batch.empty()) throw InputError("train_step: empty batch");
    const std::vector<Tensor> params = parameters();
    for (const Tensor& p : params) {
      Tensor t = p;
      t.zero_grad();
    }
    Tensor total;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Tensor loss = maxmargin_loss(scores(batch[i].first), batch[i].second);
      total = i == 0 ? loss : add(total, loss);
    }
    Tensor mean = scale(total, 1.0 / static_cast<double>(batch.size()));
    const double value = mean.item();
    if (!std::isfinite(value))
      throw NumericError("train_step: non-finite loss over a batch of " +
                         std::to_string(batch.size()) + " records");
    backward(mean);
    optimizer.step(params);
    return value;
  }

 private:
  MultiLabelConfig cfg_;
  EncoderParams encoder_;
  Tensor out_w_;
};

}  // namespace seqset
