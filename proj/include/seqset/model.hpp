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
#include "seqset/gru.hpp"
#include "seqset/rng.hpp"
#include "seqset/tensor.hpp"

namespace seqset {

// Generator configuration. Token spaces: source tokens live in
// [0, source_vocab_size); the decoder emits herb indices [0, herb_count) plus
// EOS = herb_count, and additionally embeds BOS = herb_count + 1 as the first
// input. The output layer scores herb_count + 1 classes (herbs and EOS).
struct ModelConfig {
  std::size_t source_vocab_size = 0;
  std::size_t herb_count = 0;
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 300;
  std::size_t max_decode_len = 20;
  bool coverage = true;
  bool soft_loss = true;

  int eos() const { return static_cast<int>(herb_count); }
  int bos() const { return static_cast<int>(herb_count) + 1; }
  std::size_t output_size() const { return herb_count + 1; }

  void validate() const {
    if (source_vocab_size == 0)
      throw ConfigError("model: source vocabulary must be non-empty");
    if (herb_count == 0) throw ConfigError("model: herb count must be positive");
    if (embed_dim == 0 || hidden_dim == 0)
      throw ConfigError("model: embedding and hidden dims must be positive");
    if (max_decode_len == 0)
      throw ConfigError("model: max_decode_len must be positive");
  }
};

// Mutable decoding context. `emitted_mask` is the multi-hot record of herbs
// emitted so far (the coverage input D); `coverage` holds the vector computed
// from it at the latest step, always recomputed from the mask, never updated
// incrementally.
struct DecoderState {
  Tensor s;  // 1 x H
  std::vector<double> emitted_mask;
  std::vector<int> emitted;
  Tensor coverage;
  std::size_t step = 0;

  // Marks a herb as emitted. Re-emitting is legal (that is what repetition
  // measures); the mask simply stays set.
  void record_emission(int token) {
    if (token < 0 || static_cast<std::size_t>(token) >= emitted_mask.size())
      throw ContractError("decoder: emission " + std::to_string(token) +
                          " is not a herb index");
    emitted_mask[static_cast<std::size_t>(token)] = 1.0;
    emitted.push_back(token);
  }
};

struct GenerationResult {
  std::vector<int> raw;     // every emission, in order, repeats included
  std::vector<int> unique;  // first-occurrence deduplication of raw
};

// Mixed supervision target for step t of a gold sequence with M herbs:
//   q'[v] = (multi_hot(gold)[v] / M + one_hot(gold[t])[v]) / 2
// which puts 1/(2M) on every gold herb and 1/2 extra on this step's herb.
// The terminal step t == M is the plain one-hot on EOS. Output length is
// herb_count + 1 (EOS lives at index herb_count).
inline std::vector<double> soft_target(std::span<const int> gold,
                                       std::size_t herb_count, std::size_t t) {
  const std::size_t M = gold.size();
  if (M == 0) throw ContractError("soft_target: empty gold sequence");
  if (t > M)
    throw ContractError("soft_target: step " + std::to_string(t) +
                        " beyond gold length " + std::to_string(M));
  std::vector<double> q(herb_count + 1, 0.0);
  std::vector<bool> seen(herb_count, false);
  for (const int g : gold) {
    if (g < 0 || static_cast<std::size_t>(g) >= herb_count)
      throw ContractError("soft_target: gold token " + std::to_string(g) +
                          " is not a herb index");
    if (seen[static_cast<std::size_t>(g)])
      throw ContractError("soft_target: duplicate gold herb " +
                          std::to_string(g));
    seen[static_cast<std::size_t>(g)] = true;
  }
  if (t == M) {
    q[herb_count] = 1.0;
    return q;
  }
  const double share = 1.0 / (2.0 * static_cast<double>(M));
  for (const int g : gold) q[static_cast<std::size_t>(g)] += share;
  q[static_cast<std::size_t>(gold[t])] += 0.5;
  return q;
}

// Summed per-step cross entropy of probability vectors against either hard
// one-hot targets or the mixed soft targets above. Expects one probability
// vector per gold herb plus, when include_eos is set, one for the terminal
// EOS step. Probabilities are clamped at 1e-12 before the log.
inline Tensor sequence_loss(const std::vector<Tensor>& step_probs,
                            std::span<const int> gold, bool soft,
                            std::size_t herb_count, bool include_eos = true) {
  const std::size_t M = gold.size();
  if (M == 0) throw ContractError("sequence_loss: empty gold sequence");
  const std::size_t steps = M + (include_eos ? 1 : 0);
  if (step_probs.size() != steps)
    throw ContractError("sequence_loss: got " +
                        std::to_string(step_probs.size()) +
                        " probability vectors for " + std::to_string(steps) +
                        " steps");
  Tensor total;
  for (std::size_t t = 0; t < steps; ++t) {
    if (step_probs[t].size() != herb_count + 1)
      throw ContractError("sequence_loss: probability vector at step " +
                          std::to_string(t) + " has wrong width");
    std::vector<double> q;
    if (soft) {
      q = soft_target(gold, herb_count, t);
    } else {
      q.assign(herb_count + 1, 0.0);
      const std::size_t target =
          t < M ? static_cast<std::size_t>(gold[t]) : herb_count;
      if (t < M && (gold[t] < 0 || target >= herb_count))
        throw ContractError("sequence_loss: gold token " +
                            std::to_string(gold[t]) + " is not a herb index");
      q[target] = 1.0;
    }
    Tensor step = cross_entropy(step_probs[t], q);
    total = t == 0 ? step : add(total, step);
  }
  return total;
}

// Sequence-to-set generator: bidirectional GRU encoder, additive attention,
// GRU decoder whose input is [E(y_prev) ; context ; coverage], and a softmax
// over herbs + EOS. Coverage is a tanh projection of the emitted multi-hot;
// it feeds the decoder input only and never modulates the attention weights.
class Seq2SetModel {
 public:
  Seq2SetModel(const ModelConfig& config, Rng& rng) : cfg_(config) {
    cfg_.validate();
    const std::size_t d = cfg_.embed_dim;
    const std::size_t H = cfg_.hidden_dim;
    const std::size_t V = cfg_.herb_count;

    encoder_ = EncoderParams::init(cfg_.source_vocab_size, d, H, rng, "enc");
    bridge_w_ = Tensor::glorot(2 * H, H, rng).mark_parameter("bridge.w");
    bridge_b_ = Tensor::zeros(1, H).mark_parameter("bridge.b");
    attn_w_ = Tensor::glorot(H, H, rng).mark_parameter("attn.w");
    attn_u_ = Tensor::glorot(2 * H, H, rng).mark_parameter("attn.u");
    attn_b_ = Tensor::zeros(1, H).mark_parameter("attn.b");
    attn_v_ = Tensor::glorot(H, 1, rng).mark_parameter("attn.v");
    dec_embed_ = Tensor::glorot(V + 2, d, rng).mark_parameter("dec.embed");
    const std::size_t dec_in = d + 2 * H + (cfg_.coverage ? H : 0);
    dec_gru_ = GruParams::init(dec_in, H, rng, "dec.gru");
    if (cfg_.coverage) {
      cov_w_ = Tensor::glorot(V, H, rng).mark_parameter("cov.w");
      cov_b_ = Tensor::zeros(1, H).mark_parameter("cov.b");
    }
    out_w_ = Tensor::glorot(H, V + 1, rng).mark_parameter("out.w");
    out_b_ = Tensor::zeros(1, V + 1).mark_parameter("out.b");
  }

  const ModelConfig& config() const { return cfg_; }

  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    auto out = encoder_.named_parameters();
    const auto push = [&out](const Tensor& t) { out.emplace_back(t.name(), t); };
    push(bridge_w_);
    push(bridge_b_);
    push(attn_w_);
    push(attn_u_);
    push(attn_b_);
    push(attn_v_);
    push(dec_embed_);
    for (const auto& t : dec_gru_.parameters()) push(t);
    if (cfg_.coverage) {
      push(cov_w_);
      push(cov_b_);
    }
    push(out_w_);
    push(out_b_);
    return out;
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  // Overwrites parameter values from a name -> values map (checkpoint load).
  void load_parameters(const std::map<std::string, std::vector<double>>& data) {
    for (auto& [name, tensor] : named_parameters()) {
      const auto it = data.find(name);
      if (it == data.end())
        throw DataError("model: checkpoint is missing parameter '" + name + "'");
      Tensor t = tensor;
      if (it->second.size() != t.size())
        throw DataError("model: checkpoint parameter '" + name +
                        "' has wrong size");
      t.mutable_value() = it->second;
    }
  }

  EncodedSource encode(std::span<const int> source_ids) const {
    return encode_source(source_ids, encoder_);
  }

  // Bridge: s_0 = tanh([final_fwd ; final_bwd] W + b).
  DecoderState initial_state(const EncodedSource& enc) const {
    DecoderState state;
    state.s = tanh(add(
        matmul(concat_cols({enc.final_forward, enc.final_backward}), bridge_w_),
        bridge_b_));
    state.emitted_mask.assign(cfg_.herb_count, 0.0);
    return state;
  }

  // Additive attention: e_j = v^T tanh(W s_prev + U state_j + b),
  // alpha = softmax(e), context = sum_j alpha_j state_j.
  std::pair<Tensor, Tensor> attend(const Tensor& s_prev,
                                   const EncodedSource& enc) const {
    if (!enc.attn_proj.defined())
      enc.attn_proj = matmul(enc.states, attn_u_);
    Tensor hidden = add_rowwise(
        add_rowwise(enc.attn_proj, matmul(s_prev, attn_w_)), attn_b_);
    Tensor scores = matmul(tanh(hidden), attn_v_);  // T x 1
    Tensor alpha = softmax(reshape(scores, 1, enc.length));
    Tensor context = matmul(alpha, enc.states);  // 1 x 2H
    return {context, alpha};
  }

  // a = tanh(D W + b) for the multi-hot emitted mask D (row convention).
  Tensor coverage_vector(std::span<const double> emitted_mask) const {
    if (!cfg_.coverage)
      throw ConfigError("model: coverage vector requested but coverage is off");
    if (emitted_mask.size() != cfg_.herb_count)
      throw ContractError("coverage: mask has size " +
                          std::to_string(emitted_mask.size()) + ", expected " +
                          std::to_string(cfg_.herb_count));
    for (const double v : emitted_mask)
      if (v != 0.0 && v != 1.0)
        throw ContractError("coverage: mask must be binary");
    Tensor d = Tensor::matrix(
        1, cfg_.herb_count,
        std::vector<double>(emitted_mask.begin(), emitted_mask.end()));
    return tanh(add(matmul(d, cov_w_), cov_b_));
  }

  // One decoder step on input token y_prev (a herb index or BOS). Returns the
  // advanced state and the probability vector over herbs + EOS. Does not
  // record any emission; callers decide what was emitted.
  std::pair<DecoderState, Tensor> decode_step(const DecoderState& state,
                                              int y_prev,
                                              const EncodedSource& enc) const {
    if (state.step >= cfg_.max_decode_len)
      throw DecodeLengthError("decode: step " + std::to_string(state.step) +
                              " reached max_decode_len " +
                              std::to_string(cfg_.max_decode_len));
    if (y_prev < 0 || y_prev > cfg_.bos())
      throw InputError("decode: input token " + std::to_string(y_prev) +
                       " out of range");
    if (y_prev == cfg_.eos())
      throw InputError("decode: EOS cannot be a decoder input");

    auto [context, alpha] = attend(state.s, enc);
    std::vector<Tensor> parts = {
        row(dec_embed_, static_cast<std::size_t>(y_prev)), context};
    DecoderState next;
    next.emitted_mask = state.emitted_mask;
    next.emitted = state.emitted;
    next.step = state.step + 1;
    if (cfg_.coverage) {
      next.coverage = coverage_vector(state.emitted_mask);
      parts.push_back(next.coverage);
    }
    next.s = gru_cell(concat_cols(parts), state.s, dec_gru_);
    Tensor probs = softmax(add(matmul(next.s, out_w_), out_b_));
    return {std::move(next), std::move(probs)};
  }

  // Teacher-forced loss for one record. Gold sequences longer than
  // max_decode_len are truncated and lose their EOS step (the sequence does
  // not really end inside the window).
  Tensor record_loss(std::span<const int> source_ids,
                     std::span<const int> gold) const {
    if (gold.empty()) throw InputError("record_loss: empty gold herb list");
    const bool truncated = gold.size() > cfg_.max_decode_len;
    const std::span<const int> effective =
        truncated ? gold.subspan(0, cfg_.max_decode_len) : gold;

    const EncodedSource enc = encode(source_ids);
    DecoderState state = initial_state(enc);
    std::vector<Tensor> step_probs;
    step_probs.reserve(effective.size() + 1);
    int prev = cfg_.bos();
    for (std::size_t t = 0; t < effective.size(); ++t) {
      auto [next, probs] = decode_step(state, prev, enc);
      state = std::move(next);
      step_probs.push_back(std::move(probs));
      state.record_emission(effective[t]);
      prev = effective[t];
    }
    if (!truncated) {
      auto [next, probs] = decode_step(state, prev, enc);
      state = std::move(next);
      step_probs.push_back(std::move(probs));
    }
    return sequence_loss(step_probs, effective, cfg_.soft_loss,
                         cfg_.herb_count, !truncated);
  }

  // One optimization step on a batch: mean record loss, backward, Adam.
  // Returns the loss computed with the pre-update parameters.
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
      Tensor loss = record_loss(batch[i].first, batch[i].second);
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

  // Greedy decoding. Stops at EOS or after max_decode_len emissions; builds
  // no autograd graph.
  GenerationResult generate(std::span<const int> source_ids) const {
    NoGradGuard off;
    const EncodedSource enc = encode(source_ids);
    DecoderState state = initial_state(enc);
    GenerationResult result;
    int prev = cfg_.bos();
    while (state.step < cfg_.max_decode_len) {
      auto [next, probs] = decode_step(state, prev, enc);
      state = std::move(next);
      const int token = static_cast<int>(argmax(probs.value()));
      if (token == cfg_.eos()) break;
      result.raw.push_back(token);
      state.record_emission(token);
      prev = token;
    }
    std::vector<bool> seen(cfg_.herb_count, false);
    for (const int token : result.raw) {
      if (!seen[static_cast<std::size_t>(token)]) {
        seen[static_cast<std::size_t>(token)] = true;
        result.unique.push_back(token);
      }
    }
    return result;
  }

 private:
  ModelConfig cfg_;
  EncoderParams encoder_;
  Tensor bridge_w_, bridge_b_;
  Tensor attn_w_, attn_u_, attn_b_, attn_v_;
  Tensor dec_embed_;
  GruParams dec_gru_;
  Tensor cov_w_, cov_b_;
  Tensor out_w_, out_b_;
};

}  // namespace seqset
