#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqset/gru.hpp"
#include "seqset/rng.hpp"
#include "seqset/tensor.hpp"

namespace seqset {

// Bidirectional GRU encoder shared by the generator and the multi-label
// baseline: one embedding table and two independent GRUs, one per direction.
struct EncoderParams {
  Tensor embed;  // S x d
  GruParams fwd;
  GruParams bwd;

  static EncoderParams init(std::size_t vocab_size, std::size_t embed_dim,
                            std::size_t hidden_dim, Rng& rng,
                            const std::string& prefix) {
    EncoderParams p;
    p.embed = Tensor::glorot(vocab_size, embed_dim, rng)
                  .mark_parameter(prefix + ".embed");
    p.fwd = GruParams::init(embed_dim, hidden_dim, rng, prefix + ".fwd");
    p.bwd = GruParams::init(embed_dim, hidden_dim, rng, prefix + ".bwd");
    return p;
  }

  std::size_t vocab_size() const { return embed.rows(); }
  std::size_t hidden_dim() const { return fwd.hidden_dim(); }

  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back(embed.name(), embed);
    for (const auto& t : fwd.parameters()) out.emplace_back(t.name(), t);
    for (const auto& t : bwd.parameters()) out.emplace_back(t.name(), t);
    return out;
  }
};

// Encoder output for one source sequence. `states` row t is the concatenated
// pair [forward_t ; backward_t]. `final_forward`/`final_backward` are each
// direction's last computed state (both have seen the whole sequence).
// attn_proj caches the attention projection of `states`; it belongs to this
// forward pass and assumes parameter values stay fixed while it is alive.
struct EncodedSource {
  Tensor states;  // T x 2H
  std::size_t length = 0;
  Tensor final_forward;   // 1 x H
  Tensor final_backward;  // 1 x H
  mutable Tensor attn_proj;  // T x H, lazily filled by attention
};

// Runs both directions from zero initial states. Both passes share the same
// embedding lookup per position.
inline EncodedSource encode_source(std::span<const int> ids,
                                   const EncoderParams& params) {
  if (ids.empty()) throw InputError("encode: empty source sequence");
  const std::size_t vocab = params.vocab_size();
  for (const int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw InputError("encode: token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(vocab));

  const std::size_t T = ids.size();
  const std::size_t H = params.hidden_dim();
  std::vector<Tensor> inputs(T);
  for (std::size_t t = 0; t < T; ++t)
    inputs[t] = row(params.embed, static_cast<std::size_t>(ids[t]));

  std::vector<Tensor> forward(T), backward(T);
  Tensor h = Tensor::zeros(1, H);
  for (std::size_t t = 0; t < T; ++t) {
    h = gru_cell(inputs[t], h, params.fwd);
    forward[t] = h;
  }
  Tensor hb = Tensor::zeros(1, H);
  for (std::size_t t = T; t-- > 0;) {
    hb = gru_cell(inputs[t], hb, params.bwd);
    backward[t] = hb;
  }

  std::vector<Tensor> rows;
  rows.reserve(T);
  for (std::size_t t = 0; t < T; ++t)
    rows.push_back(concat_cols({forward[t], backward[t]}));

  EncodedSource out;
  out.states = stack_rows(rows);
  out.length = T;
  out.final_forward = forward[T - 1];
  out.final_backward = backward[0];
  return out;
}

}  // namespace seqset
