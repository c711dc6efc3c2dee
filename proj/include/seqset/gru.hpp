#pragma once

#include <string>
#include <vector>

#include "seqset/rng.hpp"
#include "seqset/tensor.hpp"

namespace seqset {

// Gated recurrent unit parameters (Cho et al. 2014). Weight shapes follow the
// row-vector convention used throughout: inputs are 1 x d_in, states 1 x H,
// so W_*: d_in x H, U_*: H x H, b_*: 1 x H.
struct GruParams {
  Tensor w_z, u_z, b_z;
  Tensor w_r, u_r, b_r;
  Tensor w_h, u_h, b_h;

  static GruParams init(std::size_t input_dim, std::size_t hidden_dim,
                        Rng& rng, const std::string& prefix) {
    GruParams p;
    p.w_z = Tensor::glorot(input_dim, hidden_dim, rng).mark_parameter(prefix + ".w_z");
    p.u_z = Tensor::glorot(hidden_dim, hidden_dim, rng).mark_parameter(prefix + ".u_z");
    p.b_z = Tensor::zeros(1, hidden_dim).mark_parameter(prefix + ".b_z");
    p.w_r = Tensor::glorot(input_dim, hidden_dim, rng).mark_parameter(prefix + ".w_r");
    p.u_r = Tensor::glorot(hidden_dim, hidden_dim, rng).mark_parameter(prefix + ".u_r");
    p.b_r = Tensor::zeros(1, hidden_dim).mark_parameter(prefix + ".b_r");
    p.w_h = Tensor::glorot(input_dim, hidden_dim, rng).mark_parameter(prefix + ".w_h");
    p.u_h = Tensor::glorot(hidden_dim, hidden_dim, rng).mark_parameter(prefix + ".u_h");
    p.b_h = Tensor::zeros(1, hidden_dim).mark_parameter(prefix + ".b_h");
    return p;
  }

  std::size_t input_dim() const { return w_z.rows(); }
  std::size_t hidden_dim() const { return w_z.cols(); }

  std::vector<Tensor> parameters() const {
    return {w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h};
  }
};

// One GRU step:
//   z = sigmoid(x W_z + h U_z + b_z)
//   r = sigmoid(x W_r + h U_r + b_r)
//   h~ = tanh(x W_h + (r . h) U_h + b_h)
//   h' = (1 - z) . h + z . h~
// x: 1 x d_in, h_prev: 1 x H -> 1 x H.
inline Tensor gru_cell(const Tensor& x, const Tensor& h_prev,
                       const GruParams& p) {
  if (x.rows() != 1 || x.cols() != p.input_dim())
    throw DimensionError("gru_cell: input shape " +
                         detail::shape_str(x.shape()) + " does not match W " +
                         detail::shape_str(p.w_z.shape()));
  if (h_prev.rows() != 1 || h_prev.cols() != p.hidden_dim())
    throw DimensionError("gru_cell: state shape " +
                         detail::shape_str(h_prev.shape()) +
                         " does not match U " +
                         detail::shape_str(p.u_z.shape()));
  Tensor z = sigmoid(add(add(matmul(x, p.w_z), matmul(h_prev, p.u_z)), p.b_z));
  Tensor r = sigmoid(add(add(matmul(x, p.w_r), matmul(h_prev, p.u_r)), p.b_r));
  Tensor candidate =
      tanh(add(add(matmul(x, p.w_h), matmul(mul(r, h_prev), p.u_h)), p.b_h));
  // (1 - z) . h_prev + z . h~  ==  h_prev + z . (h~ - h_prev)
  Tensor delta = add(candidate, scale(h_prev, -1.0));
  return add(h_prev, mul(z, delta));
}

}  // namespace seqset
