#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "seqset/errors.hpp"
#include "seqset/rng.hpp"

namespace seqset {

class Tensor;

namespace detail {

struct Node {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  std::string name;  // set for parameters, used in diagnostics
  std::vector<std::shared_ptr<Node>> parents;
  // Pulls from this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  std::size_t size() const { return value.size(); }
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const {
    if (shape.empty()) return value.size();
    return shape.size() == 2 ? shape[1] : shape[0];
  }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Graph recording can be suspended (inference, finite differences); ops then
// produce constant outputs with no parents.
inline bool& recording_flag() {
  thread_local bool recording = true;
  return recording;
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

}  // namespace detail

// Suspends autograd recording for its lifetime (thread local).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::recording_flag()) {
    detail::recording_flag() = false;
  }
  ~NoGradGuard() { detail::recording_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// A dense 64-bit float tensor participating in a reverse-mode autograd tape.
// Copies are shallow (shared node); rank is 1 or 2. Rank-1 tensors behave as
// row vectors wherever a matrix is expected.
class Tensor {
 public:
  Tensor() = default;

  static Tensor vector(std::vector<double> values) {
    return make({values.size()}, std::move(values));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values) {
    if (values.size() != rows * cols) {
      throw DimensionError("tensor: " + std::to_string(values.size()) +
                           " values cannot fill shape " +
                           detail::shape_str({rows, cols}));
    }
    return make({rows, cols}, std::move(values));
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return make({rows, cols}, std::vector<double>(rows * cols, 0.0));
  }

  static Tensor scalar(double v) { return make({1, 1}, {v}); }

  // Uniform values in [-limit, limit], drawn row major.
  static Tensor uniform(std::size_t rows, std::size_t cols, double limit,
                        Rng& rng) {
    std::vector<double> values(rows * cols);
    for (auto& v : values) v = rng.uniform(-limit, limit);
    return make({rows, cols}, std::move(values));
  }

  // Glorot/Xavier uniform: limit = sqrt(6 / (fan_in + fan_out)).
  static Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform(fan_in, fan_out, limit, rng);
  }

  Tensor& mark_parameter(const std::string& name) {
    node_->requires_grad = true;
    node_->name = name;
    node_->ensure_grad();
    return *this;
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->rows(); }
  std::size_t cols() const { return node_->cols(); }
  std::size_t size() const { return node_->size(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }

  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& mutable_value() { return node_->value; }
  const std::vector<double>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  std::vector<double>& mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

  double item() const {
    if (size() != 1)
      throw DimensionError("tensor: item() on shape " +
                           detail::shape_str(shape()));
    return node_->value[0];
  }
  double at(std::size_t r, std::size_t c) const {
    return node_->value[r * cols() + c];
  }

  std::shared_ptr<detail::Node> node() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  static Tensor make(std::vector<std::size_t> shape,
                     std::vector<double> values) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    return wrap(std::move(node));
  }

  std::shared_ptr<detail::Node> node_;
};

namespace detail {

// Shared construction path for every differentiable op. When recording is off
// (or no parent needs gradients) the node is a plain constant.
inline Tensor make_op(std::vector<std::size_t> shape,
                      std::vector<double> value,
                      std::vector<Tensor> parents,
                      std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool any_grad = false;
  for (const auto& p : parents) any_grad = any_grad || p.requires_grad();
  if (recording_flag() && any_grad) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor::wrap(std::move(node));
}

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes disagree: " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

inline void require_vector_like(const Tensor& t, const char* op) {
  if (t.size() == 0)
    throw DimensionError(std::string(op) + ": empty input");
  if (t.rows() != 1)
    throw DimensionError(std::string(op) + ": expected a vector, got shape " +
                         shape_str(t.shape()));
}

}  // namespace detail

// out = a . b for a: m x k, b: k x n.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions disagree: " +
                         detail::shape_str(a.shape()) + " vs " +
                         detail::shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return detail::make_op(
      {m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          pa.ensure_grad();
          // dA = dOut . B^T
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              const double* grow = self.grad.data() + i * n;
              const double* brow = pb.value.data() + p * n;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              pa.grad[i * k + p] += acc;
            }
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          // dB = A^T . dOut
          for (std::size_t p = 0; p < k; ++p)
            for (std::size_t i = 0; i < m; ++i) {
              const double aip = pa.value[i * k + p];
              if (aip == 0.0) continue;
              const double* grow = self.grad.data() + i * n;
              double* brow = pb.grad.data() + p * n;
              for (std::size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
            }
        }
      });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.value()[i] + b.value()[i];
  return detail::make_op(a.shape(), std::move(out), {a, b},
                         [](detail::Node& self) {
                           for (int side = 0; side < 2; ++side) {
                             auto& p = *self.parents[side];
                             if (!p.requires_grad) continue;
                             p.ensure_grad();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               p.grad[i] += self.grad[i];
                           }
                         });
}

// m: r x c plus a row vector broadcast over every row.
inline Tensor add_rowwise(const Tensor& m, const Tensor& row) {
  const std::size_t r = m.rows(), c = m.cols();
  if (row.rows() != 1 || row.cols() != c) {
    throw DimensionError("add_rowwise: cannot broadcast " +
                         detail::shape_str(row.shape()) + " over " +
                         detail::shape_str(m.shape()));
  }
  std::vector<double> out(m.value());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += row.value()[j];
  return detail::make_op(
      {r, c}, std::move(out), {m, row}, [r, c](detail::Node& self) {
        auto& pm = *self.parents[0];
        auto& pr = *self.parents[1];
        if (pm.requires_grad) {
          pm.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            pm.grad[i] += self.grad[i];
        }
        if (pr.requires_grad) {
          pr.ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              pr.grad[j] += self.grad[i * c + j];
        }
      });
}

// Elementwise (Hadamard) product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.value()[i] * b.value()[i];
  return detail::make_op(a.shape(), std::move(out), {a, b},
                         [](detail::Node& self) {
                           auto& pa = *self.parents[0];
                           auto& pb = *self.parents[1];
                           if (pa.requires_grad) {
                             pa.ensure_grad();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               pa.grad[i] += self.grad[i] * pb.value[i];
                           }
                           if (pb.requires_grad) {
                             pb.ensure_grad();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               pb.grad[i] += self.grad[i] * pa.value[i];
                           }
                         });
}

inline Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  return detail::make_op(a.shape(), std::move(out), {a},
                         [factor](detail::Node& self) {
                           auto& p = *self.parents[0];
                           if (!p.requires_grad) return;
                           p.ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             p.grad[i] += self.grad[i] * factor;
                         });
}

inline Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.value()[i];
    // Branch keeps exp() argument non-positive for stability.
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  return detail::make_op(a.shape(), std::move(out), {a},
                         [](detail::Node& self) {
                           auto& p = *self.parents[0];
                           if (!p.requires_grad) return;
                           p.ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             const double y = self.value[i];
                             p.grad[i] += self.grad[i] * y * (1.0 - y);
                           }
                         });
}

inline Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.value()[i]);
  return detail::make_op(a.shape(), std::move(out), {a},
                         [](detail::Node& self) {
                           auto& p = *self.parents[0];
                           if (!p.requires_grad) return;
                           p.ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             const double y = self.value[i];
                             p.grad[i] += self.grad[i] * (1.0 - y * y);
                           }
                         });
}

// Softmax over a single distribution (rank-1 or 1 x n). Max subtraction keeps
// exp() in range for any finite input.
inline Tensor softmax(const Tensor& a) {
  detail::require_vector_like(a, "softmax");
  const std::size_t n = a.size();
  const double mx = *std::max_element(a.value().begin(), a.value().end());
  std::vector<double> out(n);
  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(a.value()[i] - mx);
    denom += out[i];
  }
  for (auto& v : out) v /= denom;
  return detail::make_op(a.shape(), std::move(out), {a},
                         [](detail::Node& self) {
                           auto& p = *self.parents[0];
                           if (!p.requires_grad) return;
                           p.ensure_grad();
                           double dot = 0.0;
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             dot += self.grad[i] * self.value[i];
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             p.grad[i] +=
                                 self.value[i] * (self.grad[i] - dot);
                         });
}

// Horizontal concatenation of vectors: (1 x a, 1 x b, ...) -> 1 x (a+b+...).
inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  std::vector<double> out;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    detail::require_vector_like(p, "concat_cols");
    widths.push_back(p.size());
    out.insert(out.end(), p.value().begin(), p.value().end());
  }
  const std::size_t total = out.size();
  return detail::make_op(
      {std::size_t{1}, total}, std::move(out), parts,
      [widths](detail::Node& self) {
        std::size_t offset = 0;
        for (std::size_t s = 0; s < self.parents.size(); ++s) {
          auto& p = *self.parents[s];
          if (p.requires_grad) {
            p.ensure_grad();
            for (std::size_t i = 0; i < widths[s]; ++i)
              p.grad[i] += self.grad[offset + i];
          }
          offset += widths[s];
        }
      });
}

// Vertical stacking of equal-width vectors into a k x c matrix.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  const std::size_t c = rows.front().size();
  std::vector<double> out;
  out.reserve(rows.size() * c);
  for (const auto& r : rows) {
    detail::require_vector_like(r, "stack_rows");
    if (r.size() != c)
      throw DimensionError("stack_rows: widths disagree: " +
                           detail::shape_str(rows.front().shape()) + " vs " +
                           detail::shape_str(r.shape()));
    out.insert(out.end(), r.value().begin(), r.value().end());
  }
  return detail::make_op({rows.size(), c}, std::move(out), rows,
                         [c](detail::Node& self) {
                           for (std::size_t s = 0; s < self.parents.size();
                                ++s) {
                             auto& p = *self.parents[s];
                             if (!p.requires_grad) continue;
                             p.ensure_grad();
                             for (std::size_t i = 0; i < c; ++i)
                               p.grad[i] += self.grad[s * c + i];
                           }
                         });
}

// Shape change without data movement; sizes must match.
inline Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.size())
    throw DimensionError("reshape: cannot view " +
                         detail::shape_str(a.shape()) + " as " +
                         detail::shape_str({rows, cols}));
  return detail::make_op({rows, cols}, a.value(), {a},
                         [](detail::Node& self) {
                           auto& p = *self.parents[0];
                           if (!p.requires_grad) return;
                           p.ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             p.grad[i] += self.grad[i];
                         });
}

// Row slice of a matrix (embedding lookup); gradient scatters back.
inline Tensor row(const Tensor& m, std::size_t index) {
  const std::size_t c = m.cols();
  if (m.shape().size() != 2 || index >= m.rows())
    throw DimensionError("row: index " + std::to_string(index) +
                         " out of range for " + detail::shape_str(m.shape()));
  std::vector<double> out(m.value().begin() + index * c,
                          m.value().begin() + (index + 1) * c);
  return detail::make_op({std::size_t{1}, c}, std::move(out), {m},
                         [index, c](detail::Node& self) {
                           auto& p = *self.parents[0];
                           if (!p.requires_grad) return;
                           p.ensure_grad();
                           for (std::size_t i = 0; i < c; ++i)
                             p.grad[index * c + i] += self.grad[i];
                         });
}

// Cross entropy of a probability vector against a fixed target distribution:
// -sum_v q[v] * log(max(p[v], clamp)). Entries below the clamp contribute a
// constant and therefore zero gradient.
inline Tensor cross_entropy(const Tensor& p, const std::vector<double>& q,
                            double clamp = 1e-12) {
  detail::require_vector_like(p, "cross_entropy");
  if (p.size() != q.size())
    throw DimensionError("cross_entropy: " + detail::shape_str(p.shape()) +
                         " vs target of length " + std::to_string(q.size()));
  double loss = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == 0.0) continue;
    loss -= q[i] * std::log(std::max(p.value()[i], clamp));
  }
  return detail::make_op(
      {std::size_t{1}, std::size_t{1}}, {loss}, {p},
      [q, clamp](detail::Node& self) {
        auto& parent = *self.parents[0];
        if (!parent.requires_grad) return;
        parent.ensure_grad();
        const double upstream = self.grad[0];
        for (std::size_t i = 0; i < q.size(); ++i) {
          if (q[i] == 0.0) continue;
          if (parent.value[i] > clamp)
            parent.grad[i] -= upstream * q[i] / parent.value[i];
        }
      });
}

// Reverse-mode sweep from a scalar root. Gradients accumulate (+=) into every
// reachable node that requires them; parameters keep their grads until
// zero_grad().
inline void backward(const Tensor& root) {
  if (root.size() != 1)
    throw DimensionError("backward: root must be a scalar, got " +
                         detail::shape_str(root.shape()));
  if (!root.requires_grad()) return;

  // Iterative post-order topological sort over the parent DAG.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad();
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward) {
      node->ensure_grad();
      node->backward(*node);
    }
  }
}

inline std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;  // ties keep the lowest index
  return best;
}

}  // namespace seqset
