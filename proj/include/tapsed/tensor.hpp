// Copyright 2026 The tapsed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal dense-tensor substrate with reverse-mode differentiation.
//
// Forward ops are free functions taking an optional Tape. When a tape is
// supplied, each op appends a record whose closure scatters the output
// gradient back into its inputs; Tape::backward replays the records in
// reverse. Only the operations the SED network needs are provided; there is
// no general broadcasting. Single-threaded by contract: one graph, one
// thread. Reductions accumulate in double regardless of the element type.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tapsed {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] inline void tensor_fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

#define TAPSED_CHECK(cond, msg)                     \
  do {                                              \
    if (!(cond)) ::tapsed::tensor_fail(msg);        \
  } while (0)

template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;   // allocated on demand
  bool tracked = false;  // gradients flow into this node

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value.assign(shape_numel(t.node_->shape), T(0));
    return t;
  }

  static Tensor full(Shape shape, T fill) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data().begin(), t.data().end(), fill);
    return t;
  }

  static Tensor scalar(T v) { return full({1}, v); }

  static Tensor from(Shape shape, std::vector<T> values) {
    TAPSED_CHECK(shape_numel(shape) == static_cast<int64_t>(values.size()),
                 "tensor: " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
  int64_t extent(size_t axis) const { return node_->shape.at(axis); }
  size_t rank() const { return node_->shape.size(); }

  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }
  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  void zero_grad() {
    if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  // Gradient buffers are lazy: tracked tensors get theirs the first time a
  // taped op touches them, so a model that only ever runs off-tape (the EMA
  // teacher) never allocates gradients.
  bool tracked() const { return node_ && node_->tracked; }
  void set_tracked(bool on) { node_->tracked = on; }

  std::shared_ptr<TensorNode<T>> node() const { return node_; }

  T item() const {
    TAPSED_CHECK(numel() == 1, "item: tensor has " + std::to_string(numel()) +
                                   " elements");
    return node_->value[0];
  }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Reverse-mode tape: an explicit list of op records replayed backwards.
template <class T>
class Tape {
 public:
  void record(std::function<void()> backward) {
    records_.push_back(std::move(backward));
  }

  size_t size() const { return records_.size(); }

  // Seeds d(root)/d(root) = 1 and propagates through every recorded op.
  void backward(Tensor<T>& root) {
    TAPSED_CHECK(root.numel() == 1, "backward: root must be scalar");
    root.grad()[0] = T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  }

  void clear() { records_.clear(); }

 private:
  std::vector<std::function<void()>> records_;
};

namespace detail {

template <class T>
Tensor<T> make_output(Tape<T>* tape, Shape shape) {
  Tensor<T> out = Tensor<T>::zeros(std::move(shape));
  if (tape) {
    out.set_tracked(true);
    out.grad();  // closures read the output gradient unconditionally
  }
  return out;
}

// Inputs that were created off-tape (labels, detached teacher outputs) keep
// tracked == false and the closures skip them.
template <class T>
void prepare_input(Tape<T>* tape, const Tensor<T>& x) {
  if (tape && x.tracked()) const_cast<Tensor<T>&>(x).grad();
}

inline std::vector<int64_t> strides_of(const Shape& s) {
  std::vector<int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * s[i + 1];
  return st;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <class T, class Fwd, class Bwd>
Tensor<T> pointwise_unary(Tape<T>* tape, const Tensor<T>& x, Fwd f, Bwd dfdx) {
  detail::prepare_input(tape, x);
  Tensor<T> out = detail::make_output(tape, x.shape());
  const auto& xv = x.data();
  auto& ov = out.data();
  for (size_t i = 0; i < xv.size(); ++i) ov[i] = f(xv[i]);
  if (tape) {
    auto xn = x.node();
    auto on = out.node();
    tape->record([xn, on, dfdx] {
      if (!xn->tracked) return;
      for (size_t i = 0; i < xn->value.size(); ++i)
        xn->grad[i] += on->grad[i] * dfdx(xn->value[i], on->value[i]);
    });
  }
  return out;
}

template <class T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& x) {
  return pointwise_unary(
      tape, x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x) {
  return pointwise_unary(
      tape, x,
      [](T v) {
        return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                         : std::exp(v) / (T(1) + std::exp(v));
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> tanh_op(Tape<T>* tape, const Tensor<T>& x) {
  return pointwise_unary(
      tape, x, [](T v) { return std::tanh(v); },
      [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& x, T c) {
  return pointwise_unary(
      tape, x, [c](T v) { return c * v; }, [c](T, T) { return c; });
}

template <class T, class Fwd>
Tensor<T> pointwise_binary(Tape<T>* tape, const Tensor<T>& a,
                           const Tensor<T>& b, Fwd f,
                           std::function<void(const TensorNode<T>&,
                                              const TensorNode<T>&,
                                              TensorNode<T>&, TensorNode<T>&,
                                              const std::vector<T>&)>
                               bwd) {
  TAPSED_CHECK(a.shape() == b.shape(),
               "elementwise: shape mismatch " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
  detail::prepare_input(tape, a);
  detail::prepare_input(tape, b);
  Tensor<T> out = detail::make_output(tape, a.shape());
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.data();
  for (size_t i = 0; i < av.size(); ++i) ov[i] = f(av[i], bv[i]);
  if (tape) {
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    tape->record([an, bn, on, bwd] { bwd(*an, *bn, *an, *bn, on->grad); });
  }
  return out;
}

template <class T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return pointwise_binary<T>(
      tape, a, b, [](T x, T y) { return x + y; },
      [](const TensorNode<T>&, const TensorNode<T>&, TensorNode<T>& an,
         TensorNode<T>& bn, const std::vector<T>& g) {
        if (an.tracked)
          for (size_t i = 0; i < g.size(); ++i) an.grad[i] += g[i];
        if (bn.tracked)
          for (size_t i = 0; i < g.size(); ++i) bn.grad[i] += g[i];
      });
}

template <class T>
Tensor<T> sub(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return pointwise_binary<T>(
      tape, a, b, [](T x, T y) { return x - y; },
      [](const TensorNode<T>&, const TensorNode<T>&, TensorNode<T>& an,
         TensorNode<T>& bn, const std::vector<T>& g) {
        if (an.tracked)
          for (size_t i = 0; i < g.size(); ++i) an.grad[i] += g[i];
        if (bn.tracked)
          for (size_t i = 0; i < g.size(); ++i) bn.grad[i] -= g[i];
      });
}

template <class T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return pointwise_binary<T>(
      tape, a, b, [](T x, T y) { return x * y; },
      [](const TensorNode<T>& ac, const TensorNode<T>& bc, TensorNode<T>& an,
         TensorNode<T>& bn, const std::vector<T>& g) {
        if (an.tracked)
          for (size_t i = 0; i < g.size(); ++i) an.grad[i] += g[i] * bc.value[i];
        if (bn.tracked)
          for (size_t i = 0; i < g.size(); ++i) bn.grad[i] += g[i] * ac.value[i];
      });
}

template <class T>
Tensor<T> div(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return pointwise_binary<T>(
      tape, a, b, [](T x, T y) { return x / y; },
      [](const TensorNode<T>& ac, const TensorNode<T>& bc, TensorNode<T>& an,
         TensorNode<T>& bn, const std::vector<T>& g) {
        if (an.tracked)
          for (size_t i = 0; i < g.size(); ++i) an.grad[i] += g[i] / bc.value[i];
        if (bn.tracked)
          for (size_t i = 0; i < g.size(); ++i)
            bn.grad[i] -= g[i] * ac.value[i] / (bc.value[i] * bc.value[i]);
      });
}

// Inverted dropout with a caller-provided keep mask; identity when the mask
// is empty (eval mode).
template <class T>
Tensor<T> dropout(Tape<T>* tape, const Tensor<T>& x,
                  const std::vector<uint8_t>& keep, double keep_prob) {
  if (keep.empty()) return x;
  TAPSED_CHECK(keep.size() == x.data().size(), "dropout: mask size mismatch");
  detail::prepare_input(tape, x);
  Tensor<T> out = detail::make_output(tape, x.shape());
  const T inv = static_cast<T>(1.0 / keep_prob);
  const auto& xv = x.data();
  auto& ov = out.data();
  for (size_t i = 0; i < xv.size(); ++i) ov[i] = keep[i] ? xv[i] * inv : T(0);
  if (tape) {
    auto xn = x.node();
    auto on = out.node();
    tape->record([xn, on, keep, inv] {
      if (!xn->tracked) return;
      for (size_t i = 0; i < keep.size(); ++i)
        if (keep[i]) xn->grad[i] += on->grad[i] * inv;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& x, Shape shape) {
  TAPSED_CHECK(shape_numel(shape) == x.numel(),
               "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  detail::prepare_input(tape, x);
  Tensor<T> out = detail::make_output(tape, shape);
  out.data() = x.data();
  if (tape) {
    auto xn = x.node();
    auto on = out.node();
    tape->record([xn, on] {
      if (!xn->tracked) return;
      for (size_t i = 0; i < xn->value.size(); ++i) xn->grad[i] += on->grad[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> permute(Tape<T>* tape, const Tensor<T>& x,
                  const std::vector<int>& perm) {
  TAPSED_CHECK(perm.size() == x.rank(), "permute: rank mismatch");
  Shape out_shape(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = x.extent(perm[i]);
  detail::prepare_input(tape, x);
  Tensor<T> out = detail::make_output(tape, out_shape);
  const auto in_strides = detail::strides_of(x.shape());
  const auto out_strides = detail::strides_of(out_shape);
  const int64_t n = x.numel();
  const size_t r = perm.size();
  std::vector<int64_t> src_of(n);
  std::vector<int64_t> idx(r, 0);
  for (int64_t o = 0; o < n; ++o) {
    int64_t src = 0;
    for (size_t d = 0; d < r; ++d) src += idx[d] * in_strides[perm[d]];
    src_of[o] = src;
    out.data()[o] = x.data()[src];
    for (int d = static_cast<int>(r) - 1; d >= 0; --d) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  if (tape) {
    auto xn = x.node();
    auto on = out.node();
    tape->record([xn, on, src_of = std::move(src_of)] {
      if (!xn->tracked) return;
      for (size_t o = 0; o < src_of.size(); ++o)
        xn->grad[src_of[o]] += on->grad[o];
    });
  }
  return out;
}

template <class T>
Tensor<T> slice_axis(Tape<T>* tape, const Tensor<T>& x, size_t axis,
                     int64_t start, int64_t len) {
  TAPSED_CHECK(axis < x.rank(), "slice: axis out of range");
  TAPSED_CHECK(start >= 0 && start + len <= x.extent(axis),
               "slice: range [" + std::to_string(start) + "," +
                   std::to_string(start + len) + ") exceeds extent " +
                   std::to_string(x.extent(axis)));
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  detail::prepare_input(tape, x);
  Tensor<T> out = detail::make_output(tape, out_shape);
  const auto st = detail::strides_of(x.shape());
  int64_t outer = 1, inner = st[axis];
  for (size_t d = 0; d < axis; ++d) outer *= x.extent(d);
  const int64_t in_axis = x.extent(axis);
  const auto& xv = x.data();
  auto& ov = out.data();
  for (int64_t a = 0; a < outer; ++a)
    for (int64_t j = 0; j < len; ++j)
      std::copy_n(&xv[(a * in_axis + start + j) * inner], inner,
                  &ov[(a * len + j) * inner]);
  if (tape) {
    auto xn = x.node();
    auto on = out.node();
    tape->record([xn, on, outer, inner, in_axis, start, len] {
      if (!xn->tracked) return;
      for (int64_t a = 0; a < outer; ++a)
        for (int64_t j = 0; j < len; ++j) {
          const T* g = &on->grad[(a * len + j) * inner];
          T* dst = &xn->grad[(a * in_axis + start + j) * inner];
          for (int64_t i = 0; i < inner; ++i) dst[i] += g[i];
        }
    });
  }
  return out;
}

template <class T>
Tensor<T> concat_axis(Tape<T>* tape, const std::vector<Tensor<T>>& parts,
                      size_t axis) {
  TAPSED_CHECK(!parts.empty(), "concat: no inputs");
  Shape out_shape = parts[0].shape();
  int64_t total = 0;
  for (const auto& p : parts) {
    TAPSED_CHECK(p.rank() == out_shape.size(), "concat: rank mismatch");
    for (size_t d = 0; d < out_shape.size(); ++d)
      TAPSED_CHECK(d == axis || p.extent(d) == out_shape[d],
                   "concat: extent mismatch at axis " + std::to_string(d));
    total += p.extent(axis);
  }
  out_shape[axis] = total;
  for (const auto& p : parts) detail::prepare_input(tape, p);
  Tensor<T> out = detail::make_output(tape, out_shape);
  int64_t outer = 1;
  for (size_t d = 0; d < axis; ++d) outer *= out_shape[d];
  int64_t inner = 1;
  for (size_t d = axis + 1; d < out_shape.size(); ++d) inner *= out_shape[d];
  auto& ov = out.data();
  int64_t offset = 0;
  for (const auto& p : parts) {
    const int64_t pa = p.extent(axis);
    const auto& pv = p.data();
    for (int64_t a = 0; a < outer; ++a)
      std::copy_n(&pv[a * pa * inner], pa * inner,
                  &ov[(a * total + offset) * inner]);
    offset += pa;
  }
  if (tape) {
    std::vector<std::shared_ptr<TensorNode<T>>> nodes;
    std::vector<int64_t> extents;
    for (const auto& p : parts) {
      nodes.push_back(p.node());
      extents.push_back(p.extent(axis));
    }
    auto on = out.node();
    tape->record([nodes, extents, on, outer, inner, total] {
      int64_t off = 0;
      for (size_t k = 0; k < nodes.size(); ++k) {
        auto& n = *nodes[k];
        const int64_t pa = extents[k];
        if (n.tracked) {
          for (int64_t a = 0; a < outer; ++a) {
            const T* g = &on->grad[(a * total + off) * inner];
            T* dst = &n.grad[a * pa * inner];
            for (int64_t i = 0; i < pa * inner; ++i) dst[i] += g[i];
          }
        }
        off += pa;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions (double accumulation regardless of T)
// ---------------------------------------------------------------------------

namespace detail {
template <class T>
Tensor<T> reduce_axis(Tape<T>* tape, const Tensor<T>& x, size_t axis,
                      bool mean) {
  TAPSED_CHECK(axis < x.rank(), "reduce: axis out of range");
  Shape out_shape;
  for (size_t d = 0; d < x.rank(); ++d)
    if (d != axis) out_shape.push_back(x.extent(d));
  if (out_shape.empty()) out_shape = {1};
  prepare_input(tape, x);
  Tensor<T> out = make_output(tape, out_shape);
  int64_t outer = 1;
  for (size_t d = 0; d < axis; ++d) outer *= x.extent(d);
  const int64_t n_axis = x.extent(axis);
  int64_t inner = 1;
  for (size_t d = axis + 1; d < x.rank(); ++d) inner *= x.extent(d);
  const T w = mean ? static_cast<T>(1.0 / static_cast<double>(n_axis)) : T(1);
  const auto& xv = x.data();
  auto& ov = out.data();
  for (int64_t a = 0; a < outer; ++a)
    for (int64_t i = 0; i < inner; ++i) {
      double acc = 0.0;
      for (int64_t j = 0; j < n_axis; ++j)
        acc += static_cast<double>(xv[(a * n_axis + j) * inner + i]);
      ov[a * inner + i] = static_cast<T>(acc) * w;
    }
  if (tape) {
    auto xn = x.node();
    auto on = out.node();
    tape->record([xn, on, outer, inner, n_axis, w] {
      if (!xn->tracked) return;
      for (int64_t a = 0; a < outer; ++a)
        for (int64_t j = 0; j < n_axis; ++j)
          for (int64_t i = 0; i < inner; ++i)
            xn->grad[(a * n_axis + j) * inner + i] +=
                on->grad[a * inner + i] * w;
    });
  }
  return out;
}
}  // namespace detail

template <class T>
Tensor<T> sum_axis(Tape<T>* tape, const Tensor<T>& x, size_t axis) {
  return detail::reduce_axis(tape, x, axis, false);
}

template <class T>
Tensor<T> mean_axis(Tape<T>* tape, const Tensor<T>& x, size_t axis) {
  return detail::reduce_axis(tape, x, axis, true);
}

template <class T>
Tensor<T> mean_all(Tape<T>* tape, const Tensor<T>& x) {
  Tensor<T> flat = reshape(tape, x, {x.numel()});
  return detail::reduce_axis(tape, flat, 0, true);
}

// ---------------------------------------------------------------------------
// Softmax along an arbitrary axis (max-shifted)
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> softmax_axis(Tape<T>* tape, const Tensor<T>& x, size_t axis) {
  TAPSED_CHECK(axis < x.rank(), "softmax: axis out of range");
  detail::prepare_input(tape, x);
  Tensor<T> out = detail::make_output(tape, x.shape());
  int64_t outer = 1;
  for (size_t d = 0; d < axis; ++d) outer *= x.extent(d);
  const int64_t n_axis = x.extent(axis);
  int64_t inner = 1;
  for (size_t d = axis + 1; d < x.rank(); ++d) inner *= x.extent(d);
  const auto& xv = x.data();
  auto& ov = out.data();
  for (int64_t a = 0; a < outer; ++a)
    for (int64_t i = 0; i < inner; ++i) {
      T m = xv[a * n_axis * inner + i];
      for (int64_t j = 1; j < n_axis; ++j)
        m = std::max(m, xv[(a * n_axis + j) * inner + i]);
      double z = 0.0;
      for (int64_t j = 0; j < n_axis; ++j) {
        const T e = std::exp(xv[(a * n_axis + j) * inner + i] - m);
        ov[(a * n_axis + j) * inner + i] = e;
        z += static_cast<double>(e);
      }
      const T invz = static_cast<T>(1.0 / z);
      for (int64_t j = 0; j < n_axis; ++j)
        ov[(a * n_axis + j) * inner + i] *= invz;
    }
  if (tape) {
    auto xn = x.node();
    auto on = out.node();
    tape->record([xn, on, outer, inner, n_axis] {
      if (!xn->tracked) return;
      for (int64_t a = 0; a < outer; ++a)
        for (int64_t i = 0; i < inner; ++i) {
          double dot = 0.0;
          for (int64_t j = 0; j < n_axis; ++j) {
            const int64_t k = (a * n_axis + j) * inner + i;
            dot += static_cast<double>(on->grad[k]) * on->value[k];
          }
          for (int64_t j = 0; j < n_axis; ++j) {
            const int64_t k = (a * n_axis + j) * inner + i;
            xn->grad[k] += on->value[k] * (on->grad[k] - static_cast<T>(dot));
          }
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear: y[n,m] = sum_d x[n,d] w[m,d] + b[m]
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> linear(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>* b) {
  TAPSED_CHECK(x.rank() == 2 && w.rank() == 2, "linear: expects 2-d operands");
  TAPSED_CHECK(x.extent(1) == w.extent(1),
               "linear: input width " + std::to_string(x.extent(1)) +
                   " does not match weight width " +
                   std::to_string(w.extent(1)));
  const int64_t n = x.extent(0), d = x.extent(1), m = w.extent(0);
  if (b) TAPSED_CHECK(b->numel() == m, "linear: bias length mismatch");
  detail::prepare_input(tape, x);
  detail::prepare_input(tape, w);
  if (b) detail::prepare_input(tape, *b);
  Tensor<T> out = detail::make_output(tape, {n, m});
  const auto& xv = x.data();
  const auto& wv = w.data();
  auto& ov = out.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) {
      double acc = b ? static_cast<double>(b->data()[j]) : 0.0;
      const T* xr = &xv[i * d];
      const T* wr = &wv[j * d];
      for (int64_t k = 0; k < d; ++k)
        acc += static_cast<double>(xr[k]) * wr[k];
      ov[i * m + j] = static_cast<T>(acc);
    }
  if (tape) {
    auto xn = x.node();
    auto wn = w.node();
    auto bn = b ? b->node() : nullptr;
    auto on = out.node();
    tape->record([xn, wn, bn, on, n, d, m] {
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) {
          const T g = on->grad[i * m + j];
          if (g == T(0)) continue;
          if (xn->tracked) {
            T* xg = &xn->grad[i * d];
            const T* wr = &wn->value[j * d];
            for (int64_t k = 0; k < d; ++k) xg[k] += g * wr[k];
          }
          if (wn->tracked) {
            T* wg = &wn->grad[j * d];
            const T* xr = &xn->value[i * d];
            for (int64_t k = 0; k < d; ++k) wg[k] += g * xr[k];
          }
          if (bn && bn->tracked) bn->grad[j] += g;
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv2d: same-padded cross-correlation, dilation on the frequency axis only.
// x [B,Ci,F,T], w [Co,Ci,kF,kT], optional bias [Co] -> [B,Co,F,T]
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>* bias, int64_t freq_dilation = 1) {
  TAPSED_CHECK(x.rank() == 4, "conv2d: input must be rank 4, got " +
                                  shape_str(x.shape()));
  TAPSED_CHECK(w.rank() == 4, "conv2d: weight must be rank 4, got " +
                                  shape_str(w.shape()));
  TAPSED_CHECK(freq_dilation >= 1, "conv2d: freq_dilation must be >= 1");
  const int64_t batch = x.extent(0), ci = x.extent(1), nf = x.extent(2),
                nt = x.extent(3);
  const int64_t co = w.extent(0), kf = w.extent(2), kt = w.extent(3);
  TAPSED_CHECK(w.extent(1) == ci,
               "conv2d: weight expects " + std::to_string(w.extent(1)) +
                   " input channels, input has " + std::to_string(ci));
  TAPSED_CHECK(kf % 2 == 1 && kt % 2 == 1, "conv2d: kernel extents must be odd");
  if (bias)
    TAPSED_CHECK(bias->numel() == co, "conv2d: bias length " +
                                          std::to_string(bias->numel()) +
                                          " != out channels " +
                                          std::to_string(co));
  const int64_t pf = freq_dilation * (kf / 2), pt = kt / 2;
  detail::prepare_input(tape, x);
  detail::prepare_input(tape, w);
  if (bias) detail::prepare_input(tape, *bias);
  Tensor<T> out = detail::make_output(tape, {batch, co, nf, nt});
  const auto& xv = x.data();
  const auto& wv = w.data();
  auto& ov = out.data();
  if (bias) {
    for (int64_t b = 0; b < batch; ++b)
      for (int64_t c = 0; c < co; ++c)
        std::fill_n(&ov[(b * co + c) * nf * nt], nf * nt, bias->data()[c]);
  }
  // Accumulate one (ci,u,v) tap at a time over the contiguous time axis.
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t c = 0; c < co; ++c)
      for (int64_t q = 0; q < ci; ++q)
        for (int64_t u = 0; u < kf; ++u)
          for (int64_t v = 0; v < kt; ++v) {
            const T wt = wv[((c * ci + q) * kf + u) * kt + v];
            if (wt == T(0)) continue;
            const int64_t df = u * freq_dilation - pf, dt = v - pt;
            for (int64_t f = std::max<int64_t>(0, -df);
                 f < std::min(nf, nf - df); ++f) {
              const T* xr = &xv[((b * ci + q) * nf + f + df) * nt];
              T* orow = &ov[((b * co + c) * nf + f) * nt];
              const int64_t t0 = std::max<int64_t>(0, -dt);
              const int64_t t1 = std::min(nt, nt - dt);
              for (int64_t t = t0; t < t1; ++t) orow[t] += wt * xr[t + dt];
            }
          }
  if (tape) {
    auto xn = x.node();
    auto wn = w.node();
    auto bn = bias ? bias->node() : nullptr;
    auto on = out.node();
    tape->record([xn, wn, bn, on, batch, ci, co, nf, nt, kf, kt, pf, pt,
                  freq_dilation] {
      if (bn && bn->tracked) {
        for (int64_t b = 0; b < batch; ++b)
          for (int64_t c = 0; c < co; ++c) {
            double acc = 0.0;
            const T* g = &on->grad[(b * co + c) * nf * nt];
            for (int64_t i = 0; i < nf * nt; ++i)
              acc += static_cast<double>(g[i]);
            bn->grad[c] += static_cast<T>(acc);
          }
      }
      for (int64_t b = 0; b < batch; ++b)
        for (int64_t c = 0; c < co; ++c)
          for (int64_t q = 0; q < ci; ++q)
            for (int64_t u = 0; u < kf; ++u)
              for (int64_t v = 0; v < kt; ++v) {
                const int64_t widx = ((c * ci + q) * kf + u) * kt + v;
                const T wt = wn->value[widx];
                const int64_t df = u * freq_dilation - pf, dt = v - pt;
                double wacc = 0.0;
                for (int64_t f = std::max<int64_t>(0, -df);
                     f < std::min(nf, nf - df); ++f) {
                  const T* g = &on->grad[((b * co + c) * nf + f) * nt];
                  const T* xr = &xn->value[((b * ci + q) * nf + f + df) * nt];
                  T* xg = xn->tracked
                              ? &xn->grad[((b * ci + q) * nf + f + df) * nt]
                              : nullptr;
                  const int64_t t0 = std::max<int64_t>(0, -dt);
                  const int64_t t1 = std::min(nt, nt - dt);
                  for (int64_t t = t0; t < t1; ++t) {
                    const T gv = g[t];
                    wacc += static_cast<double>(gv) * xr[t + dt];
                    if (xg) xg[t + dt] += wt * gv;
                  }
                }
                if (wn->tracked) wn->grad[widx] += static_cast<T>(wacc);
              }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Non-overlapping 2-D average pooling over (F, T) with floor semantics.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> avg_pool2d(Tape<T>* tape, const Tensor<T>& x, int64_t pool_f,
                     int64_t pool_t) {
  TAPSED_CHECK(x.rank() == 4, "avg_pool2d: input must be rank 4");
  TAPSED_CHECK(pool_f >= 1 && pool_t >= 1, "avg_pool2d: factors must be >= 1");
  const int64_t batch = x.extent(0), ch = x.extent(1), nf = x.extent(2),
                nt = x.extent(3);
  const int64_t of = nf / pool_f, ot = nt / pool_t;
  TAPSED_CHECK(of >= 1 && ot >= 1, "avg_pool2d: input smaller than window");
  detail::prepare_input(tape, x);
  Tensor<T> out = detail::make_output(tape, {batch, ch, of, ot});
  const T inv = static_cast<T>(1.0 / static_cast<double>(pool_f * pool_t));
  const auto& xv = x.data();
  auto& ov = out.data();
  for (int64_t bc = 0; bc < batch * ch; ++bc)
    for (int64_t f = 0; f < of; ++f)
      for (int64_t t = 0; t < ot; ++t) {
        double acc = 0.0;
        for (int64_t u = 0; u < pool_f; ++u) {
          const T* xr = &xv[(bc * nf + f * pool_f + u) * nt + t * pool_t];
          for (int64_t v = 0; v < pool_t; ++v)
            acc += static_cast<double>(xr[v]);
        }
        ov[(bc * of + f) * ot + t] = static_cast<T>(acc) * inv;
      }
  if (tape) {
    auto xn = x.node();
    auto on = out.node();
    tape->record([xn, on, batch, ch, nf, nt, of, ot, pool_f, pool_t, inv] {
      if (!xn->tracked) return;
      for (int64_t bc = 0; bc < batch * ch; ++bc)
        for (int64_t f = 0; f < of; ++f)
          for (int64_t t = 0; t < ot; ++t) {
            const T g = on->grad[(bc * of + f) * ot + t] * inv;
            for (int64_t u = 0; u < pool_f; ++u) {
              T* xg = &xn->grad[(bc * nf + f * pool_f + u) * nt + t * pool_t];
              for (int64_t v = 0; v < pool_t; ++v) xg[v] += g;
            }
          }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization over (batch, F, T) per channel. Rank-4 input; rank-3
// callers wrap a trailing singleton axis. Training mode normalizes with the
// population batch variance; eval mode uses the provided running stats.
// ---------------------------------------------------------------------------

struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> var;  // population variance of the batch
};

template <class T>
Tensor<T> batch_norm_train(Tape<T>* tape, const Tensor<T>& x,
                           const Tensor<T>& gamma, const Tensor<T>& beta,
                           double eps, BatchNormStats* stats_out) {
  TAPSED_CHECK(x.rank() == 4, "batch_norm: input must be rank 4");
  const int64_t batch = x.extent(0), ch = x.extent(1),
                spatial = x.extent(2) * x.extent(3);
  TAPSED_CHECK(batch * spatial > 0, "batch_norm: empty batch rejected");
  TAPSED_CHECK(gamma.numel() == ch && beta.numel() == ch,
               "batch_norm: affine parameters must match channel count " +
                   std::to_string(ch));
  detail::prepare_input(tape, x);
  detail::prepare_input(tape, gamma);
  detail::prepare_input(tape, beta);
  Tensor<T> out = detail::make_output(tape, x.shape());
  const int64_t n = batch * spatial;
  const auto& xv = x.data();
  auto& ov = out.data();
  std::vector<double> mean(ch, 0.0), var(ch, 0.0), inv_std(ch, 0.0);
  for (int64_t c = 0; c < ch; ++c) {
    double acc = 0.0;
    for (int64_t b = 0; b < batch; ++b) {
      const T* xr = &xv[(b * ch + c) * spatial];
      for (int64_t i = 0; i < spatial; ++i) acc += static_cast<double>(xr[i]);
    }
    mean[c] = acc / n;
    double vacc = 0.0;
    for (int64_t b = 0; b < batch; ++b) {
      const T* xr = &xv[(b * ch + c) * spatial];
      for (int64_t i = 0; i < spatial; ++i) {
        const double d = static_cast<double>(xr[i]) - mean[c];
        vacc += d * d;
      }
    }
    var[c] = vacc / n;
    inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    const double g = static_cast<double>(gamma.data()[c]);
    const double bta = static_cast<double>(beta.data()[c]);
    for (int64_t b = 0; b < batch; ++b) {
      const T* xr = &xv[(b * ch + c) * spatial];
      T* orow = &ov[(b * ch + c) * spatial];
      for (int64_t i = 0; i < spatial; ++i)
        orow[i] = static_cast<T>(
            (static_cast<double>(xr[i]) - mean[c]) * inv_std[c] * g + bta);
    }
  }
  if (stats_out) {
    stats_out->mean = mean;
    stats_out->var = var;
  }
  if (tape) {
    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    auto on = out.node();
    tape->record([xn, gn, bn, on, batch, ch, spatial, mean, inv_std, n] {
      for (int64_t c = 0; c < ch; ++c) {
        const double g = static_cast<double>(gn->value[c]);
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t b = 0; b < batch; ++b) {
          const T* gr = &on->grad[(b * ch + c) * spatial];
          const T* xr = &xn->value[(b * ch + c) * spatial];
          for (int64_t i = 0; i < spatial; ++i) {
            const double xhat =
                (static_cast<double>(xr[i]) - mean[c]) * inv_std[c];
            sum_dy += static_cast<double>(gr[i]);
            sum_dy_xhat += static_cast<double>(gr[i]) * xhat;
          }
        }
        if (gn->tracked) gn->grad[c] += static_cast<T>(sum_dy_xhat);
        if (bn->tracked) bn->grad[c] += static_cast<T>(sum_dy);
        if (xn->tracked) {
          const double mean_dy = sum_dy / n;
          const double mean_dy_xhat = sum_dy_xhat / n;
          for (int64_t b = 0; b < batch; ++b) {
            const T* gr = &on->grad[(b * ch + c) * spatial];
            const T* xr = &xn->value[(b * ch + c) * spatial];
            T* xg = &xn->grad[(b * ch + c) * spatial];
            for (int64_t i = 0; i < spatial; ++i) {
              const double xhat =
                  (static_cast<double>(xr[i]) - mean[c]) * inv_std[c];
              xg[i] += static_cast<T>(g * inv_std[c] *
                                      (static_cast<double>(gr[i]) - mean_dy -
                                       xhat * mean_dy_xhat));
            }
          }
        }
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> batch_norm_eval(Tape<T>* tape, const Tensor<T>& x,
                          const Tensor<T>& gamma, const Tensor<T>& beta,
                          const std::vector<double>& running_mean,
                          const std::vector<double>& running_var, double eps) {
  TAPSED_CHECK(x.rank() == 4, "batch_norm: input must be rank 4");
  const int64_t batch = x.extent(0), ch = x.extent(1),
                spatial = x.extent(2) * x.extent(3);
  TAPSED_CHECK(static_cast<int64_t>(running_mean.size()) == ch &&
                   static_cast<int64_t>(running_var.size()) == ch,
               "batch_norm: running stats length mismatch");
  detail::prepare_input(tape, x);
  detail::prepare_input(tape, gamma);
  detail::prepare_input(tape, beta);
  Tensor<T> out = detail::make_output(tape, x.shape());
  const auto& xv = x.data();
  auto& ov = out.data();
  std::vector<double> scale_c(ch), shift_c(ch), inv_std(ch);
  for (int64_t c = 0; c < ch; ++c) {
    inv_std[c] = 1.0 / std::sqrt(running_var[c] + eps);
    scale_c[c] = static_cast<double>(gamma.data()[c]) * inv_std[c];
    shift_c[c] = static_cast<double>(beta.data()[c]) -
                 running_mean[c] * scale_c[c];
  }
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t c = 0; c < ch; ++c) {
      const T* xr = &xv[(b * ch + c) * spatial];
      T* orow = &ov[(b * ch + c) * spatial];
      for (int64_t i = 0; i < spatial; ++i)
        orow[i] =
            static_cast<T>(static_cast<double>(xr[i]) * scale_c[c] + shift_c[c]);
    }
  if (tape) {
    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    auto on = out.node();
    tape->record([xn, gn, bn, on, batch, ch, spatial, scale_c, inv_std,
                  running_mean = running_mean] {
      for (int64_t c = 0; c < ch; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t b = 0; b < batch; ++b) {
          const T* gr = &on->grad[(b * ch + c) * spatial];
          const T* xr = &xn->value[(b * ch + c) * spatial];
          T* xg = xn->tracked ? &xn->grad[(b * ch + c) * spatial] : nullptr;
          for (int64_t i = 0; i < spatial; ++i) {
            sum_dy += static_cast<double>(gr[i]);
            sum_dy_xhat += static_cast<double>(gr[i]) *
                           (static_cast<double>(xr[i]) - running_mean[c]) *
                           inv_std[c];
            if (xg) xg[i] += static_cast<T>(gr[i] * scale_c[c]);
          }
        }
        if (gn->tracked) gn->grad[c] += static_cast<T>(sum_dy_xhat);
        if (bn->tracked) bn->grad[c] += static_cast<T>(sum_dy);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Temporal difference along the last axis: out_t = x_t - x_{t-1}, with the
// first frame defined as zero so the output keeps the input length.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> delta_time(Tape<T>* tape, const Tensor<T>& x) {
  TAPSED_CHECK(x.rank() >= 1, "delta_time: rank must be >= 1");
  const int64_t nt = x.shape().back();
  const int64_t outer = x.numel() / nt;
  detail::prepare_input(tape, x);
  Tensor<T> out = detail::make_output(tape, x.shape());
  const auto& xv = x.data();
  auto& ov = out.data();
  for (int64_t a = 0; a < outer; ++a) {
    ov[a * nt] = T(0);
    for (int64_t t = 1; t < nt; ++t)
      ov[a * nt + t] = xv[a * nt + t] - xv[a * nt + t - 1];
  }
  if (tape) {
    auto xn = x.node();
    auto on = out.node();
    tape->record([xn, on, outer, nt] {
      if (!xn->tracked) return;
      for (int64_t a = 0; a < outer; ++a)
        for (int64_t t = 1; t < nt; ++t) {
          const T g = on->grad[a * nt + t];
          xn->grad[a * nt + t] += g;
          xn->grad[a * nt + t - 1] -= g;
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-frequency blend of K candidate maps:
//   out[b,c,f,t] = sum_k attn[b,k,f] * ys[k][b,c,f,t]
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> blend_freq(Tape<T>* tape, const std::vector<Tensor<T>>& ys,
                     const Tensor<T>& attn) {
  TAPSED_CHECK(!ys.empty(), "blend_freq: no candidate maps");
  TAPSED_CHECK(attn.rank() == 3, "blend_freq: attention must be [B,K,F]");
  const int64_t batch = attn.extent(0), kk = attn.extent(1),
                nf = attn.extent(2);
  TAPSED_CHECK(kk == static_cast<int64_t>(ys.size()),
               "blend_freq: attention K " + std::to_string(kk) +
                   " != candidate count " + std::to_string(ys.size()));
  const Shape& ys_shape = ys[0].shape();
  TAPSED_CHECK(ys_shape.size() == 4 && ys_shape[0] == batch &&
                   ys_shape[2] == nf,
               "blend_freq: candidate shape mismatch");
  for (const auto& y : ys)
    TAPSED_CHECK(y.shape() == ys_shape, "blend_freq: candidate shape mismatch");
  const int64_t ch = ys_shape[1], nt = ys_shape[3];
  for (const auto& y : ys) detail::prepare_input(tape, y);
  detail::prepare_input(tape, attn);
  Tensor<T> out = detail::make_output(tape, ys_shape);
  auto& ov = out.data();
  for (int64_t k = 0; k < kk; ++k) {
    const auto& yv = ys[k].data();
    const auto& av = attn.data();
    for (int64_t b = 0; b < batch; ++b)
      for (int64_t c = 0; c < ch; ++c)
        for (int64_t f = 0; f < nf; ++f) {
          const T a = av[(b * kk + k) * nf + f];
          const T* yr = &yv[((b * ch + c) * nf + f) * nt];
          T* orow = &ov[((b * ch + c) * nf + f) * nt];
          for (int64_t t = 0; t < nt; ++t) orow[t] += a * yr[t];
        }
  }
  if (tape) {
    std::vector<std::shared_ptr<TensorNode<T>>> ynodes;
    for (const auto& y : ys) ynodes.push_back(y.node());
    auto an = attn.node();
    auto on = out.node();
    tape->record([ynodes, an, on, batch, kk, ch, nf, nt] {
      for (int64_t k = 0; k < kk; ++k) {
        auto& yn = *ynodes[k];
        for (int64_t b = 0; b < batch; ++b)
          for (int64_t f = 0; f < nf; ++f) {
            const T a = an->value[(b * kk + k) * nf + f];
            double aacc = 0.0;
            for (int64_t c = 0; c < ch; ++c) {
              const T* g = &on->grad[((b * ch + c) * nf + f) * nt];
              const T* yr = &yn.value[((b * ch + c) * nf + f) * nt];
              T* yg = yn.tracked ? &yn.grad[((b * ch + c) * nf + f) * nt]
                                 : nullptr;
              for (int64_t t = 0; t < nt; ++t) {
                aacc += static_cast<double>(g[t]) * yr[t];
                if (yg) yg[t] += a * g[t];
              }
            }
            if (an->tracked)
              an->grad[(b * kk + k) * nf + f] += static_cast<T>(aacc);
          }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scalar losses
// ---------------------------------------------------------------------------

// Mean binary cross-entropy between probabilities and targets in [0,1].
template <class T>
Tensor<T> bce_mean(Tape<T>* tape, const Tensor<T>& p, const Tensor<T>& y) {
  TAPSED_CHECK(p.shape() == y.shape(), "bce: shape mismatch");
  detail::prepare_input(tape, p);
  const double eps = 1e-12;
  const auto& pv = p.data();
  const auto& yv = y.data();
  const int64_t n = p.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double pc =
        std::min(1.0 - eps, std::max(eps, static_cast<double>(pv[i])));
    const double t = static_cast<double>(yv[i]);
    acc -= t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc);
  }
  Tensor<T> out = detail::make_output(tape, {1});
  out.data()[0] = static_cast<T>(acc / n);
  if (tape) {
    auto pn = p.node();
    auto yn = y.node();
    auto on = out.node();
    tape->record([pn, yn, on, n, eps] {
      if (!pn->tracked) return;
      const double g = static_cast<double>(on->grad[0]) / n;
      for (int64_t i = 0; i < n; ++i) {
        const double pc = std::min(
            1.0 - eps, std::max(eps, static_cast<double>(pn->value[i])));
        const double t = static_cast<double>(yn->value[i]);
        pn->grad[i] += static_cast<T>(g * (pc - t) / (pc * (1.0 - pc)));
      }
    });
  }
  return out;
}

// Mean squared error; gradients flow into both operands when tracked.
template <class T>
Tensor<T> mse_mean(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  TAPSED_CHECK(a.shape() == b.shape(), "mse: shape mismatch");
  detail::prepare_input(tape, a);
  detail::prepare_input(tape, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  const int64_t n = a.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    acc += d * d;
  }
  Tensor<T> out = detail::make_output(tape, {1});
  out.data()[0] = static_cast<T>(acc / n);
  if (tape) {
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    tape->record([an, bn, on, n] {
      const double g = 2.0 * static_cast<double>(on->grad[0]) / n;
      for (int64_t i = 0; i < n; ++i) {
        const double d =
            static_cast<double>(an->value[i]) - static_cast<double>(bn->value[i]);
        if (an->tracked) an->grad[i] += static_cast<T>(g * d);
        if (bn->tracked) bn->grad[i] -= static_cast<T>(g * d);
      }
    });
  }
  return out;
}

}  // namespace tapsed
