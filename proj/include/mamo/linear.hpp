#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mamo/matrix.hpp"

namespace mamo {

enum class Activation { leaky_relu, identity };

inline constexpr double kLeakyReluSlope = 0.01;

inline double activate(double z, Activation act) {
  if (act == Activation::leaky_relu) return z > 0.0 ? z : kLeakyReluSlope * z;
  return z;
}

inline double activate_grad(double z, Activation act) {
  if (act == Activation::leaky_relu) return z > 0.0 ? 1.0 : kLeakyReluSlope;
  return 1.0;
}

/// Saved forward state for one dense layer: the layer input and the
/// pre-activation values, enough to run the exact backward pass.
struct LayerCache {
  Vec input;
  Vec pre;
  Activation act = Activation::identity;
};

/// output = act(W * input + b). When `cache` is given it is filled for backward.
inline Vec fc_forward(const Vec& input, const Matrix& weights, const Vec& bias, Activation act,
                      LayerCache* cache = nullptr) {
  if (weights.cols != input.size()) {
    throw ShapeError("fc_forward: weights " + weights.shape_str() +
                     " incompatible with input of length " + std::to_string(input.size()));
  }
  if (weights.rows != bias.size()) {
    throw ShapeError("fc_forward: weights " + weights.shape_str() +
                     " incompatible with bias of length " + std::to_string(bias.size()));
  }
  Vec pre = matvec(weights, input);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += bias[i];
  Vec out(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) out[i] = activate(pre[i], act);
  if (cache) {
    cache->input = input;
    cache->pre = std::move(pre);
    cache->act = act;
  }
  return out;
}

struct FcGrads {
  Vec input;       // dL/d(input)
  Matrix weights;  // dL/d(W)
  Vec bias;        // dL/d(b)
};

/// Exact reverse-mode gradients of fc_forward.
inline FcGrads fc_backward(const Vec& grad_output, const LayerCache& cache,
                           const Matrix& weights) {
  if (cache.input.size() != weights.cols || cache.pre.size() != weights.rows) {
    throw ContractError("fc_backward: cache shapes (" + std::to_string(cache.input.size()) +
                        " in, " + std::to_string(cache.pre.size()) + " out) do not match weights " +
                        weights.shape_str());
  }
  if (grad_output.size() != weights.rows) {
    throw ShapeError("fc_backward: grad_output of length " + std::to_string(grad_output.size()) +
                     " vs weights " + weights.shape_str());
  }
  Vec dz(grad_output.size());
  for (std::size_t i = 0; i < dz.size(); ++i) {
    dz[i] = grad_output[i] * activate_grad(cache.pre[i], cache.act);
  }
  FcGrads g;
  g.bias = dz;
  g.weights = outer(dz, cache.input);
  g.input = matvec_t(weights, dz);
  return g;
}

struct DenseLayer {
  Matrix w;
  Vec b;
  Activation act = Activation::identity;

  std::size_t in_dim() const { return w.cols; }
  std::size_t out_dim() const { return w.rows; }
};

// A stack of dense layers. The same struct stores parameters and
// parameter-shaped gradients (activation tags are inert in the latter).
using LayerStack = std::vector<DenseLayer>;

inline Vec stack_forward(const LayerStack& stack, const Vec& x,
                         std::vector<LayerCache>* caches = nullptr) {
  if (caches) caches->resize(stack.size());
  Vec cur = x;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    cur = fc_forward(cur, stack[i].w, stack[i].b, stack[i].act,
                     caches ? &(*caches)[i] : nullptr);
  }
  return cur;
}

/// Backward through a stack; returns parameter gradients and optionally the
/// gradient with respect to the stack input.
inline LayerStack stack_backward(const LayerStack& stack, const std::vector<LayerCache>& caches,
                                 const Vec& grad_output, Vec* grad_input = nullptr) {
  if (caches.size() != stack.size()) {
    throw ContractError("stack_backward: cache depth " + std::to_string(caches.size()) +
                        " vs stack depth " + std::to_string(stack.size()));
  }
  LayerStack grads(stack.size());
  Vec cur = grad_output;
  for (std::size_t i = stack.size(); i-- > 0;) {
    FcGrads g = fc_backward(cur, caches[i], stack[i].w);
    grads[i].w = std::move(g.weights);
    grads[i].b = std::move(g.bias);
    grads[i].act = stack[i].act;
    cur = std::move(g.input);
  }
  if (grad_input) *grad_input = std::move(cur);
  return grads;
}

inline LayerStack zeros_like(const LayerStack& s) {
  LayerStack out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i].w = Matrix(s[i].w.rows, s[i].w.cols);
    out[i].b = Vec(s[i].b.size(), 0.0);
    out[i].act = s[i].act;
  }
  return out;
}

inline bool same_shape(const LayerStack& a, const LayerStack& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].w.same_shape(b[i].w) || a[i].b.size() != b[i].b.size()) return false;
  }
  return true;
}

inline void axpy(double s, const LayerStack& x, LayerStack& y) {
  if (!same_shape(x, y)) throw ShapeError("axpy: layer stacks have different shapes");
  for (std::size_t i = 0; i < x.size(); ++i) {
    axpy(s, x[i].w, y[i].w);
    axpy(s, x[i].b, y[i].b);
  }
}

inline void scale(LayerStack& s, double f) {
  for (auto& layer : s) {
    scale(layer.w, f);
    scale(layer.b, f);
  }
}

inline bool all_finite(const LayerStack& s) {
  for (const auto& layer : s) {
    if (!all_finite(layer.w) || !all_finite(layer.b)) return false;
  }
  return true;
}

/// Mutable views of every coordinate, in a fixed order (per layer: weights
/// row-major, then bias). The checkpoint format uses the same order.
inline void collect_coords(LayerStack& s, std::vector<double*>& out) {
  for (auto& layer : s) {
    for (double& x : layer.w.data) out.push_back(&x);
    for (double& x : layer.b) out.push_back(&x);
  }
}

/// Fan-scaled uniform init in +-sqrt(6 / (fan_in + fan_out)); biases zero.
inline DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer layer;
  layer.w = Matrix(out, in);
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& x : layer.w.data) x = rng.uniform(-bound, bound);
  layer.b = Vec(out, 0.0);
  layer.act = act;
  return layer;
}

/// n_layers dense layers in -> hidden -> ... -> out; LeakyReLU on all hidden
/// layers, identity on the last.
inline LayerStack make_mlp(std::size_t in, std::size_t hidden, std::size_t out, int n_layers,
                           Rng& rng) {
  if (n_layers < 1) throw ConfigError("make_mlp: layer count must be >= 1");
  LayerStack stack;
  std::size_t cur = in;
  for (int i = 0; i < n_layers - 1; ++i) {
    stack.push_back(make_dense(cur, hidden, Activation::leaky_relu, rng));
    cur = hidden;
  }
  stack.push_back(make_dense(cur, out, Activation::identity, rng));
  return stack;
}

}  // namespace mamo
