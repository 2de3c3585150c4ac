#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mamo/linear.hpp"
#include "mamo/matrix.hpp"

namespace mamo {

// The recommender: two embedding stacks map user/item profiles to d_e-dim
// embeddings, a per-user fast-weight matrix (d_e x 2d_e) transforms the
// concatenated embeddings, and a rating stack reduces to a scalar score.

struct ModelDims {
  std::size_t d_u = 0;  // user profile length
  std::size_t d_i = 0;  // item profile length
  std::size_t d_e = 0;  // embedding size (also hidden width of every stack)
  int layers = 2;       // dense layers per stack
};

/// The three parameter groups of one recommender instance. The same struct
/// carries the local parameters, the shared global parameters, and
/// parameter-shaped gradients.
struct ParamSet {
  LayerStack user;    // d_u -> d_e
  LayerStack item;    // d_i -> d_e
  LayerStack rating;  // d_e -> 1
};

inline ParamSet make_param_set(const ModelDims& dims, Rng& rng) {
  ParamSet p;
  p.user = make_mlp(dims.d_u, dims.d_e, dims.d_e, dims.layers, rng);
  p.item = make_mlp(dims.d_i, dims.d_e, dims.d_e, dims.layers, rng);
  p.rating = make_mlp(dims.d_e, dims.d_e, 1, dims.layers, rng);
  return p;
}

inline ParamSet zeros_like(const ParamSet& p) {
  return ParamSet{zeros_like(p.user), zeros_like(p.item), zeros_like(p.rating)};
}

inline bool same_shape(const ParamSet& a, const ParamSet& b) {
  return same_shape(a.user, b.user) && same_shape(a.item, b.item) &&
         same_shape(a.rating, b.rating);
}

inline void axpy(double s, const ParamSet& x, ParamSet& y) {
  axpy(s, x.user, y.user);
  axpy(s, x.item, y.item);
  axpy(s, x.rating, y.rating);
}

inline void scale(ParamSet& p, double s) {
  scale(p.user, s);
  scale(p.item, s);
  scale(p.rating, s);
}

inline bool all_finite(const ParamSet& p) {
  return all_finite(p.user) && all_finite(p.item) && all_finite(p.rating);
}

/// Coordinate views in checkpoint order: user, item, rating.
inline std::vector<double*> collect_coords(ParamSet& p) {
  std::vector<double*> out;
  collect_coords(p.user, out);
  collect_coords(p.item, out);
  collect_coords(p.rating, out);
  return out;
}

/// Per-user fast weights applied between the embeddings and the rating stack.
struct FastWeights {
  Matrix m;  // d_e x 2d_e
};

/// [I/2 | I/2]: the fast-weight matrix whose transform is the mean of the
/// user and item embeddings. Used as the signal-preserving slot init.
inline FastWeights averaging_fast_weights(std::size_t d_e) {
  FastWeights fw;
  fw.m = Matrix(d_e, 2 * d_e);
  for (std::size_t i = 0; i < d_e; ++i) {
    fw.m(i, i) = 0.5;
    fw.m(i, d_e + i) = 0.5;
  }
  return fw;
}

inline Vec embed_user(const Vec& p_u, const LayerStack& theta_u,
                      std::vector<LayerCache>* caches = nullptr) {
  if (!theta_u.empty() && theta_u.front().in_dim() != p_u.size()) {
    throw ShapeError("embed_user: profile of length " + std::to_string(p_u.size()) +
                     " vs first layer " + theta_u.front().w.shape_str());
  }
  return stack_forward(theta_u, p_u, caches);
}

inline Vec embed_item(const Vec& p_i, const LayerStack& theta_i,
                      std::vector<LayerCache>* caches = nullptr) {
  if (!theta_i.empty() && theta_i.front().in_dim() != p_i.size()) {
    throw ShapeError("embed_item: profile of length " + std::to_string(p_i.size()) +
                     " vs first layer " + theta_i.front().w.shape_str());
  }
  return stack_forward(theta_i, p_i, caches);
}

/// One full forward pass with everything backward needs.
struct Prediction {
  double value = 0.0;
  std::vector<LayerCache> user_cache, item_cache, rating_cache;
  Vec e_u, e_i;
  Vec concat;  // [e_u, e_i], input to the fast-weight transform
};

/// Score only: rating stack applied to fast.m * [e_u, e_i].
inline double predict_score(const Vec& e_u, const Vec& e_i, const FastWeights& fast,
                            const LayerStack& theta_r) {
  if (fast.m.cols != e_u.size() + e_i.size()) {
    throw ShapeError("predict_score: fast weights " + fast.m.shape_str() +
                     " vs concatenated embeddings of length " +
                     std::to_string(e_u.size() + e_i.size()));
  }
  Vec concat;
  concat.reserve(e_u.size() + e_i.size());
  concat.insert(concat.end(), e_u.begin(), e_u.end());
  concat.insert(concat.end(), e_i.begin(), e_i.end());
  const Vec transformed = matvec(fast.m, concat);
  const Vec out = stack_forward(theta_r, transformed);
  return out.at(0);
}

inline Prediction forward(const ParamSet& params, const FastWeights& fast, const Vec& p_u,
                          const Vec& p_i) {
  Prediction pred;
  pred.e_u = embed_user(p_u, params.user, &pred.user_cache);
  pred.e_i = embed_item(p_i, params.item, &pred.item_cache);
  if (fast.m.cols != pred.e_u.size() + pred.e_i.size() || fast.m.rows != pred.e_u.size()) {
    throw ShapeError("forward: fast weights " + fast.m.shape_str() + " vs embeddings of length " +
                     std::to_string(pred.e_u.size()));
  }
  pred.concat.reserve(pred.e_u.size() + pred.e_i.size());
  pred.concat.insert(pred.concat.end(), pred.e_u.begin(), pred.e_u.end());
  pred.concat.insert(pred.concat.end(), pred.e_i.begin(), pred.e_i.end());
  const Vec transformed = matvec(fast.m, pred.concat);
  const Vec out = stack_forward(params.rating, transformed, &pred.rating_cache);
  pred.value = out.at(0);
  return pred;
}

/// Squared-error training loss, 0.5 * (yhat - y)^2.
inline double loss_value(double yhat, double y) {
  const double r = yhat - y;
  return 0.5 * r * r;
}

inline double loss(const Prediction& pred, double y) { return loss_value(pred.value, y); }

struct ModelGrads {
  LayerStack user, item, rating;
  Matrix fast;
};

inline bool all_finite(const ModelGrads& g) {
  return all_finite(g.user) && all_finite(g.item) && all_finite(g.rating) && all_finite(g.fast);
}

/// Exact gradients of loss(pred, y) with respect to all three parameter
/// groups and the fast-weight matrix. `pred` must come from a matching
/// forward() call; shape drift between cache and parameters is rejected.
inline ModelGrads backward_all(const Prediction& pred, double y, const ParamSet& params,
                               const FastWeights& fast) {
  if (pred.user_cache.size() != params.user.size() ||
      pred.item_cache.size() != params.item.size() ||
      pred.rating_cache.size() != params.rating.size()) {
    throw ContractError("backward_all: cache depth does not match parameter stacks");
  }
  if (fast.m.rows != pred.e_u.size() || fast.m.cols != pred.concat.size()) {
    throw ContractError("backward_all: cache embeddings do not match fast weights " +
                        fast.m.shape_str());
  }
  ModelGrads g;
  const Vec dy{pred.value - y};
  Vec d_transformed;
  g.rating = stack_backward(params.rating, pred.rating_cache, dy, &d_transformed);
  // transformed = fast.m * concat
  g.fast = outer(d_transformed, pred.concat);
  const Vec d_concat = matvec_t(fast.m, d_transformed);
  const std::size_t d_e = pred.e_u.size();
  const Vec d_eu(d_concat.begin(), d_concat.begin() + d_e);
  const Vec d_ei(d_concat.begin() + d_e, d_concat.end());
  g.user = stack_backward(params.user, pred.user_cache, d_eu);
  g.item = stack_backward(params.item, pred.item_cache, d_ei);
  return g;
}

}  // namespace mamo
