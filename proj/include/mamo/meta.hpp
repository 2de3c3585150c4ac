#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mamo/data.hpp"
#include "mamo/matrix.hpp"
#include "mamo/memory.hpp"
#include "mamo/model.hpp"

namespace mamo {

struct MetaHyper {
  double rho = 0.01;     // local learning rate
  double lambda = 0.05;  // global learning rate
  double tau = 0.1;      // bias-term scale at initialization
  double alpha = 0.5;    // profile-memory write rate
  double beta = 0.05;    // gradient-memory write rate
  double gamma = 0.1;    // task-memory write rate
  int user_batch = 32;   // users per global update
  int epochs = 1;
  int support_passes = 1;  // passes over the support set per episode
};

inline void validate_hyper(const MetaHyper& h) {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string(name) + " must lie in [0, 1]");
    }
  };
  if (!(h.rho >= 0.0)) throw ConfigError("rho must be >= 0");
  if (!(h.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  unit(h.tau, "tau");
  unit(h.alpha, "alpha");
  unit(h.beta, "beta");
  unit(h.gamma, "gamma");
  if (h.user_batch < 1) throw ConfigError("user_batch must be >= 1");
  if (h.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (h.support_passes < 1) throw ConfigError("support_passes must be >= 1");
}

/// Everything the meta-learner owns: shared initialization parameters plus
/// the two memory banks.
struct MetaState {
  ModelDims dims;
  std::size_t k_slots = 1;
  ParamSet global;        // phi_u, phi_i, phi_r
  FeatureMemory feature;  // M_P + gradient slots
  TaskMemoryCube task;    // fast-weight slots
  MetaHyper hyper;
};

inline MetaState init_meta_state(const ModelDims& dims, std::size_t k_slots,
                                 const MetaHyper& hyper, std::uint64_t seed) {
  validate_hyper(hyper);
  if (k_slots < 1) throw ConfigError("k_slots must be >= 1");
  MetaState state;
  state.dims = dims;
  state.k_slots = k_slots;
  state.hyper = hyper;
  Rng rng(seed);
  state.global = make_param_set(dims, rng);
  state.feature = make_feature_memory(k_slots, dims.d_u, state.global.user, rng);
  state.task = make_task_cube(k_slots, dims.d_e, rng);
  return state;
}

/// Seed the profile-memory rows from observed training profiles: greedy
/// farthest-point selection by cosine distance, then centering. Random rows
/// carry no relation to the profile geometry, so attention over them decays
/// toward uniform as writes accumulate; anchoring on maximally dissimilar
/// real profiles gives every slot a stable, distinct catchment from the
/// first episode on. With fewer distinct profile directions than slots the
/// surplus rows center to zero and contribute a flat similarity.
inline void anchor_profile_memory(MetaState& state, const std::vector<Episode>& episodes,
                                  std::size_t scan_limit = 256) {
  if (episodes.empty()) return;
  const std::size_t n = std::min(scan_limit, episodes.size());
  std::vector<const Vec*> chosen;
  chosen.push_back(&episodes[0].profile.values);
  while (chosen.size() < state.k_slots) {
    const Vec* best = nullptr;
    double best_distance = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec& candidate = episodes[i].profile.values;
      double nearest = 2.0;
      for (const Vec* a : chosen) nearest = std::min(nearest, 1.0 - cosine_sim(candidate, *a));
      if (nearest > best_distance + 1e-12) {
        best_distance = nearest;
        best = &candidate;
      }
    }
    chosen.push_back(best);  // duplicates are fine once profiles run out
  }
  Vec mean(state.dims.d_u, 0.0);
  for (const Vec* a : chosen) axpy(1.0 / static_cast<double>(chosen.size()), *a, mean);
  for (std::size_t k = 0; k < state.k_slots; ++k) {
    for (std::size_t c = 0; c < state.dims.d_u; ++c) {
      state.feature.profiles(k, c) = (*chosen[k])[c] - mean[c];
    }
  }
}

/// A user's locally initialized (and later adapted) recommender.
struct AdaptedUser {
  Vec profile;           // p_u, kept for forward passes during adaptation
  ParamSet params;       // theta_u, theta_i, theta_r
  FastWeights fast;      // personalized fast weights
  AttentionVector attention;
  LayerStack bias;       // b_u
  LayerStack init_grad;  // mean support gradient of theta_u at initialization
  bool adapted = false;
};

/// Personalized initialization:
///   theta_u <- phi_u - tau * b_u,  theta_i <- phi_i,  theta_r <- phi_r,
///   fast    <- attention-weighted read of the task cube.
inline AdaptedUser init_local(const MetaState& state, const Vec& p_u) {
  if (p_u.size() != state.dims.d_u) {
    throw ShapeError("init_local: profile of length " + std::to_string(p_u.size()) +
                     " vs d_u = " + std::to_string(state.dims.d_u));
  }
  AdaptedUser user;
  user.profile = p_u;
  user.attention = attend(p_u, state.feature);
  user.bias = bias_term(user.attention, state.feature);
  user.params = state.global;
  axpy(-state.hyper.tau, user.bias, user.params.user);
  user.fast = read_task(user.attention, state.task);
  return user;
}

namespace detail {

inline const ProfileVector& item_profile(const std::vector<ProfileVector>& items,
                                         std::size_t index) {
  if (index >= items.size()) {
    throw ContractError("episode references item " + std::to_string(index) +
                        " outside the profile table of size " + std::to_string(items.size()));
  }
  return items[index];
}

}  // namespace detail

/// Per-item gradient steps over the support set, in order:
/// one forward, one backward, one step of size rho on theta_u, theta_i,
/// theta_r and the fast-weight matrix. Also records the mean theta_u
/// gradient at the initialization point (before any step).
inline void local_adapt(AdaptedUser& user, std::span<const SupportItem> support,
                        const std::vector<ProfileVector>& items, double rho,
                        int passes = 1) {
  if (support.empty()) throw ContractError("local_adapt: empty support set");
  if (passes < 1) throw ConfigError("local_adapt: passes must be >= 1");

  // Mean gradient at the initialization point, consumed later by the
  // gradient-memory write.
  user.init_grad = zeros_like(user.params.user);
  for (std::size_t idx = 0; idx < support.size(); ++idx) {
    const auto& s = support[idx];
    const Vec& p_i = detail::item_profile(items, s.item).values;
    const Prediction pred = forward(user.params, user.fast, user.profile, p_i);
    if (!std::isfinite(loss(pred, s.rating))) {
      throw DivergenceError("non-finite loss at support item " + std::to_string(idx) +
                            " while probing the initialization");
    }
    const ModelGrads g = backward_all(pred, s.rating, user.params, user.fast);
    axpy(1.0 / static_cast<double>(support.size()), g.user, user.init_grad);
  }

  for (int pass = 0; pass < passes; ++pass) {
    for (std::size_t idx = 0; idx < support.size(); ++idx) {
      const auto& s = support[idx];
      const Vec& p_i = detail::item_profile(items, s.item).values;
      const Prediction pred = forward(user.params, user.fast, user.profile, p_i);
      if (!std::isfinite(loss(pred, s.rating))) {
        throw DivergenceError("non-finite loss at support item " + std::to_string(idx) +
                              " in pass " + std::to_string(pass));
      }
      const ModelGrads g = backward_all(pred, s.rating, user.params, user.fast);
      axpy(-rho, g.user, user.params.user);
      axpy(-rho, g.item, user.params.item);
      axpy(-rho, g.rating, user.params.rating);
      axpy(-rho, g.fast, user.fast.m);
    }
  }
  user.adapted = true;
}

struct QueryPass {
  ParamSet grad;     // mean gradient over the query items at adapted params
  Vec predictions;   // raw (unclamped) scores, one per query item
};

inline QueryPass query_pass(const AdaptedUser& user, std::span<const SupportItem> query,
                            const std::vector<ProfileVector>& items) {
  if (query.empty()) throw ContractError("query_pass: empty query set");
  QueryPass out;
  out.grad = zeros_like(user.params);
  out.predictions.reserve(query.size());
  const double weight = 1.0 / static_cast<double>(query.size());
  for (std::size_t idx = 0; idx < query.size(); ++idx) {
    const auto& q = query[idx];
    const Vec& p_i = detail::item_profile(items, q.item).values;
    const Prediction pred = forward(user.params, user.fast, user.profile, p_i);
    const ModelGrads g = backward_all(pred, q.rating, user.params, user.fast);
    if (!std::isfinite(pred.value) || !all_finite(g)) {
      throw DivergenceError("non-finite gradient at query item " + std::to_string(idx));
    }
    out.predictions.push_back(pred.value);
    axpy(weight, g.user, out.grad.user);
    axpy(weight, g.item, out.grad.item);
    axpy(weight, g.rating, out.grad.rating);
  }
  return out;
}

/// First-order meta-gradient: the mean query-item gradient evaluated at the
/// adapted parameters, reinterpreted as the gradient for the globals.
inline ParamSet query_meta_grad(const AdaptedUser& user, std::span<const SupportItem> query,
                                const std::vector<ProfileVector>& items) {
  return query_pass(user, query, items).grad;
}

/// phi <- phi - lambda * mean(batch gradients)
inline void global_update(MetaState& state, const std::vector<ParamSet>& batch_grads,
                          double lambda) {
  if (batch_grads.empty()) throw ContractError("global_update: empty gradient batch");
  ParamSet mean = zeros_like(state.global);
  const double w = 1.0 / static_cast<double>(batch_grads.size());
  for (const auto& g : batch_grads) {
    if (!same_shape(g, state.global)) {
      throw ContractError("global_update: gradient shape does not match the global parameters");
    }
    axpy(w, g, mean);
  }
  axpy(-lambda, mean, state.global);
}

struct EpochLog {
  int epoch = 0;
  double train_query_mae = 0.0;
  double wall_seconds = 0.0;
};

struct TrainOptions {
  int workers = 1;
  double rating_min = 1.0;  // clamp range for the logged query MAE
  double rating_max = 5.0;
  std::function<void(const EpochLog&)> on_epoch;  // optional per-epoch sink
};

namespace detail {

struct EpisodeOutcome {
  ParamSet meta_grad;
  AttentionVector attention;
  LayerStack init_grad;
  Matrix adapted_fast;
  double abs_err_sum = 0.0;
  std::size_t query_count = 0;
};

inline EpisodeOutcome run_train_episode(const MetaState& state, const Episode& ep,
                                        const std::vector<ProfileVector>& items,
                                        double rating_min, double rating_max) {
  AdaptedUser user = init_local(state, ep.profile.values);
  local_adapt(user, ep.support, items, state.hyper.rho, state.hyper.support_passes);
  QueryPass qp = query_pass(user, ep.query, items);
  EpisodeOutcome out;
  out.meta_grad = std::move(qp.grad);
  out.attention = std::move(user.attention);
  out.init_grad = std::move(user.init_grad);
  out.adapted_fast = std::move(user.fast.m);
  out.query_count = ep.query.size();
  for (std::size_t i = 0; i < ep.query.size(); ++i) {
    const double clamped = std::clamp(qp.predictions[i], rating_min, rating_max);
    out.abs_err_sum += std::abs(clamped - ep.query[i].rating);
  }
  return out;
}

// Runs `fn(i)` for i in [0, n) on up to `workers` threads. Exceptions are
// re-thrown in index order so failures are deterministic.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t n_threads =
      std::min<std::size_t>(std::max(workers, 1), n == 0 ? 1 : n);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t i = t; i < n; i += n_threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace detail

/// One meta-training run. Per batch, every episode is computed against the
/// batch-start snapshot (episodes are independent and may run on worker
/// threads); the global update and the per-user memory writes are then
/// applied by this single writer in episode order, so results do not depend
/// on the worker count.
inline std::vector<EpochLog> train(MetaState& state, const std::vector<Episode>& episodes,
                                   const std::vector<ProfileVector>& items,
                                   const TrainOptions& options = {}) {
  validate_hyper(state.hyper);
  if (episodes.empty()) throw ContractError("train: empty training set");
  std::vector<EpochLog> logs;
  const auto batch_size = static_cast<std::size_t>(state.hyper.user_batch);
  for (int epoch = 0; epoch < state.hyper.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double abs_err_sum = 0.0;
    std::size_t query_total = 0;
    for (std::size_t start = 0; start < episodes.size(); start += batch_size) {
      const std::size_t end = std::min(start + batch_size, episodes.size());
      std::vector<detail::EpisodeOutcome> outcomes(end - start);
      try {
        detail::parallel_for(end - start, options.workers, [&](std::size_t i) {
          outcomes[i] = detail::run_train_episode(state, episodes[start + i], items,
                                                  options.rating_min, options.rating_max);
        });
      } catch (const DivergenceError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what());
      }

      std::vector<ParamSet> grads;
      grads.reserve(outcomes.size());
      for (auto& o : outcomes) grads.push_back(std::move(o.meta_grad));
      global_update(state, grads, state.hyper.lambda);

      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        const Episode& ep = episodes[start + i];
        write_profile(state.feature, o.attention, ep.profile.values, state.hyper.alpha);
        write_grad(state.feature, o.attention, o.init_grad, state.hyper.beta);
        write_task(state.task, o.attention, FastWeights{o.adapted_fast}, state.hyper.gamma);
        abs_err_sum += o.abs_err_sum;
        query_total += o.query_count;
      }
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_query_mae = query_total ? abs_err_sum / static_cast<double>(query_total) : 0.0;
    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (options.on_epoch) options.on_epoch(log);
    logs.push_back(log);
  }
  return logs;
}

struct TestResult {
  Vec predictions;      // raw scores for the query items, in episode order
  bool adapted = true;  // false when the support set was empty
};

/// Personalized initialization + support adaptation + forward-only query
/// predictions. Never mutates the meta state; with an empty support set the
/// predictions come from the initialized-but-unadapted parameters.
inline TestResult test_user(const MetaState& state, const Episode& ep,
                            const std::vector<ProfileVector>& items) {
  AdaptedUser user = init_local(state, ep.profile.values);
  TestResult result;
  if (ep.support.empty()) {
    result.adapted = false;
  } else {
    local_adapt(user, ep.support, items, state.hyper.rho, state.hyper.support_passes);
  }
  result.predictions.reserve(ep.query.size());
  for (const auto& q : ep.query) {
    const Vec& p_i = detail::item_profile(items, q.item).values;
    const Prediction pred = forward(user.params, user.fast, user.profile, p_i);
    result.predictions.push_back(pred.value);
  }
  return result;
}

}  // namespace mamo
