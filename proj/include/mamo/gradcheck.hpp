#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "mamo/finite_diff.hpp"
#include "mamo/meta.hpp"
#include "mamo/model.hpp"

namespace mamo {

// Finite-difference verification of every analytic gradient path: the three
// parameter groups, the fast-weight matrix, and the first-order meta-gradient
// taken at adapted parameters.

struct GradcheckOptions {
  std::uint64_t seed = 1234;
  int trials = 50;
  double epsilon = 1e-5;
  ModelDims dims{6, 5, 8, 2};
  double threshold = 1e-4;
  // Test hook: perturbs one analytic gradient entry so the check must fail.
  bool corrupt = false;
};

struct GradcheckReport {
  double max_user = 0.0;
  double max_item = 0.0;
  double max_rating = 0.0;
  double max_fast = 0.0;
  double max_meta = 0.0;
  double threshold = 1e-4;
  int trials = 0;

  bool pass() const {
    return max_user < threshold && max_item < threshold && max_rating < threshold &&
           max_fast < threshold && max_meta < threshold;
  }
};

namespace detail {

// Max scaled error between analytic and central-difference gradients.
// A coordinate that disagrees at the base step is re-probed at smaller
// steps: a LeakyReLU kink inside the probe window corrupts the estimate and
// clears on refinement, while a genuine gradient bug reproduces at every
// scale.
template <typename F>
double checked_max_error(F&& loss_fn, std::span<double* const> coords, const Vec& analytic,
                         double epsilon, double threshold) {
  const Vec fd = finite_diff_grad(loss_fn, coords, epsilon);
  double worst = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    double err = grad_rel_error(analytic[i], fd[i]);
    if (err >= threshold) {
      for (double e : {epsilon / 16.0, epsilon / 256.0}) {
        err = std::min(err, grad_rel_error(analytic[i], finite_diff_coord(loss_fn, coords[i], e)));
      }
    }
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace detail

inline Vec flatten(const LayerStack& s) {
  Vec out;
  for (const auto& layer : s) {
    out.insert(out.end(), layer.w.data.begin(), layer.w.data.end());
    out.insert(out.end(), layer.b.begin(), layer.b.end());
  }
  return out;
}

inline Vec flatten(const ParamSet& p) {
  Vec out = flatten(p.user);
  const Vec item = flatten(p.item);
  const Vec rating = flatten(p.rating);
  out.insert(out.end(), item.begin(), item.end());
  out.insert(out.end(), rating.begin(), rating.end());
  return out;
}

inline GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw ConfigError("gradcheck: epsilon must be > 0");
  if (options.trials < 1) throw ConfigError("gradcheck: trials must be >= 1");
  GradcheckReport report;
  report.threshold = options.threshold;
  report.trials = options.trials;
  const ModelDims& dims = options.dims;

  for (int trial = 0; trial < options.trials; ++trial) {
    Rng rng(options.seed + static_cast<std::uint64_t>(trial));
    ParamSet params = make_param_set(dims, rng);
    FastWeights fast{Matrix(dims.d_e, 2 * dims.d_e)};
    for (double& x : fast.m.data) x = rng.uniform(-0.5, 0.5);
    Vec p_u(dims.d_u), p_i(dims.d_i);
    for (double& x : p_u) x = rng.uniform(-1.0, 1.0);
    for (double& x : p_i) x = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(1.0, 5.0);

    const Prediction pred = forward(params, fast, p_u, p_i);
    ModelGrads grads = backward_all(pred, y, params, fast);
    if (options.corrupt) grads.user[0].w(0, 0) += 0.5;

    const auto item_loss = [&]() { return loss_value(forward(params, fast, p_u, p_i).value, y); };
    auto check_stack = [&](LayerStack& stack, const LayerStack& analytic, double& worst) {
      std::vector<double*> coords;
      collect_coords(stack, coords);
      worst = std::max(worst, detail::checked_max_error(item_loss, coords, flatten(analytic),
                                                        options.epsilon, options.threshold));
    };
    check_stack(params.user, grads.user, report.max_user);
    check_stack(params.item, grads.item, report.max_item);
    check_stack(params.rating, grads.rating, report.max_rating);
    {
      std::vector<double*> coords;
      for (double& x : fast.m.data) coords.push_back(&x);
      report.max_fast =
          std::max(report.max_fast, detail::checked_max_error(item_loss, coords, grads.fast.data,
                                                              options.epsilon, options.threshold));
    }

    // First-order meta-gradient at adapted parameters against finite
    // differences of the mean query loss, also at adapted parameters.
    MetaHyper hyper;
    hyper.rho = 0.01;
    MetaState state = init_meta_state(dims, 2, hyper, options.seed + 9000 + trial);
    std::vector<ProfileVector> items;
    std::vector<SupportItem> support, query;
    for (std::size_t n = 0; n < 5; ++n) {
      Vec profile(dims.d_i);
      for (double& x : profile) x = rng.uniform(-1.0, 1.0);
      items.push_back(ProfileVector{std::move(profile), "gradcheck"});
      const SupportItem item{n, rng.uniform(1.0, 5.0), static_cast<std::int64_t>(n)};
      (n < 3 ? support : query).push_back(item);
    }
    AdaptedUser user = init_local(state, p_u);
    local_adapt(user, support, items, hyper.rho);
    ParamSet meta_grad = query_meta_grad(user, query, items);
    if (options.corrupt) meta_grad.user[0].w(0, 0) += 0.5;
    const auto query_loss = [&]() {
      double total = 0.0;
      for (const auto& q : query) {
        total += loss_value(forward(user.params, user.fast, p_u, items[q.item].values).value,
                            q.rating);
      }
      return total / static_cast<double>(query.size());
    };
    const std::vector<double*> coords = collect_coords(user.params);
    report.max_meta =
        std::max(report.max_meta, detail::checked_max_error(query_loss, coords, flatten(meta_grad),
                                                            options.epsilon, options.threshold));
  }
  return report;
}

}  // namespace mamo
