#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mamo/linear.hpp"
#include "mamo/matrix.hpp"
#include "mamo/model.hpp"

namespace mamo {

// Two global memory banks shared across users.
//
// Feature-specific memory: K profile prototypes (one matrix row each) paired
// with K stored gradient structures shaped like the user embedding stack.
// Attention over profile rows selects a mixture of stored gradients, which
// becomes a personalized bias on the shared initialization.
//
// Task-specific memory: K fast-weight slots (each d_e x 2d_e); the same
// attention mixes them into a per-user fast-weight matrix.

using AttentionVector = Vec;  // length K, entries > 0, sums to 1

struct FeatureMemory {
  Matrix profiles;                // K x d_u prototype rows
  std::vector<LayerStack> grads;  // K slots, each shaped like theta_u

  std::size_t slot_count() const { return grads.size(); }
};

struct TaskMemoryCube {
  std::vector<Matrix> slots;  // K matrices, each d_e x 2d_e

  std::size_t slot_count() const { return slots.size(); }
};

// Profile rows start as small Gaussian noise; gradient slots start at zero
// so the first users see the unbiased shared initialization. Fast-weight
// slots start as the averaging transform plus small noise.
inline FeatureMemory make_feature_memory(std::size_t k, std::size_t d_u,
                                         const LayerStack& theta_u_shape, Rng& rng) {
  if (k < 1) throw ConfigError("make_feature_memory: slot count must be >= 1");
  FeatureMemory mem;
  mem.profiles = Matrix(k, d_u);
  for (double& x : mem.profiles.data) x = rng.normal(0.0, 0.1);
  mem.grads.reserve(k);
  for (std::size_t i = 0; i < k; ++i) mem.grads.push_back(zeros_like(theta_u_shape));
  return mem;
}

inline TaskMemoryCube make_task_cube(std::size_t k, std::size_t d_e, Rng& rng) {
  if (k < 1) throw ConfigError("make_task_cube: slot count must be >= 1");
  TaskMemoryCube cube;
  cube.slots.reserve(k);
  for (std::size_t s = 0; s < k; ++s) {
    Matrix slot = averaging_fast_weights(d_e).m;
    for (double& x : slot.data) x += rng.normal(0.0, 0.01);
    cube.slots.push_back(std::move(slot));
  }
  return cube;
}

/// a_u = softmax over slots of cosine(p_u, profile row k). Zero-norm rows
/// (and all-zero profiles) contribute similarity 0, so the result is always
/// a valid attention vector.
inline AttentionVector attend(const Vec& p_u, const FeatureMemory& mem) {
  if (p_u.size() != mem.profiles.cols) {
    throw ShapeError("attend: profile of length " + std::to_string(p_u.size()) +
                     " vs memory rows " + mem.profiles.shape_str());
  }
  Vec sims(mem.profiles.rows);
  for (std::size_t k = 0; k < mem.profiles.rows; ++k) {
    const Vec row(mem.profiles.data.begin() + k * mem.profiles.cols,
                  mem.profiles.data.begin() + (k + 1) * mem.profiles.cols);
    sims[k] = cosine_sim(p_u, row);
  }
  return softmax(sims);
}

/// b_u = sum_k a_u[k] * grad slot k, per parameter tensor.
inline LayerStack bias_term(const AttentionVector& a_u, const FeatureMemory& mem) {
  if (a_u.size() != mem.slot_count()) {
    throw ContractError("bias_term: attention of length " + std::to_string(a_u.size()) + " vs " +
                        std::to_string(mem.slot_count()) + " slots");
  }
  LayerStack out = mem.grads[0];
  scale(out, a_u[0]);
  for (std::size_t k = 1; k < mem.grads.size(); ++k) {
    if (!same_shape(mem.grads[k], out)) {
      throw ContractError("bias_term: gradient slot " + std::to_string(k) +
                          " has drifted from the theta_u shape");
    }
    axpy(a_u[k], mem.grads[k], out);
  }
  return out;
}

/// Attention-weighted read of the fast-weight slots.
inline FastWeights read_task(const AttentionVector& a_u, const TaskMemoryCube& cube) {
  if (a_u.size() != cube.slot_count()) {
    throw ShapeError("read_task: attention of length " + std::to_string(a_u.size()) + " vs " +
                     std::to_string(cube.slot_count()) + " slots");
  }
  Matrix out = cube.slots[0];
  scale(out, a_u[0]);
  for (std::size_t k = 1; k < cube.slots.size(); ++k) {
    if (!cube.slots[k].same_shape(out)) {
      throw ShapeError("read_task: slot " + std::to_string(k) + " shape " +
                       cube.slots[k].shape_str() + " vs " + out.shape_str());
    }
    axpy(a_u[k], cube.slots[k], out);
  }
  return FastWeights{std::move(out)};
}

// M_P <- alpha * outer(a_u, p_u) + (1 - alpha) * M_P
inline void write_profile(FeatureMemory& mem, const AttentionVector& a_u, const Vec& p_u,
                          double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("write_profile: alpha must lie in [0, 1]");
  }
  if (a_u.size() != mem.profiles.rows || p_u.size() != mem.profiles.cols) {
    throw ShapeError("write_profile: update " + std::to_string(a_u.size()) + "x" +
                     std::to_string(p_u.size()) + " vs memory " + mem.profiles.shape_str());
  }
  if (alpha == 0.0) return;
  Matrix update = outer(a_u, p_u);
  if (alpha == 1.0) {
    mem.profiles = std::move(update);
    return;
  }
  scale(mem.profiles, 1.0 - alpha);
  axpy(alpha, update, mem.profiles);
}

// slot k <- beta * a_u[k] * grad + (1 - beta) * slot k
inline void write_grad(FeatureMemory& mem, const AttentionVector& a_u, const LayerStack& grad,
                       double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw ConfigError("write_grad: beta must lie in [0, 1]");
  }
  if (a_u.size() != mem.slot_count()) {
    throw ContractError("write_grad: attention of length " + std::to_string(a_u.size()) + " vs " +
                        std::to_string(mem.slot_count()) + " slots");
  }
  if (beta == 0.0) return;
  for (std::size_t k = 0; k < mem.grads.size(); ++k) {
    if (!same_shape(mem.grads[k], grad)) {
      throw ContractError("write_grad: slot " + std::to_string(k) +
                          " does not match the incoming gradient shape");
    }
    scale(mem.grads[k], 1.0 - beta);
    axpy(beta * a_u[k], grad, mem.grads[k]);
  }
}

// slot k <- gamma * a_u[k] * fast + (1 - gamma) * slot k
inline void write_task(TaskMemoryCube& cube, const AttentionVector& a_u, const FastWeights& fast,
                       double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError("write_task: gamma must lie in [0, 1]");
  }
  if (a_u.size() != cube.slot_count()) {
    throw ContractError("write_task: attention of length " + std::to_string(a_u.size()) + " vs " +
                        std::to_string(cube.slot_count()) + " slots");
  }
  if (gamma == 0.0) return;
  for (std::size_t k = 0; k < cube.slots.size(); ++k) {
    if (!cube.slots[k].same_shape(fast.m)) {
      throw ContractError("write_task: slot " + std::to_string(k) + " shape " +
                          cube.slots[k].shape_str() + " vs fast weights " + fast.m.shape_str());
    }
    scale(cube.slots[k], 1.0 - gamma);
    axpy(gamma * a_u[k], fast.m, cube.slots[k]);
  }
}

}  // namespace mamo
