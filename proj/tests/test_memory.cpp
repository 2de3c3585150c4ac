#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "mamo/gradcheck.hpp"
#include "mamo/memory.hpp"

using namespace mamo;
using test_helpers::random_matrix;
using test_helpers::random_vec;

namespace {

FeatureMemory random_feature_memory(std::size_t k, std::size_t d_u, const LayerStack& shape,
                                    Rng& rng) {
  FeatureMemory mem = make_feature_memory(k, d_u, shape, rng);
  for (auto& slot : mem.grads) {
    for (auto& layer : slot) {
      for (double& x : layer.w.data) x = rng.uniform(-1.0, 1.0);
      for (double& x : layer.b) x = rng.uniform(-1.0, 1.0);
    }
  }
  return mem;
}

AttentionVector random_attention(std::size_t k, Rng& rng) {
  return softmax(random_vec(k, rng, -2.0, 2.0));
}

}  // namespace

TEST_CASE("attend degenerates to [1] for a single slot") {
  Rng rng(1);
  const LayerStack shape = make_mlp(4, 3, 3, 2, rng);
  const FeatureMemory mem = random_feature_memory(1, 4, shape, rng);
  const AttentionVector a = attend(random_vec(4, rng), mem);
  REQUIRE(a.size() == 1);
  CHECK(a[0] == 1.0);
}

TEST_CASE("attend over identical rows is uniform") {
  Rng rng(2);
  const LayerStack shape = make_mlp(4, 3, 3, 2, rng);
  FeatureMemory mem = random_feature_memory(3, 4, shape, rng);
  const Vec row = random_vec(4, rng);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t c = 0; c < 4; ++c) mem.profiles(k, c) = row[c];
  }
  const AttentionVector a = attend(random_vec(4, rng), mem);
  for (double w : a) CHECK(w == Catch::Approx(1.0 / 3.0).margin(1e-15));
}

TEST_CASE("attend worked example: orthogonal rows") {
  Rng rng(3);
  const LayerStack shape = make_mlp(2, 3, 3, 2, rng);
  FeatureMemory mem = random_feature_memory(2, 2, shape, rng);
  mem.profiles(0, 0) = 1.0;
  mem.profiles(0, 1) = 0.0;
  mem.profiles(1, 0) = 0.0;
  mem.profiles(1, 1) = 1.0;
  const AttentionVector a = attend({1.0, 0.0}, mem);
  CHECK(a[0] == Catch::Approx(0.7311).margin(1e-4));
  CHECK(a[1] == Catch::Approx(0.2689).margin(1e-4));
}

TEST_CASE("attend yields a valid attention vector for any profile") {
  Rng rng(4);
  const LayerStack shape = make_mlp(5, 3, 3, 2, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng.bounded(5);
    const FeatureMemory mem = random_feature_memory(k, 5, shape, rng);
    const Vec profile = trial % 7 == 0 ? Vec(5, 0.0) : random_vec(5, rng);
    const AttentionVector a = attend(profile, mem);
    double total = 0.0;
    for (double w : a) {
      CHECK(w > 0.0);
      total += w;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(attend(random_vec(3, rng), random_feature_memory(2, 5, shape, rng)), ShapeError);
}

TEST_CASE("bias_term selects, zeroes and averages slots") {
  Rng rng(5);
  const LayerStack shape = make_mlp(4, 3, 3, 2, rng);
  FeatureMemory mem = random_feature_memory(2, 4, shape, rng);

  // one-hot selection returns the slot exactly
  const LayerStack picked = bias_term({0.0, 1.0}, mem);
  CHECK(flatten(picked) == flatten(mem.grads[1]));

  // all slots zero
  FeatureMemory zeroed = mem;
  for (auto& slot : zeroed.grads) slot = zeros_like(shape);
  for (double x : flatten(bias_term({0.3, 0.7}, zeroed))) CHECK(x == 0.0);

  // equal mixture is the slot mean, entrywise
  const Vec mixed = flatten(bias_term({0.5, 0.5}, mem));
  const Vec g1 = flatten(mem.grads[0]);
  const Vec g2 = flatten(mem.grads[1]);
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    CHECK(mixed[i] == Catch::Approx(0.5 * g1[i] + 0.5 * g2[i]).margin(1e-12));
  }

  CHECK_THROWS_AS(bias_term({1.0}, mem), ContractError);
}

TEST_CASE("read_task is convex over slots") {
  Rng rng(6);
  TaskMemoryCube cube;
  const Matrix shared = random_matrix(3, 6, rng);
  cube.slots = {shared, shared, shared};
  const AttentionVector a = random_attention(3, rng);
  const FastWeights read = read_task(a, cube);
  for (std::size_t i = 0; i < shared.data.size(); ++i) {
    CHECK(read.m.data[i] == Catch::Approx(shared.data[i]).margin(1e-12));
  }
}

TEST_CASE("read_task selects a slot under one-hot attention") {
  Rng rng(7);
  TaskMemoryCube cube;
  cube.slots = {random_matrix(3, 6, rng), random_matrix(3, 6, rng), random_matrix(3, 6, rng)};
  const FastWeights read = read_task({0.0, 0.0, 1.0}, cube);
  CHECK(read.m.data == cube.slots[2].data);
}

TEST_CASE("read_task matches the brute-force weighted sum") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    TaskMemoryCube cube;
    for (int k = 0; k < 3; ++k) cube.slots.push_back(random_matrix(4, 8, rng));
    const AttentionVector a = random_attention(3, rng);
    const FastWeights read = read_task(a, cube);
    for (std::size_t i = 0; i < read.m.data.size(); ++i) {
      double want = 0.0;
      for (int k = 0; k < 3; ++k) want += a[k] * cube.slots[k].data[i];
      CHECK(read.m.data[i] == Catch::Approx(want).margin(1e-12));
    }
  }
}

TEST_CASE("bias_term and read_task are linear in the attention vector") {
  Rng rng(9);
  const LayerStack shape = make_mlp(4, 3, 3, 2, rng);
  const FeatureMemory mem = random_feature_memory(3, 4, shape, rng);
  TaskMemoryCube cube;
  for (int k = 0; k < 3; ++k) cube.slots.push_back(random_matrix(3, 6, rng));
  for (int trial = 0; trial < 20; ++trial) {
    const AttentionVector a = random_attention(3, rng);
    const AttentionVector b = random_attention(3, rng);
    const double lambda = rng.uniform();
    AttentionVector blend(3);
    for (int i = 0; i < 3; ++i) blend[i] = lambda * a[i] + (1.0 - lambda) * b[i];

    const Vec lhs = flatten(bias_term(blend, mem));
    const Vec fa = flatten(bias_term(a, mem));
    const Vec fb = flatten(bias_term(b, mem));
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      CHECK(lhs[i] == Catch::Approx(lambda * fa[i] + (1.0 - lambda) * fb[i]).margin(1e-12));
    }

    const Matrix rl = read_task(blend, cube).m;
    const Matrix ra = read_task(a, cube).m;
    const Matrix rb = read_task(b, cube).m;
    for (std::size_t i = 0; i < rl.data.size(); ++i) {
      CHECK(rl.data[i] ==
            Catch::Approx(lambda * ra.data[i] + (1.0 - lambda) * rb.data[i]).margin(1e-12));
    }
  }
}

TEST_CASE("write_profile endpoint and midpoint behavior") {
  Rng rng(10);
  const LayerStack shape = make_mlp(2, 3, 3, 2, rng);
  FeatureMemory mem = random_feature_memory(2, 2, shape, rng);
  const Matrix before = mem.profiles;
  const Vec grads_before = flatten(mem.grads[0]);

  write_profile(mem, {0.6, 0.4}, {1.0, 2.0}, 0.0);
  CHECK(mem.profiles.data == before.data);  // alpha = 0 leaves memory untouched

  write_profile(mem, {0.6, 0.4}, {1.0, 2.0}, 1.0);
  CHECK(mem.profiles(0, 0) == Catch::Approx(0.6));
  CHECK(mem.profiles(0, 1) == Catch::Approx(1.2));
  CHECK(mem.profiles(1, 0) == Catch::Approx(0.4));
  CHECK(mem.profiles(1, 1) == Catch::Approx(0.8));

  mem.profiles = before;
  write_profile(mem, {0.6, 0.4}, {1.0, 2.0}, 0.5);
  CHECK(mem.profiles(0, 0) == Catch::Approx(0.5 * 0.6 + 0.5 * before(0, 0)).margin(1e-12));
  CHECK(mem.profiles(1, 1) == Catch::Approx(0.5 * 0.8 + 0.5 * before(1, 1)).margin(1e-12));
  CHECK(flatten(mem.grads[0]) == grads_before);  // grad slots untouched

  CHECK_THROWS_AS(write_profile(mem, {0.6, 0.4}, {1.0, 2.0}, 1.5), ConfigError);
}

TEST_CASE("write_grad per-slot update") {
  Rng rng(11);
  const LayerStack shape = make_mlp(3, 2, 2, 2, rng);
  FeatureMemory mem = random_feature_memory(2, 3, shape, rng);
  const Vec slot0 = flatten(mem.grads[0]);
  const Vec slot1 = flatten(mem.grads[1]);

  LayerStack grad = zeros_like(shape);
  for (auto& layer : grad) {
    for (double& x : layer.w.data) x = rng.uniform(-1.0, 1.0);
    for (double& x : layer.b) x = rng.uniform(-1.0, 1.0);
  }
  const Vec g = flatten(grad);

  FeatureMemory untouched = mem;
  write_grad(untouched, {1.0, 0.0}, grad, 0.0);
  CHECK(flatten(untouched.grads[0]) == slot0);

  // zero incoming gradient scales every slot by (1 - beta) exactly
  FeatureMemory scaled = mem;
  write_grad(scaled, {0.25, 0.75}, zeros_like(shape), 0.2);
  const Vec scaled0 = flatten(scaled.grads[0]);
  for (std::size_t i = 0; i < scaled0.size(); ++i) {
    CHECK(scaled0[i] == Catch::Approx(0.8 * slot0[i]).margin(1e-15));
  }

  write_grad(mem, {1.0, 0.0}, grad, 0.1);
  const Vec new0 = flatten(mem.grads[0]);
  const Vec new1 = flatten(mem.grads[1]);
  for (std::size_t i = 0; i < new0.size(); ++i) {
    CHECK(new0[i] == Catch::Approx(0.1 * g[i] + 0.9 * slot0[i]).margin(1e-12));
    CHECK(new1[i] == Catch::Approx(0.9 * slot1[i]).margin(1e-12));
  }
}

TEST_CASE("write_task per-slot update") {
  Rng rng(12);
  TaskMemoryCube cube;
  cube.slots = {random_matrix(3, 6, rng), random_matrix(3, 6, rng)};
  const Matrix slot0 = cube.slots[0];
  const Matrix slot1 = cube.slots[1];
  const FastWeights fast{random_matrix(3, 6, rng)};

  TaskMemoryCube untouched = cube;
  write_task(untouched, {0.5, 0.5}, fast, 0.0);
  CHECK(untouched.slots[0].data == slot0.data);
  CHECK(untouched.slots[1].data == slot1.data);

  TaskMemoryCube onehot = cube;
  write_task(onehot, {1.0, 0.0}, fast, 1.0);
  for (std::size_t i = 0; i < fast.m.data.size(); ++i) {
    CHECK(onehot.slots[0].data[i] == Catch::Approx(fast.m.data[i]).margin(1e-15));
    CHECK(onehot.slots[1].data[i] == 0.0);  // scaled by gamma * a_u[1] = 0
  }

  const AttentionVector a = random_attention(2, rng);
  write_task(cube, a, fast, 0.3);
  for (std::size_t i = 0; i < fast.m.data.size(); ++i) {
    CHECK(cube.slots[0].data[i] ==
          Catch::Approx(0.3 * a[0] * fast.m.data[i] + 0.7 * slot0.data[i]).margin(1e-12));
    CHECK(cube.slots[1].data[i] ==
          Catch::Approx(0.3 * a[1] * fast.m.data[i] + 0.7 * slot1.data[i]).margin(1e-12));
  }
}

TEST_CASE("writes keep entries inside the convex bound") {
  Rng rng(13);
  const double bound = 2.0;
  const LayerStack shape = make_mlp(3, 2, 2, 2, rng);
  FeatureMemory mem = make_feature_memory(2, 3, shape, rng);
  for (double& x : mem.profiles.data) x = rng.uniform(-bound, bound);
  for (int step = 0; step < 50; ++step) {
    const AttentionVector a = random_attention(2, rng);
    const Vec p = random_vec(3, rng, -bound, bound);
    write_profile(mem, a, p, rng.uniform());
    for (double x : mem.profiles.data) {
      CHECK(x >= -bound);
      CHECK(x <= bound);
    }
  }
}

TEST_CASE("single-slot degeneracy is exact") {
  Rng rng(14);
  const LayerStack shape = make_mlp(4, 3, 3, 2, rng);
  FeatureMemory mem = make_feature_memory(1, 4, shape, rng);  // grad slot starts at zero
  TaskMemoryCube cube;
  cube.slots = {random_matrix(3, 6, rng)};

  const AttentionVector a = attend(random_vec(4, rng), mem);
  REQUIRE(a == AttentionVector{1.0});
  CHECK(read_task(a, cube).m.data == cube.slots[0].data);
  CHECK(flatten(bias_term(a, mem)) == flatten(mem.grads[0]));
}

TEST_CASE("repeated profile writes contract toward the outer product") {
  Rng rng(15);
  const LayerStack shape = make_mlp(3, 2, 2, 2, rng);
  FeatureMemory mem = random_feature_memory(2, 3, shape, rng);
  const AttentionVector a = random_attention(2, rng);
  const Vec p = random_vec(3, rng);
  const Matrix target = outer(a, p);
  const double alpha = 0.3;

  auto distance = [&]() {
    double total = 0.0;
    for (std::size_t i = 0; i < target.data.size(); ++i) {
      const double d = mem.profiles.data[i] - target.data[i];
      total += d * d;
    }
    return std::sqrt(total);
  };
  double prev = distance();
  for (int step = 0; step < 10; ++step) {
    write_profile(mem, a, p, alpha);
    const double cur = distance();
    CHECK(cur == Catch::Approx((1.0 - alpha) * prev).margin(1e-12));
    prev = cur;
  }
}
