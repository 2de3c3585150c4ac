#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mamo/error.hpp"

namespace mamo {

using Vec = std::vector<double>;

/// Dense row-major matrix of 64-bit floats.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }
};

inline bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data); }

/// y = M * x
inline Vec matvec(const Matrix& m, const Vec& x) {
  if (m.cols != x.size()) {
    throw ShapeError("matvec: matrix " + m.shape_str() + " incompatible with vector of length " +
                     std::to_string(x.size()));
  }
  Vec y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

/// y = M^T * x
inline Vec matvec_t(const Matrix& m, const Vec& x) {
  if (m.rows != x.size()) {
    throw ShapeError("matvec_t: matrix " + m.shape_str() + " incompatible with vector of length " +
                     std::to_string(x.size()));
  }
  Vec y(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    const double s = x[r];
    if (s == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) y[c] += s * row[c];
  }
  return y;
}

/// outer(a, b)(i, j) = a[i] * b[j]
inline Matrix outer(const Vec& a, const Vec& b) {
  Matrix m(a.size(), b.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < b.size(); ++c) m(r, c) = a[r] * b[c];
  }
  return m;
}

// y += s * x.  Skipped entirely when s == 0 so that no-op updates leave y
// bit-identical (signed zeros included).
inline void axpy(double s, const Vec& x, Vec& y) {
  if (x.size() != y.size()) {
    throw ShapeError("axpy: vector lengths " + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()));
  }
  if (s == 0.0) return;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline void axpy(double s, const Matrix& x, Matrix& y) {
  if (!x.same_shape(y)) {
    throw ShapeError("axpy: matrix shapes " + x.shape_str() + " vs " + y.shape_str());
  }
  if (s == 0.0) return;
  for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] += s * x.data[i];
}

inline void scale(Vec& v, double s) {
  if (s == 1.0) return;
  for (double& x : v) x *= s;
}

inline void scale(Matrix& m, double s) { scale(m.data, s); }

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: vector lengths " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

/// Numerically stable softmax (max-subtraction). Output sums to 1.
inline Vec softmax(const Vec& v) {
  if (v.empty()) throw ContractError("softmax: empty input");
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  Vec out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

/// Cosine similarity; 0 when either vector has near-zero norm.
inline double cosine_sim(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_sim: vector lengths " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return dot(a, b) / (na * nb);
}

// Seeded random source. All draws are derived from the mt19937_64 integer
// stream with explicit arithmetic (no std::*_distribution), so a seed pins
// the exact sequence independent of the standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Box-Muller normal draw; consumes exactly two uniforms.
  double normal(double mean = 0.0, double sd = 1.0) {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n) by rejection sampling.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) throw ContractError("Rng::bounded: n must be positive");
    const std::uint64_t threshold = (~std::uint64_t{0} - n + 1) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[bounded(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace mamo
