#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace iner {

// Row-major dense double matrix. Models here are tiny, so no BLAS.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  bool empty() const { return rows == 0 || cols == 0; }
  bool operator==(const Matrix&) const = default;
};

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct schema_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a. Token hashing and parameter digests must be identical on
// every platform, so std::hash is off the table.
inline std::uint64_t fnv1a(const void* bytes, std::size_t n,
                           std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), h);
}

using Rng = std::mt19937_64;

// All draws go through these helpers instead of <random> distributions,
// whose outputs are implementation-defined.
inline int rand_int(Rng& g, int lo, int hi) {  // inclusive bounds
  return lo + static_cast<int>(g() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double rand_unit(Rng& g) { return (g() >> 11) * 0x1.0p-53; }

inline double rand_symmetric(Rng& g, double scale) { return (2.0 * rand_unit(g) - 1.0) * scale; }

template <typename T>
inline void shuffle_in_place(std::vector<T>& v, Rng& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(g() % i);
    std::swap(v[i - 1], v[j]);
  }
}

// Distinct streams (model init, per-task shuffling, classifier growth)
// derive their seeds from the run seed plus a label.
inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& label) {
  std::uint64_t h = fnv1a(&seed, sizeof(seed));
  return fnv1a(label.data(), label.size(), h);
}

}  // namespace iner
