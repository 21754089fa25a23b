#pragma once

// Deterministic random numbers. mt19937_64 has a standard-specified output
// sequence, and the gaussian transform is done by hand because the stdlib
// normal_distribution is implementation-defined. Same seed, same stream,
// on every platform.

#include "blockdict/core.hpp"

#include <cstdint>
#include <random>

namespace blockdict {

// splitmix64 step, used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix_seed(master ^ mix_seed(stream + 0x632be59bd9b4e019ull));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(master, a), b);
}

// Chain of derivations, one per path component; used to give every trial,
// condition and draw site its own independent stream.
inline std::uint64_t chain_seed(std::uint64_t master,
                                std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = master;
  for (std::uint64_t p : path) s = derive_seed(s, p);
  return s;
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    // Rejection keeps the draw unbiased.
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return static_cast<int>(v % un);
  }

  // Standard normal via the polar method; the spare keeps draws cheap.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  Vector gaussian_vector(Index n) {
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[i] = gaussian();
    return x;
  }

  Matrix gaussian_matrix(Index rows, Index cols) {
    Matrix x(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) x(i, j) = gaussian();
    return x;
  }

  // First k entries of a Fisher-Yates pass over [0, n): k distinct indices.
  std::vector<Index> sample_without_replacement(Index n, Index k) {
    std::vector<Index> pool(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < k; ++i) {
      const Index j = i + static_cast<Index>(uniform_int(static_cast<int>(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace blockdict
