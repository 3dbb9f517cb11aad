#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mnflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---- error types ----------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define MNFLOW_ERROR(NAME)                 \
  struct NAME : Error {                    \
    using Error::Error;                    \
  };

MNFLOW_ERROR(TooManyPoints)
MNFLOW_ERROR(ZeroNorm)
MNFLOW_ERROR(ConstructionFailed)
MNFLOW_ERROR(IndexOutOfRange)
MNFLOW_ERROR(RegionViolation)
MNFLOW_ERROR(OnBoundary)
MNFLOW_ERROR(NonFinite)
MNFLOW_ERROR(TooLarge)
MNFLOW_ERROR(BadSubset)
MNFLOW_ERROR(MidpointError)
MNFLOW_ERROR(EmptyWindow)
MNFLOW_ERROR(BadSplit)
MNFLOW_ERROR(Diverged)
MNFLOW_ERROR(BadAxes)
MNFLOW_ERROR(EmptyInput)
MNFLOW_ERROR(NotPlanar)
MNFLOW_ERROR(InvalidSpec)
MNFLOW_ERROR(ConfigError)
MNFLOW_ERROR(IoError)

#undef MNFLOW_ERROR

// ---- seeded random helpers -------------------------------------------------

// splitmix64: stable way to derive per-task seeds from (master, index).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Mat gaussian_matrix(int rows, int cols, Rng& rng, double std_dev = 1.0) {
  std::normal_distribution<double> g(0.0, std_dev);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline Vec gaussian_vector(int n, Rng& rng, double std_dev = 1.0) {
  std::normal_distribution<double> g(0.0, std_dev);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

// Uniform sample from the ball B(center, radius).
inline Vec ball_sample(const Vec& center, double radius, Rng& rng) {
  const int d = static_cast<int>(center.size());
  Vec dir = gaussian_vector(d, rng);
  double n = dir.norm();
  if (n == 0.0) return center;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = radius * std::pow(u(rng), 1.0 / d);
  return center + (r / n) * dir;
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

// ---- subset enumeration ----------------------------------------------------

// All k-subsets of {0,..,n-1} in lexicographic order.
inline std::vector<std::vector<int>> combinations(int n, int k) {
  std::vector<std::vector<int>> out;
  if (k < 0 || k > n) return out;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace mnflow
