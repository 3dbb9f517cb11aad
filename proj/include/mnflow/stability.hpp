#pragma once

// Stationary-point detection and stability classification by the Jacobian
// spectrum, subset-sum enumeration for orthogonal data, and the obtuse
// subset-sum condition.

#include <utility>

#include "mnflow/denoiser.hpp"
#include "mnflow/trajectory.hpp"

namespace mnflow {

constexpr double kStationaryTol = 1e-9;  // closed forms; trained nets use 1e-3

struct StabilityReport {
  Vec point;
  double score_norm = 0;
  double max_real_eig = 0;
  bool stable = false;
  std::vector<int> pattern;
};

inline bool is_stationary(const ClosedFormDenoiser& den, const Vec& y, double sigma, double tol) {
  if (tol <= 0) throw InvalidSpec("is_stationary: tol must be positive");
  return score(den, y, sigma).norm() <= tol;
}

inline StabilityReport classify_stability(const ClosedFormDenoiser& den, const Vec& y, double sigma,
                                          double tol = kStationaryTol) {
  const DatasetSpec& spec = den.spec;
  const double s2 = sigma * sigma;
  StabilityReport rep;
  rep.point = y;
  rep.score_norm = score(den, y, sigma).norm();
  rep.pattern = activation_pattern(den, y);

  Vec z = spec.units * (y - spec.base());
  for (int j = 0; j < spec.n_dirs(); ++j) {
    ReluBand bd = relu_band(spec, j, den.rho);
    if (std::abs(z[j] - bd.lo) <= 1e-12 || std::abs(z[j] - bd.hi) <= 1e-12)
      throw OnBoundary("classify_stability: input on a ReLU kink");
  }

  if (spec.kind == Geometry::Orthogonal) {
    // Orthonormal frame diagonalizes the Jacobian: eigenvalues are
    // (slope_j * Delta_j - 1)/sigma^2 plus -1/sigma^2 on the complement.
    double max_eig = -1.0 / s2;
    for (int j = 0; j < spec.n_dirs(); ++j)
      if (rep.pattern[j])
        max_eig = std::max(max_eig, (relu_band(spec, j, den.rho).slope - 1.0) / s2);
    rep.max_real_eig = max_eig;
  } else {
    Eigen::SelfAdjointEigenSolver<Mat> es(jacobian(den, y, sigma), Eigen::EigenvaluesOnly);
    rep.max_real_eig = es.eigenvalues().maxCoeff();
  }
  rep.stable = rep.score_norm < tol && rep.max_real_eig < 0;
  return rep;
}

// ---- subset-sum enumeration (orthogonal) ------------------------------------

// Returns every subset sum (1-based training-point indices) with cardinality
// <= max_cardinality, verified stationary + stable. max_cardinality < 0 means
// the full 2^(N-1) enumeration.
inline std::vector<std::pair<std::vector<int>, Vec>> enumerate_stable_points_orthogonal(
    const DatasetSpec& spec, double rho, int max_cardinality = -1) {
  if (spec.kind != Geometry::Orthogonal)
    throw InvalidSpec("enumerate_stable_points_orthogonal: orthogonal specs only");
  const int m = spec.n_core() - 1;
  const bool full = max_cardinality < 0 || max_cardinality >= m;
  if (full && m > 24)
    throw TooLarge("enumerate_stable_points_orthogonal: unbounded enumeration with N-1 > 24");
  const int kmax = full ? m : max_cardinality;

  ClosedFormDenoiser den(spec, rho);
  std::vector<std::pair<std::vector<int>, Vec>> out;
  for (int k = 0; k <= kmax; ++k) {
    for (auto& c : combinations(m, k)) {
      std::vector<int> subset(c);
      for (int& v : subset) ++v;  // 1-based point indices
      Vec p = virtual_point(spec, subset);
      StabilityReport rep = classify_stability(den, p, 1.0);
      if (!rep.stable)
        throw Error("enumerate_stable_points_orthogonal: subset sum failed verification");
      out.emplace_back(std::move(subset), std::move(p));
    }
  }
  return out;
}

// ---- obtuse subset-sum condition --------------------------------------------

// Sufficient stability condition for the subset sum of an obtuse simplex:
// min_k sum_{i in I \ {k}} u_k . u_i ||x_i|| > -rho. Index 0 is the base
// point; it has no direction and contributes nothing to the sums.
inline bool obtuse_sum_stability(const DatasetSpec& spec, const std::vector<int>& subset,
                                 double rho) {
  if (spec.kind != Geometry::ObtuseSimplex)
    throw InvalidSpec("obtuse_sum_stability: obtuse specs only");
  bool has_base = false;
  for (int n : subset) {
    if (n < 0 || n >= spec.n_points()) throw IndexOutOfRange("obtuse_sum_stability: index");
    if (n == 0) has_base = true;
  }
  const std::size_t min_card = has_base ? 3 : 2;
  if (subset.size() < min_card)
    throw BadSubset("obtuse_sum_stability: subset too small for the sum condition");

  double worst = std::numeric_limits<double>::infinity();
  for (int k : subset) {
    if (k == 0) continue;
    double acc = 0;
    for (int i : subset) {
      if (i == k || i == 0) continue;
      acc += spec.units.row(k - 1).dot(spec.units.row(i - 1)) * spec.norms[i - 1];
    }
    worst = std::min(worst, acc);
  }
  return worst > -rho;
}

// ---- fixed-point iteration ---------------------------------------------------

// y_{k+1} = f(y_k); works identically for closed-form and trained denoisers.
inline Trajectory fixed_point_iterate(const std::function<Vec(const Vec&)>& fn, const Vec& y0,
                                      int iters) {
  if (iters < 1) throw InvalidSpec("fixed_point_iterate: iters >= 1");
  Trajectory traj;
  traj.meta = "fixed_point";
  traj.push(0, y0);
  Vec y = y0;
  for (int k = 1; k <= iters; ++k) {
    y = fn(y);
    traj.push(k, y);
  }
  return traj;
}

}  // namespace mnflow
