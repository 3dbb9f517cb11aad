#pragma once

// Closed-form minimum-norm denoisers for the three solvable geometries, their
// scores, activation patterns and analytic Jacobians.

#include <functional>

#include "mnflow/dataset.hpp"

namespace mnflow {

// Per-direction ReLU pair parameters: slope * ([z - lo]_+ - [z - hi]_+).
struct ReluBand {
  double lo, hi, slope;
};

inline ReluBand relu_band(const DatasetSpec& spec, int j, double rho) {
  const double m = spec.norms[j];
  if (spec.kind == Geometry::EquilateralTriangle) {
    double lo = -0.5 * m + rho, hi = m - rho;
    return {lo, hi, m / (hi - lo)};
  }
  return {rho, m - rho, m / (m - 2.0 * rho)};
}

struct ClosedFormDenoiser {
  DatasetSpec spec;
  double rho;

  ClosedFormDenoiser(DatasetSpec s, double r) : spec(std::move(s)), rho(r) {
    if (rho <= 0) throw InvalidSpec("denoiser: rho must be positive");
    if (rho >= 0.5 * spec.norms.minCoeff())
      throw InvalidSpec("denoiser: need rho < min ||x_n - base|| / 2");
  }
};

inline Vec eval(const ClosedFormDenoiser& den, const Vec& y) {
  const DatasetSpec& spec = den.spec;
  Vec base = spec.base();
  Vec z = spec.units * (y - base);
  Vec h = base;
  for (int j = 0; j < spec.n_dirs(); ++j) {
    ReluBand bd = relu_band(spec, j, den.rho);
    double lo = std::max(z[j] - bd.lo, 0.0);
    double hi = std::max(z[j] - bd.hi, 0.0);
    h += bd.slope * (lo - hi) * spec.units.row(j).transpose();
  }
  return h;
}

inline Vec score(const ClosedFormDenoiser& den, const Vec& y, double sigma) {
  if (sigma <= 0) throw InvalidSpec("score: sigma must be positive");
  return (eval(den, y) - y) / (sigma * sigma);
}

inline std::function<Vec(const Vec&)> denoiser_fn(const ClosedFormDenoiser& den) {
  return [den](const Vec& y) { return eval(den, y); };
}

// ---- Taylor-approximated scores --------------------------------------------

// Three-branch profile of the low-noise score along one direction.
inline double taylor_phi(double z, double m, double rho_t) {
  if (z <= rho_t) return -z;
  if (z <= m - rho_t) return rho_t * (2.0 * z / m - 1.0);
  return m - z;
}

inline Vec score_taylor_orthogonal(const DatasetSpec& spec, const Vec& y, double rho_t,
                                   double sigma_t) {
  if (spec.kind != Geometry::Orthogonal)
    throw InvalidSpec("score_taylor_orthogonal: orthogonal specs only");
  if (rho_t >= 0.5 * spec.norms.minCoeff())
    throw InvalidSpec("score_taylor_orthogonal: need rho_t < min norm / 2");
  Vec rel = y - spec.base();
  Vec z = spec.units * rel;
  Vec s = -(rel - spec.units.transpose() * z);  // complement contraction
  for (int j = 0; j < spec.n_dirs(); ++j)
    s += taylor_phi(z[j], spec.norms[j], rho_t) * spec.units.row(j).transpose();
  return s / (sigma_t * sigma_t);
}

// Valid on the single-active-chord region of the obtuse geometry; the caller
// routes regions.
inline Vec score_taylor_obtuse(const DatasetSpec& spec, const Vec& y, double rho_t, double sigma_t,
                               int active) {
  if (spec.kind != Geometry::ObtuseSimplex)
    throw InvalidSpec("score_taylor_obtuse: obtuse specs only");
  if (active < 0 || active >= spec.n_dirs()) throw IndexOutOfRange("score_taylor_obtuse: active");
  Vec rel = y - spec.base();
  Vec z = spec.units * rel;
  const double m = spec.norms[active];
  if (!(rho_t < z[active] && z[active] < m - rho_t))
    throw RegionViolation("score_taylor_obtuse: active coordinate outside the middle band");
  for (int j = 0; j < spec.n_dirs(); ++j)
    if (j != active && z[j] >= rho_t)
      throw RegionViolation("score_taylor_obtuse: inactive coordinate above rho_t");
  Vec u = spec.units.row(active).transpose();
  Vec s = (1.0 + 2.0 * rho_t / m) * z[active] * u - rel - rho_t * u;
  return s / (sigma_t * sigma_t);
}

// ---- activation pattern & Jacobian -----------------------------------------

// Delta_j = 1 iff exactly one ReLU of the pair is active (the affine middle
// branch). With the [z]_+ derivative-at-0 = 0 convention this is z in (lo, hi].
inline std::vector<int> activation_pattern(const ClosedFormDenoiser& den, const Vec& y) {
  const DatasetSpec& spec = den.spec;
  Vec z = spec.units * (y - spec.base());
  std::vector<int> delta(spec.n_dirs());
  for (int j = 0; j < spec.n_dirs(); ++j) {
    ReluBand bd = relu_band(spec, j, den.rho);
    delta[j] = (z[j] > bd.lo && z[j] <= bd.hi) ? 1 : 0;
  }
  return delta;
}

inline Mat jacobian(const ClosedFormDenoiser& den, const Vec& y, double sigma) {
  const DatasetSpec& spec = den.spec;
  const double s2 = sigma * sigma;
  Vec z = spec.units * (y - spec.base());
  for (int j = 0; j < spec.n_dirs(); ++j) {
    ReluBand bd = relu_band(spec, j, den.rho);
    if (std::abs(z[j] - bd.lo) <= 1e-12 || std::abs(z[j] - bd.hi) <= 1e-12)
      throw OnBoundary("jacobian: input on a ReLU kink");
  }
  const int d = spec.dim();
  Mat jac = -Mat::Identity(d, d);
  for (int j = 0; j < spec.n_dirs(); ++j) {
    ReluBand bd = relu_band(spec, j, den.rho);
    if (z[j] > bd.lo && z[j] < bd.hi)
      jac += bd.slope * spec.units.row(j).transpose() * spec.units.row(j);
  }
  return jac / s2;
}

// Balanced representation cost of the closed form read off its neuron list:
// two unit-inner-weight neurons per direction with output scale = band slope.
inline double min_cost_balanced(const DatasetSpec& spec, double rho) {
  double total = 0;
  for (int j = 0; j < spec.n_dirs(); ++j) total += 2.0 * relu_band(spec, j, rho).slope;
  return total;
}

}  // namespace mnflow
