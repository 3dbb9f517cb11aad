#pragma once

// Score-flow and probability-flow integrators (the discrete Euler forms are
// the primary samplers), the closed-form per-branch trajectory solutions,
// limit points, tau thresholds and escape-time windows.

#include "mnflow/denoiser.hpp"
#include "mnflow/trajectory.hpp"

namespace mnflow {

// ---- noise schedule ----------------------------------------------------------

// sigma(t) = sqrt(t), rho(t) = alpha * sigma(t). `times` is descending with
// S+1 entries: times[0] = T down to times[S] = 0; the S denoiser levels sit at
// times[0..S-1]. One third of the levels are equally spaced with
// sigma <= split_sigma, the rest equally spaced above.
struct NoiseSchedule {
  double T = 0;
  int S = 0;
  double alpha = 1.0;
  double split_sigma = 1.0;
  std::vector<double> times;

  double sigma_at(int i) const { return std::sqrt(times[i]); }
  double rho_at(int i) const { return alpha * sigma_at(i); }
};

inline NoiseSchedule make_schedule(double T, int S, double split_sigma, double alpha) {
  if (T <= 0 || S < 2) throw InvalidSpec("make_schedule: need T > 0 and S >= 2");
  const double sigma_max = std::sqrt(T);
  if (split_sigma >= sigma_max) throw BadSplit("make_schedule: split_sigma must be < sqrt(T)");
  if (split_sigma <= 0) throw BadSplit("make_schedule: split_sigma must be positive");
  const int n_low = S / 3;
  const int n_high = S - n_low;
  NoiseSchedule sched;
  sched.T = T;
  sched.S = S;
  sched.alpha = alpha;
  sched.split_sigma = split_sigma;
  std::vector<double> sigmas;  // ascending
  for (int j = 1; j <= n_low; ++j) sigmas.push_back(split_sigma * j / n_low);
  for (int j = 1; j <= n_high; ++j)
    sigmas.push_back(split_sigma + (sigma_max - split_sigma) * j / n_high);
  sched.times.resize(S + 1);
  for (int i = 0; i < S; ++i) sched.times[i] = sigmas[S - 1 - i] * sigmas[S - 1 - i];
  sched.times[0] = T;  // exact top
  sched.times[S] = 0.0;
  for (int i = 0; i + 1 <= S; ++i)
    if (!(sched.times[i] > sched.times[i + 1]))
      throw InvalidSpec("make_schedule: times not strictly decreasing");
  return sched;
}

// ---- denoiser families --------------------------------------------------------

struct LevelInfo {
  int index;     // 0 = highest noise level
  double t;      // time (= sigma^2)
  double sigma;
  double rho;
};

using DenFamily = std::function<Vec(const Vec&, const LevelInfo&)>;

// The closed form needs rho < min||x||/2; high-noise levels are capped there.
inline double capped_rho(const DatasetSpec& spec, double rho) {
  return std::min(rho, 0.499 * spec.norms.minCoeff());
}

inline DenFamily closed_form_family(const DatasetSpec& spec) {
  return [spec](const Vec& y, const LevelInfo& lv) {
    return eval(ClosedFormDenoiser(spec, capped_rho(spec, lv.rho)), y);
  };
}

// Denoiser equivalent of the Taylor-approximated low-noise score:
// h(y) = base + sum u_j (z_j + phi(z_j)); the complement contracts to base.
inline Vec taylor_denoise(const DatasetSpec& spec, const Vec& y, double rho_t) {
  Vec z = spec.units * (y - spec.base());
  Vec h = spec.base();
  for (int j = 0; j < spec.n_dirs(); ++j)
    h += (z[j] + taylor_phi(z[j], spec.norms[j], rho_t)) * spec.units.row(j).transpose();
  return h;
}

inline DenFamily taylor_family(const DatasetSpec& spec) {
  return [spec](const Vec& y, const LevelInfo& lv) {
    return taylor_denoise(spec, y, capped_rho(spec, lv.rho));
  };
}

// ---- numeric integrators -------------------------------------------------------

// Euler score flow at a fixed noise level: y <- y + gamma (h(y) - y)/sigma0^2.
// Trajectory times are k * gamma.
inline Trajectory score_flow_numeric(const std::function<Vec(const Vec&)>& den_fn, const Vec& y0,
                                     double gamma, int iters, double sigma_t0) {
  if (gamma <= 0) throw InvalidSpec("score_flow_numeric: gamma must be positive");
  const double s2 = sigma_t0 * sigma_t0;
  Trajectory traj;
  traj.meta = "score_flow";
  traj.push(0.0, y0);
  Vec y = y0;
  for (int k = 1; k <= iters; ++k) {
    y += gamma * (den_fn(y) - y) / s2;
    traj.push(k * gamma, y);
  }
  return traj;
}

// Discrete VE probability flow over a schedule, integrated from t = T to 0:
// y_{t-1} = y_t + (t_hi - t_lo)(h_t(y_t) - y_t)/(2 t_hi).
inline Trajectory prob_flow_numeric(const DenFamily& family, const Vec& yT,
                                    const NoiseSchedule& sched) {
  Trajectory traj;
  traj.meta = "prob_flow";
  traj.push(sched.T, yT);
  Vec y = yT;
  for (int i = 0; i < sched.S; ++i) {
    const double t_hi = sched.times[i], t_lo = sched.times[i + 1];
    LevelInfo lv{i, t_hi, sched.sigma_at(i), sched.rho_at(i)};
    y += (t_hi - t_lo) * (family(y, lv) - y) / (2.0 * t_hi);
    traj.push(t_lo, y);
  }
  return traj;
}

// ---- analytic score flow (orthogonal) --------------------------------------------

// Branch-stitched per-coordinate solution of the exact-score flow. Events
// (middle-band exits) have closed-form log expressions. A coordinate starting
// exactly at ||x||/2 is frozen and flagged.
inline Vec score_flow_analytic_orthogonal(const DatasetSpec& spec, double rho, double sigma,
                                          const Vec& y0, double t,
                                          bool* midpoint_degenerate = nullptr) {
  if (spec.kind != Geometry::Orthogonal)
    throw InvalidSpec("score_flow_analytic_orthogonal: orthogonal specs only");
  if (rho >= 0.5 * spec.norms.minCoeff())
    throw InvalidSpec("score_flow_analytic_orthogonal: rho < min norm / 2 required");
  const double s2 = sigma * sigma;
  if (midpoint_degenerate) *midpoint_degenerate = false;
  Vec rel = y0 - spec.base();
  Vec z = spec.units * rel;
  Vec perp = rel - spec.units.transpose() * z;
  Vec y = spec.base() + perp * std::exp(-t / s2);
  for (int j = 0; j < spec.n_dirs(); ++j) {
    const double m = spec.norms[j];
    const double gamma = m / (m - 2.0 * rho);
    const double z0 = z[j];
    double zt;
    if (z0 <= rho) {
      zt = z0 * std::exp(-t / s2);
    } else if (z0 > m - rho) {
      zt = m + (z0 - m) * std::exp(-t / s2);
    } else if (z0 == 0.5 * m) {
      zt = z0;  // unstable equilibrium
      if (midpoint_degenerate) *midpoint_degenerate = true;
    } else {
      const double lam = (gamma - 1.0) / s2;
      const double dist = std::abs(z0 - 0.5 * m);
      const double t_exit = std::log((0.5 * m - rho) / dist) / lam;
      if (t <= t_exit) {
        zt = 0.5 * m + (z0 - 0.5 * m) * std::exp(lam * t);
      } else if (z0 > 0.5 * m) {
        zt = m - rho * std::exp(-(t - t_exit) / s2);
      } else {
        zt = rho * std::exp(-(t - t_exit) / s2);
      }
    }
    y += zt * spec.units.row(j).transpose();
  }
  return y;
}

// ---- analytic VE probability flow (orthogonal) -------------------------------------

namespace detail {

// Branch classification at the start time; the VE bands never get crossed
// afterwards (the moving band edge outruns the trajectory), so no events.
enum class VeBranch { Low, Mid, High };

inline VeBranch ve_branch(double z, double m, double rho_T) {
  const double r = std::min(rho_T, 0.5 * m * (1.0 - 1e-12));
  if (z <= r) return VeBranch::Low;
  if (z > m - r) return VeBranch::High;
  return VeBranch::Mid;
}

}  // namespace detail

inline Vec prob_flow_analytic_orthogonal(const DatasetSpec& spec, double alpha, const Vec& yT,
                                         double T, double t, bool* midpoint_degenerate = nullptr) {
  if (spec.kind != Geometry::Orthogonal)
    throw InvalidSpec("prob_flow_analytic_orthogonal: orthogonal specs only");
  if (!(t >= 0 && t <= T)) throw InvalidSpec("prob_flow_analytic_orthogonal: need 0 <= t <= T");
  if (midpoint_degenerate) *midpoint_degenerate = false;
  const double rho_T = alpha * std::sqrt(T);
  const double shrink = std::sqrt(t / T);
  Vec rel = yT - spec.base();
  Vec z = spec.units * rel;
  Vec perp = rel - spec.units.transpose() * z;
  Vec y = spec.base() + perp * shrink;
  for (int j = 0; j < spec.n_dirs(); ++j) {
    const double m = spec.norms[j];
    const double zT = z[j];
    double zt;
    switch (detail::ve_branch(zT, m, rho_T)) {
      case detail::VeBranch::Low: zt = zT * shrink; break;
      case detail::VeBranch::High: zt = m + (zT - m) * shrink; break;
      case detail::VeBranch::Mid:
        if (zT == 0.5 * m && midpoint_degenerate) *midpoint_degenerate = true;
        zt = 0.5 * m +
             (zT - 0.5 * m) * std::exp((2.0 * alpha / m) * (std::sqrt(T) - std::sqrt(t)));
        break;
    }
    y += zt * spec.units.row(j).transpose();
  }
  return y;
}

struct ProbFlowLimit {
  Vec point;
  std::vector<bool> reached_vertex;  // per direction
};

// t -> 0 limit of the analytic VE flow. Low/high coordinates reach their
// vertex value exactly; a middle coordinate settles at its interior limit
// (clamped to the box in the degenerate large-rho_T regimes).
inline ProbFlowLimit prob_flow_limit(const DatasetSpec& spec, double alpha, const Vec& yT,
                                     double T) {
  if (spec.kind != Geometry::Orthogonal)
    throw InvalidSpec("prob_flow_limit: orthogonal specs only");
  const double rho_T = alpha * std::sqrt(T);
  Vec z = spec.units * (yT - spec.base());
  ProbFlowLimit out;
  out.reached_vertex.resize(spec.n_dirs());
  out.point = spec.base();
  for (int j = 0; j < spec.n_dirs(); ++j) {
    const double m = spec.norms[j];
    const double zT = z[j];
    double zend;
    bool vertex;
    switch (detail::ve_branch(zT, m, rho_T)) {
      case detail::VeBranch::Low: zend = 0.0; vertex = true; break;
      case detail::VeBranch::High: zend = m; vertex = true; break;
      default: {
        if (zT == 0.5 * m) throw MidpointError("prob_flow_limit: coordinate at exact midpoint");
        double v = 0.5 * m + (zT - 0.5 * m) * std::exp(2.0 * alpha * std::sqrt(T) / m);
        if (v >= m) {
          zend = m; vertex = true;
        } else if (v <= 0) {
          zend = 0; vertex = true;
        } else {
          zend = v; vertex = false;
        }
      }
    }
    out.reached_vertex[j] = vertex;
    out.point += zend * spec.units.row(j).transpose();
  }
  return out;
}

// Starting time separating vertex convergence from interior boundary limits
// for one middle-band coordinate.
inline double tau_threshold(double norm, double alpha, double yTi) {
  if (yTi == 0.5 * norm) throw MidpointError("tau_threshold: coordinate at exact midpoint");
  const double l = std::log((0.5 * norm) / std::abs(yTi - 0.5 * norm));
  const double c = norm / (2.0 * alpha);
  return c * c * l * l;
}

// ---- escape-time window (score flow, orthogonal) -----------------------------------

struct EscapeWindow {
  double T0, T1;
};

// Time window in which the trajectory is epsilon-close to the hyperbox
// boundary but not yet stationary. T1 covers middle coordinates heading up
// (time to reach ||x||-rho); T0 covers the contracting coordinates (and any
// off-span component) reaching epsilon.
inline EscapeWindow escape_times(const DatasetSpec& spec, double rho, double sigma, const Vec& y0,
                                 double epsilon) {
  if (spec.kind != Geometry::Orthogonal) throw InvalidSpec("escape_times: orthogonal specs only");
  if (epsilon <= 0) throw InvalidSpec("escape_times: epsilon must be positive");
  const double s2 = sigma * sigma;
  Vec rel = y0 - spec.base();
  Vec z = spec.units * rel;
  if (epsilon >= z.array().abs().minCoeff())
    throw InvalidSpec("escape_times: need epsilon < min |u_i . y0|");
  double T1 = std::numeric_limits<double>::infinity();
  double T0 = 0.0;
  for (int j = 0; j < spec.n_dirs(); ++j) {
    const double m = spec.norms[j];
    const double zj = z[j];
    if (zj > rho && zj <= m - rho) {
      if (zj > 0.5 * m)
        T1 = std::min(T1, s2 * (m - 2.0 * rho) / (2.0 * rho) *
                              std::log((0.5 * m - rho) / (zj - 0.5 * m)));
      // middle coordinates heading down keep travelling along the boundary
    } else {
      const double dist = (zj <= rho) ? std::abs(zj) : std::abs(zj - m);
      if (dist > epsilon) T0 = std::max(T0, s2 * std::log(dist / epsilon));
    }
  }
  const double resid = (rel - spec.units.transpose() * z).norm();
  if (resid > epsilon) T0 = std::max(T0, s2 * std::log(resid / epsilon));
  if (T0 >= T1) throw EmptyWindow("escape_times: window empty (rho too large for this epsilon)");
  return {T0, T1};
}

// ---- obtuse chord flows ---------------------------------------------------------

namespace detail {

inline int active_chord_index(const DatasetSpec& spec, const Vec& z, double rho) {
  int active = -1;
  for (int j = 0; j < spec.n_dirs(); ++j) {
    if (z[j] >= rho) {
      if (active >= 0 || z[j] >= spec.norms[j] - rho) return -1;
      active = j;
    }
  }
  return active;
}

}  // namespace detail

// Score flow in the single-active-chord region: growth e^{2 rho/(||x||-2 rho) t/s2}
// along u_i toward the nearer chord edge, plain decay orthogonally.
inline Vec analytic_obtuse_score_flow(const DatasetSpec& spec, double rho, double sigma,
                                      const Vec& y0, double t) {
  if (spec.kind != Geometry::ObtuseSimplex)
    throw InvalidSpec("analytic_obtuse_score_flow: obtuse specs only");
  const double s2 = sigma * sigma;
  Vec rel = y0 - spec.base();
  Vec z = spec.units * rel;
  const int i = detail::active_chord_index(spec, z, rho);
  if (i < 0) throw RegionViolation("analytic_obtuse_score_flow: not in a single-active-chord region");
  const double m = spec.norms[i];
  Vec u = spec.units.row(i).transpose();
  const double zi = u.dot(rel);
  const double lam = 2.0 * rho / (m - 2.0 * rho) / s2;
  const double zt = 0.5 * m + (zi - 0.5 * m) * std::exp(lam * t);
  Vec perp = rel - zi * u;
  return spec.base() + zt * u + perp * std::exp(-t / s2);
}

// VE probability flow in the same region (Taylor score); the chord coordinate
// follows the orthogonal middle-branch law, the rest shrinks by sqrt(t/T).
inline Vec analytic_obtuse_prob_flow(const DatasetSpec& spec, double alpha, const Vec& yT, double T,
                                     double t) {
  if (spec.kind != Geometry::ObtuseSimplex)
    throw InvalidSpec("analytic_obtuse_prob_flow: obtuse specs only");
  if (!(t >= 0 && t <= T)) throw InvalidSpec("analytic_obtuse_prob_flow: need 0 <= t <= T");
  const double rho_T = alpha * std::sqrt(T);
  Vec rel = yT - spec.base();
  Vec z = spec.units * rel;
  const int i = detail::active_chord_index(spec, z, rho_T);
  if (i < 0) throw RegionViolation("analytic_obtuse_prob_flow: not in a single-active-chord region");
  const double m = spec.norms[i];
  Vec u = spec.units.row(i).transpose();
  const double zi = u.dot(rel);
  const double zt =
      0.5 * m + (zi - 0.5 * m) * std::exp((2.0 * alpha / m) * (std::sqrt(T) - std::sqrt(t)));
  Vec perp = rel - zi * u;
  return spec.base() + zt * u + perp * std::sqrt(t / T);
}

// ---- equilateral triangle score flow ----------------------------------------------

// Two-eigenmode solution near the x1-x2 edge: the (u1+u2) mode settles at the
// edge midpoint, the (u1-u2)/sqrt(3) mode grows toward the nearer vertex.
inline Vec analytic_triangle_score_flow(const DatasetSpec& spec, double rho, double sigma,
                                        const Vec& y0, double t) {
  if (spec.kind != Geometry::EquilateralTriangle)
    throw InvalidSpec("analytic_triangle_score_flow: triangle specs only");
  const double s2 = sigma * sigma;
  const double r = spec.norms[0];
  Vec base = spec.base();
  Vec rel = y0 - base;
  Vec z = spec.units * rel;
  const double lo = -0.5 * r + rho, hi = r - rho;
  if (!(z[0] > lo && z[0] < hi && z[1] > lo && z[1] < hi && z[2] < lo))
    throw RegionViolation("analytic_triangle_score_flow: start outside the edge region");
  const double s = r / (1.5 * r - 2.0 * rho);
  const double lam1 = 1.5 * s - 1.0;  // > 0, grows along u1 - u2
  const double lam2 = 0.5 * s - 1.0;  // < 0, settles along u1 + u2
  Vec u1 = spec.units.row(0).transpose(), u2 = spec.units.row(1).transpose();
  Vec v1 = (u1 - u2) / std::sqrt(3.0);
  Vec v2 = u1 + u2;  // unit since u1.u2 = -1/2
  const double p = v1.dot(rel), q = v2.dot(rel);
  Vec w = rel - p * v1 - q * v2;
  return base + v1 * p * std::exp(lam1 * t / s2) +
         v2 * (0.5 * r + (q - 0.5 * r) * std::exp(lam2 * t / s2)) + w * std::exp(-t / s2);
}

// ---- path comparison utilities ------------------------------------------------------

inline double point_segment_distance(const Vec& p, const Vec& a, const Vec& b) {
  Vec ab = b - a;
  double den = ab.squaredNorm();
  if (den == 0) return (p - a).norm();
  double s = std::clamp((p - a).dot(ab) / den, 0.0, 1.0);
  return (p - a - s * ab).norm();
}

inline double directed_path_gap(const std::vector<Vec>& from, const std::vector<Vec>& to) {
  double worst = 0;
  for (const Vec& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < to.size(); ++i)
      best = std::min(best, point_segment_distance(p, to[i], to[i + 1]));
    if (to.size() == 1) best = (p - to[0]).norm();
    worst = std::max(worst, best);
  }
  return worst;
}

// Symmetric gap between two polylines (the geometric picture of "the two
// trajectories are overlaid"). Time-matched comparison is meaningless here:
// near the unstable midpoint any rate mismatch produces O(||x||) lag.
inline double path_gap(const Trajectory& a, const Trajectory& b) {
  return std::max(directed_path_gap(a.states, b.states), directed_path_gap(b.states, a.states));
}

struct TrajectoryComparison {
  Trajectory exact;
  Trajectory taylor;
  double max_gap;
};

// Integrates the score flow under the exact and the Taylor score from one
// start and measures the path gap.
inline TrajectoryComparison compare_score_trajectories(const DatasetSpec& spec, double rho,
                                                       double sigma, const Vec& y0, double gamma,
                                                       int iters) {
  ClosedFormDenoiser den(spec, rho);
  TrajectoryComparison cmp;
  cmp.exact = score_flow_numeric(denoiser_fn(den), y0, gamma, iters, sigma);
  cmp.taylor = score_flow_numeric([&](const Vec& y) { return taylor_denoise(spec, y, rho); }, y0,
                                  gamma, iters, sigma);
  cmp.exact.meta = "score_flow_exact";
  cmp.taylor.meta = "score_flow_taylor";
  cmp.max_gap = path_gap(cmp.exact, cmp.taylor);
  return cmp;
}

}  // namespace mnflow
