#pragma once

// Test-only oracles: fixed-step RK4 integration, central finite differences,
// and a brute-force stable-point grid search. These stay independent of the
// analytic code paths they verify.

#include <functional>

#include "mnflow/denoiser.hpp"
#include "mnflow/nets.hpp"
#include "mnflow/stability.hpp"

namespace oracles {

using mnflow::Mat;
using mnflow::Vec;

using Field = std::function<Vec(double, const Vec&)>;
using Observer = std::function<void(double, const Vec&)>;

// Classic fixed-step RK4 for dy/dt = f(t, y), observer called at every node.
inline Vec rk4(const Field& f, Vec y, double t0, double t1, double step,
               const Observer& obs = nullptr) {
  double t = t0;
  if (obs) obs(t, y);
  while (t < t1 - 1e-15) {
    double h = std::min(step, t1 - t);
    Vec k1 = f(t, y);
    Vec k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    Vec k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    Vec k4 = f(t + h, y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
    if (obs) obs(t, y);
  }
  return y;
}

// Central finite-difference Jacobian of a vector field.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& y, double step) {
  const int d = static_cast<int>(y.size());
  Mat jac(d, d);
  for (int j = 0; j < d; ++j) {
    Vec hi = y, lo = y;
    hi[j] += step;
    lo[j] -= step;
    jac.col(j) = (f(hi) - f(lo)) / (2.0 * step);
  }
  return jac;
}

// Flattened central finite-difference gradient of a training loss.
inline mnflow::NetGrads fd_loss_grad(const mnflow::NetParams& p, const mnflow::NoisyDataset& data,
                                     const mnflow::TrainMode& mode, double step) {
  auto loss_at = [&](const mnflow::NetParams& q) {
    return mnflow::loss_and_grad(q, data, mode).loss;
  };
  mnflow::NetParams q = p;
  mnflow::NetGrads g = p;  // shapes
  auto diff = [&](double* x, double* out, long n) {
    for (long i = 0; i < n; ++i) {
      double keep = x[i];
      x[i] = keep + step;
      double hi = loss_at(q);
      x[i] = keep - step;
      double lo = loss_at(q);
      x[i] = keep;
      out[i] = (hi - lo) / (2.0 * step);
    }
  };
  diff(q.W.data(), g.W.data(), q.W.size());
  diff(q.b.data(), g.b.data(), q.b.size());
  diff(q.A.data(), g.A.data(), q.A.size());
  diff(q.V.data(), g.V.data(), q.V.size());
  diff(q.c.data(), g.c.data(), q.c.size());
  return g;
}

inline double grad_rel_error(const mnflow::NetGrads& a, const mnflow::NetGrads& b) {
  auto stack = [](const mnflow::NetGrads& g) {
    Vec v(g.W.size() + g.b.size() + g.A.size() + g.V.size() + g.c.size());
    long off = 0;
    auto put = [&](const double* p, long n) {
      for (long i = 0; i < n; ++i) v[off++] = p[i];
    };
    put(g.W.data(), g.W.size());
    put(g.b.data(), g.b.size());
    put(g.A.data(), g.A.size());
    put(g.V.data(), g.V.size());
    put(g.c.data(), g.c.size());
    return v;
  };
  Vec va = stack(a), vb = stack(b);
  return (va - vb).norm() / std::max(vb.norm(), 1e-12);
}

// Dense grid over the u-coordinate cube at the given resolution, filtered by
// is_stationary + classify_stability. Returns the stable stationary points.
inline std::vector<Vec> grid_stable_search(const mnflow::DatasetSpec& spec, double rho,
                                           double resolution) {
  mnflow::ClosedFormDenoiser den(spec, rho);
  const int m = spec.n_dirs();
  std::vector<int> steps(m);
  std::vector<Vec> found;
  const int per = static_cast<int>(std::round(1.0 / resolution)) + 1;
  std::vector<int> idx(m, 0);
  while (true) {
    Vec z(m);
    for (int j = 0; j < m; ++j) z[j] = spec.norms[j] * std::min(1.0, idx[j] * resolution);
    Vec y = spec.base() + spec.units.transpose() * z;
    if (mnflow::is_stationary(den, y, 1.0, 1e-9)) {
      auto rep = mnflow::classify_stability(den, y, 1.0);
      if (rep.stable) found.push_back(y);
    }
    int j = 0;
    for (; j < m; ++j) {
      if (++idx[j] < per) break;
      idx[j] = 0;
    }
    if (j == m) break;
  }
  return found;
}

}  // namespace oracles
