#pragma once

// Convergence-type classification of flow terminals: training point, virtual
// point (subset sum), hyperbox boundary, or other.

#include <array>

#include "mnflow/dataset.hpp"

namespace mnflow {

enum class LabelKind { TrainingPoint, VirtualPoint, AugmentedPoint, Boundary, Other };

inline const char* label_name(LabelKind k) {
  switch (k) {
    case LabelKind::TrainingPoint: return "training";
    case LabelKind::VirtualPoint: return "virtual";
    case LabelKind::AugmentedPoint: return "augmented";
    case LabelKind::Boundary: return "boundary";
    case LabelKind::Other: return "other";
  }
  return "?";
}

enum class Metric { Linf, L2 };

inline const char* metric_name(Metric m) { return m == Metric::Linf ? "linf" : "l2"; }

inline double metric_dist(const Vec& diff, Metric m) {
  return m == Metric::Linf ? diff.lpNorm<Eigen::Infinity>() : diff.norm();
}

// Distances are measured in the unit-frame chart: per-direction coordinate
// differences plus the off-span component as one more coordinate. L2 matches
// the ambient Euclidean distance; Linf is axis-aligned with the hyperbox.
inline double frame_dist(const DatasetSpec& spec, const Vec& a, const Vec& b, Metric m) {
  Vec diff = a - b;
  Vec z = spec.units * diff;
  double resid = (diff - spec.units.transpose() * z).norm();
  if (m == Metric::Linf) return std::max(z.lpNorm<Eigen::Infinity>(), resid);
  return std::sqrt(z.squaredNorm() + resid * resid);
}

struct ConvergenceLabel {
  LabelKind kind = LabelKind::Other;
  int detail = -1;  // point index (training/augmented) or subset cardinality (virtual)
  double distance = 0;
  Metric metric = Metric::Linf;
  double threshold = 0;
};

// Euclidean distance to the boundary of the box prod [0, ||x_n||] x {0}:
// clamp the frame coordinates, zero the residual, and push strictly interior
// clamps to the nearest face.
inline double distance_to_hyperbox(const DatasetSpec& spec, const Vec& y) {
  if (spec.kind != Geometry::Orthogonal)
    throw InvalidSpec("distance_to_hyperbox: orthogonal specs only");
  Vec rel = y - spec.base();
  Vec z = spec.units * rel;
  double out2 = (rel - spec.units.transpose() * z).squaredNorm();
  bool interior = true;
  double push = std::numeric_limits<double>::infinity();
  for (int j = 0; j < spec.n_dirs(); ++j) {
    const double m = spec.norms[j];
    const double c = std::clamp(z[j], 0.0, m);
    out2 += (z[j] - c) * (z[j] - c);
    if (c <= 0.0 || c >= m) interior = false;
    push = std::min(push, std::min(c, m - c));
  }
  double dist = std::sqrt(out2);
  if (interior) dist += push;
  return dist;
}

// Precedence: training (incl. base and augmented points) > virtual > boundary.
inline ConvergenceLabel classify(const DatasetSpec& spec, const Vec& y, Metric metric,
                                 double threshold) {
  if (spec.kind != Geometry::Orthogonal) throw InvalidSpec("classify: orthogonal specs only");
  ConvergenceLabel label;
  label.metric = metric;
  label.threshold = threshold;

  int best_row = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < spec.n_points(); ++r) {
    double d = frame_dist(spec, y, spec.points.row(r).transpose(), metric);
    if (d < best) {
      best = d;
      best_row = r;
    }
  }
  if (best <= threshold) {
    label.kind = best_row >= spec.n_core() ? LabelKind::AugmentedPoint : LabelKind::TrainingPoint;
    label.detail = best_row;
    label.distance = best;
    return label;
  }

  // Snap each frame coordinate to the nearest of {0, ||x_n||} (ties go up).
  Vec z = spec.units * (y - spec.base());
  Vec vertex = spec.base();
  int card = 0;
  for (int j = 0; j < spec.n_dirs(); ++j) {
    if (z[j] >= 0.5 * spec.norms[j]) {
      vertex += spec.norms[j] * spec.units.row(j).transpose();
      ++card;
    }
  }
  if (card >= 2) {
    double d = frame_dist(spec, y, vertex, metric);
    if (d <= threshold) {
      label.kind = LabelKind::VirtualPoint;
      label.detail = card;
      label.distance = d;
      return label;
    }
  }

  double db = distance_to_hyperbox(spec, y);
  label.distance = db;
  label.kind = db <= threshold ? LabelKind::Boundary : LabelKind::Other;
  return label;
}

struct StatsReport {
  std::array<int, 5> counts{};  // indexed by LabelKind
  int total = 0;
  Metric metric = Metric::Linf;
  double threshold = 0;

  double fraction(LabelKind k) const {
    return total ? static_cast<double>(counts[static_cast<int>(k)]) / total : 0.0;
  }
  int count(LabelKind k) const { return counts[static_cast<int>(k)]; }
};

inline StatsReport aggregate(const std::vector<ConvergenceLabel>& labels) {
  if (labels.empty()) throw EmptyInput("aggregate: no labels");
  StatsReport rep;
  rep.metric = labels.front().metric;
  rep.threshold = labels.front().threshold;
  for (const auto& l : labels) {
    ++rep.counts[static_cast<int>(l.kind)];
    ++rep.total;
  }
  return rep;
}

inline Eigen::Vector3d project3(const DatasetSpec& spec, const Vec& y,
                                const std::array<int, 3>& axes) {
  for (int a : axes)
    if (a < 0 || a >= spec.n_dirs()) throw BadAxes("project3: axis out of range");
  if (axes[0] == axes[1] || axes[0] == axes[2] || axes[1] == axes[2])
    throw BadAxes("project3: axes must be distinct");
  Eigen::Vector3d p;
  for (int k = 0; k < 3; ++k) p[k] = spec.units.row(axes[k]).dot(y);
  return p;
}

}  // namespace mnflow
