#pragma once

// Dataset geometries with closed-form minimum-norm denoisers: orthogonal
// frames, obtuse simplices and the equilateral triangle, plus the hyperbox
// coordinate chart and boundary augmentation.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mnflow/common.hpp"

namespace mnflow {

enum class Geometry { Orthogonal, ObtuseSimplex, EquilateralTriangle };

inline const char* geometry_name(Geometry g) {
  switch (g) {
    case Geometry::Orthogonal: return "Orthogonal";
    case Geometry::ObtuseSimplex: return "ObtuseSimplex";
    case Geometry::EquilateralTriangle: return "EquilateralTriangle";
  }
  return "?";
}

// Clean training points plus the derived unit frame.
//
// Direction index j (0-based) refers to units.row(j):
//   orthogonal / obtuse : direction j belongs to training point points.row(j+1),
//                         measured from the base point points.row(base_index);
//   triangle            : direction j belongs to points.row(j), measured from
//                         the centroid (base_index = -1, base derived).
struct DatasetSpec {
  Geometry kind = Geometry::Orthogonal;
  Mat points;           // N x d, one training point per row
  int base_index = 0;   // -1 for triangle (centroid derived)
  Mat units;            // n_dirs x d unit directions
  Vec norms;            // n_dirs distances to base
  int augmented_count = 0;  // trailing rows of `points` drawn on the hyperbox boundary
  std::uint64_t seed = 0;

  int n_points() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  int n_dirs() const { return static_cast<int>(units.rows()); }
  int n_core() const { return n_points() - augmented_count; }

  Vec base() const {
    if (base_index >= 0) return points.row(base_index).transpose();
    return points.colwise().mean().transpose();  // centroid
  }

  // Training point that direction j points at.
  Vec dir_point(int j) const {
    int row = (kind == Geometry::EquilateralTriangle) ? j : j + 1;
    return points.row(row).transpose();
  }
};

struct HyperboxCoords {
  Vec along;        // u_j . (y - base)
  double residual;  // norm of the component orthogonal to span{u_j}; orthogonal kind only
};

// ---- constructors ----------------------------------------------------------

namespace detail {

// Orthonormal d x m frame from a seeded Gaussian draw, deterministic sign fix.
inline Mat orthonormal_frame(int d, int m, Rng& rng) {
  Mat g = gaussian_matrix(d, m, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(d, m);
  Mat r = qr.matrixQR().topLeftCorner(m, m);
  for (int j = 0; j < m; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

inline void finish_from_units(DatasetSpec& spec) {
  const int m = spec.n_dirs();
  spec.points = Mat::Zero(m + 1, spec.units.cols());
  for (int j = 0; j < m; ++j) spec.points.row(j + 1) = spec.norms[j] * spec.units.row(j);
}

}  // namespace detail

inline DatasetSpec make_orthogonal(int N, int d, const Vec& norms, std::uint64_t seed) {
  if (N < 2) throw InvalidSpec("make_orthogonal: need N >= 2");
  if (N > d + 1) throw TooManyPoints("make_orthogonal: N-1 orthogonal directions need N-1 <= d");
  if (norms.size() != N - 1) throw InvalidSpec("make_orthogonal: norms length must be N-1");
  if ((norms.array() <= 0).any()) throw ZeroNorm("make_orthogonal: all norms must be positive");
  Rng rng(seed);
  DatasetSpec spec;
  spec.kind = Geometry::Orthogonal;
  spec.seed = seed;
  spec.units = detail::orthonormal_frame(d, N - 1, rng).transpose();
  spec.norms = norms;
  detail::finish_from_units(spec);
  return spec;
}

inline DatasetSpec make_orthogonal(int N, int d, double norm, std::uint64_t seed) {
  if (N < 2) throw InvalidSpec("make_orthogonal: need N >= 2");
  if (N > d + 1) throw TooManyPoints("make_orthogonal: N-1 orthogonal directions need N-1 <= d");
  return make_orthogonal(N, d, Vec::Constant(N - 1, norm), seed);
}

// Mildly obtuse unit-norm simplex: perturb an orthonormal frame by a shared
// negative-correlation shift, so every pairwise inner product is ~ -0.1/(N-1).
inline DatasetSpec make_obtuse_simplex(int N, int d, std::uint64_t seed) {
  if (N < 3) throw InvalidSpec("make_obtuse_simplex: need N >= 3");
  if (N > d + 1) throw TooManyPoints("make_obtuse_simplex: simplex needs N-1 <= d");
  const int m = N - 1;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(mix_seed(seed, attempt));
    Mat q = detail::orthonormal_frame(d, m, rng);  // columns orthonormal
    Vec s = q.rowwise().sum();
    const double a = 0.1 / m;
    Mat v = q - a * s * Eigen::RowVectorXd::Ones(m);
    bool ok = true;
    for (int i = 0; i < m && ok; ++i)
      for (int j = i + 1; j < m && ok; ++j)
        if (v.col(i).dot(v.col(j)) >= 0) ok = false;
    if (!ok) continue;
    DatasetSpec spec;
    spec.kind = Geometry::ObtuseSimplex;
    spec.seed = seed;
    spec.units = Mat(m, d);
    spec.norms = Vec::Ones(m);
    for (int j = 0; j < m; ++j) spec.units.row(j) = v.col(j).normalized();
    detail::finish_from_units(spec);
    return spec;
  }
  throw ConstructionFailed("make_obtuse_simplex: no obtuse configuration found");
}

inline DatasetSpec make_equilateral_triangle(int d, double side) {
  if (d < 2) throw InvalidSpec("make_equilateral_triangle: need d >= 2");
  if (side <= 0) throw ZeroNorm("make_equilateral_triangle: side must be positive");
  const double r = side / std::sqrt(3.0);  // circumradius
  DatasetSpec spec;
  spec.kind = Geometry::EquilateralTriangle;
  spec.base_index = -1;
  spec.units = Mat::Zero(3, d);
  spec.units(0, 1) = 1.0;
  spec.units(1, 0) = std::sqrt(3.0) / 2.0;
  spec.units(1, 1) = -0.5;
  spec.units(2, 0) = -std::sqrt(3.0) / 2.0;
  spec.units(2, 1) = -0.5;
  spec.norms = Vec::Constant(3, r);
  spec.points = r * spec.units;
  return spec;
}

// ---- hyperbox chart --------------------------------------------------------

inline HyperboxCoords coords(const DatasetSpec& spec, const Vec& y) {
  HyperboxCoords c;
  Vec rel = y - spec.base();
  c.along = spec.units * rel;
  if (spec.kind == Geometry::Orthogonal) {
    Vec recon = spec.units.transpose() * c.along;
    c.residual = (rel - recon).norm();
  } else {
    c.residual = 0.0;  // raw projections only for non-orthogonal frames
  }
  return c;
}

// Inverse of coords() for orthogonal specs. The residual is reattached along a
// deterministic direction orthogonal to the unit frame.
inline Vec reconstruct(const DatasetSpec& spec, const HyperboxCoords& c) {
  if (spec.kind != Geometry::Orthogonal)
    throw InvalidSpec("reconstruct: orthogonal specs only");
  Vec y = spec.base() + spec.units.transpose() * c.along;
  if (c.residual > 0) {
    const int d = spec.dim();
    for (int i = 0; i < d; ++i) {
      Vec e = Vec::Zero(d);
      e[i] = 1.0;
      Vec w = e - spec.units.transpose() * (spec.units * e);
      double n = w.norm();
      if (n > 1e-8) {
        y += (c.residual / n) * w;
        break;
      }
    }
  }
  return y;
}

inline Vec virtual_point(const DatasetSpec& spec, const std::vector<int>& subset) {
  if (spec.kind != Geometry::Orthogonal)
    throw InvalidSpec("virtual_point: orthogonal specs only");
  Vec base = spec.base();
  Vec p = base;
  for (int n : subset) {
    if (n < 1 || n >= spec.n_core()) throw IndexOutOfRange("virtual_point: index out of range");
    p += spec.points.row(n).transpose() - base;
  }
  return p;
}

// ---- boundary augmentation -------------------------------------------------

// Draws points on the hyperbox boundary: i.i.d. Unif[0.3,0.7] coordinates in
// the unit frame, then one uniformly chosen axis snapped to 0 or 1.
inline DatasetSpec augment_boundary_points(const DatasetSpec& spec, int count, std::uint64_t seed) {
  if (spec.kind != Geometry::Orthogonal)
    throw InvalidSpec("augment_boundary_points: orthogonal specs only");
  if ((spec.norms.array() - 1.0).abs().maxCoeff() > 1e-12)
    throw InvalidSpec("augment_boundary_points: unit norms required");
  if (count == 0) return spec;
  DatasetSpec out = spec;
  const int m = spec.n_dirs();
  Rng rng(seed);
  std::uniform_real_distribution<double> box(0.3, 0.7);
  std::uniform_int_distribution<int> axis(0, m - 1);
  std::uniform_int_distribution<int> face(0, 1);
  Mat extra(count, spec.dim());
  for (int i = 0; i < count; ++i) {
    Vec c(m);
    for (int j = 0; j < m; ++j) c[j] = box(rng);
    c[axis(rng)] = static_cast<double>(face(rng));  // project onto a random face
    extra.row(i) = (spec.units.transpose() * c).transpose() + spec.base().transpose();
  }
  Mat pts(spec.n_points() + count, spec.dim());
  pts.topRows(spec.n_points()) = spec.points;
  pts.bottomRows(count) = extra;
  out.points = pts;
  out.augmented_count = spec.augmented_count + count;
  return out;
}

// ---- validation ------------------------------------------------------------

inline bool validate(const DatasetSpec& spec, std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  const double tol = 1e-10;
  const int m = spec.n_dirs();
  if (m < 1) return fail("no directions");
  if ((spec.norms.array() <= 0).any()) return fail("non-positive norm");
  Vec base = spec.base();
  for (int j = 0; j < m; ++j) {
    if (std::abs(spec.units.row(j).norm() - 1.0) > tol) return fail("unit row not normalized");
    Vec expect = base + spec.norms[j] * spec.units.row(j).transpose();
    if ((spec.dir_point(j) - expect).lpNorm<Eigen::Infinity>() > tol)
      return fail("points inconsistent with units/norms");
  }
  switch (spec.kind) {
    case Geometry::Orthogonal: {
      if (spec.n_core() - 1 != m) return fail("direction count mismatch");
      if (m > spec.dim()) return fail("more directions than ambient dimensions");
      Mat gram = spec.units * spec.units.transpose();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          if (i != j && std::abs(gram(i, j)) > tol) return fail("units not orthogonal");
      for (int r = spec.n_core(); r < spec.n_points(); ++r) {
        Vec c = spec.units * (spec.points.row(r).transpose() - base);
        double resid =
            (spec.points.row(r).transpose() - base - spec.units.transpose() * c).norm();
        if (resid > 1e-9) return fail("augmented point off the frame span");
        int snapped = 0;
        for (int j = 0; j < m; ++j) {
          if (std::abs(c[j]) < 1e-9 || std::abs(c[j] - 1.0) < 1e-9)
            ++snapped;
          else if (c[j] < 0.3 - 1e-9 || c[j] > 0.7 + 1e-9)
            return fail("augmented coordinate outside [0.3,0.7]");
        }
        if (snapped != 1) return fail("augmented point must have exactly one snapped axis");
      }
      break;
    }
    case Geometry::ObtuseSimplex: {
      if (spec.n_core() - 1 != m) return fail("direction count mismatch");
      for (int i = 1; i < spec.n_core(); ++i)
        for (int j = i + 1; j < spec.n_core(); ++j) {
          double dot = (spec.points.row(i).transpose() - base)
                           .dot(spec.points.row(j).transpose() - base);
          if (dot >= 0) return fail("pairwise inner product not strictly negative");
        }
      Eigen::ColPivHouseholderQR<Mat> qr(spec.units.transpose());
      if (qr.rank() != m) return fail("simplex vertices not affinely independent");
      break;
    }
    case Geometry::EquilateralTriangle: {
      if (spec.n_points() != 3 || m != 3) return fail("triangle needs exactly 3 points");
      double d01 = (spec.points.row(0) - spec.points.row(1)).norm();
      double d02 = (spec.points.row(0) - spec.points.row(2)).norm();
      double d12 = (spec.points.row(1) - spec.points.row(2)).norm();
      if (std::abs(d01 - d02) > tol || std::abs(d01 - d12) > tol)
        return fail("pairwise distances not equal");
      if ((spec.units.colwise().sum()).norm() > tol) return fail("unit directions do not sum to zero");
      break;
    }
  }
  return true;
}

inline void require_valid(const DatasetSpec& spec) {
  std::string why;
  if (!validate(spec, &why)) throw InvalidSpec("invalid dataset: " + why);
}

// Builds a spec directly from points (used for hand-crafted configurations).
inline DatasetSpec spec_from_points(Geometry kind, const Mat& points, int augmented = 0,
                                    std::uint64_t seed = 0) {
  DatasetSpec spec;
  spec.kind = kind;
  spec.points = points;
  spec.augmented_count = augmented;
  spec.seed = seed;
  spec.base_index = (kind == Geometry::EquilateralTriangle) ? -1 : 0;
  Vec base = spec.base();
  const int m = (kind == Geometry::EquilateralTriangle) ? 3 : spec.n_core() - 1;
  spec.units = Mat(m, points.cols());
  spec.norms = Vec(m);
  for (int j = 0; j < m; ++j) {
    Vec rel = spec.dir_point(j) - base;
    spec.norms[j] = rel.norm();
    if (spec.norms[j] <= 0) throw ZeroNorm("spec_from_points: coincident point and base");
    spec.units.row(j) = rel.transpose() / spec.norms[j];
  }
  require_valid(spec);
  return spec;
}

// All theorem statements assume the base point at the origin; this shifts a
// whole spec rigidly when a nonzero base is wanted.
inline DatasetSpec translate(const DatasetSpec& spec, const Vec& offset) {
  DatasetSpec out = spec;
  out.points = spec.points.rowwise() + offset.transpose();
  return out;
}

// ---- serialization ---------------------------------------------------------

inline void save_dataset(const DatasetSpec& spec, std::ostream& os) {
  char buf[64];
  os << "# kind=" << geometry_name(spec.kind) << " N=" << spec.n_points() << " d=" << spec.dim()
     << " seed=" << spec.seed;
  if (spec.augmented_count > 0) os << " augmented=" << spec.augmented_count;
  os << "\n";
  for (int i = 0; i < spec.n_points(); ++i) {
    for (int j = 0; j < spec.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", spec.points(i, j));
      os << (j ? " " : "") << buf;
    }
    os << "\n";
  }
}

inline void save_dataset(const DatasetSpec& spec, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path);
  save_dataset(spec, f);
}

inline DatasetSpec load_dataset(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("# ", 0) != 0)
    throw IoError("dataset file: missing header line");
  const std::string padded = " " + header.substr(2);
  auto field = [&](const std::string& key) -> std::string {
    auto pos = padded.find(" " + key + "=");
    if (pos == std::string::npos) return "";
    pos += key.size() + 2;
    auto end = padded.find(' ', pos);
    return padded.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
  };
  std::string kind_s = field("kind");
  Geometry kind;
  if (kind_s == "Orthogonal")
    kind = Geometry::Orthogonal;
  else if (kind_s == "ObtuseSimplex")
    kind = Geometry::ObtuseSimplex;
  else if (kind_s == "EquilateralTriangle")
    kind = Geometry::EquilateralTriangle;
  else
    throw IoError("dataset file: unknown kind '" + kind_s + "'");
  int N = std::stoi(field("N"));
  int d = std::stoi(field("d"));
  std::uint64_t seed = std::stoull(field("seed"));
  int augmented = field("augmented").empty() ? 0 : std::stoi(field("augmented"));
  Mat pts(N, d);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < d; ++j)
      if (!(is >> pts(i, j))) throw IoError("dataset file: truncated matrix");
  return spec_from_points(kind, pts, augmented, seed);
}

inline DatasetSpec load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return load_dataset(f);
}

}  // namespace mnflow
