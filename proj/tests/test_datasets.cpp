#include <catch2/catch_amalgamated.hpp>
#include <cstring>
#include <sstream>

#include "mnflow/classify.hpp"
#include "mnflow/dataset.hpp"

using namespace mnflow;

TEST_CASE("orthogonal constructor produces an orthonormal frame") {
  auto spec = make_orthogonal(3, 3, 1.0, 0);
  Mat gram = spec.units * spec.units.transpose();
  CHECK((gram - Mat::Identity(2, 2)).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(spec.points.row(0).norm() == 0.0);

  auto big = make_orthogonal(31, 30, 1.0, 7);
  std::string why;
  CHECK(validate(big, &why));
  Mat g2 = big.units * big.units.transpose();
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j)
      if (i != j) CHECK(std::abs(g2(i, j)) < 1e-10);
}

TEST_CASE("orthogonal constructor rejects bad arguments") {
  CHECK_THROWS_AS(make_orthogonal(32, 30, 1.0, 0), TooManyPoints);
  Vec norms = Vec::Ones(2);
  norms[1] = 0.0;
  CHECK_THROWS_AS(make_orthogonal(3, 4, norms, 0), ZeroNorm);
  CHECK_THROWS_AS(make_orthogonal(3, 4, -1.0, 0), ZeroNorm);
}

TEST_CASE("constructors are deterministic") {
  auto a = make_orthogonal(10, 12, 1.0, 42);
  auto b = make_orthogonal(10, 12, 1.0, 42);
  REQUIRE(a.points.size() == b.points.size());
  CHECK(std::memcmp(a.points.data(), b.points.data(), sizeof(double) * a.points.size()) == 0);
  auto c = make_obtuse_simplex(5, 7, 9);
  auto d = make_obtuse_simplex(5, 7, 9);
  CHECK(std::memcmp(c.points.data(), d.points.data(), sizeof(double) * c.points.size()) == 0);
}

TEST_CASE("obtuse simplex has strictly negative pairwise inner products") {
  auto spec = make_obtuse_simplex(3, 2, 1);
  for (int i = 1; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      CHECK(spec.points.row(i).dot(spec.points.row(j)) < 0);
  CHECK(validate(make_obtuse_simplex(4, 3, 2)));
  CHECK_THROWS_AS(make_obtuse_simplex(3, 1, 0), TooManyPoints);
}

TEST_CASE("equilateral triangle geometry") {
  auto spec = make_equilateral_triangle(2, std::sqrt(3.0));
  for (int n = 0; n < 3; ++n)
    CHECK(std::abs((spec.points.row(n).transpose() - spec.base()).norm() - 1.0) < 1e-12);
  CHECK(spec.units.colwise().sum().norm() < 1e-12);
  CHECK(validate(spec));

  auto emb = make_equilateral_triangle(5, 2.0);
  for (int n = 0; n < 3; ++n)
    for (int j = 2; j < 5; ++j) CHECK(emb.points(n, j) == 0.0);
}

TEST_CASE("boundary augmentation") {
  auto spec = make_orthogonal(31, 30, 1.0, 3);
  auto same = augment_boundary_points(spec, 0, 5);
  CHECK(same.n_points() == 31);

  auto aug = augment_boundary_points(spec, 9, 5);
  CHECK(aug.n_points() == 40);
  CHECK(aug.n_core() == 31);
  CHECK(validate(aug));
  for (int r = 31; r < 40; ++r) {
    Vec c = aug.units * (aug.points.row(r).transpose() - aug.base());
    int snapped = 0;
    for (int j = 0; j < 30; ++j) {
      if (std::abs(c[j]) < 1e-9 || std::abs(c[j] - 1.0) < 1e-9)
        ++snapped;
      else {
        CHECK(c[j] >= 0.3 - 1e-9);
        CHECK(c[j] <= 0.7 + 1e-9);
      }
    }
    CHECK(snapped == 1);
    CHECK(distance_to_hyperbox(aug, aug.points.row(r).transpose()) < 1e-9);
  }
}

TEST_CASE("virtual points are subset sums") {
  auto spec = make_orthogonal(6, 8, 1.0, 11);
  CHECK(virtual_point(spec, {}).norm() == 0.0);
  Vec v = virtual_point(spec, {1, 2});
  CHECK((v - (spec.units.row(0) + spec.units.row(1)).transpose()).norm() < 1e-14);
  Vec w = virtual_point(spec, {1, 2, 3});
  Vec z = spec.units * w;
  for (int j = 0; j < 5; ++j) CHECK(std::abs(z[j] - (j < 3 ? 1.0 : 0.0)) < 1e-12);
  CHECK_THROWS_AS(virtual_point(spec, {6}), IndexOutOfRange);
}

TEST_CASE("hyperbox coordinates") {
  auto spec = make_orthogonal(31, 30, 1.0, 7);
  for (int k : {1, 5, 30}) {
    auto c = coords(spec, spec.points.row(k).transpose());
    for (int j = 0; j < 30; ++j) CHECK(std::abs(c.along[j] - (j == k - 1 ? 1.0 : 0.0)) < 1e-12);
    CHECK(c.residual < 1e-12);
  }
  auto c0 = coords(spec, spec.base());
  CHECK(c0.along.norm() == 0.0);
  CHECK(c0.residual == 0.0);

  // reconstruction identity on random points
  Rng rng(123);
  for (int trial = 0; trial < 1000; ++trial) {
    Vec y = gaussian_vector(30, rng, 2.0);
    auto c = coords(spec, y);
    Vec recon = spec.base() + spec.units.transpose() * c.along;
    CHECK(std::abs((y - recon).norm() - c.residual) < 1e-10);
    auto c2 = coords(spec, reconstruct(spec, c));
    CHECK((c2.along - c.along).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK(std::abs(c2.residual - c.residual) < 1e-10);
  }
}

TEST_CASE("validate rejects a perturbed frame") {
  auto spec = make_orthogonal(5, 6, 1.0, 2);
  DatasetSpec broken = spec;
  Vec u0 = (broken.units.row(0) + 1e-3 * broken.units.row(1)).normalized().transpose();
  broken.units.row(0) = u0.transpose();
  broken.points.row(1) = broken.norms[0] * u0.transpose();
  CHECK(validate(spec));
  CHECK_FALSE(validate(broken));
}

TEST_CASE("dataset serialization round-trips") {
  auto spec = augment_boundary_points(make_orthogonal(7, 9, 1.0, 13), 2, 14);
  std::ostringstream first;
  save_dataset(spec, first);
  std::istringstream in(first.str());
  auto loaded = load_dataset(in);
  CHECK(loaded.kind == spec.kind);
  CHECK(loaded.augmented_count == 2);
  CHECK(loaded.seed == 13);
  REQUIRE(loaded.points.size() == spec.points.size());
  CHECK(std::memcmp(loaded.points.data(), spec.points.data(),
                    sizeof(double) * spec.points.size()) == 0);
  std::ostringstream second;
  save_dataset(loaded, second);
  CHECK(first.str() == second.str());
}

TEST_CASE("translation utility keeps specs valid") {
  auto spec = make_obtuse_simplex(4, 5, 3);
  Vec off = Vec::LinSpaced(5, -1.0, 2.0);
  auto moved = translate(spec, off);
  CHECK(validate(moved));
  CHECK((moved.base() - off).norm() < 1e-14);
}
