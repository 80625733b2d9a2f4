#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lamg/errors.hpp"
#include "lamg/rng.hpp"
#include "lamg/sizing.hpp"
#include "support.hpp"

using namespace lamg;

TEST_CASE("ideal edge length inverts the regular tet volume") {
  // Regular tet with unit edges, built from coordinates, not the formula.
  Vec3 a(0, 0, 0), b(1, 0, 0), c(0.5, std::sqrt(3.0) / 2.0, 0),
      d(0.5, std::sqrt(3.0) / 6.0, std::sqrt(6.0) / 3.0);
  CHECK((b - a).norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((c - b).norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((d - c).norm() == doctest::Approx(1.0).epsilon(1e-14));
  double v = tet_volume(a, b, c, d);
  CHECK(ideal_edge_from_volume(v) == doctest::Approx(1.0).epsilon(1e-13));
  // scaling the edge by 2 scales the volume by 8
  CHECK(ideal_edge_from_volume(8.0 * v) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("reference field reads sizes from containing tets and skips outsiders") {
  TetMesh mesh = testsup::structured_cube_mesh(4);
  double cell_vol = 1.0 / (6.0 * 64.0);  // six path tets per cell
  double expect = ideal_edge_from_volume(cell_vol);

  std::vector<Vec3> pts = {{0.1, 0.2, 0.3}, {0.9, 0.9, 0.1}, {5.0, 5.0, 5.0}, {0.5, 0.5, 0.5}};
  std::vector<int> skipped;
  SizingField f = reference_field(mesh, pts, &skipped);
  REQUIRE(skipped == std::vector<int>{2});
  REQUIRE(f.size() == 3);
  for (double s : f.sizes) CHECK(s == doctest::Approx(expect).epsilon(1e-13));
  CHECK_FALSE(f.normalized);
}

TEST_CASE("normalization maps to the unit interval and back exactly") {
  SizingField f;
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    f.points.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    f.sizes.push_back(rng.uniform(0.02, 0.4));
  }
  Normalization norm = Normalization::fit(f.sizes);
  SizingField unit = normalize(f, norm);
  CHECK(unit.normalized);
  double lo = 1e300, hi = -1e300;
  for (double s : unit.sizes) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  CHECK(lo == 0.0);
  CHECK(hi == 1.0);
  SizingField back = denormalize(unit);
  CHECK_FALSE(back.normalized);
  for (std::size_t i = 0; i < f.sizes.size(); ++i)
    CHECK(back.sizes[i] == doctest::Approx(f.sizes[i]).epsilon(1e-14));

  SUBCASE("double normalize and double denormalize are rejected") {
    CHECK_THROWS_AS(normalize(unit, norm), Error);
    CHECK_THROWS_AS(denormalize(back), Error);
  }
}

TEST_CASE("constant fields are degenerate and map to one half") {
  std::vector<double> sizes(20, 0.125);
  Normalization norm = Normalization::fit(sizes);
  CHECK(norm.degenerate);
  CHECK(norm.to_unit(0.125) == 0.5);
  CHECK(norm.from_unit(0.5) == 0.125);
  CHECK(norm.from_unit(0.9) == 0.125);  // degenerate inverse is the constant
}

TEST_CASE("eta scaling is exact and composes multiplicatively") {
  SizingField f;
  f.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  f.sizes = {0.1, 0.2, 0.3};
  SizingField a = scale_field(f, 0.7);
  for (std::size_t i = 0; i < f.sizes.size(); ++i) CHECK(a.sizes[i] == 0.7 * f.sizes[i]);
  SizingField b = scale_field(scale_field(f, 0.7), 1.2);
  SizingField c = scale_field(f, 0.7 * 1.2);
  for (std::size_t i = 0; i < f.sizes.size(); ++i)
    CHECK(b.sizes[i] == doctest::Approx(c.sizes[i]).epsilon(1e-15));
  CHECK_THROWS_AS(scale_field(f, 0.0), Error);
  CHECK_THROWS_AS(scale_field(normalize(f, Normalization::fit(f.sizes)), 2.0), Error);
}

TEST_CASE("shepard interpolation hits samples exactly and stays in bounds") {
  SizingField f;
  Rng rng(9);
  for (int i = 0; i < 80; ++i) {
    f.points.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    f.sizes.push_back(rng.uniform(0.05, 0.5));
  }
  SizeInterpolator interp(f, 8);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(interp(f.points[i]) == f.sizes[i]);
  double lo = *std::min_element(f.sizes.begin(), f.sizes.end());
  double hi = *std::max_element(f.sizes.begin(), f.sizes.end());
  for (int i = 0; i < 200; ++i) {
    Vec3 q(rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2));
    double s = interp(q);
    CHECK(s >= lo);
    CHECK(s <= hi);
  }
}

TEST_CASE("shepard weights match a hand computation") {
  SizingField f;
  f.points = {{0, 0, 0}, {2, 0, 0}, {0, 3, 0}, {10, 10, 10}};
  f.sizes = {1.0, 2.0, 4.0, 100.0};
  SizeInterpolator interp(f, 3);
  Vec3 q(1, 1, 0);
  double d0 = 2.0, d1 = 2.0, d2 = 5.0;  // squared distances of the 3 nearest
  double w0 = 1 / d0, w1 = 1 / d1, w2 = 1 / d2;
  double expect = (w0 * 1.0 + w1 * 2.0 + w2 * 4.0) / (w0 + w1 + w2);
  CHECK(interp(q) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("knn breaks exact ties by index") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i)
    pts.emplace_back((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
  KdTree tree(pts);
  auto nb = tree.knn({0, 0, 0}, 4);  // all eight corners equidistant
  CHECK(nb == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("knn agrees with exhaustive search for several k") {
  Rng rng(17);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i)
    pts.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
  KdTree tree(pts);
  for (int k : {1, 4, 8, 16}) {
    for (int q = 0; q < 60; ++q) {
      Vec3 x(rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1));
      auto got = tree.knn(x, k);
      std::vector<std::pair<double, int>> all;
      for (int i = 0; i < static_cast<int>(pts.size()); ++i)
        all.emplace_back((pts[i] - x).squaredNorm(), i);
      std::sort(all.begin(), all.end());
      REQUIRE(static_cast<int>(got.size()) == k);
      for (int i = 0; i < k; ++i) CHECK(got[i] == all[i].second);
    }
  }
}

TEST_CASE("csv and pos exports round trip exactly") {
  SizingField f;
  Rng rng(23);
  for (int i = 0; i < 40; ++i) {
    f.points.emplace_back(rng.uniform() * M_PI, rng.uniform() * 1e-3, rng.uniform() * 1e4);
    f.sizes.push_back(rng.uniform(1e-6, 2.0));
  }
  std::string dir = testsup::tmp_dir("sizing_io");
  f.save_csv(dir + "/f.csv");
  SizingField back = SizingField::load_csv(dir + "/f.csv");
  REQUIRE(back.size() == f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(back.points[i] == f.points[i]);
    CHECK(back.sizes[i] == f.sizes[i]);
  }
  save_pos(f, dir + "/f.pos");
  SizingField back2 = load_pos(dir + "/f.pos");
  REQUIRE(back2.size() == f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(back2.points[i] == f.points[i]);
    CHECK(back2.sizes[i] == f.sizes[i]);
  }
}
