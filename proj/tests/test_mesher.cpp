#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "lamg/errors.hpp"
#include "lamg/mesher.hpp"
#include "support.hpp"

using namespace lamg;

namespace {

SizingField constant_field(const BoundaryMesh& domain, double size, int n_points,
                           uint64_t seed) {
  Rng rng(seed);
  SizingField f;
  f.points = domain.sample_interior(n_points, rng);
  f.sizes.assign(n_points, size);
  return f;
}

// boundary triangles are the tet faces used exactly once
std::vector<std::array<int, 3>> boundary_faces(const TetMesh& mesh) {
  std::map<std::array<int, 3>, std::pair<int, std::array<int, 3>>> count;
  static const int corners[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  for (const auto& t : mesh.tets) {
    for (const auto& f : corners) {
      std::array<int, 3> tri{t[f[0]], t[f[1]], t[f[2]]};
      std::array<int, 3> key = tri;
      std::sort(key.begin(), key.end());
      auto& slot = count[key];
      slot.first++;
      slot.second = tri;
    }
  }
  std::vector<std::array<int, 3>> out;
  for (const auto& [key, slot] : count)
    if (slot.first == 1) out.push_back(slot.second);
  return out;
}

double max_surface_deviation(const BoundaryMesh& domain, const TetMesh& mesh) {
  double worst = 0.0;
  for (const auto& f : boundary_faces(mesh)) {
    const Vec3 c = (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
    worst = std::max(worst, domain.distance_to_boundary(c).distance);
  }
  return worst;
}

double max_boundary_gap(const BoundaryMesh& domain, const TetMesh& mesh) {
  const auto faces = boundary_faces(mesh);
  double worst = 0.0;
  for (const Vec3& p : domain.vertices()) {
    double best = std::numeric_limits<double>::max();
    for (const auto& f : faces) {
      const Vec3 q = closest_point_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                               mesh.vertices[f[2]]);
      best = std::min(best, (p - q).norm());
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST_CASE("uniform cube hits the exact lattice counts") {
  const auto cube = resolve_shape("builtin:cube");
  // splitting stops at edge <= sqrt(2)*0.1, so depth 3 and an 8^3 grid
  const TetMesh mesh = mesh_uniform(cube, 0.1);
  const int n = 8;
  CHECK(mesh.vertex_count() == (n + 1) * (n + 1) * (n + 1) + n * n * n);
  CHECK(mesh.tet_count() == 12 * n * n * n);
  CHECK(mesh.total_volume() == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : mesh.volumes) CHECK(v > 0.0);
}

TEST_CASE("halving the size multiplies tets by about eight") {
  const auto cube = resolve_shape("builtin:cube");
  const TetMesh coarse = mesh_uniform(cube, 0.1);
  const TetMesh fine = mesh_uniform(cube, 0.05);
  const double ratio = static_cast<double>(fine.tet_count()) / coarse.tet_count();
  CHECK(ratio >= 6.0);
  CHECK(ratio <= 10.0);
}

TEST_CASE("sphere mesh is valid and volume-faithful") {
  const auto sphere = resolve_shape("builtin:sphere");
  const TetMesh mesh = mesh_uniform(sphere, 0.25);
  CHECK(mesh.tet_count() > 200);
  for (double v : mesh.volumes) CHECK(v > 0.0);
  // the icosphere itself underestimates the ball; compare against its volume
  CHECK(mesh.total_volume() == doctest::Approx(sphere.volume()).epsilon(0.08));
  CHECK(mesh.total_volume() < sphere.volume() * 1.02);
}

TEST_CASE("torus mesh survives the hole and stays valid") {
  const auto torus = resolve_shape("builtin:torus");
  const TetMesh mesh = mesh_uniform(torus, 0.15);
  for (double v : mesh.volumes) CHECK(v > 0.0);
  CHECK(mesh.total_volume() == doctest::Approx(torus.volume()).epsilon(0.12));
  // nothing may land in the hole around the axis
  for (const auto& t : mesh.tets) {
    Vec3 c = Vec3::Zero();
    for (int v : t) c += mesh.vertices[v];
    c /= 4.0;
    const double ring = std::hypot(c.x(), c.y());
    CHECK(ring > 0.35);
  }
}

TEST_CASE("mesh surface stays within half the target size of the boundary") {
  const auto sphere = resolve_shape("builtin:sphere");
  const double s = 0.25;
  const TetMesh mesh = mesh_uniform(sphere, s);
  CHECK(max_surface_deviation(sphere, mesh) <= 0.5 * s);
  CHECK(max_boundary_gap(sphere, mesh) <= 0.5 * s);
}

TEST_CASE("tet sizes track the requested target") {
  const auto sphere = resolve_shape("builtin:sphere");
  const double s = 0.2;
  const TetMesh mesh = mesh_uniform(sphere, s);
  int ok = 0;
  for (double v : mesh.volumes) {
    const double ideal = ideal_edge_from_volume(v);
    if (ideal >= 0.4 * s && ideal <= 2.5 * s) ++ok;
  }
  CHECK(static_cast<double>(ok) / mesh.tet_count() >= 0.9);
}

TEST_CASE("adaptive field concentrates tets where sizes are small") {
  const auto cube = resolve_shape("builtin:cube");
  SizingField f;
  Rng rng(5);
  f.points = cube.sample_interior(200, rng);
  f.sizes.resize(200);
  for (int i = 0; i < 200; ++i) {
    const Vec3& p = f.points[i];
    const bool fine_octant = p.x() < 0.5 && p.y() < 0.5 && p.z() < 0.5;
    f.sizes[i] = fine_octant ? 0.05 : 0.18;
  }
  const TetMesh mesh = mesh_adaptive(cube, f);
  long fine_count = 0, coarse_count = 0;
  for (const auto& t : mesh.tets) {
    Vec3 c = Vec3::Zero();
    for (int v : t) c += mesh.vertices[v];
    c /= 4.0;
    if (c.x() < 0.5 && c.y() < 0.5 && c.z() < 0.5) ++fine_count;
    if (c.x() > 0.5 && c.y() > 0.5 && c.z() > 0.5) ++coarse_count;
  }
  CHECK(fine_count > 3 * coarse_count);
  // sizes must also track the local target through the graded transition
  SizeInterpolator target(f);
  int ok = 0;
  for (std::size_t i = 0; i < mesh.tets.size(); ++i) {
    Vec3 c = Vec3::Zero();
    for (int v : mesh.tets[i]) c += mesh.vertices[v];
    c /= 4.0;
    const double ideal = ideal_edge_from_volume(mesh.volumes[i]);
    const double want = target(c);
    if (ideal >= 0.4 * want && ideal <= 2.5 * want) ++ok;
  }
  CHECK(static_cast<double>(ok) / mesh.tet_count() >= 0.9);
}

TEST_CASE("raising eta coarsens the mesh monotonically") {
  const auto sphere = resolve_shape("builtin:sphere");
  const SizingField f = constant_field(sphere, 0.16, 60, 9);
  const TetMesh fine = mesh_adaptive(sphere, f, 0.5);
  const TetMesh base = mesh_adaptive(sphere, f, 1.0);
  const TetMesh coarse = mesh_adaptive(sphere, f, 2.0);
  CHECK(fine.vertex_count() > base.vertex_count());
  CHECK(base.vertex_count() > coarse.vertex_count());
}

TEST_CASE("constant field reproduces the uniform mesh bitwise") {
  const auto sphere = resolve_shape("builtin:sphere");
  const TetMesh a = mesh_uniform(sphere, 0.21);
  const TetMesh b = mesh_adaptive(sphere, constant_field(sphere, 0.21, 50, 3), 1.0);
  REQUIRE(a.vertex_count() == b.vertex_count());
  REQUIRE(a.tet_count() == b.tet_count());
  for (int i = 0; i < a.vertex_count(); ++i) CHECK(a.vertices[i] == b.vertices[i]);
  for (int i = 0; i < a.tet_count(); ++i) CHECK(a.tets[i] == b.tets[i]);
}

TEST_CASE("meshing is deterministic across runs") {
  const auto torus = resolve_shape("builtin:torus");
  const SizingField f = constant_field(torus, 0.18, 80, 21);
  const TetMesh a = mesh_adaptive(torus, f);
  const TetMesh b = mesh_adaptive(torus, f);
  REQUIRE(a.vertex_count() == b.vertex_count());
  REQUIRE(a.tet_count() == b.tet_count());
  for (int i = 0; i < a.vertex_count(); ++i) CHECK(a.vertices[i] == b.vertices[i]);
  for (int i = 0; i < a.tet_count(); ++i) CHECK(a.tets[i] == b.tets[i]);
}

TEST_CASE("bad inputs are rejected") {
  const auto cube = resolve_shape("builtin:cube");
  CHECK_THROWS_AS(mesh_uniform(cube, 0.0), ConfigError);
  CHECK_THROWS_AS(mesh_uniform(cube, 10.0), ConfigError);

  SizingField f = constant_field(cube, 0.2, 20, 2);
  CHECK_THROWS_AS(mesh_adaptive(cube, f, 0.0), ConfigError);
  SizingField norm = f;
  norm.normalized = true;
  CHECK_THROWS_AS(mesh_adaptive(cube, norm), ConfigError);

  // below the resolvable floor of 1e-3 of the diagonal
  SizingField tiny = f;
  tiny.sizes.assign(tiny.sizes.size(), 1e-5);
  CHECK_THROWS_AS(mesh_adaptive(cube, tiny), FieldTooFine);
}

TEST_CASE("background field export round-trips through pos") {
  const auto dir = testsup::tmp_dir("mesher_pos");
  const auto cube = resolve_shape("builtin:cube");
  const SizingField f = constant_field(cube, 0.2, 10, 4);
  const std::string path = dir + "/background.pos";
  export_background_field(f, 2.0, path);
  const SizingField back = load_pos(path);
  REQUIRE(back.size() == f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(back.sizes[i] == doctest::Approx(0.4).epsilon(1e-15));
}
