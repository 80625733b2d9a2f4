#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "lamg/errors.hpp"
#include "lamg/fem.hpp"
#include "lamg/rng.hpp"
#include "lamg/stats.hpp"
#include "support.hpp"

using namespace lamg;

namespace {

PoissonProblem quadratic_problem() {
  // u = |p|^2 solves Delta u = 6 with matching boundary data on any domain.
  PoissonProblem p;
  p.bc_override = [](const Vec3& q) { return q.squaredNorm(); };
  p.source_override = [](const Vec3&) { return 6.0; };
  return p;
}

// Barycentric hat value via Cramer volume ratios: an evaluation path fully
// separate from the assembly's inverse-edge-matrix gradients.
double hat_value(const TetMesh& m, int tet, int corner, const Vec3& x) {
  const auto& T = m.tets[tet];
  Vec3 c[4] = {m.vertices[T[0]], m.vertices[T[1]], m.vertices[T[2]], m.vertices[T[3]]};
  double full = tet_volume(c[0], c[1], c[2], c[3]);
  Vec3 sub[4] = {c[0], c[1], c[2], c[3]};
  sub[corner] = x;
  return tet_volume(sub[0], sub[1], sub[2], sub[3]) / full;
}

Vec3 hat_gradient_fd(const TetMesh& m, int tet, int corner, const Vec3& x, double h) {
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 dp = Vec3::Zero(), dm = Vec3::Zero();
    dp[a] = h;
    dm[a] = -h;
    g[a] = (hat_value(m, tet, corner, x + dp) - hat_value(m, tet, corner, x + dm)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("stiffness matrix matches a finite-difference galerkin oracle") {
  auto mesh = std::make_shared<TetMesh>(testsup::structured_cube_mesh(2));
  PoissonProblem prob = quadratic_problem();
  FemSystem sys = assemble(mesh, prob);

  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(mesh->vertex_count(), mesh->vertex_count());
  for (int t = 0; t < mesh->tet_count(); ++t) {
    const auto& T = mesh->tets[t];
    Vec3 centroid = 0.25 * (mesh->vertices[T[0]] + mesh->vertices[T[1]] +
                            mesh->vertices[T[2]] + mesh->vertices[T[3]]);
    Vec3 g[4];
    for (int k = 0; k < 4; ++k) g[k] = hat_gradient_fd(*mesh, t, k, centroid, 1e-6);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        oracle(T[i], T[j]) += mesh->volumes[t] * g[i].dot(g[j]);
  }
  Eigen::MatrixXd dense = Eigen::MatrixXd(sys.stiffness);
  double scale = oracle.cwiseAbs().maxCoeff();
  CHECK((dense - oracle).cwiseAbs().maxCoeff() <= 1e-6 * scale);
}

TEST_CASE("stiffness rows sum to zero and mass sums to the volume") {
  auto mesh = std::make_shared<TetMesh>(testsup::structured_cube_mesh(3));
  FemSystem sys = assemble(mesh, quadratic_problem());
  Eigen::VectorXd row_sums = sys.stiffness * Eigen::VectorXd::Ones(sys.n());
  CHECK(row_sums.cwiseAbs().maxCoeff() <= 1e-12 * sys.stiffness.coeffs().cwiseAbs().maxCoeff() * 10);
  CHECK(sys.lumped_mass.sum() == doctest::Approx(mesh->total_volume()).epsilon(1e-13));
  CHECK(sys.lumped_mass.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sys.lumped_mass.minCoeff() > 0.0);
}

TEST_CASE("load vector is the lumped mass times the source") {
  auto mesh = std::make_shared<TetMesh>(testsup::structured_cube_mesh(2));
  PoissonProblem p;
  p.source_override = [](const Vec3& q) { return 2.0 + q[0]; };
  p.bc_override = [](const Vec3&) { return 0.0; };
  FemSystem sys = assemble(mesh, p);
  for (int i = 0; i < sys.n(); ++i)
    CHECK(sys.rhs[i] == sys.lumped_mass[i] * (2.0 + mesh->vertices[i][0]));
}

TEST_CASE("linear solutions are reproduced to solver precision at vertices") {
  auto mesh = std::make_shared<TetMesh>(testsup::structured_cube_mesh(6));
  PoissonProblem p;
  auto lin = [](const Vec3& q) { return 0.3 * q[0] - 0.2 * q[1] + 0.9 * q[2] + 0.4; };
  p.bc_override = lin;
  p.source_override = [](const Vec3&) { return 0.0; };
  SolveInfo info;
  FemSolution u = solve(assemble(mesh, p), &info);
  CHECK(info.residual <= 1e-10);
  double umax = 0.0;
  for (int i = 0; i < mesh->vertex_count(); ++i)
    umax = std::max(umax, std::abs(lin(mesh->vertices[i])));
  for (int i = 0; i < mesh->vertex_count(); ++i)
    CHECK(std::abs(u.values()[i] - lin(mesh->vertices[i])) <= 1e-10 * umax);
}

TEST_CASE("quadratic manufactured solution converges at second order") {
  PoissonProblem p = quadratic_problem();
  Rng rng(21);
  std::vector<Vec3> probes;
  for (int i = 0; i < 64; ++i)
    probes.emplace_back(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
  auto exact = [](const Vec3& q) { return q.squaredNorm(); };

  std::vector<double> log_h, log_e;
  double last_re = 1.0;
  for (int n : {4, 8, 16}) {
    auto mesh = std::make_shared<TetMesh>(testsup::structured_cube_mesh(n));
    FemSolution u = solve(assemble(mesh, p));
    last_re = relative_error(u, exact, probes, ErrorNorm::l2);
    log_h.push_back(std::log(1.0 / n));
    log_e.push_back(std::log(last_re));
  }
  CHECK(last_re < 1e-2);
  double slope = linear_fit(log_h, log_e).slope;
  CHECK(slope > 1.5);
}

TEST_CASE("single tet has only boundary vertices and returns g directly") {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  auto mesh = std::make_shared<TetMesh>(
      TetMesh::from_data(v, {std::array<int, 4>{0, 1, 2, 3}}));
  PoissonProblem p;
  p.bc_override = [](const Vec3& q) { return 1.0 + 2.0 * q[0] + 3.0 * q[2]; };
  p.source_override = [](const Vec3&) { return 5.0; };
  SolveInfo info;
  FemSolution u = solve(assemble(mesh, p), &info);
  CHECK(info.iterations == 0);
  for (int i = 0; i < 4; ++i)
    CHECK(u.values()[i] == 1.0 + 2.0 * v[i][0] + 3.0 * v[i][2]);
}

TEST_CASE("assembly rejects near-degenerate tets") {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1e-15}};
  auto mesh = std::make_shared<TetMesh>(
      TetMesh::from_data(v, {std::array<int, 4>{0, 1, 2, 3}}));
  CHECK_THROWS_AS(assemble(mesh, quadratic_problem()), DegenerateElement);
}

TEST_CASE("interpolation is exact at vertices and linear inside") {
  auto mesh = std::make_shared<TetMesh>(testsup::structured_cube_mesh(2));
  Eigen::VectorXd vals(mesh->vertex_count());
  auto lin = [](const Vec3& q) { return 1.5 * q[0] - 0.7 * q[1] + 0.2 * q[2] - 3.0; };
  for (int i = 0; i < mesh->vertex_count(); ++i) vals[i] = lin(mesh->vertices[i]);
  FemSolution u(mesh, vals);
  for (int i = 0; i < mesh->vertex_count(); ++i)
    CHECK(u.at(mesh->vertices[i]) == doctest::Approx(vals[i]).epsilon(1e-13));
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    Vec3 q(rng.uniform(), rng.uniform(), rng.uniform());
    CHECK(u.at(q) == doctest::Approx(lin(q)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(u.at({5.0, 5.0, 5.0}), PointOutsideMesh);
}

TEST_CASE("point location matches an exhaustive scan") {
  auto mesh = std::make_shared<TetMesh>(testsup::structured_cube_mesh(3));
  TetLocator loc(mesh);
  Rng rng(8);
  for (int i = 0; i < 400; ++i) {
    Vec3 p(rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1));
    Eigen::Vector4d bary;
    int got = loc.locate(p, bary);
    int want = -1;
    for (int t = 0; t < mesh->tet_count() && want < 0; ++t) {
      const auto& T = mesh->tets[t];
      const Vec3& a = mesh->vertices[T[0]];
      Eigen::Matrix3d E;
      E.col(0) = mesh->vertices[T[1]] - a;
      E.col(1) = mesh->vertices[T[2]] - a;
      E.col(2) = mesh->vertices[T[3]] - a;
      Vec3 lam = E.partialPivLu().solve(p - a);
      Eigen::Vector4d bb(1.0 - lam.sum(), lam[0], lam[1], lam[2]);
      if (bb.minCoeff() >= -1e-9) want = t;
    }
    CHECK(got == want);
    if (got >= 0) {
      CHECK(bary.minCoeff() >= -1e-9);
      CHECK(bary.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("relative error values and failure modes") {
  CHECK(relative_error({2.0, 1.0}, {1.0, 1.0}, ErrorNorm::l2) ==
        doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(relative_error({2.0, 1.0}, {1.0, 1.0}, ErrorNorm::linf) == doctest::Approx(1.0));
  CHECK(relative_error({1.0, 1.0}, {1.0, 1.0}) == 0.0);
  CHECK_THROWS_AS(relative_error({1.0, 0.5}, {0.0, 0.0}), ZeroReference);
}

TEST_CASE("tet mesh validation rejects broken inputs") {
  SUBCASE("inverted tet") {
    std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    CHECK_THROWS_AS(TetMesh::from_data(v, {std::array<int, 4>{0, 2, 1, 3}}), InvalidMesh);
  }
  SUBCASE("unreferenced vertex") {
    std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {9, 9, 9}};
    CHECK_THROWS_AS(TetMesh::from_data(v, {std::array<int, 4>{0, 1, 2, 3}}), InvalidMesh);
  }
  SUBCASE("face shared by three tets") {
    std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, -1},
                           {1, 1, -2}};
    std::vector<std::array<int, 4>> t = {{0, 1, 2, 3}, {1, 0, 2, 4}, {1, 0, 2, 5}};
    CHECK_THROWS_AS(TetMesh::from_data(v, t), InvalidMesh);
  }
  SUBCASE("hanging vertex breaks conformity") {
    std::vector<Vec3> v = {{0, 0, 0},   {1, 0, 0},   {0, 1, 0}, {0, 0, 1},
                           {0.5, 0, 0}, {0.3, 0.3, -1}};
    std::vector<std::array<int, 4>> t = {{0, 1, 2, 3}, {0, 4, 5, 2}};
    // tet orientation sanity first
    CHECK(tet_volume(v[0], v[4], v[5], v[2]) > 0.0);
    CHECK_THROWS_AS(TetMesh::from_data(v, t), InvalidMesh);
  }
}

TEST_CASE("native and msh formats round trip exactly") {
  TetMesh mesh = testsup::structured_cube_mesh(2);
  // irrational-ish coordinates to exercise the 17-digit round trip
  TetMesh skew = mesh;
  for (auto& v : skew.vertices) v = v * M_PI / 3.0 + Vec3(1e-7, -2e-9, 0.123456789012345);
  skew = TetMesh::from_data(skew.vertices, skew.tets);

  std::string dir = testsup::tmp_dir("fem_io");
  skew.save(dir + "/m.tet");
  TetMesh back = TetMesh::load(dir + "/m.tet");
  REQUIRE(back.vertex_count() == skew.vertex_count());
  REQUIRE(back.tet_count() == skew.tet_count());
  for (int i = 0; i < back.vertex_count(); ++i)
    CHECK((back.vertices[i] - skew.vertices[i]).norm() == 0.0);
  for (int t = 0; t < back.tet_count(); ++t) CHECK(back.tets[t] == skew.tets[t]);

  skew.save_msh(dir + "/m.msh");
  TetMesh back2 = TetMesh::load_msh(dir + "/m.msh");
  REQUIRE(back2.vertex_count() == skew.vertex_count());
  for (int i = 0; i < back2.vertex_count(); ++i)
    CHECK((back2.vertices[i] - skew.vertices[i]).norm() == 0.0);
  for (int t = 0; t < back2.tet_count(); ++t) CHECK(back2.tets[t] == skew.tets[t]);
}
