#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "lamg/errors.hpp"
#include "lamg/stats.hpp"
#include "lamg/wos.hpp"
#include "support.hpp"

using namespace lamg;

namespace {

PoissonProblem cube_problem() {
  PoissonProblem p;
  p.domain = std::make_shared<BoundaryMesh>(make_box({0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}));
  return p;
}

PoissonProblem ball_problem(int subdiv) {
  // g = |p|^2 on the actual boundary and f = 6 manufacture u = |p|^2 exactly,
  // polyhedral approximation included.
  PoissonProblem p;
  p.domain = std::make_shared<BoundaryMesh>(make_icosphere({0, 0, 0}, 1.0, subdiv));
  p.bc_override = [](const Vec3& q) { return q.squaredNorm(); };
  p.source_override = [](const Vec3&) { return 6.0; };
  return p;
}

}  // namespace

TEST_CASE("green radial sampling inverts its own cdf") {
  for (int i = 0; i <= 1000; ++i) {
    double xi = i / 1000.0;
    double t = green_radial_inverse(xi);
    CHECK(t >= -1e-12);
    CHECK(t <= 1.0 + 1e-12);
    CHECK(green_radial_cdf(t) == doctest::Approx(xi).epsilon(1e-9));
  }
  // strictly monotone inside the interval
  for (int i = 1; i < 1000; ++i)
    CHECK(green_radial_inverse(i / 1000.0) > green_radial_inverse((i - 1) / 1000.0));
}

TEST_CASE("constant boundary data is reproduced exactly with zero variance") {
  PoissonProblem p = cube_problem();
  p.bc_override = [](const Vec3&) { return 3.25; };
  WosConfig cfg;
  cfg.walks_per_point = 64;
  Rng rng(1);
  auto [mean, var] = wos_estimate(p, {0.3, 0.7, 0.5}, cfg, rng);
  CHECK(mean == 3.25);
  CHECK(var == 0.0);
}

TEST_CASE("odd boundary data on a symmetric domain averages to zero") {
  PoissonProblem p;
  p.domain = std::make_shared<BoundaryMesh>(make_box({0, 0, 0}, {1, 1, 1}));
  p.bc_override = [](const Vec3& q) { return q[0]; };
  WosConfig cfg;
  cfg.walks_per_point = 4000;
  Rng rng(2);
  auto [mean, var] = wos_estimate(p, {0, 0, 0}, cfg, rng);
  double sigma = std::sqrt(var);
  CHECK(std::abs(mean) <= 4.0 * sigma);
}

TEST_CASE("manufactured ball solution is recovered within monte carlo error") {
  PoissonProblem p = ball_problem(3);
  WosConfig cfg;
  cfg.walks_per_point = 2000;
  cfg.shell_eps = 1e-4 * p.domain->bbox_diagonal();
  Rng base(9);
  std::vector<Vec3> probes = {
      {0, 0, 0}, {0.4, 0.1, -0.2}, {-0.5, 0.3, 0.3}, {0.1, -0.6, 0.2}, {0.2, 0.2, 0.2}};
  for (std::size_t i = 0; i < probes.size(); ++i) {
    Rng rng = base.substream(i);
    auto [mean, var] = wos_estimate(p, probes[i], cfg, rng);
    double exact = probes[i].squaredNorm();
    double sigma = std::sqrt(var);
    INFO("probe ", i, " mean ", mean, " exact ", exact, " sigma ", sigma);
    CHECK(std::abs(mean - exact) <= 4.0 * sigma + 1e-12);
  }
}

TEST_CASE("harmonic estimates obey the boundary bound") {
  PoissonProblem p = cube_problem();
  p.bc.gaussians = {{{1.0, 0.5, 0.5}, 2.0, 0.2}, {{0.0, 0.5, 0.5}, -1.5, 0.3},
                    {{0.5, 1.0, 0.5}, 0.7, 0.15}};
  double bound = 2.0 + 1.5 + 0.7;  // sum of |amplitudes| dominates any g value
  WosConfig cfg;
  cfg.walks_per_point = 200;
  Rng base(3);
  for (int i = 0; i < 20; ++i) {
    Rng rng = base.substream(i);
    Vec3 x(0.05 + 0.045 * i, 0.5, 0.5);
    auto [mean, var] = wos_estimate(p, x, cfg, rng);
    CHECK(std::abs(mean) <= bound);
  }
}

TEST_CASE("nonnegative source with zero boundary data gives nonpositive estimates") {
  PoissonProblem p = cube_problem();
  p.source.spheres = {{{0.5, 0.5, 0.5}, 0.25, 4.0}};
  WosConfig cfg;
  cfg.walks_per_point = 3000;
  Rng rng(4);
  auto [mean, var] = wos_estimate(p, {0.5, 0.5, 0.5}, cfg, rng);
  CHECK(mean < 0.0);
  CHECK(mean + 3.0 * std::sqrt(var) < 0.0);
}

TEST_CASE("estimator variance decays like 1/m") {
  PoissonProblem p = cube_problem();
  p.bc.gaussians = {{{1.0, 0.5, 0.5}, 1.0, 0.25}};
  Rng base(5);
  std::vector<double> log_m, log_var;
  int stream = 0;
  for (int m : {100, 400, 1600}) {
    WosConfig cfg;
    cfg.walks_per_point = m;
    std::vector<double> means;
    double reported = 0.0;
    for (int rep = 0; rep < 40; ++rep) {
      Rng rng = base.substream(stream++);
      auto [mean, var] = wos_estimate(p, {0.5, 0.5, 0.5}, cfg, rng);
      means.push_back(mean);
      reported += var / 40.0;
    }
    double empirical = sample_variance(means);
    // the estimator's own variance report matches reality
    CHECK(reported / empirical > 0.45);
    CHECK(reported / empirical < 2.2);
    log_m.push_back(std::log(static_cast<double>(m)));
    log_var.push_back(std::log(empirical));
  }
  double slope = linear_fit(log_m, log_var).slope;
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.25));
}

TEST_CASE("absorption bias grows with the shell width") {
  PoissonProblem p = ball_problem(3);
  Vec3 x(0.55, 0.0, 0.0);
  double exact = x.squaredNorm();
  auto err_for_shell = [&](double frac) {
    WosConfig cfg;
    cfg.walks_per_point = 8000;
    cfg.shell_eps = frac * p.domain->bbox_diagonal();
    Rng rng(6);
    auto [mean, var] = wos_estimate(p, x, cfg, rng);
    return std::abs(mean - exact);
  };
  double tight = err_for_shell(1e-4);
  double loose = err_for_shell(5e-2);
  CHECK(loose > 3.0 * tight);
}

TEST_CASE("walk truncation is reported and bounded") {
  PoissonProblem p = cube_problem();
  p.bc_override = [](const Vec3&) { return 1.0; };
  WosConfig cfg;
  cfg.walks_per_point = 50;

  SUBCASE("normal runs do not truncate") {
    WalkTelemetry tel;
    Rng rng(7);
    wos_estimate(p, {0.5, 0.5, 0.5}, cfg, rng, &tel);
    CHECK(tel.walks == 50);
    CHECK(tel.truncated == 0);
  }
  SUBCASE("a one-step cap truncates every walk yet stays finite") {
    cfg.max_steps = 1;
    WalkTelemetry tel;
    Rng rng(7);
    auto [mean, var] = wos_estimate(p, {0.5, 0.5, 0.5}, cfg, rng, &tel);
    CHECK(tel.truncated == 50);
    CHECK(std::isfinite(mean));
    CHECK(mean == 1.0);  // constant data: absorption point does not matter
  }
}

TEST_CASE("sparse solve is deterministic and worker-count independent") {
  PoissonProblem p = cube_problem();
  p.bc.gaussians = {{{1.0, 0.5, 0.5}, 1.0, 0.2}};
  p.source.spheres = {{{0.3, 0.3, 0.3}, 0.2, 2.0}};
  WosConfig cfg;
  cfg.walks_per_point = 40;

  auto a = wos_solve_sparse(p, 64, cfg, Rng(11));
  auto b = wos_solve_sparse(p, 64, cfg, Rng(11));
  cfg.workers = 3;
  auto c = wos_solve_sparse(p, 64, cfg, Rng(11));
  cfg.workers = 1;
  auto d = wos_solve_sparse(p, 64, cfg, Rng(12));

  REQUIRE(a.size() == 64);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.values[i] == b.values[i]);
    CHECK(a.variances[i] == b.variances[i]);
    CHECK(a.values[i] == c.values[i]);
    CHECK((a.points[i] - c.points[i]).norm() == 0.0);
  }
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a.values[i] != d.values[i];
  CHECK(differs);
}

TEST_CASE("sample sets round trip through csv exactly") {
  PoissonProblem p = cube_problem();
  p.bc.gaussians = {{{0.0, 0.5, 0.5}, 0.7, 0.31}};
  WosConfig cfg;
  cfg.walks_per_point = 25;
  auto s = wos_solve_sparse(p, 17, cfg, Rng(13));
  std::string dir = testsup::tmp_dir("wos_csv");
  s.save_csv(dir + "/s.csv");
  auto back = SampleSet::load_csv(dir + "/s.csv");
  REQUIRE(back.size() == s.size());
  CHECK(back.walks_per_point == 25);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(back.points[i] == s.points[i]);
    CHECK(back.values[i] == s.values[i]);
    CHECK(back.variances[i] == s.variances[i]);
  }
}
