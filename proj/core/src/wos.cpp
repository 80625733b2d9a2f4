#include "lamg/wos.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "lamg/csv.hpp"
#include "lamg/errors.hpp"

namespace lamg {

double wos_single_walk(const PoissonProblem& prob, const Vec3& x, const WosConfig& cfg,
                       Rng& rng, bool* truncated) {
  const BoundaryMesh& domain = *prob.domain;
  const double shell = cfg.resolved_shell(domain);
  const bool with_source = prob.has_source();
  if (truncated) *truncated = false;

  double acc = 0.0;
  Vec3 p = x;
  for (int step = 0; step < cfg.max_steps; ++step) {
    auto bp = domain.distance_to_boundary(p);
    if (bp.distance < shell) return acc + prob.boundary_value(bp.point);
    double r = bp.distance;
    if (with_source) {
      // One-point estimate of -int_B G f: y drawn from the normalized Green
      // density, weighted by int_B G = r^2/6.
      double t = green_radial_inverse(rng.uniform());
      Vec3 y = p + (t * r) * rng.unit_vector();
      acc -= prob.source_value(y) * (r * r / 6.0);
    }
    p += r * rng.unit_vector();
  }
  if (truncated) *truncated = true;
  return acc + prob.boundary_value(domain.project_to_boundary(p));
}

std::pair<double, double> wos_estimate(const PoissonProblem& prob, const Vec3& x,
                                       const WosConfig& cfg, Rng& rng,
                                       WalkTelemetry* telemetry) {
  const int m = cfg.walks_per_point;
  double sum = 0.0, sum_sq = 0.0;
  long trunc = 0;
  for (int w = 0; w < m; ++w) {
    bool t = false;
    double v = wos_single_walk(prob, x, cfg, rng, &t);
    sum += v;
    sum_sq += v * v;
    trunc += t ? 1 : 0;
  }
  if (telemetry) {
    telemetry->walks += m;
    telemetry->truncated += trunc;
  }
  double mean = sum / m;
  double var_of_mean = 0.0;
  if (m > 1) {
    double ss = std::max(0.0, sum_sq - sum * sum / m);
    var_of_mean = ss / (m - 1) / m;
  }
  return {mean, var_of_mean};
}

namespace {

void estimate_range(const PoissonProblem& prob, const std::vector<Vec3>& pts,
                    const WosConfig& cfg, const Rng& base, SampleSet& out,
                    std::atomic<long>& trunc, std::size_t begin, std::size_t end) {
  WalkTelemetry local;
  for (std::size_t i = begin; i < end; ++i) {
    Rng rng = base.substream(i + 1);
    auto [mean, var] = wos_estimate(prob, pts[i], cfg, rng, &local);
    out.values[i] = mean;
    out.variances[i] = var;
  }
  trunc += local.truncated;
}

SampleSet estimate_all(const PoissonProblem& prob, std::vector<Vec3> pts, const WosConfig& cfg,
                       const Rng& base, WalkTelemetry* telemetry) {
  SampleSet out;
  out.points = std::move(pts);
  out.values.assign(out.points.size(), 0.0);
  out.variances.assign(out.points.size(), 0.0);
  out.walks_per_point = cfg.walks_per_point;

  std::atomic<long> trunc{0};
  int workers = std::max(1, cfg.workers);
  if (workers == 1 || out.points.size() < 2) {
    estimate_range(prob, out.points, cfg, base, out, trunc, 0, out.points.size());
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (out.points.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      std::size_t b = w * chunk, e = std::min(out.points.size(), b + chunk);
      if (b >= e) break;
      pool.emplace_back(estimate_range, std::cref(prob), std::cref(out.points), std::cref(cfg),
                        std::cref(base), std::ref(out), std::ref(trunc), b, e);
    }
    for (auto& t : pool) t.join();
  }
  if (telemetry) {
    telemetry->walks += static_cast<long>(out.points.size()) * cfg.walks_per_point;
    telemetry->truncated += trunc.load();
  }
  return out;
}

}  // namespace

SampleSet wos_solve_sparse(const PoissonProblem& prob, int n, const WosConfig& cfg,
                           const Rng& base, WalkTelemetry* telemetry) {
  Rng point_rng = base.substream(0);
  return estimate_all(prob, prob.domain->sample_interior(n, point_rng), cfg, base, telemetry);
}

SampleSet wos_estimate_at(const PoissonProblem& prob, const std::vector<Vec3>& points,
                          const WosConfig& cfg, const Rng& base, WalkTelemetry* telemetry) {
  return estimate_all(prob, points, cfg, base, telemetry);
}

void SampleSet::save_csv(const std::string& path) const {
  CsvWriter w(path, "x,y,z,u,variance,m");
  for (std::size_t i = 0; i < points.size(); ++i) {
    w.field(points[i][0]);
    w.field(points[i][1]);
    w.field(points[i][2]);
    w.field(values[i]);
    w.field(variances[i]);
    w.field(walks_per_point);
    w.end_row();
  }
}

SampleSet SampleSet::load_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int cx = t.column("x"), cy = t.column("y"), cz = t.column("z");
  int cu = t.column("u"), cv = t.column("variance"), cm = t.column("m");
  SampleSet s;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    s.points.emplace_back(t.num(r, cx), t.num(r, cy), t.num(r, cz));
    s.values.push_back(t.num(r, cu));
    s.variances.push_back(t.num(r, cv));
    s.walks_per_point = static_cast<int>(t.num(r, cm));
  }
  return s;
}

}  // namespace lamg
