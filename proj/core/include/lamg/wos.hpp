#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lamg/problem.hpp"
#include "lamg/rng.hpp"

namespace lamg {

struct WosConfig {
  double shell_eps = 0.0;  // absorption shell width; 0 means 1e-3 * bbox diagonal
  int max_steps = 1000;    // truncation cap; truncated walks absorb at nearest point
  int walks_per_point = 500;
  int workers = 1;

  double resolved_shell(const BoundaryMesh& m) const {
    return shell_eps > 0.0 ? shell_eps : 1e-3 * m.bbox_diagonal();
  }
};

struct WalkTelemetry {
  long walks = 0;
  long truncated = 0;
};

// Monte Carlo point estimates of the PDE solution at scattered points.
// `variances` holds the variance of each mean estimate (sample variance / m).
struct SampleSet {
  std::vector<Vec3> points;
  std::vector<double> values;
  std::vector<double> variances;
  int walks_per_point = 0;

  std::size_t size() const { return points.size(); }
  void save_csv(const std::string& path) const;
  static SampleSet load_csv(const std::string& path);
};

// One walk started at x. Accumulates the ball-integral source pickup at every
// step and ends with the boundary value at the absorption point.
double wos_single_walk(const PoissonProblem& prob, const Vec3& x, const WosConfig& cfg,
                       Rng& rng, bool* truncated = nullptr);

// Mean and variance-of-mean over cfg.walks_per_point walks.
std::pair<double, double> wos_estimate(const PoissonProblem& prob, const Vec3& x,
                                       const WosConfig& cfg, Rng& rng,
                                       WalkTelemetry* telemetry = nullptr);

// n interior points, one estimate each. Point i always consumes substream
// i+1 of `base`, so results are identical for any worker count.
SampleSet wos_solve_sparse(const PoissonProblem& prob, int n, const WosConfig& cfg,
                           const Rng& base, WalkTelemetry* telemetry = nullptr);

// Same estimator at caller-provided points (reused by baselines).
SampleSet wos_estimate_at(const PoissonProblem& prob, const std::vector<Vec3>& points,
                          const WosConfig& cfg, const Rng& base,
                          WalkTelemetry* telemetry = nullptr);

// Radial CDF of the ball Green density, t = r/R in [0,1], and its inverse.
inline double green_radial_cdf(double t) { return 3.0 * t * t - 2.0 * t * t * t; }
inline double green_radial_inverse(double xi) {
  return 0.5 + std::cos(std::acos(1.0 - 2.0 * xi) / 3.0 - 2.0 * M_PI / 3.0);
}

}  // namespace lamg
