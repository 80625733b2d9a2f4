#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "lamg/boundary_mesh.hpp"
#include "lamg/geom.hpp"

namespace lamg {

struct BoundaryGaussian {
  Vec3 center{0, 0, 0};  // lies on the boundary surface
  double amplitude = 0.0;
  double width = 1.0;  // standard deviation
};

// Dirichlet data: sum of Gaussian bumps centered on boundary points.
struct DirichletBC {
  std::vector<BoundaryGaussian> gaussians;

  double operator()(const Vec3& p) const {
    double s = 0.0;
    for (const auto& g : gaussians)
      s += g.amplitude * std::exp(-(p - g.center).squaredNorm() / (2.0 * g.width * g.width));
    return s;
  }
};

struct SourceSphere {
  Vec3 center{0, 0, 0};
  double radius = 1.0;
  double amplitude = 0.0;
};

// Right-hand side of Delta u = f: superposition of constant-density balls.
struct SourceTerm {
  std::vector<SourceSphere> spheres;

  double operator()(const Vec3& p) const {
    double s = 0.0;
    for (const auto& b : spheres)
      if ((p - b.center).squaredNorm() <= b.radius * b.radius) s += b.amplitude;
    return s;
  }

  bool empty() const { return spheres.empty(); }
};

// Poisson problem Delta u = f in the domain, u = g on its boundary.
// The override hooks let tests install manufactured g and f outside the
// parametric families; production code never sets them.
struct PoissonProblem {
  std::shared_ptr<const BoundaryMesh> domain;
  DirichletBC bc;
  SourceTerm source;
  std::function<double(const Vec3&)> bc_override;
  std::function<double(const Vec3&)> source_override;

  double boundary_value(const Vec3& p) const { return bc_override ? bc_override(p) : bc(p); }
  double source_value(const Vec3& p) const {
    return source_override ? source_override(p) : source(p);
  }
  bool has_source() const { return source_override != nullptr || !source.empty(); }
};

}  // namespace lamg
