#pragma once

#include <functional>
#include <memory>

#include <Eigen/Sparse>

#include "lamg/problem.hpp"
#include "lamg/tet_mesh.hpp"

namespace lamg {

// Discrete Poisson system on P1 elements. `stiffness` is the full symmetric
// PSD matrix int grad(phi_i).grad(phi_j); `rhs` is the lumped-mass-weighted
// load M f. Dirichlet elimination happens inside solve(), preserving
// symmetry of the reduced system.
struct FemSystem {
  std::shared_ptr<const TetMesh> mesh;
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd lumped_mass;
  Eigen::VectorXd rhs;
  Eigen::VectorXd boundary_values;  // g at boundary vertices, 0 elsewhere

  int n() const { return static_cast<int>(lumped_mass.size()); }
};

FemSystem assemble(std::shared_ptr<const TetMesh> mesh, const PoissonProblem& prob);

struct SolveInfo {
  int iterations = 0;
  double residual = 0.0;  // relative
};

// Piecewise-linear field over a tet mesh.
class FemSolution {
 public:
  FemSolution() = default;
  FemSolution(std::shared_ptr<const TetMesh> mesh, Eigen::VectorXd values)
      : mesh_(std::move(mesh)), values_(std::move(values)) {}

  const std::shared_ptr<const TetMesh>& mesh() const { return mesh_; }
  const Eigen::VectorXd& values() const { return values_; }

  // Barycentric interpolation; PointOutsideMesh beyond a tiny slack.
  double at(const Vec3& p) const;
  // Same, but clamps to the nearest vertex value when p falls in a crack
  // between the mesh and the true domain boundary. Evaluation only.
  double at_or_nearest(const Vec3& p) const;

 private:
  const TetLocator& locator() const;
  std::shared_ptr<const TetMesh> mesh_;
  Eigen::VectorXd values_;
  mutable std::shared_ptr<TetLocator> locator_;
};

// Jacobi-preconditioned CG on the interior unknowns. The residual contract
// is <= 1e-10 relative; NoConvergence otherwise.
FemSolution solve(const FemSystem& sys, SolveInfo* info = nullptr);

enum class ErrorNorm { l2, linf };

// ||u - ref|| / ||ref|| over probe points. ZeroReference when the
// denominator vanishes.
double relative_error(const FemSolution& u, const std::function<double(const Vec3&)>& ref,
                      const std::vector<Vec3>& probes, ErrorNorm norm = ErrorNorm::l2);
double relative_error(const std::vector<double>& u_at_probes,
                      const std::vector<double>& ref_at_probes,
                      ErrorNorm norm = ErrorNorm::l2);

}  // namespace lamg
