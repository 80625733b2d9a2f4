#include "lamg/fem.hpp"

#include <cmath>

#include <Eigen/IterativeLinearSolvers>

#include "lamg/errors.hpp"

namespace lamg {

FemSystem assemble(std::shared_ptr<const TetMesh> mesh, const PoissonProblem& prob) {
  const TetMesh& m = *mesh;
  const int n = m.vertex_count();
  const double vol_floor = 1e-14 * std::pow(m.bbox.diagonal(), 3);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(m.tets.size() * 16);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);

  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    const auto& T = m.tets[t];
    double vol = m.volumes[t];
    if (vol <= vol_floor)
      throw DegenerateElement("tet " + std::to_string(t) + " volume " + std::to_string(vol) +
                              " below floor");
    const Vec3& a = m.vertices[T[0]];
    Eigen::Matrix3d E;
    E.col(0) = m.vertices[T[1]] - a;
    E.col(1) = m.vertices[T[2]] - a;
    E.col(2) = m.vertices[T[3]] - a;
    Eigen::Matrix3d Einv = E.inverse();
    // Constant hat gradients: rows of Einv are grad(lambda_1..3).
    Vec3 g[4];
    g[1] = Einv.row(0);
    g[2] = Einv.row(1);
    g[3] = Einv.row(2);
    g[0] = -(g[1] + g[2] + g[3]);
    for (int i = 0; i < 4; ++i) {
      mass[T[i]] += vol / 4.0;
      for (int j = 0; j < 4; ++j) trips.emplace_back(T[i], T[j], vol * g[i].dot(g[j]));
    }
  }

  FemSystem sys;
  sys.mesh = std::move(mesh);
  sys.stiffness.resize(n, n);
  sys.stiffness.setFromTriplets(trips.begin(), trips.end());
  sys.lumped_mass = mass;
  sys.rhs.resize(n);
  sys.boundary_values = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    sys.rhs[i] = mass[i] * prob.source_value(m.vertices[i]);
    if (m.on_boundary[i]) sys.boundary_values[i] = prob.boundary_value(m.vertices[i]);
  }
  return sys;
}

FemSolution solve(const FemSystem& sys, SolveInfo* info) {
  const TetMesh& m = *sys.mesh;
  const int n = sys.n();
  std::vector<int> interior_of(n, -1);
  int ni = 0;
  for (int i = 0; i < n; ++i)
    if (!m.on_boundary[i]) interior_of[i] = ni++;

  Eigen::VectorXd u = sys.boundary_values;
  if (ni > 0) {
    // Reduced system K_II x = -rhs_I - K_IB g_B, still symmetric.
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(sys.stiffness.nonZeros());
    Eigen::VectorXd b(ni);
    for (int i = 0; i < n; ++i)
      if (interior_of[i] >= 0) b[interior_of[i]] = -sys.rhs[i];
    for (int col = 0; col < sys.stiffness.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(sys.stiffness, col); it; ++it) {
        int ri = interior_of[it.row()], ci = interior_of[it.col()];
        if (ri >= 0 && ci >= 0)
          trips.emplace_back(ri, ci, it.value());
        else if (ri >= 0)
          b[ri] -= it.value() * sys.boundary_values[it.col()];
      }
    Eigen::SparseMatrix<double> K(ni, ni);
    K.setFromTriplets(trips.begin(), trips.end());

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    // Target well below the 1e-10 contract; accept anything at or under it.
    cg.setTolerance(1e-13);
    cg.setMaxIterations(std::max(200, static_cast<int>(10.0 * std::sqrt(double(ni)))));
    cg.compute(K);
    Eigen::VectorXd x = cg.solve(b);
    double achieved = cg.error();
    if (info) {
      info->iterations = static_cast<int>(cg.iterations());
      info->residual = achieved;
    }
    if (cg.info() != Eigen::Success && !(achieved <= 1e-10))
      throw NoConvergence("cg stalled at relative residual " + std::to_string(achieved));
    for (int i = 0; i < n; ++i)
      if (interior_of[i] >= 0) u[i] = x[interior_of[i]];
  } else if (info) {
    info->iterations = 0;
    info->residual = 0.0;
  }
  return FemSolution(sys.mesh, std::move(u));
}

const TetLocator& FemSolution::locator() const {
  if (!locator_) locator_ = std::make_shared<TetLocator>(mesh_);
  return *locator_;
}

double FemSolution::at(const Vec3& p) const {
  Eigen::Vector4d bary;
  int t = locator().locate(p, bary);
  if (t < 0)
    throw PointOutsideMesh("point (" + std::to_string(p[0]) + ", " + std::to_string(p[1]) +
                           ", " + std::to_string(p[2]) + ") is outside the mesh");
  const auto& T = mesh_->tets[t];
  double v = 0.0;
  for (int k = 0; k < 4; ++k) v += bary[k] * values_[T[k]];
  return v;
}

double FemSolution::at_or_nearest(const Vec3& p) const {
  Eigen::Vector4d bary;
  int t = locator().locate(p, bary);
  if (t < 0) return values_[locator().nearest_vertex(p)];
  const auto& T = mesh_->tets[t];
  double v = 0.0;
  for (int k = 0; k < 4; ++k) v += bary[k] * values_[T[k]];
  return v;
}

double relative_error(const std::vector<double>& u, const std::vector<double>& ref,
                      ErrorNorm norm) {
  if (u.size() != ref.size() || u.empty()) throw Error("relative_error size mismatch");
  double num = 0.0, den = 0.0, umag = 0.0;
  if (norm == ErrorNorm::l2) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      num += (u[i] - ref[i]) * (u[i] - ref[i]);
      den += ref[i] * ref[i];
      umag += u[i] * u[i];
    }
    num = std::sqrt(num);
    den = std::sqrt(den);
    umag = std::sqrt(umag);
  } else {
    for (std::size_t i = 0; i < u.size(); ++i) {
      num = std::max(num, std::abs(u[i] - ref[i]));
      den = std::max(den, std::abs(ref[i]));
      umag = std::max(umag, std::abs(u[i]));
    }
  }
  if (den <= 1e-14 * std::max(1.0, umag))
    throw ZeroReference("reference norm is zero; relative error undefined");
  return num / den;
}

double relative_error(const FemSolution& u, const std::function<double(const Vec3&)>& ref,
                      const std::vector<Vec3>& probes, ErrorNorm norm) {
  std::vector<double> uv(probes.size()), rv(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    uv[i] = u.at_or_nearest(probes[i]);
    rv[i] = ref(probes[i]);
  }
  return relative_error(uv, rv, norm);
}

}  // namespace lamg
