#include "lamg/amr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "lamg/csv.hpp"
#include "lamg/errors.hpp"

namespace lamg {

namespace {

Vec3 cell_gradient(const TetMesh& m, const Eigen::VectorXd& u, int t) {
  const auto& T = m.tets[t];
  const Vec3& a = m.vertices[T[0]];
  Eigen::Matrix3d E;
  E.col(0) = m.vertices[T[1]] - a;
  E.col(1) = m.vertices[T[2]] - a;
  E.col(2) = m.vertices[T[3]] - a;
  Eigen::Matrix3d Einv = E.inverse();
  Vec3 g1 = Einv.row(0), g2 = Einv.row(1), g3 = Einv.row(2);
  Vec3 g0 = -(g1 + g2 + g3);
  return u[T[0]] * g0 + u[T[1]] * g1 + u[T[2]] * g2 + u[T[3]] * g3;
}

double min_dihedral_deg(const TetMesh& m, const std::array<int, 4>& T) {
  static constexpr int pairs[6][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2},
                                      {1, 2, 0, 3}, {1, 3, 0, 2}, {2, 3, 0, 1}};
  double best = 180.0;
  for (const auto& p : pairs) {
    const Vec3& a = m.vertices[T[p[0]]];
    const Vec3& b = m.vertices[T[p[1]]];
    Vec3 e = (b - a).normalized();
    // Face directions made perpendicular to the shared edge; their angle is
    // the interior dihedral.
    Vec3 u = (m.vertices[T[p[2]]] - a);
    Vec3 v = (m.vertices[T[p[3]]] - a);
    u -= u.dot(e) * e;
    v -= v.dot(e) * e;
    double ang = std::atan2(u.cross(v).norm(), u.dot(v)) * 180.0 / M_PI;
    best = std::min(best, ang);
  }
  return best;
}

std::uint64_t ekey(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

std::vector<double> recovery_error(const FemSolution& sol) {
  const TetMesh& m = *sol.mesh();
  const Eigen::VectorXd& u = sol.values();
  std::vector<Vec3> grads(m.tet_count());
  std::vector<Vec3> nodal(m.vertex_count(), Vec3::Zero());
  std::vector<double> weight(m.vertex_count(), 0.0);
  for (int t = 0; t < m.tet_count(); ++t) {
    grads[t] = cell_gradient(m, u, t);
    for (int k = 0; k < 4; ++k) {
      nodal[m.tets[t][k]] += m.volumes[t] * grads[t];
      weight[m.tets[t][k]] += m.volumes[t];
    }
  }
  for (int v = 0; v < m.vertex_count(); ++v)
    if (weight[v] > 0.0) nodal[v] /= weight[v];

  // eta_t^2 = vol_t * mean corner ||recovered - raw||^2, an L2-type measure
  // of the recovered-gradient jump. Exactly zero for globally linear u.
  std::vector<double> eta(m.tet_count());
  for (int t = 0; t < m.tet_count(); ++t) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += (nodal[m.tets[t][k]] - grads[t]).squaredNorm();
    eta[t] = std::sqrt(m.volumes[t] * s / 4.0);
  }
  return eta;
}

TetMesh bisect_marked(const TetMesh& mesh, const std::vector<char>& marked,
                      RefineReport* report) {
  std::vector<Vec3> verts = mesh.vertices;
  std::vector<std::array<int, 4>> tets = mesh.tets;
  std::vector<char> alive(tets.size(), 1);
  std::vector<std::vector<int>> incident(verts.size());
  for (std::size_t t = 0; t < tets.size(); ++t)
    for (int k = 0; k < 4; ++k) incident[tets[t][k]].push_back(static_cast<int>(t));
  std::unordered_map<std::uint64_t, int> midpoint;

  RefineReport local;
  for (std::size_t t = 0; t < marked.size(); ++t) local.marked += marked[t] ? 1 : 0;

  auto edge_len2 = [&](int a, int b) { return (verts[a] - verts[b]).squaredNorm(); };

  // Total order on edges: longer first, index pair as tie-break. The strict
  // order is what guarantees the closure walk terminates.
  auto edge_less = [&](std::pair<int, int> e1, std::pair<int, int> e2) {
    double l1 = edge_len2(e1.first, e1.second), l2 = edge_len2(e2.first, e2.second);
    if (l1 != l2) return l1 < l2;
    return ekey(e1.first, e1.second) > ekey(e2.first, e2.second);
  };

  auto longest_edge = [&](int t) {
    std::pair<int, int> best{-1, -1};
    const auto& T = tets[t];
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        std::pair<int, int> e{std::min(T[i], T[j]), std::max(T[i], T[j])};
        if (best.first < 0 || edge_less(best, e)) best = e;
      }
    return best;
  };

  auto tets_on_edge = [&](std::pair<int, int> e) {
    std::vector<int> out;
    for (int t : incident[e.first]) {
      if (!alive[t]) continue;
      const auto& T = tets[t];
      bool has_b = T[0] == e.second || T[1] == e.second || T[2] == e.second ||
                   T[3] == e.second;
      if (has_b && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    }
    return out;
  };

  auto split_edge = [&](std::pair<int, int> e) {
    int m;
    auto it = midpoint.find(ekey(e.first, e.second));
    if (it != midpoint.end()) {
      m = it->second;
    } else {
      m = static_cast<int>(verts.size());
      verts.push_back(0.5 * (verts[e.first] + verts[e.second]));
      incident.emplace_back();
      midpoint.emplace(ekey(e.first, e.second), m);
    }
    for (int t : tets_on_edge(e)) {
      std::array<int, 4> keep_a = tets[t], keep_b = tets[t];
      for (int k = 0; k < 4; ++k) {
        if (keep_a[k] == e.second) keep_a[k] = m;  // child on the e.first side
        if (keep_b[k] == e.first) keep_b[k] = m;
      }
      alive[t] = 0;
      for (const auto& child : {keep_a, keep_b}) {
        int id = static_cast<int>(tets.size());
        tets.push_back(child);
        alive.push_back(1);
        for (int k = 0; k < 4; ++k) incident[child[k]].push_back(id);
      }
    }
    ++local.edge_splits;
  };

  for (std::size_t seed = 0; seed < marked.size(); ++seed) {
    if (!marked[seed]) continue;
    long guard = 0;
    while (alive[seed]) {
      // Walk to a terminal edge: one whose every incident tet has it as its
      // own longest edge, then split there.
      int t = static_cast<int>(seed);
      while (true) {
        if (++guard > 2000000) throw Error("bisection closure walk did not terminate");
        auto e = longest_edge(t);
        int offender = -1;
        for (int s : tets_on_edge(e))
          if (longest_edge(s) != e) {
            offender = s;
            break;
          }
        if (offender < 0) {
          split_edge(e);
          break;
        }
        t = offender;
      }
    }
  }

  std::vector<std::array<int, 4>> out_tets;
  out_tets.reserve(tets.size());
  for (std::size_t t = 0; t < tets.size(); ++t)
    if (alive[t]) out_tets.push_back(tets[t]);
  TetMesh out = TetMesh::from_data(std::move(verts), std::move(out_tets));

  for (const auto& T : out.tets)
    local.min_dihedral_deg = std::min(local.min_dihedral_deg, min_dihedral_deg(out, T));
  if (report) *report = local;
  return out;
}

TetMesh refine(const TetMesh& mesh, const std::vector<double>& eta, double mark_fraction,
               RefineReport* report) {
  double max_eta = 0.0;
  for (double e : eta) max_eta = std::max(max_eta, e);
  std::vector<char> marked(mesh.tet_count(), 0);
  if (max_eta > 0.0)
    for (int t = 0; t < mesh.tet_count(); ++t)
      if (eta[t] >= mark_fraction * max_eta) marked[t] = 1;
  return bisect_marked(mesh, marked, report);
}

AmrResult amr_loop(const PoissonProblem& prob, std::shared_ptr<const TetMesh> seed,
                   const AmrConfig& cfg) {
  AmrResult res;
  std::shared_ptr<const TetMesh> mesh = std::move(seed);
  res.solution = solve(assemble(mesh, prob));

  auto record = [&](int iter, double dihedral) {
    std::vector<double> eta = recovery_error(res.solution);
    double mx = 0.0, mean = 0.0;
    for (double e : eta) {
      mx = std::max(mx, e);
      mean += e;
    }
    mean /= eta.empty() ? 1.0 : double(eta.size());
    res.history.push_back({iter, mesh->vertex_count(), mesh->tet_count(), mx, mean, dihedral});
    return eta;
  };

  double dihedral = 180.0;
  for (const auto& T : mesh->tets)
    dihedral = std::min(dihedral, min_dihedral_deg(*mesh, T));
  std::vector<double> eta = record(0, dihedral);

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    if (mesh->vertex_count() >= cfg.vertex_budget) break;
    RefineReport rep;
    TetMesh next = refine(*mesh, eta, cfg.mark_fraction, &rep);
    if (next.vertex_count() == mesh->vertex_count()) break;  // nothing marked
    mesh = std::make_shared<const TetMesh>(std::move(next));
    res.solution = solve(assemble(mesh, prob));
    rep.quality_collapse = rep.min_dihedral_deg < cfg.quality_floor_deg;
    eta = record(it, rep.min_dihedral_deg);
    if (rep.quality_collapse) break;
  }
  return res;
}

void AmrResult::save_history_csv(const std::string& path) const {
  CsvWriter w(path, "iteration,vertices,tets,max_eta,mean_eta,min_dihedral_deg");
  for (const auto& r : history) {
    w.field(r.iteration);
    w.field(r.vertices);
    w.field(r.tets);
    w.field(r.max_eta);
    w.field(r.mean_eta);
    w.field(r.min_dihedral_deg);
    w.end_row();
  }
}

}  // namespace lamg
