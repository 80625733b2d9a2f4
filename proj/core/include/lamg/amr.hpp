#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lamg/fem.hpp"

namespace lamg {

// Recovery-based error indicator per tet: eta_t = vol_t * ||G(u) - grad u_t||
// where G is the volume-weighted nodal average of incident cell gradients.
// Zero for globally linear fields.
std::vector<double> recovery_error(const FemSolution& u);

struct RefineReport {
  int marked = 0;
  int edge_splits = 0;
  double min_dihedral_deg = 180.0;
  // Set when bisection drove element quality below the floor; the returned
  // mesh is still valid, the caller decides whether to stop.
  bool quality_collapse = false;
};

struct AmrConfig {
  double mark_fraction = 0.7;    // refine tets with eta >= fraction * max eta
  int vertex_budget = 10000;     // stop before exceeding this vertex count
  int max_iterations = 40;
  double quality_floor_deg = 0.5;
};

// Longest-edge bisection with recursive conformity closure. Marked tets are
// split once; neighbors split as needed so no hanging vertices remain.
TetMesh bisect_marked(const TetMesh& mesh, const std::vector<char>& marked,
                      RefineReport* report = nullptr);

// Convenience: mark by threshold on the indicator, then bisect.
TetMesh refine(const TetMesh& mesh, const std::vector<double>& eta, double mark_fraction,
               RefineReport* report = nullptr);

struct AmrIteration {
  int iteration = 0;
  int vertices = 0;
  int tets = 0;
  double max_eta = 0.0;
  double mean_eta = 0.0;
  double min_dihedral_deg = 0.0;
};

struct AmrResult {
  FemSolution solution;
  std::vector<AmrIteration> history;
  void save_history_csv(const std::string& path) const;
};

// Solve, estimate, mark, bisect until the vertex budget or iteration cap.
// A budget at or below the seed vertex count returns the seed solve only.
AmrResult amr_loop(const PoissonProblem& prob, std::shared_ptr<const TetMesh> seed,
                   const AmrConfig& cfg);

}  // namespace lamg
