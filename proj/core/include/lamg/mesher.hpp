#pragma once

#include <cmath>
#include <string>

#include "lamg/boundary_mesh.hpp"
#include "lamg/sizing.hpp"
#include "lamg/tet_mesh.hpp"

namespace lamg {

struct MesherConfig {
  // Octree cells split while their edge exceeds this multiple of the local
  // target size, which lands final edges in (factor/2, factor] * target.
  double split_factor = std::sqrt(2.0);
  // Lattice vertices closer to the boundary than this fraction of their
  // local cell size get snapped onto it before cutting.
  double warp_fraction = 0.3;
  // Target sizes below this fraction of the bbox diagonal raise FieldTooFine.
  double min_size_fraction = 1e-3;
  int max_levels = 20;
};

// Octree lattice guided by the sizing field, trimmed to the domain. `eta`
// scales all sizes multiplicatively, so growing eta coarsens the mesh.
TetMesh mesh_adaptive(const BoundaryMesh& domain, const SizingField& field, double eta = 1.0,
                      const MesherConfig& cfg = {});

TetMesh mesh_uniform(const BoundaryMesh& domain, double size, const MesherConfig& cfg = {});

// The eta-scaled field as a gmsh view, next to whatever mesh it produced.
void export_background_field(const SizingField& field, double eta, const std::string& path);

}  // namespace lamg
