#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lamg/bvh.hpp"
#include "lamg/geom.hpp"

namespace lamg {

// Conforming tetrahedral mesh. Construction validates: positive volumes,
// face-to-face conformity, watertight boundary, no unreferenced vertices.
struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<char> on_boundary;  // vertex lies on a face incident to one tet
  std::vector<double> volumes;
  Aabb bbox;

  static TetMesh from_data(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets);

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int tet_count() const { return static_cast<int>(tets.size()); }
  double total_volume() const;

  // Native ASCII format and a gmsh 2.2 ASCII subset.
  void save(const std::string& path) const;
  static TetMesh load(const std::string& path);
  void save_msh(const std::string& path) const;
  static TetMesh load_msh(const std::string& path);
};

// Point location over tets. Returns the lowest containing tet index for
// determinism; bary holds the 4 barycentric coordinates.
class TetLocator {
 public:
  explicit TetLocator(std::shared_ptr<const TetMesh> mesh);
  int locate(const Vec3& p, Eigen::Vector4d& bary, double bary_slack = 1e-9) const;
  // Nearest vertex by Euclidean distance (evaluation fallback near gaps).
  int nearest_vertex(const Vec3& p) const;

 private:
  std::shared_ptr<const TetMesh> mesh_;
  BoxBvh bvh_;
};

}  // namespace lamg
