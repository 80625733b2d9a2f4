#pragma once

#include <array>
#include <string>
#include <vector>

#include "lamg/bvh.hpp"
#include "lamg/geom.hpp"
#include "lamg/rng.hpp"

namespace lamg {

struct BoundaryPoint {
  double distance = 0.0;
  Vec3 point{0, 0, 0};
  int triangle = -1;
};

// Closed, consistently oriented triangle surface bounding the PDE domain.
// Construction validates and rejects; nothing is ever repaired.
class BoundaryMesh {
 public:
  BoundaryMesh() = default;
  BoundaryMesh(const BoundaryMesh& o) { assign(o); }
  BoundaryMesh(BoundaryMesh&& o) noexcept { assign_move(std::move(o)); }
  BoundaryMesh& operator=(const BoundaryMesh& o) {
    if (this != &o) assign(o);
    return *this;
  }
  BoundaryMesh& operator=(BoundaryMesh&& o) noexcept {
    if (this != &o) assign_move(std::move(o));
    return *this;
  }

  static BoundaryMesh from_data(std::vector<Vec3> vertices,
                                std::vector<std::array<int, 3>> triangles);

  static BoundaryMesh load(const std::string& path);
  static BoundaryMesh load_obj(const std::string& path);
  static BoundaryMesh load_stl(const std::string& path);
  void save_obj(const std::string& path) const;

  const std::vector<Vec3>& vertices() const { return verts_; }
  const std::vector<std::array<int, 3>>& triangles() const { return tris_; }
  const Aabb& bbox() const { return bbox_; }
  double bbox_diagonal() const { return bbox_.diagonal(); }
  // Coincidence tolerance used by all on-boundary decisions.
  double geom_eps() const { return geom_eps_; }
  double volume() const { return volume_; }

  BoundaryPoint distance_to_boundary(const Vec3& p) const;
  Vec3 project_to_boundary(const Vec3& p) const;
  bool is_inside(const Vec3& p) const;
  // True when the whole open segment stays in the domain interior.
  bool segment_inside(const Vec3& a, const Vec3& b) const;
  // Smallest t in (0,1] where a + t(b-a) meets the boundary, or -1.
  double first_boundary_crossing(const Vec3& a, const Vec3& b) const;
  std::vector<Vec3> sample_interior(int n, Rng& rng) const;

  // Rebuilds the acceleration tree with a different leaf size. Query results
  // must not change; tests exercise that.
  void rebuild_index(int leaf_size);

 private:
  void finalize();

  // The index holds a pointer to the vertex storage, so copies and moves
  // must rebind it to their own vectors.
  void assign(const BoundaryMesh& o) {
    verts_ = o.verts_;
    tris_ = o.tris_;
    bbox_ = o.bbox_;
    volume_ = o.volume_;
    geom_eps_ = o.geom_eps_;
    bvh_ = o.bvh_;
    bvh_.rebind(verts_, tris_);
  }
  void assign_move(BoundaryMesh&& o) {
    verts_ = std::move(o.verts_);
    tris_ = std::move(o.tris_);
    bbox_ = o.bbox_;
    volume_ = o.volume_;
    geom_eps_ = o.geom_eps_;
    bvh_ = std::move(o.bvh_);
    bvh_.rebind(verts_, tris_);
  }

  std::vector<Vec3> verts_;
  std::vector<std::array<int, 3>> tris_;
  Aabb bbox_;
  double volume_ = 0.0;
  double geom_eps_ = 0.0;
  TriBvh bvh_;
};

BoundaryMesh make_box(const Vec3& center, const Vec3& half_extents);
BoundaryMesh make_icosphere(const Vec3& center, double radius, int subdivisions);
BoundaryMesh make_torus(const Vec3& center, double major_radius, double minor_radius,
                        int major_segments, int minor_segments);

// "builtin:cube", "builtin:sphere", "builtin:torus", or a mesh file path.
BoundaryMesh resolve_shape(const std::string& spec);

}  // namespace lamg
