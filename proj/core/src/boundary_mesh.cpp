#include "lamg/boundary_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

#include "lamg/errors.hpp"

namespace lamg {

namespace {

// Fixed fallback directions for parity casting. Irrational components keep
// rays off the axis-aligned planes common in test geometry.
const Vec3& cast_direction(int k) {
  static const std::vector<Vec3> dirs = [] {
    std::vector<Vec3> d;
    constexpr double ga = 2.39996322972865332;  // golden angle
    for (int i = 0; i < 16; ++i) {
      double z = 1.0 - 2.0 * (i + 0.61803398874989485) / 16.0;
      double r = std::sqrt(std::max(1e-12, 1.0 - z * z));
      double a = ga * (i + 1) + 0.7234;
      d.emplace_back(Vec3(r * std::cos(a), r * std::sin(a), z).normalized());
    }
    return d;
  }();
  return dirs[k % 16];
}

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

BoundaryMesh BoundaryMesh::from_data(std::vector<Vec3> vertices,
                                     std::vector<std::array<int, 3>> triangles) {
  BoundaryMesh m;
  m.verts_ = std::move(vertices);
  m.tris_ = std::move(triangles);
  m.finalize();
  return m;
}

void BoundaryMesh::finalize() {
  if (tris_.size() < 4) throw InvalidMesh("boundary mesh needs at least 4 triangles");
  const int nv = static_cast<int>(verts_.size());
  bbox_ = Aabb{};
  for (const auto& t : tris_) {
    for (int k = 0; k < 3; ++k) {
      if (t[k] < 0 || t[k] >= nv) throw InvalidMesh("triangle index out of range");
      bbox_.extend(verts_[t[k]]);
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw InvalidMesh("triangle repeats a vertex");
  }
  double diag = bbox_.diagonal();
  if (!(diag > 0.0)) throw InvalidMesh("boundary mesh has zero extent");
  geom_eps_ = 1e-9 * diag;

  for (std::size_t i = 0; i < tris_.size(); ++i) {
    const auto& t = tris_[i];
    if (triangle_area(verts_[t[0]], verts_[t[1]], verts_[t[2]]) <= 1e-14 * diag * diag)
      throw InvalidMesh("degenerate triangle " + std::to_string(i));
  }

  // Each directed edge must appear exactly once and its reverse exactly once:
  // that is edge-manifold, watertight, and consistently oriented all at once.
  std::unordered_set<std::uint64_t> directed;
  directed.reserve(tris_.size() * 3);
  for (const auto& t : tris_) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (!directed.insert(edge_key(a, b)).second)
        throw InvalidMesh("directed edge repeated; surface is not an oriented manifold");
    }
  }
  for (std::uint64_t key : directed) {
    int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffull);
    if (!directed.count(edge_key(b, a)))
      throw InvalidMesh("open edge found; surface is not watertight");
  }

  volume_ = 0.0;
  for (const auto& t : tris_)
    volume_ += verts_[t[0]].cross(verts_[t[1]]).dot(verts_[t[2]]) / 6.0;
  if (!(volume_ > 0.0))
    throw InvalidMesh("surface encloses non-positive volume; orientation is inward");

  bvh_.build(verts_, tris_);
}

void BoundaryMesh::rebuild_index(int leaf_size) { bvh_.build(verts_, tris_, leaf_size); }

BoundaryPoint BoundaryMesh::distance_to_boundary(const Vec3& p) const {
  auto c = bvh_.closest(p);
  return {c.distance, c.point, c.triangle};
}

Vec3 BoundaryMesh::project_to_boundary(const Vec3& p) const { return bvh_.closest(p).point; }

bool BoundaryMesh::is_inside(const Vec3& p) const {
  int parity = 0;
  for (int attempt = 0; attempt < 16; ++attempt) {
    bool suspicious = false;
    int crossings = bvh_.count_crossings(p, cast_direction(attempt), suspicious);
    parity = crossings & 1;
    if (!suspicious) return parity == 1;
  }
  // Every direction grazed an edge; accept the last parity rather than loop.
  return parity == 1;
}

bool BoundaryMesh::segment_inside(const Vec3& a, const Vec3& b) const {
  if (!is_inside(a) || !is_inside(b)) return false;
  return !bvh_.segment_hits(a, b);
}

double BoundaryMesh::first_boundary_crossing(const Vec3& a, const Vec3& b) const {
  return bvh_.first_segment_hit(a, b);
}

std::vector<Vec3> BoundaryMesh::sample_interior(int n, Rng& rng) const {
  std::vector<Vec3> out;
  out.reserve(n);
  // Budget chosen so an acceptance rate below 1e-4 trips before we stall.
  long budget = std::max<long>(100000, 20000L * n);
  Vec3 lo = bbox_.lo, ext = bbox_.extents();
  for (long attempt = 0; attempt < budget && static_cast<int>(out.size()) < n; ++attempt) {
    Vec3 p = lo + Vec3(rng.uniform() * ext[0], rng.uniform() * ext[1], rng.uniform() * ext[2]);
    if (distance_to_boundary(p).distance <= geom_eps_) continue;
    if (is_inside(p)) out.push_back(p);
  }
  if (static_cast<int>(out.size()) < n)
    throw RejectionBudgetExceeded("interior sampling accepted " + std::to_string(out.size()) +
                                  " of " + std::to_string(n) + " points within budget");
  return out;
}

BoundaryMesh resolve_shape(const std::string& spec) {
  if (spec == "builtin:cube") return make_box({0.5, 0.5, 0.5}, {0.5, 0.5, 0.5});
  if (spec == "builtin:sphere") return make_icosphere({0, 0, 0}, 1.0, 3);
  if (spec == "builtin:torus") return make_torus({0, 0, 0}, 1.0, 0.35, 48, 24);
  return BoundaryMesh::load(spec);
}

}  // namespace lamg
