#include "lamg/mesher.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lamg/errors.hpp"

namespace lamg {

namespace {

// Vertices live on an integer lattice of the root cube at this resolution,
// fine enough for corners, edge midpoints and face centers of cells at any
// permitted depth. Identical keys give bitwise identical positions.
constexpr int kUnitShift = 22;

struct IKey {
  int32_t x = 0, y = 0, z = 0;
  bool operator==(const IKey&) const = default;
};

struct IKeyHash {
  std::size_t operator()(const IKey& k) const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (uint64_t v : {static_cast<uint32_t>(k.x), static_cast<uint32_t>(k.y),
                       static_cast<uint32_t>(k.z)}) {
      h = (h ^ v) * 0x100000001b3ull;
    }
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};

IKey ikey_mid(const IKey& a, const IKey& b) {
  return {(a.x + b.x) / 2, (a.y + b.y) / 2, (a.z + b.z) / 2};
}

bool ikey_less(const IKey& a, const IKey& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  return a.z < b.z;
}

struct Cell {
  int level = 0;
  int32_t ix = 0, iy = 0, iz = 0;  // cell coordinates at its own level
  int first_child = -1;            // 8 children allocated contiguously
  bool leaf() const { return first_child < 0; }
};

// corner cycles per face in outward counterclockwise order; cones from the
// cell center over these triangles then have positive volume
constexpr int kFaceCycle[6][4][3] = {
    {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}},  // -x
    {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}},  // +x
    {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}},  // -y
    {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}},  // +y
    {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}},  // -z
    {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}},  // +z
};

constexpr int kNeighborOffsets[18][3] = {
    {1, 0, 0},  {-1, 0, 0}, {0, 1, 0},  {0, -1, 0}, {0, 0, 1},  {0, 0, -1},
    {1, 1, 0},  {1, -1, 0}, {-1, 1, 0}, {-1, -1, 0}, {1, 0, 1},  {1, 0, -1},
    {-1, 0, 1}, {-1, 0, -1}, {0, 1, 1},  {0, 1, -1}, {0, -1, 1}, {0, -1, -1},
};

enum class VState : uint8_t { In, On, Out };

struct PairHash {
  std::size_t operator()(const std::pair<int, int>& p) const {
    return static_cast<std::size_t>(p.first) * 0x9e3779b97f4a7c15ull +
           static_cast<std::size_t>(p.second);
  }
};

class LatticeMesher {
 public:
  LatticeMesher(const BoundaryMesh& domain, const SizingField& field, const MesherConfig& cfg)
      : domain_(domain), interp_(field), cfg_(cfg) {
    diag_ = domain.bbox_diagonal();
    side_ = domain.bbox().extents().maxCoeff();
    origin_ = domain.bbox().lo;
    unit_ = side_ / static_cast<double>(1 << kUnitShift);
  }

  TetMesh run() {
    build_octree();
    balance();
    emit_lattice();
    warp_and_classify();
    march();
    return finalize();
  }

 private:
  double cell_edge(int level) const { return side_ / static_cast<double>(1 << level); }

  Vec3 cell_center(const Cell& c) const {
    const double e = cell_edge(c.level);
    return origin_ + e * Vec3(c.ix + 0.5, c.iy + 0.5, c.iz + 0.5);
  }

  bool entirely_outside(const Cell& c) const {
    const Vec3 ctr = cell_center(c);
    if (domain_.is_inside(ctr)) return false;
    const double half_diag = 0.5 * std::sqrt(3.0) * cell_edge(c.level);
    return domain_.distance_to_boundary(ctr).distance > half_diag;
  }

  bool wants_split(const Cell& c) const {
    if (entirely_outside(c)) return false;
    const double s = interp_(cell_center(c));
    if (s < cfg_.min_size_fraction * diag_)
      throw FieldTooFine("target size " + std::to_string(s) + " below resolvable minimum");
    if (cell_edge(c.level) <= cfg_.split_factor * s) return false;
    if (c.level >= cfg_.max_levels) throw MeshingFailed("octree depth cap reached");
    return true;
  }

  void split(std::size_t i) {
    const Cell c = cells_[i];
    cells_[i].first_child = static_cast<int>(cells_.size());
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          Cell child;
          child.level = c.level + 1;
          child.ix = 2 * c.ix + dx;
          child.iy = 2 * c.iy + dy;
          child.iz = 2 * c.iz + dz;
          cells_.push_back(child);
        }
  }

  void build_octree() {
    cells_.push_back(Cell{});
    for (std::size_t i = 0; i < cells_.size(); ++i)
      if (wants_split(cells_[i])) split(i);
  }

  // deepest existing cell containing the level-scale coordinate
  int locate(int level, int32_t x, int32_t y, int32_t z) const {
    int cur = 0;
    for (int d = 0; d < level && !cells_[cur].leaf(); ++d) {
      const int shift = level - 1 - d;
      const int child = ((x >> shift) & 1) + (((y >> shift) & 1) << 1) + (((z >> shift) & 1) << 2);
      cur = cells_[cur].first_child + child;
    }
    return cur;
  }

  // limits level jumps across faces and edges to one, so neighbor corners
  // land only on midpoints of this cell's faces and edges
  void balance() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < cells_.size(); ++i) {
        if (!cells_[i].leaf()) continue;
        const Cell c = cells_[i];
        const int32_t span = 1 << c.level;
        for (const auto& off : kNeighborOffsets) {
          const int32_t nx = c.ix + off[0], ny = c.iy + off[1], nz = c.iz + off[2];
          if (nx < 0 || ny < 0 || nz < 0 || nx >= span || ny >= span || nz >= span) continue;
          const int j = locate(c.level, nx, ny, nz);
          if (cells_[j].leaf() && cells_[j].level + 1 < c.level) {
            split(j);
            changed = true;
          }
        }
      }
    }
  }

  Vec3 key_position(const IKey& k) const {
    return origin_ + unit_ * Vec3(k.x, k.y, k.z);
  }

  int new_vertex(const Vec3& p, bool lattice) {
    verts_.push_back(p);
    local_size_.push_back(std::numeric_limits<double>::infinity());
    lattice_.push_back(lattice);
    return static_cast<int>(verts_.size()) - 1;
  }

  int vertex_for_key(const IKey& k) {
    if (auto it = registry_.find(k); it != registry_.end()) return it->second;
    if (auto it = extra_.find(k); it != extra_.end()) return it->second;
    const int v = new_vertex(key_position(k), true);
    extra_.emplace(k, v);
    return v;
  }

  // Conforming triangulation of a square face, counterclockwise from
  // outside. Decisions read only the frozen corner registry, so the two
  // cells sharing any part of a face always agree.
  void triangulate_face(const std::array<IKey, 4>& q, std::vector<std::array<int, 3>>& tris) {
    const IKey center = ikey_mid(q[0], q[2]);
    if (registry_.count(center)) {
      // finer neighbor corners exist: descend into quadrants
      const IKey m01 = ikey_mid(q[0], q[1]), m12 = ikey_mid(q[1], q[2]);
      const IKey m23 = ikey_mid(q[2], q[3]), m30 = ikey_mid(q[3], q[0]);
      triangulate_face({q[0], m01, center, m30}, tris);
      triangulate_face({m01, q[1], m12, center}, tris);
      triangulate_face({center, m12, q[2], m23}, tris);
      triangulate_face({m30, center, m23, q[3]}, tris);
      return;
    }
    std::array<IKey, 8> cycle;
    int n = 0;
    bool any_mid = false;
    for (int e = 0; e < 4; ++e) {
      cycle[n++] = q[e];
      const IKey m = ikey_mid(q[e], q[(e + 1) % 4]);
      if (registry_.count(m)) {
        cycle[n++] = m;
        any_mid = true;
      }
    }
    if (any_mid) {
      // edge-adjacent finer cells left hanging midpoints: fan around an
      // auxiliary face center both sides create identically
      const int vc = vertex_for_key(center);
      for (int k = 0; k < n; ++k)
        tris.push_back({vc, vertex_for_key(cycle[k]), vertex_for_key(cycle[(k + 1) % n])});
      return;
    }
    int s = 0;
    for (int k = 1; k < 4; ++k)
      if (ikey_less(q[k], q[s])) s = k;
    tris.push_back({vertex_for_key(q[s]), vertex_for_key(q[(s + 1) % 4]),
                    vertex_for_key(q[(s + 2) % 4])});
    tris.push_back({vertex_for_key(q[s]), vertex_for_key(q[(s + 2) % 4]),
                    vertex_for_key(q[(s + 3) % 4])});
  }

  void emit_lattice() {
    std::vector<int> leaves;
    for (std::size_t i = 0; i < cells_.size(); ++i)
      if (cells_[i].leaf() && !entirely_outside(cells_[i]))
        leaves.push_back(static_cast<int>(i));
    std::sort(leaves.begin(), leaves.end(), [&](int a, int b) {
      const Cell& ca = cells_[a];
      const Cell& cb = cells_[b];
      return std::tie(ca.level, ca.ix, ca.iy, ca.iz) < std::tie(cb.level, cb.ix, cb.iy, cb.iz);
    });
    if (leaves.empty()) throw MeshingFailed("no octree cell meets the domain");

    // corner registry first; face decisions must not see vertices that
    // later triangulation steps add
    for (int li : leaves) {
      const Cell& c = cells_[li];
      const int32_t step = 1 << (kUnitShift - c.level);
      const IKey base{c.ix * step, c.iy * step, c.iz * step};
      for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const IKey k{base.x + dx * step, base.y + dy * step, base.z + dz * step};
            if (!registry_.count(k)) registry_.emplace(k, new_vertex(key_position(k), true));
          }
    }

    std::vector<std::array<int, 3>> tris;
    for (int li : leaves) {
      const Cell& c = cells_[li];
      const int32_t step = 1 << (kUnitShift - c.level);
      const IKey base{c.ix * step, c.iy * step, c.iz * step};
      const int cv = new_vertex(cell_center(c), false);
      tris.clear();
      for (const auto& face : kFaceCycle) {
        std::array<IKey, 4> quad;
        for (int k = 0; k < 4; ++k)
          quad[k] = {base.x + face[k][0] * step, base.y + face[k][1] * step,
                     base.z + face[k][2] * step};
        triangulate_face(quad, tris);
      }
      const double edge = cell_edge(c.level);
      local_size_[cv] = std::min(local_size_[cv], edge);
      for (const auto& t : tris) {
        raw_tets_.push_back({cv, t[0], t[1], t[2]});
        for (int v : t) local_size_[v] = std::min(local_size_[v], edge);
      }
    }
  }

  void warp_and_classify() {
    states_.resize(verts_.size());
    for (std::size_t v = 0; v < verts_.size(); ++v) {
      if (!lattice_[v]) {
        states_[v] = domain_.is_inside(verts_[v]) ? VState::In : VState::Out;
        continue;
      }
      const BoundaryPoint bp = domain_.distance_to_boundary(verts_[v]);
      if (bp.distance <= cfg_.warp_fraction * local_size_[v]) {
        verts_[v] = bp.point;
        states_[v] = VState::On;
      } else {
        states_[v] = domain_.is_inside(verts_[v]) ? VState::In : VState::Out;
      }
    }
  }

  int cut_vertex(int a, int b) {
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    if (auto it = cuts_.find(key); it != cuts_.end()) return it->second;
    const Vec3 p = verts_[key.first], q = verts_[key.second];
    double t = domain_.first_boundary_crossing(p, q);
    if (t <= 0.0) {
      // tolerance miss; place the cut by the unsigned distance ratio
      const double da = domain_.distance_to_boundary(p).distance;
      const double db = domain_.distance_to_boundary(q).distance;
      t = da / std::max(da + db, 1e-300);
    }
    t = std::clamp(t, 0.05, 0.95);
    const int v = new_vertex(p + t * (q - p), false);
    cuts_.emplace(key, v);
    return v;
  }

  void emit_tet(int a, int b, int c, int d) {
    const double vol = tet_volume(verts_[a], verts_[b], verts_[c], verts_[d]);
    if (std::abs(vol) <= 1e-30 * side_ * side_ * side_)
      throw MeshingFailed("degenerate cut element");
    if (vol < 0.0) std::swap(c, d);
    out_tets_.push_back({a, b, c, d});
  }

  // quad in cycle order splits along the diagonal through its smallest
  // global index, so both regions sharing the quad pick the same one
  void emit_pyramid(int apex, const std::array<int, 4>& quad) {
    int s = 0;
    for (int k = 1; k < 4; ++k)
      if (quad[k] < quad[s]) s = k;
    emit_tet(apex, quad[s], quad[(s + 1) % 4], quad[(s + 2) % 4]);
    emit_tet(apex, quad[s], quad[(s + 2) % 4], quad[(s + 3) % 4]);
  }

  void emit_prism(const std::array<int, 3>& a, const std::array<int, 3>& b) {
    Vec3 centroid = Vec3::Zero();
    for (int k = 0; k < 3; ++k) centroid += verts_[a[k]] + verts_[b[k]];
    const int c = new_vertex(centroid / 6.0, false);
    emit_tet(c, a[0], a[1], a[2]);
    emit_tet(c, b[0], b[1], b[2]);
    for (int k = 0; k < 3; ++k) {
      const int k1 = (k + 1) % 3;
      emit_pyramid(c, {a[k], a[k1], b[k1], b[k]});
    }
  }

  void march() {
    for (const auto& t : raw_tets_) {
      int in[4], on[4], out[4];
      int ni = 0, no = 0, nx = 0;
      for (int v : t) {
        switch (states_[v]) {
          case VState::In: in[ni++] = v; break;
          case VState::On: on[no++] = v; break;
          case VState::Out: out[nx++] = v; break;
        }
      }
      if (ni == 0) continue;  // outside or only grazing the boundary
      if (nx == 0) {
        emit_tet(t[0], t[1], t[2], t[3]);
        continue;
      }
      if (ni == 1 && nx == 3) {
        emit_tet(in[0], cut_vertex(in[0], out[0]), cut_vertex(in[0], out[1]),
                 cut_vertex(in[0], out[2]));
      } else if (ni == 1 && no == 1 && nx == 2) {
        emit_tet(in[0], on[0], cut_vertex(in[0], out[0]), cut_vertex(in[0], out[1]));
      } else if (ni == 1 && no == 2 && nx == 1) {
        emit_tet(in[0], on[0], on[1], cut_vertex(in[0], out[0]));
      } else if (ni == 2 && no == 1 && nx == 1) {
        emit_pyramid(on[0], {in[0], in[1], cut_vertex(in[1], out[0]), cut_vertex(in[0], out[0])});
      } else if (ni == 2 && nx == 2) {
        emit_prism({in[0], cut_vertex(in[0], out[0]), cut_vertex(in[0], out[1])},
                   {in[1], cut_vertex(in[1], out[0]), cut_vertex(in[1], out[1])});
      } else {  // ni == 3 && nx == 1
        emit_prism({in[0], in[1], in[2]},
                   {cut_vertex(in[0], out[0]), cut_vertex(in[1], out[0]),
                    cut_vertex(in[2], out[0])});
      }
    }
  }

  TetMesh finalize() {
    if (out_tets_.empty()) throw MeshingFailed("domain too thin for the requested sizes");
    std::vector<int> remap(verts_.size(), -1);
    std::vector<Vec3> fv;
    std::vector<std::array<int, 4>> ft;
    ft.reserve(out_tets_.size());
    for (const auto& t : out_tets_) {
      std::array<int, 4> nt;
      for (int k = 0; k < 4; ++k) {
        if (remap[t[k]] < 0) {
          remap[t[k]] = static_cast<int>(fv.size());
          fv.push_back(verts_[t[k]]);
        }
        nt[k] = remap[t[k]];
      }
      ft.push_back(nt);
    }
    return TetMesh::from_data(std::move(fv), std::move(ft));
  }

  const BoundaryMesh& domain_;
  SizeInterpolator interp_;
  MesherConfig cfg_;
  Vec3 origin_;
  double side_ = 0.0, unit_ = 0.0, diag_ = 0.0;

  std::vector<Cell> cells_;
  std::vector<Vec3> verts_;
  std::vector<double> local_size_;
  std::vector<bool> lattice_;
  std::vector<VState> states_;
  std::unordered_map<IKey, int, IKeyHash> registry_;
  std::unordered_map<IKey, int, IKeyHash> extra_;
  std::unordered_map<std::pair<int, int>, int, PairHash> cuts_;
  std::vector<std::array<int, 4>> raw_tets_;
  std::vector<std::array<int, 4>> out_tets_;
};

}  // namespace

TetMesh mesh_adaptive(const BoundaryMesh& domain, const SizingField& field, double eta,
                      const MesherConfig& cfg) {
  if (field.normalized) throw ConfigError("meshing needs physical sizes; denormalize first");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  const SizingField scaled = scale_field(field, eta);
  LatticeMesher mesher(domain, scaled, cfg);
  return mesher.run();
}

TetMesh mesh_uniform(const BoundaryMesh& domain, double size, const MesherConfig& cfg) {
  if (!(size > 0.0)) throw ConfigError("uniform size must be positive");
  if (size >= domain.bbox_diagonal() / 4.0)
    throw ConfigError("uniform size too coarse to resolve the domain");
  SizingField field;
  field.points = {domain.bbox().center()};
  field.sizes = {size};
  return mesh_adaptive(domain, field, 1.0, cfg);
}

void export_background_field(const SizingField& field, double eta, const std::string& path) {
  save_pos(scale_field(field, eta), path);
}

}  // namespace lamg
