#include "lamg/tet_mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "lamg/csv.hpp"
#include "lamg/errors.hpp"

namespace lamg {

namespace {

struct FaceKey {
  std::array<int, 3> v;  // sorted
  bool operator==(const FaceKey& o) const { return v == o.v; }
};

struct FaceKeyHash {
  std::size_t operator()(const FaceKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (int x : k.v) {
      h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

FaceKey face_key(int a, int b, int c) {
  std::array<int, 3> v = {a, b, c};
  std::sort(v.begin(), v.end());
  return {v};
}

// Vertex triples of the 4 faces, outward for a positively oriented tet.
constexpr int kFaceCorners[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

std::uint64_t undirected_edge(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

TetMesh TetMesh::from_data(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets) {
  TetMesh m;
  m.vertices = std::move(vertices);
  m.tets = std::move(tets);
  if (m.tets.empty()) throw InvalidMesh("tet mesh has no cells");

  const int nv = m.vertex_count();
  std::vector<char> referenced(nv, 0);
  m.bbox = Aabb{};
  for (const auto& t : m.tets)
    for (int k = 0; k < 4; ++k) {
      if (t[k] < 0 || t[k] >= nv) throw InvalidMesh("tet index out of range");
      referenced[t[k]] = 1;
      m.bbox.extend(m.vertices[t[k]]);
    }
  for (int v = 0; v < nv; ++v)
    if (!referenced[v]) throw InvalidMesh("unreferenced vertex " + std::to_string(v));

  m.volumes.resize(m.tets.size());
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    const auto& T = m.tets[t];
    double vol = tet_volume(m.vertices[T[0]], m.vertices[T[1]], m.vertices[T[2]],
                            m.vertices[T[3]]);
    if (!(vol > 0.0))
      throw InvalidMesh("tet " + std::to_string(t) + " has non-positive volume " +
                        std::to_string(vol));
    m.volumes[t] = vol;
  }

  // Conformity: a face belongs to at most two tets, and the once-used faces
  // must close up into a watertight boundary (each boundary edge on exactly
  // two boundary faces). Hanging vertices break the second condition.
  std::unordered_map<FaceKey, int, FaceKeyHash> face_count;
  face_count.reserve(m.tets.size() * 4);
  for (const auto& T : m.tets)
    for (const auto& f : kFaceCorners) {
      int c = ++face_count[face_key(T[f[0]], T[f[1]], T[f[2]])];
      if (c > 2) throw InvalidMesh("face shared by more than two tets");
    }

  m.on_boundary.assign(nv, 0);
  std::unordered_map<std::uint64_t, int> boundary_edge_count;
  for (const auto& T : m.tets)
    for (const auto& f : kFaceCorners) {
      int a = T[f[0]], b = T[f[1]], c = T[f[2]];
      if (face_count[face_key(a, b, c)] != 1) continue;
      m.on_boundary[a] = m.on_boundary[b] = m.on_boundary[c] = 1;
      ++boundary_edge_count[undirected_edge(a, b)];
      ++boundary_edge_count[undirected_edge(b, c)];
      ++boundary_edge_count[undirected_edge(c, a)];
    }
  for (const auto& [e, c] : boundary_edge_count)
    if (c != 2)
      throw InvalidMesh("boundary is not watertight (edge on " + std::to_string(c) +
                        " boundary faces); mesh is non-conforming");
  return m;
}

double TetMesh::total_volume() const {
  double s = 0.0;
  for (double v : volumes) s += v;
  return s;
}

void TetMesh::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "tetmesh 1\n" << vertex_count() << " " << tet_count() << "\n";
  for (const auto& v : vertices)
    out << fmt_g17(v[0]) << " " << fmt_g17(v[1]) << " " << fmt_g17(v[2]) << "\n";
  for (const auto& t : tets) out << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
}

TetMesh TetMesh::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string magic;
  int version = 0, nv = 0, nt = 0;
  in >> magic >> version >> nv >> nt;
  if (magic != "tetmesh" || version != 1) throw IoError("not a tetmesh file: " + path);
  std::vector<Vec3> verts(nv);
  for (auto& v : verts) in >> v[0] >> v[1] >> v[2];
  std::vector<std::array<int, 4>> tets(nt);
  for (auto& t : tets) in >> t[0] >> t[1] >> t[2] >> t[3];
  if (!in) throw IoError("truncated tetmesh file: " + path);
  return from_data(std::move(verts), std::move(tets));
}

void TetMesh::save_msh(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << vertex_count() << "\n";
  for (int i = 0; i < vertex_count(); ++i)
    out << i + 1 << " " << fmt_g17(vertices[i][0]) << " " << fmt_g17(vertices[i][1]) << " "
        << fmt_g17(vertices[i][2]) << "\n";
  out << "$EndNodes\n$Elements\n" << tet_count() << "\n";
  for (int t = 0; t < tet_count(); ++t)
    out << t + 1 << " 4 2 0 1 " << tets[t][0] + 1 << " " << tets[t][1] + 1 << " "
        << tets[t][2] + 1 << " " << tets[t][3] + 1 << "\n";
  out << "$EndElements\n";
}

TetMesh TetMesh::load_msh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  std::vector<Vec3> verts;
  std::vector<std::array<int, 4>> tets;
  std::unordered_map<long, int> node_id;  // file ids need not be dense
  while (std::getline(in, line)) {
    if (line.rfind("$MeshFormat", 0) == 0) {
      double ver;
      int ftype, dsize;
      in >> ver >> ftype >> dsize;
      if (ver < 2.0 || ver >= 3.0 || ftype != 0)
        throw IoError("unsupported msh version in " + path);
    } else if (line.rfind("$Nodes", 0) == 0) {
      long n;
      in >> n;
      for (long i = 0; i < n; ++i) {
        long id;
        double x, y, z;
        in >> id >> x >> y >> z;
        node_id[id] = static_cast<int>(verts.size());
        verts.emplace_back(x, y, z);
      }
    } else if (line.rfind("$Elements", 0) == 0) {
      long n;
      in >> n;
      for (long i = 0; i < n; ++i) {
        long id;
        int type, ntags;
        in >> id >> type >> ntags;
        int tag;
        for (int k = 0; k < ntags; ++k) in >> tag;
        int nodes_per[16] = {0, 2, 3, 4, 4, 8, 6, 5, 3, 6, 9, 10, 27, 18, 14, 1};
        if (type < 1 || type > 15) throw IoError("unsupported msh element type");
        long refs[27];
        for (int k = 0; k < nodes_per[type]; ++k) in >> refs[k];
        if (type == 4) {
          std::array<int, 4> t;
          for (int k = 0; k < 4; ++k) {
            auto it = node_id.find(refs[k]);
            if (it == node_id.end()) throw IoError("msh element references unknown node");
            t[k] = it->second;
          }
          tets.push_back(t);
        }
      }
    }
    if (!in) throw IoError("malformed msh file: " + path);
  }
  return from_data(std::move(verts), std::move(tets));
}

TetLocator::TetLocator(std::shared_ptr<const TetMesh> mesh) : mesh_(std::move(mesh)) {
  std::vector<Aabb> boxes(mesh_->tet_count());
  for (int t = 0; t < mesh_->tet_count(); ++t)
    for (int k = 0; k < 4; ++k) boxes[t].extend(mesh_->vertices[mesh_->tets[t][k]]);
  bvh_.build(std::move(boxes));
}

int TetLocator::locate(const Vec3& p, Eigen::Vector4d& bary, double bary_slack) const {
  int best = -1;
  Eigen::Vector4d best_bary;
  bvh_.visit_point(p, [&](int t) {
    const auto& T = mesh_->tets[t];
    const Vec3& a = mesh_->vertices[T[0]];
    Eigen::Matrix3d E;
    E.col(0) = mesh_->vertices[T[1]] - a;
    E.col(1) = mesh_->vertices[T[2]] - a;
    E.col(2) = mesh_->vertices[T[3]] - a;
    Vec3 lam = E.partialPivLu().solve(p - a);
    Eigen::Vector4d b(1.0 - lam.sum(), lam[0], lam[1], lam[2]);
    if (b.minCoeff() >= -bary_slack && (best < 0 || t < best)) {
      best = t;
      best_bary = b;
    }
    return false;  // keep scanning so the lowest index wins
  });
  if (best >= 0) bary = best_bary;
  return best;
}

int TetLocator::nearest_vertex(const Vec3& p) const {
  int best = 0;
  double bd = (mesh_->vertices[0] - p).squaredNorm();
  for (int i = 1; i < mesh_->vertex_count(); ++i) {
    double d = (mesh_->vertices[i] - p).squaredNorm();
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

}  // namespace lamg
