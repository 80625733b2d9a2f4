#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "lamg/boundary_mesh.hpp"
#include "lamg/csv.hpp"
#include "lamg/errors.hpp"

namespace lamg {

namespace {

// "7//3" or "7/2/3" or "7" -> 7
int obj_vertex_ref(const std::string& token, int vertex_count) {
  std::size_t slash = token.find('/');
  int idx = std::stoi(slash == std::string::npos ? token : token.substr(0, slash));
  if (idx < 0) idx = vertex_count + idx + 1;  // negative refs count from the end
  if (idx < 1 || idx > vertex_count) throw InvalidMesh("obj face index out of range");
  return idx - 1;
}

}  // namespace

BoundaryMesh BoundaryMesh::load(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == "obj") return load_obj(path);
  if (ext == "stl") return load_stl(path);
  throw IoError("unsupported surface format: " + path);
}

BoundaryMesh BoundaryMesh::load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw InvalidMesh("malformed obj vertex line");
      verts.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string tok;
      while (ss >> tok) face.push_back(obj_vertex_ref(tok, static_cast<int>(verts.size())));
      if (face.size() != 3)
        throw InvalidMesh("obj face with " + std::to_string(face.size()) +
                          " vertices; only triangles are accepted");
      tris.push_back({face[0], face[1], face[2]});
    }
  }
  return from_data(std::move(verts), std::move(tris));
}

void BoundaryMesh::save_obj(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& v : verts_)
    out << "v " << fmt_g17(v[0]) << " " << fmt_g17(v[1]) << " " << fmt_g17(v[2]) << "\n";
  for (const auto& t : tris_)
    out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
}

BoundaryMesh BoundaryMesh::load_stl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char header[80];
  in.read(header, 80);
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  if (!in) throw InvalidMesh("truncated stl header");

  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  tris.reserve(count);
  // Weld on exact float bits: identical corners in the file become one vertex.
  std::map<std::tuple<float, float, float>, int> weld;
  for (std::uint32_t t = 0; t < count; ++t) {
    float rec[12];
    in.read(reinterpret_cast<char*>(rec), 48);
    char attr[2];
    in.read(attr, 2);
    if (!in) throw InvalidMesh("truncated stl record");
    std::array<int, 3> tri;
    for (int k = 0; k < 3; ++k) {
      float x = rec[3 + 3 * k], y = rec[4 + 3 * k], z = rec[5 + 3 * k];
      auto key = std::make_tuple(x, y, z);
      auto it = weld.find(key);
      if (it == weld.end()) {
        it = weld.emplace(key, static_cast<int>(verts.size())).first;
        verts.emplace_back(x, y, z);
      }
      tri[k] = it->second;
    }
    tris.push_back(tri);
  }
  return from_data(std::move(verts), std::move(tris));
}

}  // namespace lamg
