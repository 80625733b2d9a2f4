#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "lamg/boundary_mesh.hpp"
#include "lamg/geom.hpp"
#include "lamg/tet_mesh.hpp"

namespace testsup {

inline std::string tmp_dir(const std::string& name) {
  std::filesystem::path p = std::filesystem::path(LAMG_TEST_TMP_DIR) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

// Solid angle of triangle (a,b,c) seen from p (van Oosterom & Strackee).
inline double solid_angle(const lamg::Vec3& p, const lamg::Vec3& a, const lamg::Vec3& b,
                          const lamg::Vec3& c) {
  lamg::Vec3 u = a - p, v = b - p, w = c - p;
  double lu = u.norm(), lv = v.norm(), lw = w.norm();
  double num = u.cross(v).dot(w);
  double den = lu * lv * lw + u.dot(v) * lw + v.dot(w) * lu + w.dot(u) * lv;
  return 2.0 * std::atan2(num, den);
}

// Generalized winding number; ~1 inside a closed outward surface, ~0 outside.
// Independent of the ray-parity logic under test.
inline double winding_number(const lamg::BoundaryMesh& m, const lamg::Vec3& p) {
  double sum = 0.0;
  for (const auto& t : m.triangles())
    sum += solid_angle(p, m.vertices()[t[0]], m.vertices()[t[1]], m.vertices()[t[2]]);
  return sum / (4.0 * M_PI);
}

// Structured tet mesh of the unit cube: n^3 cells, six path tets each
// (consistent diagonals, hence conforming). Test scaffolding independent of
// the production mesher.
inline lamg::TetMesh structured_cube_mesh(int n) {
  std::vector<lamg::Vec3> verts;
  verts.reserve(static_cast<std::size_t>(n + 1) * (n + 1) * (n + 1));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      for (int k = 0; k <= n; ++k)
        verts.emplace_back(double(i) / n, double(j) / n, double(k) / n);
  auto vid = [n](int i, int j, int k) { return (i * (n + 1) + j) * (n + 1) + k; };

  const std::array<std::array<int, 3>, 6> perms = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  const std::array<bool, 6> odd = {false, true, true, false, false, true};

  std::vector<std::array<int, 4>> tets;
  tets.reserve(static_cast<std::size_t>(n) * n * n * 6);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int p = 0; p < 6; ++p) {
          int c[3] = {i, j, k};
          std::array<int, 4> t;
          t[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            c[perms[p][s]] += 1;
            t[s + 1] = vid(c[0], c[1], c[2]);
          }
          if (odd[p]) std::swap(t[2], t[3]);
          tets.push_back(t);
        }
  return lamg::TetMesh::from_data(std::move(verts), std::move(tets));
}

// Exhaustive closest-point scan with the same lowest-index tie-break the
// indexed query promises.
inline lamg::BoundaryPoint brute_closest(const lamg::BoundaryMesh& m, const lamg::Vec3& p) {
  lamg::BoundaryPoint best;
  best.distance = 1e300;
  for (int t = 0; t < static_cast<int>(m.triangles().size()); ++t) {
    const auto& tr = m.triangles()[t];
    lamg::Vec3 q = lamg::closest_point_on_triangle(p, m.vertices()[tr[0]], m.vertices()[tr[1]],
                                                   m.vertices()[tr[2]]);
    double d = (q - p).norm();
    if (d < best.distance) {
      best.distance = d;
      best.point = q;
      best.triangle = t;
    }
  }
  return best;
}

}  // namespace testsup
