#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lamg {

using Vec3 = Eigen::Vector3d;

struct Aabb {
  Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
          std::numeric_limits<double>::max()};
  Vec3 hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
          std::numeric_limits<double>::lowest()};

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extents() const { return hi - lo; }
  double diagonal() const { return (hi - lo).norm(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }

  double sq_distance(const Vec3& p) const {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
      double v = std::max({lo[a] - p[a], 0.0, p[a] - hi[a]});
      d += v * v;
    }
    return d;
  }

  // Slab test over the parameter range [t0, t1] of p + t*d.
  bool intersects_ray(const Vec3& p, const Vec3& d, double t0, double t1) const {
    for (int a = 0; a < 3; ++a) {
      double inv = 1.0 / d[a];
      double ta = (lo[a] - p[a]) * inv;
      double tb = (hi[a] - p[a]) * inv;
      if (inv < 0.0) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }
};

// Ericson's region walk; exact at vertices and edges.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

struct RayHit {
  double t = 0.0;
  // Set when the hit is too close to an edge or too shallow to trust for
  // parity counting; the caster should retry with a fresh direction.
  bool suspicious = false;
};

// Moller-Trumbore with one-sided suspicion margins expressed relative to the
// triangle scale. Returns hits with t in (0, inf).
inline bool ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b,
                         const Vec3& c, RayHit& hit, double bary_eps = 1e-9) {
  Vec3 e1 = b - a, e2 = c - a;
  Vec3 pv = dir.cross(e2);
  double det = e1.dot(pv);
  double scale = e1.norm() * e2.norm();
  if (std::abs(det) <= 1e-14 * scale) return false;
  double inv = 1.0 / det;
  Vec3 tv = orig - a;
  double u = tv.dot(pv) * inv;
  if (u < -bary_eps || u > 1.0 + bary_eps) return false;
  Vec3 qv = tv.cross(e1);
  double v = dir.dot(qv) * inv;
  if (v < -bary_eps || u + v > 1.0 + bary_eps) return false;
  double t = e2.dot(qv) * inv;
  if (t <= 0.0) return false;
  hit.t = t;
  double w = 1.0 - u - v;
  double margin = 1e-7;
  hit.suspicious = u < margin || v < margin || w < margin ||
                   std::abs(det) <= 1e-10 * scale;
  return true;
}

inline double tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace lamg
