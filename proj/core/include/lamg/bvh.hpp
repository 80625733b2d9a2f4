#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "lamg/geom.hpp"

namespace lamg {

namespace bvh_detail {

struct Node {
  Aabb box;
  int left = -1;   // internal: child node ids
  int right = -1;
  int start = 0;   // leaf: range into the item index array
  int count = 0;
  bool leaf() const { return count > 0; }
};

// Median split on the widest centroid axis; ties resolved by item index so
// construction is deterministic for a given input order.
inline int build_nodes(std::vector<Node>& nodes, std::vector<int>& items,
                       const std::vector<Aabb>& boxes, int start, int count, int leaf_size) {
  Node node;
  for (int i = start; i < start + count; ++i) node.box.extend(boxes[items[i]]);
  int id = static_cast<int>(nodes.size());
  nodes.push_back(node);
  if (count <= leaf_size) {
    nodes[id].start = start;
    nodes[id].count = count;
    return id;
  }
  Aabb cb;
  for (int i = start; i < start + count; ++i) cb.extend(boxes[items[i]].center());
  int axis = 0;
  Vec3 ext = cb.extents();
  if (ext[1] > ext[axis]) axis = 1;
  if (ext[2] > ext[axis]) axis = 2;
  int mid = start + count / 2;
  std::nth_element(items.begin() + start, items.begin() + mid, items.begin() + start + count,
                   [&](int a, int b) {
                     double ca = boxes[a].center()[axis], cb2 = boxes[b].center()[axis];
                     return ca < cb2 || (ca == cb2 && a < b);
                   });
  int l = build_nodes(nodes, items, boxes, start, mid - start, leaf_size);
  int r = build_nodes(nodes, items, boxes, mid, start + count - mid, leaf_size);
  nodes[id].left = l;
  nodes[id].right = r;
  return id;
}

}  // namespace bvh_detail

// AABB tree over triangles of an indexed surface. Below a small triangle
// count queries brute-force the whole list, which is faster than traversal.
class TriBvh {
 public:
  TriBvh() = default;

  void build(const std::vector<Vec3>& vertices, const std::vector<std::array<int, 3>>& tris,
             int leaf_size = 4) {
    verts_ = &vertices;
    tris_ = &tris;
    leaf_size_ = leaf_size;
    nodes_.clear();
    items_.resize(tris.size());
    std::iota(items_.begin(), items_.end(), 0);
    if (tris.empty()) return;
    std::vector<Aabb> boxes(tris.size());
    for (std::size_t t = 0; t < tris.size(); ++t)
      for (int k = 0; k < 3; ++k) boxes[t].extend(vertices[tris[t][k]]);
    nodes_.reserve(2 * tris.size());
    bvh_detail::build_nodes(nodes_, items_, boxes, 0, static_cast<int>(tris.size()),
                            leaf_size_);
  }

  struct Closest {
    double distance = std::numeric_limits<double>::max();
    Vec3 point{0, 0, 0};
    int triangle = -1;
  };

  // Nearest surface point; equidistant candidates resolve to the lowest
  // triangle index so results do not depend on tree shape.
  Closest closest(const Vec3& p) const {
    Closest best;
    if (tris_->size() <= kBruteForce) {
      for (int t = 0; t < static_cast<int>(tris_->size()); ++t) consider(p, t, best);
      return best;
    }
    closest_rec(0, p, best);
    return best;
  }

  // Number of ray crossings with t > 0. Sets `suspicious` when any hit was
  // near an edge or grazing, in which case parity cannot be trusted.
  int count_crossings(const Vec3& orig, const Vec3& dir, bool& suspicious) const {
    int count = 0;
    suspicious = false;
    if (tris_->size() <= kBruteForce) {
      for (int t = 0; t < static_cast<int>(tris_->size()); ++t)
        count += crossing(orig, dir, t, suspicious);
      return count;
    }
    count_rec(0, orig, dir, count, suspicious);
    return count;
  }

  // True if the open segment (a, b) meets any triangle. `pad` widens the
  // barycentric test so near-misses at triangle seams still count as hits.
  bool segment_hits(const Vec3& a, const Vec3& b, double pad = 1e-9) const {
    Vec3 d = b - a;
    double len = d.norm();
    if (len == 0.0) return false;
    bool hit = false;
    if (tris_->size() <= kBruteForce) {
      for (int t = 0; t < static_cast<int>(tris_->size()) && !hit; ++t)
        hit = segment_tri(a, d, len, t, pad);
      return hit;
    }
    segment_rec(0, a, d, len, pad, hit);
    return hit;
  }

  // Smallest positive parameter t in (0, 1] where a + t*(b-a) meets the
  // surface; negative when there is no hit.
  double first_segment_hit(const Vec3& a, const Vec3& b) const {
    Vec3 d = b - a;
    double len = d.norm();
    if (len == 0.0) return -1.0;
    double best = std::numeric_limits<double>::max();
    if (tris_->size() <= kBruteForce) {
      for (int t = 0; t < static_cast<int>(tris_->size()); ++t)
        first_hit_tri(a, d, t, best);
    } else {
      first_rec(0, a, d, len, best);
    }
    return best <= 1.0 ? best : -1.0;
  }

  std::size_t node_count() const { return nodes_.size(); }

  // The tree stores indices only; owners that relocate their vertex storage
  // (copies, moves) must re-point it here.
  void rebind(const std::vector<Vec3>& vertices, const std::vector<std::array<int, 3>>& tris) {
    verts_ = &vertices;
    tris_ = &tris;
  }

 private:
  static constexpr std::size_t kBruteForce = 16;

  void consider(const Vec3& p, int t, Closest& best) const {
    const auto& tr = (*tris_)[t];
    Vec3 q = closest_point_on_triangle(p, (*verts_)[tr[0]], (*verts_)[tr[1]], (*verts_)[tr[2]]);
    double d = (q - p).norm();
    if (d < best.distance || (d == best.distance && t < best.triangle)) {
      best.distance = d;
      best.point = q;
      best.triangle = t;
    }
  }

  void closest_rec(int n, const Vec3& p, Closest& best) const {
    const auto& node = nodes_[n];
    if (node.leaf()) {
      for (int i = node.start; i < node.start + node.count; ++i) consider(p, items_[i], best);
      return;
    }
    double dl = nodes_[node.left].box.sq_distance(p);
    double dr = nodes_[node.right].box.sq_distance(p);
    int first = node.left, second = node.right;
    if (dr < dl) {
      std::swap(first, second);
      std::swap(dl, dr);
    }
    // <= keeps equidistant subtrees visitable so the index tie-break stays
    // independent of tree layout.
    if (dl <= best.distance * best.distance) closest_rec(first, p, best);
    if (dr <= best.distance * best.distance) closest_rec(second, p, best);
  }

  int crossing(const Vec3& orig, const Vec3& dir, int t, bool& suspicious) const {
    const auto& tr = (*tris_)[t];
    RayHit h;
    if (!ray_triangle(orig, dir, (*verts_)[tr[0]], (*verts_)[tr[1]], (*verts_)[tr[2]], h))
      return 0;
    if (h.suspicious) suspicious = true;
    return 1;
  }

  void count_rec(int n, const Vec3& orig, const Vec3& dir, int& count, bool& suspicious) const {
    const auto& node = nodes_[n];
    if (!node.box.intersects_ray(orig, dir, 0.0, std::numeric_limits<double>::max())) return;
    if (node.leaf()) {
      for (int i = node.start; i < node.start + node.count; ++i)
        count += crossing(orig, dir, items_[i], suspicious);
      return;
    }
    count_rec(node.left, orig, dir, count, suspicious);
    count_rec(node.right, orig, dir, count, suspicious);
  }

  bool segment_tri(const Vec3& a, const Vec3& d, double len, int t, double pad) const {
    const auto& tr = (*tris_)[t];
    RayHit h;
    if (!ray_triangle(a, d, (*verts_)[tr[0]], (*verts_)[tr[1]], (*verts_)[tr[2]], h, pad))
      return false;
    return h.t > 0.0 && h.t < 1.0;
  }

  void segment_rec(int n, const Vec3& a, const Vec3& d, double len, double pad,
                   bool& hit) const {
    if (hit) return;
    const auto& node = nodes_[n];
    if (!node.box.intersects_ray(a, d, 0.0, 1.0)) return;
    if (node.leaf()) {
      for (int i = node.start; i < node.start + node.count && !hit; ++i)
        hit = segment_tri(a, d, len, items_[i], pad);
      return;
    }
    segment_rec(node.left, a, d, len, pad, hit);
    segment_rec(node.right, a, d, len, pad, hit);
  }

  void first_hit_tri(const Vec3& a, const Vec3& d, int t, double& best) const {
    const auto& tr = (*tris_)[t];
    RayHit h;
    if (ray_triangle(a, d, (*verts_)[tr[0]], (*verts_)[tr[1]], (*verts_)[tr[2]], h) &&
        h.t < best)
      best = h.t;
  }

  void first_rec(int n, const Vec3& a, const Vec3& d, double len, double& best) const {
    const auto& node = nodes_[n];
    if (!node.box.intersects_ray(a, d, 0.0, std::min(best, 1.0))) return;
    if (node.leaf()) {
      for (int i = node.start; i < node.start + node.count; ++i)
        first_hit_tri(a, d, items_[i], best);
      return;
    }
    first_rec(node.left, a, d, len, best);
    first_rec(node.right, a, d, len, best);
  }

  const std::vector<Vec3>* verts_ = nullptr;
  const std::vector<std::array<int, 3>>* tris_ = nullptr;
  std::vector<bvh_detail::Node> nodes_;
  std::vector<int> items_;
  int leaf_size_ = 4;
};

// AABB tree over arbitrary boxes (used for tet point location).
class BoxBvh {
 public:
  void build(std::vector<Aabb> boxes, int leaf_size = 8) {
    boxes_ = std::move(boxes);
    nodes_.clear();
    items_.resize(boxes_.size());
    std::iota(items_.begin(), items_.end(), 0);
    if (boxes_.empty()) return;
    nodes_.reserve(2 * boxes_.size());
    bvh_detail::build_nodes(nodes_, items_, boxes_, 0, static_cast<int>(boxes_.size()),
                            leaf_size);
  }

  // Calls fn(item) for every box containing p; fn returns true to stop.
  template <typename F>
  void visit_point(const Vec3& p, F&& fn) const {
    if (nodes_.empty()) return;
    visit_rec(0, p, fn);
  }

 private:
  template <typename F>
  bool visit_rec(int n, const Vec3& p, F& fn) const {
    const auto& node = nodes_[n];
    if (node.box.sq_distance(p) > 0.0) return false;
    if (node.leaf()) {
      for (int i = node.start; i < node.start + node.count; ++i) {
        int item = items_[i];
        if (boxes_[item].contains(p) && fn(item)) return true;
      }
      return false;
    }
    return visit_rec(node.left, p, fn) || visit_rec(node.right, p, fn);
  }

  std::vector<Aabb> boxes_;
  std::vector<bvh_detail::Node> nodes_;
  std::vector<int> items_;
};

}  // namespace lamg
