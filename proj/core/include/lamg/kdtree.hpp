#pragma once

#include <algorithm>
#include <vector>

#include "lamg/geom.hpp"

namespace lamg {

// Static kd-tree over a copied point set. Neighbor queries order candidates
// by (squared distance, index), so equidistant ties resolve to the lowest
// index regardless of tree shape.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3> pts) { build(std::move(pts)); }

  void build(std::vector<Vec3> pts) {
    pts_ = std::move(pts);
    order_.resize(pts_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    nodes_.clear();
    nodes_.reserve(pts_.size());
    if (!pts_.empty()) root_ = build_rec(0, static_cast<int>(pts_.size()));
  }

  std::size_t size() const { return pts_.size(); }
  const std::vector<Vec3>& points() const { return pts_; }

  // Indices of the k nearest points, ascending by (distance^2, index).
  std::vector<int> knn(const Vec3& q, int k) const {
    Best best;
    best.cap = std::min<std::size_t>(k, pts_.size());
    if (best.cap > 0 && root_ >= 0) knn_rec(root_, q, best);
    std::sort(best.heap.begin(), best.heap.end());
    std::vector<int> out;
    out.reserve(best.heap.size());
    for (const auto& e : best.heap) out.push_back(e.second);
    return out;
  }

 private:
  struct Node {
    int axis = 0;
    int point = -1;
    int left = -1, right = -1;
  };
  using Entry = std::pair<double, int>;  // (d^2, index)

  struct Best {
    std::vector<Entry> heap;  // max-heap on (d^2, index)
    std::size_t cap = 0;
    bool full() const { return heap.size() == cap; }
    double worst() const { return heap.front().first; }
    void offer(const Entry& e) {
      if (!full()) {
        heap.push_back(e);
        std::push_heap(heap.begin(), heap.end());
      } else if (e < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = e;
        std::push_heap(heap.begin(), heap.end());
      }
    }
  };

  int build_rec(int lo, int hi) {
    if (lo >= hi) return -1;
    Aabb box;
    for (int i = lo; i < hi; ++i) box.extend(pts_[order_[i]]);
    Vec3 ext = box.extents();
    int axis = 0;
    if (ext[1] > ext[axis]) axis = 1;
    if (ext[2] > ext[axis]) axis = 2;
    int mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](int a, int b) {
                       return pts_[a][axis] < pts_[b][axis] ||
                              (pts_[a][axis] == pts_[b][axis] && a < b);
                     });
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back({axis, order_[mid], -1, -1});
    int l = build_rec(lo, mid);
    int r = build_rec(mid + 1, hi);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void knn_rec(int n, const Vec3& q, Best& best) const {
    const Node& node = nodes_[n];
    const Vec3& p = pts_[node.point];
    best.offer({(p - q).squaredNorm(), node.point});
    double diff = q[node.axis] - p[node.axis];
    int near = diff < 0.0 ? node.left : node.right;
    int far = diff < 0.0 ? node.right : node.left;
    if (near >= 0) knn_rec(near, q, best);
    // Equal plane distance can still hide a lower-index tie, hence <=.
    if (far >= 0 && (!best.full() || diff * diff <= best.worst())) knn_rec(far, q, best);
  }

  std::vector<Vec3> pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace lamg
