#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lamg/kdtree.hpp"
#include "lamg/tet_mesh.hpp"

namespace lamg {

// Edge length of the regular tet with the given volume: cbrt(6 sqrt(2) v).
inline double ideal_edge_from_volume(double volume) {
  return std::cbrt(6.0 * std::sqrt(2.0) * volume);
}

// Affine map between physical sizes and the unit interval. A (near-)constant
// input range is flagged degenerate and maps to 0.5.
struct Normalization {
  double offset = 0.0;
  double scale = 1.0;
  bool degenerate = false;

  static Normalization fit(const std::vector<double>& sizes);
  double to_unit(double s) const { return degenerate ? 0.5 : (s - offset) / scale; }
  double from_unit(double t) const { return degenerate ? offset : offset + t * scale; }
};

// Scattered target edge lengths. `normalized` tells whether sizes live in
// [0,1] (with `norm` holding the transform back to physical units).
struct SizingField {
  std::vector<Vec3> points;
  std::vector<double> sizes;
  bool normalized = false;
  Normalization norm;

  std::size_t size() const { return points.size(); }
  void save_csv(const std::string& path) const;  // x,y,z,s
  static SizingField load_csv(const std::string& path);
};

// Ideal edge length at each point, read off the containing tet of `mesh`.
// Points outside every tet are recorded in `skipped` and omitted.
SizingField reference_field(std::shared_ptr<const TetMesh> mesh,
                            const std::vector<Vec3>& points,
                            std::vector<int>* skipped = nullptr);
SizingField reference_field(const TetMesh& mesh, const std::vector<Vec3>& points,
                            std::vector<int>* skipped = nullptr);

SizingField normalize(const SizingField& f, const Normalization& norm);
SizingField denormalize(const SizingField& f);
// Multiplies physical sizes by eta (the accuracy/cost dial).
SizingField scale_field(const SizingField& f, double eta);

// Shepard inverse-distance-squared interpolation over the k nearest samples.
class SizeInterpolator {
 public:
  explicit SizeInterpolator(const SizingField& field, int k = 8);
  double operator()(const Vec3& p) const;
  double min_size() const { return min_size_; }

 private:
  KdTree tree_;
  std::vector<double> sizes_;
  int k_;
  double min_size_ = 0.0;
};

// gmsh post-processing view with one scalar point per sample, usable as a
// background sizing field.
void save_pos(const SizingField& f, const std::string& path,
              const std::string& view_name = "sizing");
SizingField load_pos(const std::string& path);

}  // namespace lamg
