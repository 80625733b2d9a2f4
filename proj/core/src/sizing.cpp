#include "lamg/sizing.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lamg/csv.hpp"
#include "lamg/errors.hpp"

namespace lamg {

Normalization Normalization::fit(const std::vector<double>& sizes) {
  if (sizes.empty()) throw Error("cannot fit a normalization to an empty size set");
  auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  Normalization n;
  n.offset = *lo;
  n.scale = *hi - *lo;
  double mag = std::max({std::abs(*lo), std::abs(*hi), 1e-300});
  if (n.scale <= 1e-12 * mag) {
    n.degenerate = true;
    n.scale = 1.0;
  }
  return n;
}

SizingField reference_field(std::shared_ptr<const TetMesh> mesh,
                            const std::vector<Vec3>& points, std::vector<int>* skipped) {
  TetLocator loc(mesh);
  SizingField f;
  f.points.reserve(points.size());
  f.sizes.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    Eigen::Vector4d bary;
    int t = loc.locate(points[i], bary);
    if (t < 0) {
      if (skipped) skipped->push_back(static_cast<int>(i));
      continue;
    }
    f.points.push_back(points[i]);
    f.sizes.push_back(ideal_edge_from_volume(mesh->volumes[t]));
  }
  return f;
}

SizingField reference_field(const TetMesh& mesh, const std::vector<Vec3>& points,
                            std::vector<int>* skipped) {
  return reference_field(std::make_shared<const TetMesh>(mesh), points, skipped);
}

SizingField normalize(const SizingField& f, const Normalization& norm) {
  if (f.normalized) throw Error("sizing field is already normalized");
  SizingField out = f;
  for (double& s : out.sizes) s = norm.to_unit(s);
  out.normalized = true;
  out.norm = norm;
  return out;
}

SizingField denormalize(const SizingField& f) {
  if (!f.normalized) throw Error("sizing field is not normalized");
  SizingField out = f;
  for (double& s : out.sizes) s = f.norm.from_unit(s);
  out.normalized = false;
  out.norm = Normalization{};
  return out;
}

SizingField scale_field(const SizingField& f, double eta) {
  if (f.normalized) throw Error("scale applies to physical sizes; denormalize first");
  if (!(eta > 0.0)) throw Error("eta must be positive");
  SizingField out = f;
  for (double& s : out.sizes) s *= eta;
  return out;
}

SizeInterpolator::SizeInterpolator(const SizingField& field, int k)
    : sizes_(field.sizes), k_(k) {
  if (field.size() == 0) throw Error("empty sizing field");
  if (k_ < 1) throw Error("interpolation needs k >= 1");
  tree_.build(field.points);
  min_size_ = *std::min_element(sizes_.begin(), sizes_.end());
}

double SizeInterpolator::operator()(const Vec3& p) const {
  auto nb = tree_.knn(p, k_);
  double wsum = 0.0, vsum = 0.0;
  for (int i : nb) {
    double d2 = (tree_.points()[i] - p).squaredNorm();
    if (d2 == 0.0) return sizes_[i];  // exact sample hit
    double w = 1.0 / d2;
    wsum += w;
    vsum += w * sizes_[i];
  }
  return vsum / wsum;
}

void SizingField::save_csv(const std::string& path) const {
  CsvWriter w(path, "x,y,z,s");
  for (std::size_t i = 0; i < points.size(); ++i) {
    w.field(points[i][0]);
    w.field(points[i][1]);
    w.field(points[i][2]);
    w.field(sizes[i]);
    w.end_row();
  }
}

SizingField SizingField::load_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int cx = t.column("x"), cy = t.column("y"), cz = t.column("z"), cs = t.column("s");
  SizingField f;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    f.points.emplace_back(t.num(r, cx), t.num(r, cy), t.num(r, cz));
    f.sizes.push_back(t.num(r, cs));
  }
  return f;
}

void save_pos(const SizingField& f, const std::string& path, const std::string& view_name) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "View \"" << view_name << "\" {\n";
  for (std::size_t i = 0; i < f.points.size(); ++i)
    out << "SP(" << fmt_g17(f.points[i][0]) << "," << fmt_g17(f.points[i][1]) << ","
        << fmt_g17(f.points[i][2]) << "){" << fmt_g17(f.sizes[i]) << "};\n";
  out << "};\n";
}

SizingField load_pos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  SizingField f;
  std::string line;
  while (std::getline(in, line)) {
    auto sp = line.find("SP(");
    if (sp == std::string::npos) continue;
    double x, y, z, s;
    if (std::sscanf(line.c_str() + sp, "SP(%lf,%lf,%lf){%lf};", &x, &y, &z, &s) != 4)
      throw IoError("malformed SP record in " + path);
    f.points.emplace_back(x, y, z);
    f.sizes.push_back(s);
  }
  if (f.points.empty()) throw IoError("no SP records in " + path);
  return f;
}

}  // namespace lamg
