#include "lamg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "lamg/csv.hpp"
#include "lamg/errors.hpp"
#include "lamg/stats.hpp"
#include "lamg/svg_plot.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace lamg {

namespace {

// Substream regions per consumer of randomness, so adding problems or
// stages never shifts the draws of another stage.
constexpr std::uint64_t kShapeProbeStream = 100;      // + shape index
constexpr std::uint64_t kProblemStream = 1000;        // + problem index
constexpr std::uint64_t kGenWosStream = 200000;       // + problem index
constexpr std::uint64_t kInferWosStream = 300000;     // + problem index
constexpr std::uint64_t kWosBaselineStream = 400000;  // + problem index
constexpr std::uint64_t kAmgPointsStream = 500000;    // + problem index
constexpr std::uint64_t kTrainShuffleStream = 600000;
constexpr std::uint64_t kInitStream = 600001;

struct StageTimer {
  std::chrono::steady_clock::time_point last = std::chrono::steady_clock::now();
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last).count();
    last = now;
    return s;
  }
};

void ensure_dir(const std::string& path) { fs::create_directories(path); }

std::string pad4(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return buf;
}

json range_json(const IntRange& r) { return json::array({r.lo, r.hi}); }
json range_json(const RealRange& r) { return json::array({r.lo, r.hi}); }

std::vector<double> values_at_probes(const FemSolution& u, const std::vector<Vec3>& probes) {
  std::vector<double> out;
  out.reserve(probes.size());
  for (const Vec3& p : probes) out.push_back(u.at_or_nearest(p));
  return out;
}

constexpr const char* kRecordHeader =
    "method,problem,shape,tag,n,m,eta,vertices,tets,fem_solves,re_l2,re_linf,"
    "t_mc,t_inference,t_meshing,t_fem,t_total";

}  // namespace

// ---- config ----

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& msg) { throw ConfigError(msg); };
  if (shapes.empty()) bad("config needs at least one shape");
  if (out_dir.empty()) bad("config needs an output directory");
  if (problems < 1) bad("config needs at least one problem");
  if (holdout < 0 || holdout >= problems) bad("holdout must leave training problems");
  auto iok = [](const IntRange& r, int lo_min) { return r.lo >= lo_min && r.hi >= r.lo; };
  auto rok = [](const RealRange& r, double lo_min) { return r.lo >= lo_min && r.hi >= r.lo; };
  if (!iok(gaussians, 1)) bad("gaussians range invalid");
  if (!iok(sources, 0)) bad("sources range invalid");
  if (knn < 1) bad("knn must be positive");
  if (!iok(sample_points, knn + 1)) bad("sample_points range must stay above knn");
  if (!iok(walks, 1)) bad("walks range invalid");
  if (!rok(gaussian_width, 1e-6)) bad("gaussian_width range invalid");
  if (!rok(source_radius, 1e-6)) bad("source_radius range invalid");
  if (gaussian_amplitude.hi < gaussian_amplitude.lo) bad("gaussian_amplitude range invalid");
  if (source_amplitude.hi < source_amplitude.lo) bad("source_amplitude range invalid");
  if (coarse_vertices < 30) bad("coarse_vertices too small");
  if (supervision_budget < coarse_vertices) bad("supervision_budget below the coarse seed");
  if (mark_fraction <= 0.0 || mark_fraction > 1.0) bad("mark_fraction outside (0,1]");
  if (model.empty()) bad("config needs a model preset");
  if (lr <= 0.0) bad("lr must be positive");
  if (epochs < 1) bad("epochs must be positive");
  if (val_fraction < 0.0 || val_fraction > 0.9) bad("val_fraction outside [0, 0.9]");
  if (eta <= 0.0) bad("eta must be positive");
  if (eval_points < knn + 1) bad("eval_points must stay above knn");
  if (eval_walks < 1) bad("eval_walks must be positive");
  if (amr_budget < coarse_vertices) bad("amr_budget below the coarse seed");
  if (wos_points < 1 || wos_points > probes) bad("wos_points outside [1, probes]");
  if (wos_walks < 1) bad("wos_walks must be positive");
  if (uniform_sizes.empty()) bad("uniform_sizes must list at least one size");
  for (double s : uniform_sizes)
    if (s <= 2e-3 || s > 0.25) bad("uniform sizes are diagonal fractions in (0.002, 0.25]");
  if (reference_vertices < 200) bad("reference_vertices too small");
  if (probes < 16) bad("probes too small");
}

void ExperimentConfig::save(const std::string& path) const {
  json j;
  j["shapes"] = shapes;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["problems"] = problems;
  j["holdout"] = holdout;
  j["gaussians"] = range_json(gaussians);
  j["gaussian_amplitude"] = range_json(gaussian_amplitude);
  j["gaussian_width"] = range_json(gaussian_width);
  j["sources"] = range_json(sources);
  j["source_amplitude"] = range_json(source_amplitude);
  j["source_radius"] = range_json(source_radius);
  j["sample_points"] = range_json(sample_points);
  j["walks"] = range_json(walks);
  j["coarse_vertices"] = coarse_vertices;
  j["supervision_budget"] = supervision_budget;
  j["mark_fraction"] = mark_fraction;
  j["model"] = model;
  j["knn"] = knn;
  j["lr"] = lr;
  j["epochs"] = epochs;
  j["val_fraction"] = val_fraction;
  j["eta"] = eta;
  j["eval_points"] = eval_points;
  j["eval_walks"] = eval_walks;
  j["amr_budget"] = amr_budget;
  j["wos_points"] = wos_points;
  j["wos_walks"] = wos_walks;
  j["uniform_sizes"] = uniform_sizes;
  j["reference_vertices"] = reference_vertices;
  j["probes"] = probes;
  j["save_artifacts"] = save_artifacts;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  if (!j.contains("seed")) throw ConfigError("config must pin an explicit seed");
  try {
    auto irange = [&](const char* k, IntRange cur) {
      if (!j.contains(k)) return cur;
      return IntRange{j[k][0].get<int>(), j[k][1].get<int>()};
    };
    auto rrange = [&](const char* k, RealRange cur) {
      if (!j.contains(k)) return cur;
      return RealRange{j[k][0].get<double>(), j[k][1].get<double>()};
    };
    auto get = [&](const char* k, auto cur) {
      if (!j.contains(k)) return cur;
      return j[k].get<decltype(cur)>();
    };
    c.shapes = get("shapes", c.shapes);
    c.out_dir = get("out_dir", c.out_dir);
    c.seed = j["seed"].get<std::uint64_t>();
    c.problems = get("problems", c.problems);
    c.holdout = get("holdout", c.holdout);
    c.gaussians = irange("gaussians", c.gaussians);
    c.gaussian_amplitude = rrange("gaussian_amplitude", c.gaussian_amplitude);
    c.gaussian_width = rrange("gaussian_width", c.gaussian_width);
    c.sources = irange("sources", c.sources);
    c.source_amplitude = rrange("source_amplitude", c.source_amplitude);
    c.source_radius = rrange("source_radius", c.source_radius);
    c.sample_points = irange("sample_points", c.sample_points);
    c.walks = irange("walks", c.walks);
    c.coarse_vertices = get("coarse_vertices", c.coarse_vertices);
    c.supervision_budget = get("supervision_budget", c.supervision_budget);
    c.mark_fraction = get("mark_fraction", c.mark_fraction);
    c.model = get("model", c.model);
    c.knn = get("knn", c.knn);
    c.lr = get("lr", c.lr);
    c.epochs = get("epochs", c.epochs);
    c.val_fraction = get("val_fraction", c.val_fraction);
    c.eta = get("eta", c.eta);
    c.eval_points = get("eval_points", c.eval_points);
    c.eval_walks = get("eval_walks", c.eval_walks);
    c.amr_budget = get("amr_budget", c.amr_budget);
    c.wos_points = get("wos_points", c.wos_points);
    c.wos_walks = get("wos_walks", c.wos_walks);
    c.uniform_sizes = get("uniform_sizes", c.uniform_sizes);
    c.reference_vertices = get("reference_vertices", c.reference_vertices);
    c.probes = get("probes", c.probes);
    c.save_artifacts = get("save_artifacts", c.save_artifacts);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- problem spec ----

void ProblemSpec::save(const std::string& path) const {
  json j;
  j["index"] = index;
  j["shape"] = shape;
  j["n"] = n;
  j["m"] = m;
  json gs = json::array();
  for (const auto& g : bc.gaussians)
    gs.push_back({{"center", {g.center.x(), g.center.y(), g.center.z()}},
                  {"amplitude", g.amplitude},
                  {"width", g.width}});
  j["gaussians"] = gs;
  json sp = json::array();
  for (const auto& s : source.spheres)
    sp.push_back({{"center", {s.center.x(), s.center.y(), s.center.z()}},
                  {"radius", s.radius},
                  {"amplitude", s.amplitude}});
  j["spheres"] = sp;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

ProblemSpec ProblemSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open problem: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError(std::string("problem parse error: ") + e.what());
  }
  ProblemSpec s;
  s.index = j.at("index").get<int>();
  s.shape = j.at("shape").get<int>();
  s.n = j.at("n").get<int>();
  s.m = j.at("m").get<int>();
  for (const auto& g : j.at("gaussians")) {
    BoundaryGaussian bg;
    bg.center = Vec3(g.at("center")[0], g.at("center")[1], g.at("center")[2]);
    bg.amplitude = g.at("amplitude").get<double>();
    bg.width = g.at("width").get<double>();
    s.bc.gaussians.push_back(bg);
  }
  for (const auto& b : j.at("spheres")) {
    SourceSphere sp;
    sp.center = Vec3(b.at("center")[0], b.at("center")[1], b.at("center")[2]);
    sp.radius = b.at("radius").get<double>();
    sp.amplitude = b.at("amplitude").get<double>();
    s.source.spheres.push_back(sp);
  }
  return s;
}

// ---- run records ----

void save_records(const std::string& path, const std::vector<RunRecord>& records) {
  CsvWriter w(path, kRecordHeader);
  for (const auto& r : records) {
    w.field(r.method);
    w.field(r.problem);
    w.field(r.shape);
    w.field(r.tag);
    w.field(r.n);
    w.field(r.m);
    w.field(r.eta);
    w.field(r.vertices);
    w.field(r.tets);
    w.field(r.fem_solves);
    w.field(r.re_l2);
    w.field(r.re_linf);
    w.field(r.t_mc);
    w.field(r.t_inference);
    w.field(r.t_meshing);
    w.field(r.t_fem);
    w.field(r.total());
    w.end_row();
  }
}

std::vector<RunRecord> load_records(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int c_method = t.column("method"), c_problem = t.column("problem");
  const int c_shape = t.column("shape"), c_tag = t.column("tag");
  const int c_n = t.column("n"), c_m = t.column("m"), c_eta = t.column("eta");
  const int c_v = t.column("vertices"), c_t = t.column("tets");
  const int c_solves = t.column("fem_solves");
  const int c_l2 = t.column("re_l2"), c_linf = t.column("re_linf");
  const int c_mc = t.column("t_mc"), c_inf = t.column("t_inference");
  const int c_mesh = t.column("t_meshing"), c_fem = t.column("t_fem");
  std::vector<RunRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    RunRecord rec;
    rec.method = t.rows[r][c_method];
    rec.problem = static_cast<int>(t.num(r, c_problem));
    rec.shape = t.rows[r][c_shape];
    rec.tag = t.rows[r][c_tag];
    rec.n = static_cast<int>(t.num(r, c_n));
    rec.m = static_cast<int>(t.num(r, c_m));
    rec.eta = t.num(r, c_eta);
    rec.vertices = static_cast<int>(t.num(r, c_v));
    rec.tets = static_cast<int>(t.num(r, c_t));
    rec.fem_solves = static_cast<int>(t.num(r, c_solves));
    rec.re_l2 = t.num(r, c_l2);
    rec.re_linf = t.num(r, c_linf);
    rec.t_mc = t.num(r, c_mc);
    rec.t_inference = t.num(r, c_inf);
    rec.t_meshing = t.num(r, c_mesh);
    rec.t_fem = t.num(r, c_fem);
    out.push_back(std::move(rec));
  }
  return out;
}

std::string records_without_timings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  std::vector<int> keep;
  std::ostringstream out;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i].rfind("t_", 0) != 0) keep.push_back(static_cast<int>(i));
      first = false;
    }
    bool lead = true;
    for (int i : keep) {
      if (!lead) out << ",";
      out << (i < static_cast<int>(cells.size()) ? cells[i] : "");
      lead = false;
    }
    out << "\n";
  }
  return out.str();
}

// ---- vertex-targeted uniform meshing ----

TetMesh mesh_with_vertex_target(const BoundaryMesh& domain, int target_vertices) {
  if (target_vertices < 30) throw ConfigError("vertex target too small");
  // interior vertex density is about 2 per cell of volume s^3
  double size = std::cbrt(2.0 * domain.volume() / static_cast<double>(target_vertices));
  const double floor = domain.bbox_diagonal() * 2e-3;
  TetMesh best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 8; ++it) {
    size = std::max(size, floor);
    TetMesh m = mesh_uniform(domain, size);
    const double ratio = m.vertex_count() / static_cast<double>(target_vertices);
    const double err = std::abs(std::log(ratio));
    if (err < best_err) {
      best_err = err;
      best = std::move(m);
    }
    if (best_err < std::log(1.15)) break;
    if (size == floor && ratio < 1.0) break;  // cannot refine further
    size *= std::cbrt(ratio);
  }
  return best;
}

// ---- experiment ----

Experiment::Experiment(ExperimentConfig cfg, std::ostream* log) : cfg_(std::move(cfg)), log_(log) {
  cfg_.validate();
}

void Experiment::log(const std::string& line) const {
  if (log_) *log_ << line << "\n" << std::flush;
}

std::string Experiment::shape_dir(int shape_idx) const {
  return cfg_.out_dir + "/shapes/s" + std::to_string(shape_idx);
}
std::string Experiment::problem_dir(int problem) const {
  return cfg_.out_dir + "/problems/p" + pad4(problem);
}
std::string Experiment::runs_dir() const { return cfg_.out_dir + "/runs"; }
std::string Experiment::report_dir() const { return cfg_.out_dir + "/report"; }
std::string Experiment::model_path() const { return cfg_.out_dir + "/model/model.bin"; }

std::string Experiment::run_path(const std::string& method, int problem,
                                 const std::string& tag) const {
  std::string name = method + "_p" + pad4(problem);
  if (!tag.empty()) name += "_" + tag;
  return runs_dir() + "/" + name + ".csv";
}

std::vector<int> Experiment::holdout_problems() const {
  std::vector<int> out;
  for (int i = train_count(); i < cfg_.problems; ++i) out.push_back(i);
  return out;
}

std::shared_ptr<const BoundaryMesh> Experiment::shape_ptr(int shape_idx) {
  if (shape_idx < 0 || shape_idx >= static_cast<int>(cfg_.shapes.size()))
    throw ConfigError("shape index out of range");
  auto it = shapes_.find(shape_idx);
  if (it == shapes_.end()) {
    auto mesh = std::make_shared<const BoundaryMesh>(resolve_shape(cfg_.shapes[shape_idx]));
    it = shapes_.emplace(shape_idx, std::move(mesh)).first;
  }
  return it->second;
}

const BoundaryMesh& Experiment::shape(int shape_idx) { return *shape_ptr(shape_idx); }

ProblemSpec Experiment::problem(int idx) const {
  return ProblemSpec::load(problem_dir(idx) + "/problem.json");
}

PoissonProblem Experiment::poisson(const ProblemSpec& spec) {
  PoissonProblem prob;
  prob.domain = shape_ptr(spec.shape);
  prob.bc = spec.bc;
  prob.source = spec.source;
  return prob;
}

const std::vector<Vec3>& Experiment::probes(int shape_idx) {
  auto it = probes_.find(shape_idx);
  if (it != probes_.end()) return it->second;
  const std::string path = shape_dir(shape_idx) + "/probes.csv";
  std::vector<Vec3> pts;
  if (fs::exists(path)) {
    const CsvTable t = read_csv(path);
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      pts.emplace_back(t.num(r, 0), t.num(r, 1), t.num(r, 2));
  } else {
    Rng rng = Rng(cfg_.seed).substream(kShapeProbeStream + shape_idx);
    pts = shape(shape_idx).sample_interior(cfg_.probes, rng);
    ensure_dir(shape_dir(shape_idx));
    CsvWriter w(path, "x,y,z");
    for (const Vec3& p : pts) {
      w.field(p.x());
      w.field(p.y());
      w.field(p.z());
      w.end_row();
    }
  }
  if (static_cast<int>(pts.size()) != cfg_.probes)
    throw IoError("probe count mismatch at " + path);
  return probes_[shape_idx] = std::move(pts);
}

std::shared_ptr<const TetMesh> Experiment::coarse_mesh(int shape_idx) {
  auto it = coarse_.find(shape_idx);
  if (it != coarse_.end()) return it->second;
  const std::string path = shape_dir(shape_idx) + "/coarse.tet";
  TetMesh m;
  if (fs::exists(path)) {
    m = TetMesh::load(path);
  } else {
    m = mesh_with_vertex_target(shape(shape_idx), cfg_.coarse_vertices);
    ensure_dir(shape_dir(shape_idx));
    m.save(path);
  }
  return coarse_[shape_idx] = std::make_shared<const TetMesh>(std::move(m));
}

std::shared_ptr<const TetMesh> Experiment::reference_mesh(int shape_idx) {
  auto it = reference_.find(shape_idx);
  if (it != reference_.end()) return it->second;
  const std::string path = shape_dir(shape_idx) + "/reference.tet";
  TetMesh m;
  if (fs::exists(path)) {
    m = TetMesh::load(path);
  } else {
    m = mesh_with_vertex_target(shape(shape_idx), cfg_.reference_vertices);
    ensure_dir(shape_dir(shape_idx));
    m.save(path);
  }
  return reference_[shape_idx] = std::make_shared<const TetMesh>(std::move(m));
}

const std::vector<double>& Experiment::reference_values(int problem_idx) {
  auto it = ref_values_.find(problem_idx);
  if (it != ref_values_.end()) return it->second;
  const ProblemSpec spec = problem(problem_idx);
  const std::string path = problem_dir(problem_idx) + "/reference_u.csv";
  std::vector<double> vals;
  if (fs::exists(path)) {
    const CsvTable t = read_csv(path);
    vals.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) vals.push_back(t.num(r, 0));
  } else {
    PoissonProblem prob = poisson(spec);
    const FemSolution u = solve(assemble(reference_mesh(spec.shape), prob));
    vals = values_at_probes(u, probes(spec.shape));
    ensure_dir(problem_dir(problem_idx));
    CsvWriter w(path, "u");
    for (double v : vals) {
      w.field(v);
      w.end_row();
    }
    log("[ref] problem " + std::to_string(problem_idx) + ": reference solved at " +
        std::to_string(reference_mesh(spec.shape)->vertex_count()) + " vertices");
  }
  if (vals.size() != probes(spec.shape).size())
    throw IoError("reference length mismatch at " + path);
  return ref_values_[problem_idx] = std::move(vals);
}

const ModelBundle& Experiment::model() {
  if (!model_) model_ = ModelBundle::load(model_path());
  return *model_;
}

double Experiment::probe_re(const std::vector<double>& u, int problem_idx, ErrorNorm norm) {
  return relative_error(u, reference_values(problem_idx), norm);
}

// ---- corpus generation ----

ProblemSpec Experiment::sample_problem(int index) {
  ProblemSpec spec;
  spec.index = index;
  spec.shape = index % static_cast<int>(cfg_.shapes.size());
  const BoundaryMesh& dom = shape(spec.shape);
  const double diag = dom.bbox_diagonal();
  Rng rng = Rng(cfg_.seed).substream(kProblemStream + static_cast<std::uint64_t>(index));

  const int ng = cfg_.gaussians.sample(rng);
  for (int g = 0; g < ng; ++g) {
    BoundaryGaussian bg;
    const Vec3 raw(rng.uniform(dom.bbox().lo.x(), dom.bbox().hi.x()),
                   rng.uniform(dom.bbox().lo.y(), dom.bbox().hi.y()),
                   rng.uniform(dom.bbox().lo.z(), dom.bbox().hi.z()));
    bg.center = dom.project_to_boundary(raw);
    bg.amplitude = cfg_.gaussian_amplitude.sample(rng);
    bg.width = cfg_.gaussian_width.sample(rng) * diag;
    spec.bc.gaussians.push_back(bg);
  }
  const int ns = cfg_.sources.sample(rng);
  const std::vector<Vec3> centers = dom.sample_interior(ns, rng);
  for (int s = 0; s < ns; ++s) {
    SourceSphere sp;
    sp.center = centers[s];
    sp.radius = cfg_.source_radius.sample(rng) * diag;
    sp.amplitude = cfg_.source_amplitude.sample(rng);
    spec.source.spheres.push_back(sp);
  }
  spec.n = cfg_.sample_points.sample(rng);
  spec.m = cfg_.walks.sample(rng);
  return spec;
}

void Experiment::gen_shape(int shape_idx) {
  ensure_dir(shape_dir(shape_idx));
  shape(shape_idx).save_obj(shape_dir(shape_idx) + "/surface.obj");
  probes(shape_idx);
  const auto coarse = coarse_mesh(shape_idx);
  const auto ref = reference_mesh(shape_idx);
  log("[gen] shape " + cfg_.shapes[shape_idx] + ": coarse " +
      std::to_string(coarse->vertex_count()) + " vertices, reference " +
      std::to_string(ref->vertex_count()) + " vertices");
}

void Experiment::gen_problem(int index) {
  ProblemSpec spec = sample_problem(index);
  PoissonProblem prob = poisson(spec);
  ensure_dir(problem_dir(index));

  WosConfig wcfg;
  wcfg.walks_per_point = spec.m;
  SampleSet samples =
      wos_solve_sparse(prob, spec.n, wcfg, Rng(cfg_.seed).substream(kGenWosStream + index));

  AmrConfig acfg;
  acfg.mark_fraction = cfg_.mark_fraction;
  acfg.vertex_budget = cfg_.supervision_budget;
  const AmrResult sup = amr_loop(prob, coarse_mesh(spec.shape), acfg);

  std::vector<int> skipped;
  const SizingField ref = reference_field(sup.solution.mesh(), samples.points, &skipped);
  if (!skipped.empty()) {
    // estimates whose point fell in a boundary crack of the AMR mesh carry
    // no supervision; drop them so samples and targets stay aligned
    std::vector<char> drop(samples.size(), 0);
    for (int i : skipped) drop[i] = 1;
    SampleSet kept;
    kept.walks_per_point = samples.walks_per_point;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (drop[i]) continue;
      kept.points.push_back(samples.points[i]);
      kept.values.push_back(samples.values[i]);
      kept.variances.push_back(samples.variances[i]);
    }
    samples = std::move(kept);
  }
  if (samples.size() != ref.size()) throw IoError("sizing/sample misalignment");

  spec.save(problem_dir(index) + "/problem.json");
  samples.save_csv(problem_dir(index) + "/samples.csv");
  ref.save_csv(problem_dir(index) + "/sizing_ref.csv");
  sup.save_history_csv(problem_dir(index) + "/amr_history.csv");
  log("[gen] problem " + std::to_string(index) + "/" + std::to_string(cfg_.problems) +
      ": n=" + std::to_string(spec.n) + " kept=" + std::to_string(samples.size()) +
      " m=" + std::to_string(spec.m) +
      " supervision=" + std::to_string(sup.solution.mesh()->vertex_count()) + "v");
}

void Experiment::gen_dataset() {
  ensure_dir(cfg_.out_dir);
  cfg_.save(cfg_.out_dir + "/config.json");
  for (int s = 0; s < static_cast<int>(cfg_.shapes.size()); ++s) gen_shape(s);
  for (int i = 0; i < cfg_.problems; ++i) {
    try {
      gen_problem(i);
    } catch (const std::exception& e) {
      ensure_dir(problem_dir(i));
      std::ofstream fail(problem_dir(i) + "/FAILED.txt");
      fail << e.what() << "\n";
      log("[gen] problem " + std::to_string(i) + " failed: " + e.what());
    }
  }
}

// ---- training ----

TrainResult Experiment::train_model() {
  std::vector<TrainSample> batch;
  std::vector<SizingField> refs;
  std::vector<double> all_sizes;
  for (int i = 0; i < train_count(); ++i) {
    const std::string dir = problem_dir(i);
    if (!fs::exists(dir + "/sizing_ref.csv")) {
      log("[train] skipping problem " + std::to_string(i) + " (no artifacts)");
      continue;
    }
    const ProblemSpec spec = problem(i);
    const SampleSet samples = SampleSet::load_csv(dir + "/samples.csv");
    SizingField ref = SizingField::load_csv(dir + "/sizing_ref.csv");
    if (samples.size() != ref.size()) throw IoError("corpus misalignment at " + dir);
    TrainSample ts;
    ts.graph = build_graph(samples, shape(spec.shape), cfg_.knn);
    batch.push_back(std::move(ts));
    all_sizes.insert(all_sizes.end(), ref.sizes.begin(), ref.sizes.end());
    refs.push_back(std::move(ref));
  }
  if (batch.empty()) throw ConfigError("no training problems under " + cfg_.out_dir);

  const Normalization norm = Normalization::fit(all_sizes);
  for (std::size_t p = 0; p < batch.size(); ++p) {
    batch[p].target.resize(static_cast<long>(refs[p].size()));
    for (std::size_t e = 0; e < refs[p].size(); ++e)
      batch[p].target[static_cast<long>(e)] = norm.to_unit(refs[p].sizes[e]);
  }

  Rng init_rng = Rng(cfg_.seed).substream(kInitStream);
  NetParams init = NetParams::preset(cfg_.model, init_rng);
  const long n_params = init.parameter_count();
  TrainConfig tcfg;
  tcfg.lr = cfg_.lr;
  tcfg.epochs = cfg_.epochs;
  tcfg.val_fraction = cfg_.val_fraction;
  log("[train] " + std::to_string(batch.size()) + " problems, model " + cfg_.model + " (" +
      std::to_string(n_params) + " parameters), " + std::to_string(cfg_.epochs) + " epochs");
  Rng train_rng = Rng(cfg_.seed).substream(kTrainShuffleStream);
  TrainResult res = train(std::move(init), batch, tcfg, train_rng);

  ModelBundle bundle;
  bundle.params = res.params;
  bundle.norm = norm;
  bundle.mean_size = mean(all_sizes);
  bundle.knn = cfg_.knn;
  ensure_dir(cfg_.out_dir + "/model");
  bundle.save(model_path());
  save_train_curve(res.curve, cfg_.out_dir + "/model/train_curve.csv");
  {
    CsvWriter w(cfg_.out_dir + "/model/train_summary.csv",
                "model,parameters,problems,epochs,best_epoch,best_val");
    w.field(cfg_.model);
    w.field(n_params);
    w.field(batch.size());
    w.field(cfg_.epochs);
    w.field(res.best_epoch);
    w.field(res.best_val);
    w.end_row();
  }
  log("[train] best val " + std::to_string(res.best_val) + " at epoch " +
      std::to_string(res.best_epoch));
  model_ = std::move(bundle);
  return res;
}

// ---- runs ----

void Experiment::solve_with_field(RunRecord& rec, const PoissonProblem& prob,
                                  const SizingField& field, double eta) {
  StageTimer timer;
  TetMesh meshed = mesh_adaptive(*prob.domain, field, eta);
  auto mesh = std::make_shared<const TetMesh>(std::move(meshed));
  rec.t_meshing = timer.lap();

  const FemSolution u = solve(assemble(mesh, prob));
  rec.t_fem = timer.lap();
  rec.fem_solves = 1;
  rec.vertices = mesh->vertex_count();
  rec.tets = mesh->tet_count();

  const ProblemSpec spec = problem(rec.problem);
  const std::vector<double> up = values_at_probes(u, probes(spec.shape));
  rec.re_l2 = probe_re(up, rec.problem, ErrorNorm::l2);
  rec.re_linf = probe_re(up, rec.problem, ErrorNorm::linf);
  if (cfg_.save_artifacts) {
    const std::string stem = run_path(rec.method, rec.problem, rec.tag);
    mesh->save_msh(stem.substr(0, stem.size() - 4) + ".msh");
  }
}

RunRecord Experiment::run_lamg(int problem_idx, const RunOverrides& ov) {
  if (ov.tag.find_first_of(",/") != std::string::npos)
    throw ConfigError("tags may not contain commas or slashes");
  const ProblemSpec spec = problem(problem_idx);
  PoissonProblem prob = poisson(spec);
  const BoundaryMesh& domain = shape(spec.shape);

  RunRecord rec;
  rec.method = "lamg";
  rec.problem = problem_idx;
  rec.shape = cfg_.shapes[spec.shape];
  rec.tag = ov.tag;
  rec.n = ov.n > 0 ? ov.n : cfg_.eval_points;
  rec.m = ov.m > 0 ? ov.m : cfg_.eval_walks;
  rec.eta = ov.eta > 0.0 ? ov.eta : cfg_.eta;

  ensure_dir(runs_dir());
  StageTimer timer;
  WosConfig wcfg;
  wcfg.walks_per_point = rec.m;
  const SampleSet samples = wos_solve_sparse(
      prob, rec.n, wcfg, Rng(cfg_.seed).substream(kInferWosStream + problem_idx));
  rec.t_mc = timer.lap();

  const SizingField field = predict_sizing(model(), samples, domain);
  rec.t_inference = timer.lap();

  solve_with_field(rec, prob, field, rec.eta);
  if (cfg_.save_artifacts) {
    const std::string stem = run_path("lamg", problem_idx, ov.tag);
    field.save_csv(stem.substr(0, stem.size() - 4) + "_sizing.csv");
  }
  save_records(run_path("lamg", problem_idx, ov.tag), {rec});
  log("[lamg] problem " + std::to_string(problem_idx) +
      (rec.tag.empty() ? "" : " [" + rec.tag + "]") + ": " + std::to_string(rec.vertices) +
      "v, re_l2 " + fmt_g17(rec.re_l2));
  return rec;
}

std::vector<RunRecord> Experiment::run_baseline(const std::string& method, int problem_idx) {
  const ProblemSpec spec = problem(problem_idx);
  PoissonProblem prob = poisson(spec);
  const BoundaryMesh& domain = shape(spec.shape);

  RunRecord base;
  base.method = method;
  base.problem = problem_idx;
  base.shape = cfg_.shapes[spec.shape];

  ensure_dir(runs_dir());
  std::vector<RunRecord> out;
  if (method == "amr") {
    RunRecord rec = base;
    StageTimer timer;
    AmrConfig acfg;
    acfg.mark_fraction = cfg_.mark_fraction;
    acfg.vertex_budget = cfg_.amr_budget;
    const AmrResult res = amr_loop(prob, coarse_mesh(spec.shape), acfg);
    // the loop interleaves solving and bisection and ends with a solve of
    // the final mesh, so its whole cost books as the fem stage
    rec.t_fem = timer.lap();
    rec.fem_solves = static_cast<int>(res.history.size());
    rec.vertices = res.solution.mesh()->vertex_count();
    rec.tets = res.solution.mesh()->tet_count();
    const std::vector<double> up = values_at_probes(res.solution, probes(spec.shape));
    rec.re_l2 = probe_re(up, problem_idx, ErrorNorm::l2);
    rec.re_linf = probe_re(up, problem_idx, ErrorNorm::linf);
    if (cfg_.save_artifacts)
      res.save_history_csv(runs_dir() + "/amr_p" + pad4(problem_idx) + "_history.csv");
    out.push_back(rec);
  } else if (method == "wos") {
    RunRecord rec = base;
    rec.n = cfg_.wos_points;
    rec.m = cfg_.wos_walks;
    const auto& pts = probes(spec.shape);
    const std::vector<Vec3> sub(pts.begin(), pts.begin() + cfg_.wos_points);
    StageTimer timer;
    WosConfig wcfg;
    wcfg.walks_per_point = cfg_.wos_walks;
    const SampleSet est = wos_estimate_at(
        prob, sub, wcfg, Rng(cfg_.seed).substream(kWosBaselineStream + problem_idx));
    rec.t_mc = timer.lap();
    const auto& ref = reference_values(problem_idx);
    const std::vector<double> ref_sub(ref.begin(), ref.begin() + cfg_.wos_points);
    rec.re_l2 = relative_error(est.values, ref_sub, ErrorNorm::l2);
    rec.re_linf = relative_error(est.values, ref_sub, ErrorNorm::linf);
    if (cfg_.save_artifacts)
      est.save_csv(runs_dir() + "/wos_p" + pad4(problem_idx) + "_samples.csv");
    out.push_back(rec);
  } else if (method == "uniform") {
    for (std::size_t i = 0; i < cfg_.uniform_sizes.size(); ++i) {
      RunRecord rec = base;
      rec.tag = "u" + std::to_string(i);
      StageTimer timer;
      TetMesh meshed = mesh_uniform(domain, cfg_.uniform_sizes[i] * domain.bbox_diagonal());
      auto mesh = std::make_shared<const TetMesh>(std::move(meshed));
      rec.t_meshing = timer.lap();
      const FemSolution u = solve(assemble(mesh, prob));
      rec.t_fem = timer.lap();
      rec.fem_solves = 1;
      rec.vertices = mesh->vertex_count();
      rec.tets = mesh->tet_count();
      const std::vector<double> up = values_at_probes(u, probes(spec.shape));
      rec.re_l2 = probe_re(up, problem_idx, ErrorNorm::l2);
      rec.re_linf = probe_re(up, problem_idx, ErrorNorm::linf);
      out.push_back(rec);
    }
  } else if (method == "amg") {
    RunRecord rec = base;
    rec.eta = 1.0;
    StageTimer timer;
    AmrConfig acfg;
    acfg.mark_fraction = cfg_.mark_fraction;
    acfg.vertex_budget = cfg_.amr_budget;
    const AmrResult res = amr_loop(prob, coarse_mesh(spec.shape), acfg);
    Rng prng = Rng(cfg_.seed).substream(kAmgPointsStream + problem_idx);
    const std::vector<Vec3> pts = domain.sample_interior(cfg_.eval_points, prng);
    std::vector<int> skipped;
    const SizingField field = reference_field(res.solution.mesh(), pts, &skipped);
    // extracting the field from an adaptive run is this method's way of
    // producing the sizing information, hence the inference stage
    rec.t_inference = timer.lap();
    solve_with_field(rec, prob, field, 1.0);
    if (cfg_.save_artifacts)
      field.save_csv(runs_dir() + "/amg_p" + pad4(problem_idx) + "_sizing.csv");
    out.push_back(rec);
  } else {
    throw ConfigError("unknown baseline method: " + method);
  }
  save_records(run_path(method, problem_idx, ""), out);
  log("[" + method + "] problem " + std::to_string(problem_idx) + ": re_l2 " +
      fmt_g17(out.front().re_l2) + ", " + fmt_g17(out.front().total()) + "s");
  return out;
}

// ---- reporting ----

void Experiment::evaluate() {
  if (!fs::exists(runs_dir())) throw ConfigError("no runs under " + cfg_.out_dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(runs_dir())) {
    const std::string p = e.path().string();
    // run records only; artifact CSVs carry a suffix before the extension
    if (e.path().extension() == ".csv" && p.find("_sizing") == std::string::npos &&
        p.find("_samples") == std::string::npos && p.find("_history") == std::string::npos)
      files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> records;
  for (const auto& f : files) {
    const auto batch = load_records(f);
    records.insert(records.end(), batch.begin(), batch.end());
  }
  if (records.empty()) throw ConfigError("no run records under " + runs_dir());

  ensure_dir(report_dir());
  save_records(report_dir() + "/records.csv", records);

  std::map<std::pair<std::string, std::string>, std::vector<const RunRecord*>> groups;
  for (const auto& r : records) groups[{r.method, r.tag}].push_back(&r);

  // speedup = time ratio baseline/lamg, matched per problem on default runs
  std::map<int, double> lamg_time;
  for (const auto& r : records)
    if (r.method == "lamg" && r.tag.empty()) lamg_time[r.problem] = r.total();
  std::map<std::string, std::vector<double>> speedups;
  for (const auto& r : records) {
    if (r.method == "lamg" || !r.tag.empty()) continue;
    const auto it = lamg_time.find(r.problem);
    if (it == lamg_time.end() || it->second <= 0.0) continue;
    speedups[r.method].push_back(r.total() / it->second);
  }
  for (const auto& [method, ratios] : speedups) {
    CsvWriter w(report_dir() + "/speedup_" + method + ".csv", "problem,t_ratio");
    std::size_t k = 0;
    for (const auto& r : records) {
      if (r.method != method || !r.tag.empty()) continue;
      if (!lamg_time.count(r.problem) || lamg_time[r.problem] <= 0.0) continue;
      w.field(r.problem);
      w.field(ratios[k++]);
      w.end_row();
    }
  }

  {
    CsvWriter w(report_dir() + "/summary.csv",
                "method,tag,count,vertices_median,re_l2_q1,re_l2_median,re_l2_q3,"
                "re_linf_median,t_total_median,t_speedup_median");
    for (const auto& [key, rows] : groups) {
      std::vector<double> l2, linf, t, verts;
      for (const RunRecord* r : rows) {
        l2.push_back(r->re_l2);
        linf.push_back(r->re_linf);
        t.push_back(r->total());
        verts.push_back(r->vertices);
      }
      const BoxStats bs = box_stats(l2);
      w.field(key.first);
      w.field(key.second);
      w.field(rows.size());
      w.field(median(verts));
      w.field(bs.q1);
      w.field(bs.median);
      w.field(bs.q3);
      w.field(median(linf));
      w.field(median(t));
      if (key.first == "lamg" && key.second.empty())
        w.field(1.0);
      else if (speedups.count(key.first) && key.second.empty())
        w.field(median(speedups[key.first]));
      else
        w.field(std::string());
      w.end_row();
    }
  }

  // plots, paper-style: error spread per method, speedup distribution,
  // and the time/error plane
  std::vector<BoxSpec> boxes;
  for (const char* m : {"lamg", "amr", "amg", "wos", "uniform"}) {
    std::vector<double> l2;
    for (const auto& [key, rows] : groups)
      if (key.first == m)
        for (const RunRecord* r : rows) l2.push_back(r->re_l2);
    if (!l2.empty()) boxes.push_back({m, std::move(l2)});
  }
  PlotStyle box_style;
  box_style.title = "relative error by method";
  box_style.y_label = "RE (L2)";
  box_style.log_y = true;
  svg_box_plot(report_dir() + "/re_box.svg", boxes, box_style);

  if (!speedups.empty()) {
    std::vector<std::pair<std::string, std::vector<double>>> series(speedups.begin(),
                                                                    speedups.end());
    PlotStyle hist_style;
    hist_style.title = "speedup over lamg";
    hist_style.x_label = "time ratio (method / lamg)";
    hist_style.y_label = "problems";
    svg_frequency_polygons(report_dir() + "/speedup_hist.svg", series, 12, hist_style);
  }

  std::vector<PlotSeries> scatter;
  for (const char* m : {"lamg", "amr", "amg", "wos", "uniform"}) {
    PlotSeries s;
    s.label = m;
    for (const auto& r : records)
      if (r.method == m) {
        s.x.push_back(r.total());
        s.y.push_back(r.re_l2);
      }
    if (!s.x.empty()) scatter.push_back(std::move(s));
  }
  PlotStyle sc_style;
  sc_style.title = "cost vs error";
  sc_style.x_label = "total time (s)";
  sc_style.y_label = "RE (L2)";
  sc_style.log_x = true;
  sc_style.log_y = true;
  svg_scatter(report_dir() + "/time_vs_error.svg", scatter, sc_style);

  log("[report] " + std::to_string(records.size()) + " records -> " + report_dir());
}

}  // namespace lamg
