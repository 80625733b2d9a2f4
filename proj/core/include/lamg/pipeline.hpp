#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lamg/amr.hpp"
#include "lamg/mesher.hpp"
#include "lamg/nnet.hpp"
#include "lamg/problem.hpp"
#include "lamg/sizing.hpp"
#include "lamg/wos.hpp"

namespace lamg {

struct IntRange {
  int lo = 0;
  int hi = 0;
  int sample(Rng& rng) const { return rng.uniform_int(lo, hi); }
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
  double sample(Rng& rng) const { return rng.uniform(lo, hi); }
};

// Declarative description of a whole experiment: corpus sampling ranges,
// reference manufacturing settings, model/training choices, baseline and
// evaluation budgets. Serialized as JSON; together with the seed it pins
// every byte of the non-timing outputs.
struct ExperimentConfig {
  std::vector<std::string> shapes{"builtin:cube"};
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  // corpus generation; last `holdout` problems are never trained on
  int problems = 120;
  int holdout = 20;
  IntRange gaussians{40, 50};
  RealRange gaussian_amplitude{-1.0, 1.0};
  RealRange gaussian_width{0.05, 0.15};  // fraction of the bbox diagonal
  IntRange sources{20, 30};
  RealRange source_amplitude{-50.0, 50.0};
  RealRange source_radius{0.03, 0.12};  // fraction of the bbox diagonal
  IntRange sample_points{200, 2000};    // n, MC locations per problem
  IntRange walks{500, 1000};            // m, walks per location

  // supervision: AMR that manufactures reference sizing fields. The budget
  // runs past the baseline AMR stop so hot regions land well below one
  // octree level and the size contrast survives prediction smoothing.
  int coarse_vertices = 2000;
  int supervision_budget = 15000;
  double mark_fraction = 0.7;

  std::string model = "h1";
  int knn = 8;
  double lr = 1e-3;
  int epochs = 400;
  double val_fraction = 0.1;

  // inference-time sampling (defaults; sweeps override per run)
  double eta = 1.0;
  int eval_points = 300;
  int eval_walks = 100;

  // baselines
  int amr_budget = 10000;
  int wos_points = 2000;  // dense MC estimate size (desk stand-in for 18K)
  int wos_walks = 1000;
  std::vector<double> uniform_sizes{0.1, 0.05, 0.027};  // diagonal fractions

  // evaluation
  int reference_vertices = 50000;  // uniform reference mesh (desk stand-in for 200K)
  int probes = 4096;               // fixed interior points shared by all methods
  bool save_artifacts = true;      // meshes and sizing fields next to run records

  void validate() const;  // ConfigError on out-of-domain settings
  void save(const std::string& path) const;
  static ExperimentConfig load(const std::string& path);
};

// One PDE instance. Geometry comes from `shape` (index into config.shapes);
// n and m are the sampling budget drawn for corpus generation.
struct ProblemSpec {
  int index = 0;
  int shape = 0;
  int n = 0;
  int m = 0;
  DirichletBC bc;
  SourceTerm source;

  void save(const std::string& path) const;
  static ProblemSpec load(const std::string& path);
};

// Measured outcome of one method on one problem. Stage semantics: mc is
// random walks, inference is sizing-field production, meshing is mesh
// construction, fem is the final linear solve. The amr baseline books its
// whole solve/refine loop under fem since the stages interleave.
struct RunRecord {
  std::string method;  // lamg | amr | wos | uniform | amg
  int problem = -1;
  std::string shape;
  std::string tag;  // variant label ("" for the config default)
  int n = 0;
  int m = 0;
  double eta = 0.0;
  int vertices = 0;
  int tets = 0;
  int fem_solves = 0;
  double re_l2 = 0.0;
  double re_linf = 0.0;
  double t_mc = 0.0;
  double t_inference = 0.0;
  double t_meshing = 0.0;
  double t_fem = 0.0;

  double total() const { return t_mc + t_inference + t_meshing + t_fem; }
};

void save_records(const std::string& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> load_records(const std::string& path);
// The file reduced to its deterministic part: every column whose name
// starts with "t_" is dropped. Reruns with equal seeds must agree on this
// projection byte for byte.
std::string records_without_timings(const std::string& path);

struct RunOverrides {
  int n = 0;        // 0 keeps the config default
  int m = 0;
  double eta = 0.0;  // 0 keeps the config default
  std::string tag;
};

// Experiment orchestration over a config: corpus generation, training,
// the learned one-shot pipeline, baselines, and report emission. Heavy
// per-shape artifacts (meshes, probes, reference solutions) are cached in
// memory and on disk under config.out_dir.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg, std::ostream* log = nullptr);

  const ExperimentConfig& config() const { return cfg_; }

  // Samples and persists the whole corpus: shape artifacts, PDE parameters,
  // MC estimates, and AMR-derived reference sizing fields. Failed problems
  // are recorded and skipped.
  void gen_dataset();

  // Trains on the generated corpus (problems [0, problems-holdout)) and
  // persists the model bundle plus its training curve.
  TrainResult train_model();

  // The one-shot learned pipeline: sample, estimate, predict sizing, mesh,
  // solve once. Writes the run record (and artifacts) under out_dir/runs.
  RunRecord run_lamg(int problem, const RunOverrides& ov = {});

  // method is one of amr | wos | uniform | amg. uniform yields one record
  // per sweep size, the others exactly one.
  std::vector<RunRecord> run_baseline(const std::string& method, int problem);

  // Gathers all run records into report tables and SVG plots.
  void evaluate();

  // corpus structure
  int train_count() const { return cfg_.problems - cfg_.holdout; }
  std::vector<int> holdout_problems() const;

  // lazily loaded/derived artifacts
  const BoundaryMesh& shape(int shape_idx);
  std::shared_ptr<const BoundaryMesh> shape_ptr(int shape_idx);
  ProblemSpec problem(int idx) const;
  PoissonProblem poisson(const ProblemSpec& spec);
  const std::vector<Vec3>& probes(int shape_idx);
  std::shared_ptr<const TetMesh> coarse_mesh(int shape_idx);
  std::shared_ptr<const TetMesh> reference_mesh(int shape_idx);
  // High-resolution FEM solution of `problem` at its shape's probes,
  // computed once and cached under the problem directory.
  const std::vector<double>& reference_values(int problem);
  const ModelBundle& model();

  // layout
  std::string shape_dir(int shape_idx) const;
  std::string problem_dir(int problem) const;
  std::string run_path(const std::string& method, int problem, const std::string& tag) const;
  std::string model_path() const;
  std::string runs_dir() const;
  std::string report_dir() const;

 private:
  ProblemSpec sample_problem(int index);
  void gen_shape(int shape_idx);
  void gen_problem(int index);
  double probe_re(const std::vector<double>& u, int problem, ErrorNorm norm);
  // Shared tail of the lamg and amg paths: both mesh a sizing field and
  // solve exactly once; only the field's provenance differs.
  void solve_with_field(RunRecord& rec, const PoissonProblem& prob, const SizingField& field,
                        double eta);
  void log(const std::string& line) const;

  ExperimentConfig cfg_;
  std::ostream* log_ = nullptr;
  std::map<int, std::shared_ptr<const BoundaryMesh>> shapes_;
  std::map<int, std::vector<Vec3>> probes_;
  std::map<int, std::shared_ptr<const TetMesh>> coarse_;
  std::map<int, std::shared_ptr<const TetMesh>> reference_;
  std::map<int, std::vector<double>> ref_values_;
  std::optional<ModelBundle> model_;
};

// Uniform mesh sized to approach `target_vertices` (within ~15% when the
// lattice quantization allows it) by multiplicative search on the edge size.
TetMesh mesh_with_vertex_target(const BoundaryMesh& domain, int target_vertices);

}  // namespace lamg
