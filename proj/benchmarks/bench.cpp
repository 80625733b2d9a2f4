// Microbenchmarks for the hot paths: random walks, assembly and solve,
// graph construction, network forward, and meshing. Each fixture is built
// lazily so filtered runs only pay for what they measure.
#include <benchmark/benchmark.h>

#include <memory>

#include "lamg/fem.hpp"
#include "lamg/mesher.hpp"
#include "lamg/nnet.hpp"
#include "lamg/pipeline.hpp"
#include "lamg/sizing.hpp"
#include "lamg/wos.hpp"

using namespace lamg;

namespace {

const std::shared_ptr<const BoundaryMesh>& cube() {
  static auto c = std::make_shared<const BoundaryMesh>(resolve_shape("builtin:cube"));
  return c;
}

PoissonProblem bench_problem() {
  PoissonProblem p;
  p.domain = cube();
  p.bc.gaussians = {{{0.0, 0.3, 0.4}, 1.0, 0.12}, {{1.0, 0.7, 0.2}, -0.8, 0.15}};
  p.source.spheres = {{{0.3, 0.6, 0.5}, 0.1, 25.0}};
  return p;
}

SampleSet bench_samples(int n) {
  Rng rng(7);
  SampleSet s;
  s.points = cube()->sample_interior(n, rng);
  for (int i = 0; i < n; ++i) {
    s.values.push_back(rng.uniform(-1.0, 1.0));
    s.variances.push_back(rng.uniform(0.0, 0.01));
  }
  s.walks_per_point = 100;
  return s;
}

}  // namespace

static void BM_WosWalk(benchmark::State& state) {
  PoissonProblem prob = bench_problem();
  WosConfig cfg;
  Rng rng(11);
  const Vec3 x(0.4, 0.5, 0.6);
  for (auto _ : state) benchmark::DoNotOptimize(wos_single_walk(prob, x, cfg, rng));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_WosWalk);

static void BM_WosEstimate(benchmark::State& state) {
  PoissonProblem prob = bench_problem();
  WosConfig cfg;
  cfg.walks_per_point = int(state.range(0));
  const Vec3 x(0.4, 0.5, 0.6);
  int rep = 0;
  for (auto _ : state) {
    Rng rng = Rng(12).substream(rep++);
    benchmark::DoNotOptimize(wos_estimate(prob, x, cfg, rng));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WosEstimate)->Arg(100)->Arg(500);

static void BM_FemAssemble(benchmark::State& state) {
  static auto mesh =
      std::make_shared<const TetMesh>(mesh_with_vertex_target(*cube(), int(state.range(0))));
  PoissonProblem prob = bench_problem();
  for (auto _ : state) benchmark::DoNotOptimize(assemble(mesh, prob));
}
BENCHMARK(BM_FemAssemble)->Arg(9000);

static void BM_FemSolve(benchmark::State& state) {
  static auto mesh =
      std::make_shared<const TetMesh>(mesh_with_vertex_target(*cube(), int(state.range(0))));
  static FemSystem sys = assemble(mesh, bench_problem());
  for (auto _ : state) benchmark::DoNotOptimize(solve(sys));
}
BENCHMARK(BM_FemSolve)->Arg(9000);

static void BM_GraphBuild(benchmark::State& state) {
  SampleSet s = bench_samples(int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_graph(s, *cube(), 8));
}
BENCHMARK(BM_GraphBuild)->Arg(500);

static void BM_GnnForward(benchmark::State& state) {
  SampleSet s = bench_samples(int(state.range(0)));
  GraphBatch g = build_graph(s, *cube(), 8);
  Rng rng(3);
  NetParams params = NetParams::preset("h1", rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, g));
}
BENCHMARK(BM_GnnForward)->Arg(500);

static void BM_MeshUniform(benchmark::State& state) {
  double size = cube()->bbox_diagonal() * 0.05;
  for (auto _ : state) benchmark::DoNotOptimize(mesh_uniform(*cube(), size));
}
BENCHMARK(BM_MeshUniform);

static void BM_MeshAdaptive(benchmark::State& state) {
  SampleSet s = bench_samples(500);
  SizingField field;
  field.points = s.points;
  Rng rng(5);
  double diag = cube()->bbox_diagonal();
  // Sizes spanning a typical predicted range, denser toward one corner.
  for (const Vec3& p : field.points)
    field.sizes.push_back(diag * (0.03 + 0.04 * p[0] + 0.005 * rng.uniform()));
  for (auto _ : state) benchmark::DoNotOptimize(mesh_adaptive(*cube(), field));
}
BENCHMARK(BM_MeshAdaptive);

BENCHMARK_MAIN();
