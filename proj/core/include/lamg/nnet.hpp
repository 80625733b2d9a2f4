#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lamg/boundary_mesh.hpp"
#include "lamg/rng.hpp"
#include "lamg/sizing.hpp"
#include "lamg/wos.hpp"

namespace lamg {

// kNN graph over sample points with chords leaving the domain removed and
// the remainder symmetrized. Neighbor lists are sorted by (distance,
// position), never by index, which makes aggregation order label-free and
// the forward pass exactly permutation equivariant.
struct GraphBatch {
  std::vector<Vec3> points;
  Eigen::VectorXd u_std;  // standardized solution estimates (input feature)
  double u_mean = 0.0;
  double u_sigma = 1.0;
  std::vector<std::vector<int>> nbrs;
  std::vector<std::vector<double>> nbr_dist;
  // Nodes whose every candidate edge left the domain. They stay in the
  // graph (their message term is empty); predictions fall back to the
  // corpus mean size.
  std::vector<int> isolated;
  double e_max = 0.0;  // longest retained edge

  int n() const { return static_cast<int>(points.size()); }
  long edge_count() const;  // undirected
};

GraphBatch build_graph(const SampleSet& samples, const BoundaryMesh& domain, int k);

struct LinearLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
};

struct GnnBlock {
  LinearLayer pre;   // before message passing
  LinearLayer post;  // after, with relu
};

// Encoder MLP, message-passing blocks at constant width, mirrored decoder.
struct NetParams {
  std::vector<LinearLayer> encoder;
  std::vector<GnnBlock> blocks;
  std::vector<LinearLayer> decoder;

  long parameter_count() const;
  int width() const { return static_cast<int>(encoder.back().W.rows()); }
  std::vector<int> encoder_dims() const;
  int gnn_levels() const { return static_cast<int>(blocks.size()); }

  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);

  // enc_dims starts at 1 (the scalar input); decoder mirrors it. Weights are
  // uniform Xavier, biases zero.
  static NetParams zeros(const std::vector<int>& enc_dims, int gnn_levels);
  static NetParams make(const std::vector<int>& enc_dims, int gnn_levels, Rng& rng);
  // "h1".."h5": h1-h3 width 16 with 2 levels, h4 width 32, h5 width 32 with 3.
  static NetParams preset(const std::string& name, Rng& rng);
};

struct LossConfig {
  double alpha = 0.8;  // weight of the importance term
  double beta = 0.08;  // sharpness of the tail weights
  double delta = 1.0;  // huber transition
  double s_lo = 0.05;  // tail emphasis below this normalized size
  double s_hi = 0.17;  // and above this one
};

struct LossValue {
  double total = 0.0;
  double huber = 0.0;
  double weighted = 0.0;
};

// The two sigmoid tails of the importance weight, before summation:
// low rises below s_lo, high rises above s_hi.
double tail_weight_low(double p, const LossConfig& cfg);
double tail_weight_high(double p, const LossConfig& cfg);

// Huber term plus alpha times the importance-weighted quadratic term whose
// weights follow the *predicted* sizes; the gradient includes that path.
LossValue loss_value(const Eigen::VectorXd& pred, const Eigen::VectorXd& target,
                     const LossConfig& cfg);
Eigen::VectorXd loss_gradient_wrt_pred(const Eigen::VectorXd& pred,
                                       const Eigen::VectorXd& target, const LossConfig& cfg,
                                       LossValue* value = nullptr);

Eigen::VectorXd forward(const NetParams& params, const GraphBatch& graph);

// Loss and full parameter gradient (same layout as NetParams::flatten).
LossValue loss_and_gradient(const NetParams& params, const GraphBatch& graph,
                            const Eigen::VectorXd& target, const LossConfig& cfg,
                            Eigen::VectorXd& grad_out);

struct TrainSample {
  GraphBatch graph;
  Eigen::VectorXd target;  // normalized reference sizes
};

struct TrainConfig {
  LossConfig loss;
  double lr = 1e-3;
  int epochs = 200;
  double val_fraction = 0.1;
};

struct TrainCurvePoint {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  NetParams params;  // best validation snapshot
  std::vector<TrainCurvePoint> curve;
  double best_val = 0.0;
  int best_epoch = 0;
};

// Adam over per-problem steps; sample order reshuffles every epoch from
// `rng`. Non-finite losses raise TrainingDiverged.
TrainResult train(NetParams init, const std::vector<TrainSample>& samples,
                  const TrainConfig& cfg, Rng& rng);

void save_train_curve(const std::vector<TrainCurvePoint>& curve, const std::string& path);

// Everything inference needs: parameters, the corpus size normalization,
// the corpus mean physical size (fallback value), and the graph k.
struct ModelBundle {
  NetParams params;
  Normalization norm;
  double mean_size = 0.0;
  int knn = 8;

  void save(const std::string& path) const;
  static ModelBundle load(const std::string& path);
};

// Predict physical sizes at the sample points: forward pass in normalized
// space, clamp to [0,1], then map through the stored normalization.
SizingField predict_sizing(const ModelBundle& model, const SampleSet& samples,
                           const BoundaryMesh& domain);

}  // namespace lamg
