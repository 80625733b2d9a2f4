#include "lamg/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "lamg/csv.hpp"
#include "lamg/errors.hpp"
#include "lamg/kdtree.hpp"
#include "lamg/stats.hpp"

namespace lamg {

long GraphBatch::edge_count() const {
  long directed = 0;
  for (const auto& nb : nbrs) directed += static_cast<long>(nb.size());
  return directed / 2;
}

namespace {

bool position_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

}  // namespace

GraphBatch build_graph(const SampleSet& samples, const BoundaryMesh& domain, int k) {
  const int n = static_cast<int>(samples.points.size());
  if (n < 2) throw ConfigError("graph needs at least two sample points");
  if (k < 1) throw ConfigError("graph k must be positive");
  const int k_eff = std::min(k, n - 1);

  GraphBatch g;
  g.points = samples.points;

  KdTree tree(g.points);
  std::vector<std::pair<int, int>> edges;  // first < second
  for (int i = 0; i < n; ++i) {
    // +1 because the query point itself comes back at distance zero
    for (int j : tree.knn(g.points[i], k_eff + 1)) {
      if (j == i) continue;
      if ((g.points[j] - g.points[i]).squaredNorm() == 0.0)
        continue;  // coincident points make no usable edge
      if (!domain.segment_inside(g.points[i], g.points[j])) continue;
      edges.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  g.nbrs.resize(n);
  g.nbr_dist.resize(n);
  for (const auto& [a, b] : edges) {
    g.nbrs[a].push_back(b);
    g.nbrs[b].push_back(a);
  }
  for (int i = 0; i < n; ++i) {
    if (g.nbrs[i].empty()) {
      g.isolated.push_back(i);
      continue;
    }
    // geometric order, so relabeling the nodes cannot change summation order
    std::sort(g.nbrs[i].begin(), g.nbrs[i].end(), [&](int a, int b) {
      const double da = (g.points[a] - g.points[i]).squaredNorm();
      const double db = (g.points[b] - g.points[i]).squaredNorm();
      if (da != db) return da < db;
      return position_less(g.points[a], g.points[b]);
    });
    g.nbr_dist[i].reserve(g.nbrs[i].size());
    for (int j : g.nbrs[i]) {
      const double d = (g.points[j] - g.points[i]).norm();
      g.nbr_dist[i].push_back(d);
      g.e_max = std::max(g.e_max, d);
    }
  }
  if (g.e_max == 0.0)
    throw IsolatedNode("every candidate edge leaves the domain; no usable graph");

  // accumulate over sorted values so the standardization is exactly
  // independent of sample order
  std::vector<double> sorted_u = samples.values;
  std::sort(sorted_u.begin(), sorted_u.end());
  g.u_mean = mean(sorted_u);
  const double var = sorted_u.size() > 1 ? sample_variance(sorted_u) : 0.0;
  double sigma = std::sqrt(std::max(var, 0.0));
  if (!(sigma > 1e-12 * std::max(1.0, std::abs(g.u_mean)))) sigma = 1.0;
  g.u_sigma = sigma;
  g.u_std.resize(n);
  for (int i = 0; i < n; ++i) g.u_std[i] = (samples.values[i] - g.u_mean) / sigma;
  return g;
}

// ---- parameters ----

namespace {

template <typename P, typename Fn>
void visit_layers(P& p, Fn&& fn) {
  for (auto& l : p.encoder) fn(l);
  for (auto& blk : p.blocks) {
    fn(blk.pre);
    fn(blk.post);
  }
  for (auto& l : p.decoder) fn(l);
}

LinearLayer zero_layer(int out, int in) {
  LinearLayer l;
  l.W = Eigen::MatrixXd::Zero(out, in);
  l.b = Eigen::VectorXd::Zero(out);
  return l;
}

}  // namespace

long NetParams::parameter_count() const {
  long count = 0;
  visit_layers(*this, [&](const LinearLayer& l) { count += l.W.size() + l.b.size(); });
  return count;
}

std::vector<int> NetParams::encoder_dims() const {
  std::vector<int> dims;
  dims.push_back(static_cast<int>(encoder.front().W.cols()));
  for (const auto& l : encoder) dims.push_back(static_cast<int>(l.W.rows()));
  return dims;
}

Eigen::VectorXd NetParams::flatten() const {
  Eigen::VectorXd flat(parameter_count());
  long at = 0;
  visit_layers(*this, [&](const LinearLayer& l) {
    for (int r = 0; r < l.W.rows(); ++r)
      for (int c = 0; c < l.W.cols(); ++c) flat[at++] = l.W(r, c);
    for (int r = 0; r < l.b.size(); ++r) flat[at++] = l.b[r];
  });
  return flat;
}

void NetParams::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count())
    throw ConfigError("parameter vector size mismatch");
  long at = 0;
  visit_layers(*this, [&](LinearLayer& l) {
    for (int r = 0; r < l.W.rows(); ++r)
      for (int c = 0; c < l.W.cols(); ++c) l.W(r, c) = flat[at++];
    for (int r = 0; r < l.b.size(); ++r) l.b[r] = flat[at++];
  });
}

NetParams NetParams::zeros(const std::vector<int>& enc_dims, int gnn_levels) {
  if (enc_dims.size() < 2 || enc_dims.front() != 1)
    throw ConfigError("encoder dims must start at 1");
  if (gnn_levels < 1) throw ConfigError("need at least one message passing level");
  NetParams p;
  for (size_t i = 1; i < enc_dims.size(); ++i)
    p.encoder.push_back(zero_layer(enc_dims[i], enc_dims[i - 1]));
  const int w = enc_dims.back();
  for (int l = 0; l < gnn_levels; ++l) p.blocks.push_back({zero_layer(w, w), zero_layer(w, w)});
  for (size_t i = enc_dims.size() - 1; i > 0; --i)
    p.decoder.push_back(zero_layer(enc_dims[i - 1], enc_dims[i]));
  return p;
}

NetParams NetParams::make(const std::vector<int>& enc_dims, int gnn_levels, Rng& rng) {
  NetParams p = zeros(enc_dims, gnn_levels);
  visit_layers(p, [&](LinearLayer& l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.W.rows() + l.W.cols()));
    for (int r = 0; r < l.W.rows(); ++r)
      for (int c = 0; c < l.W.cols(); ++c) l.W(r, c) = rng.uniform(-limit, limit);
  });
  return p;
}

NetParams NetParams::preset(const std::string& name, Rng& rng) {
  if (name == "h1" || name == "h2" || name == "h3") return make({1, 8, 16}, 2, rng);
  if (name == "h4") return make({1, 16, 32}, 2, rng);
  if (name == "h5") return make({1, 16, 32}, 3, rng);
  throw ConfigError("unknown net preset: " + name);
}

// ---- loss ----

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double huber(double e, double delta) {
  const double a = std::abs(e);
  return a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
}

double huber_grad(double e, double delta) {
  if (std::abs(e) <= delta) return e;
  return e > 0 ? delta : -delta;
}

// tail emphasis on predictions outside [s_lo, s_hi] in normalized units
double tail_weight(double p, const LossConfig& cfg) {
  return tail_weight_low(p, cfg) + tail_weight_high(p, cfg);
}

double tail_weight_grad(double p, const LossConfig& cfg) {
  const double lo = logistic((cfg.s_lo - p) / cfg.beta);
  const double hi = logistic((p - cfg.s_hi) / cfg.beta);
  return (-lo * (1.0 - lo) + hi * (1.0 - hi)) / cfg.beta;
}

}  // namespace

double tail_weight_low(double p, const LossConfig& cfg) {
  return logistic((cfg.s_lo - p) / cfg.beta);
}

double tail_weight_high(double p, const LossConfig& cfg) {
  return logistic((p - cfg.s_hi) / cfg.beta);
}

LossValue loss_value(const Eigen::VectorXd& pred, const Eigen::VectorXd& target,
                     const LossConfig& cfg) {
  if (pred.size() != target.size() || pred.size() == 0)
    throw ConfigError("loss needs matching nonempty prediction and target");
  const long n = pred.size();
  double hub = 0.0, aw_sum = 0.0, awe_sum = 0.0;
  for (long i = 0; i < n; ++i) {
    const double e = pred[i] - target[i];
    hub += huber(e, cfg.delta);
    const double a = tail_weight(pred[i], cfg);
    aw_sum += a;
    awe_sum += a * e * e;
  }
  LossValue v;
  v.huber = hub / static_cast<double>(n);
  v.weighted = awe_sum / aw_sum;  // == mean of (n a / sum a) e^2
  v.total = v.huber + cfg.alpha * v.weighted;
  return v;
}

Eigen::VectorXd loss_gradient_wrt_pred(const Eigen::VectorXd& pred,
                                       const Eigen::VectorXd& target, const LossConfig& cfg,
                                       LossValue* value) {
  const LossValue v = loss_value(pred, target, cfg);
  if (value) *value = v;
  const long n = pred.size();
  double aw_sum = 0.0;
  for (long i = 0; i < n; ++i) aw_sum += tail_weight(pred[i], cfg);
  Eigen::VectorXd grad(n);
  for (long i = 0; i < n; ++i) {
    const double e = pred[i] - target[i];
    const double a = tail_weight(pred[i], cfg);
    const double ap = tail_weight_grad(pred[i], cfg);
    // the weights are functions of the predictions, so differentiating the
    // weighted mean picks up both the numerator and the shared denominator
    const double dweighted = (ap * e * e + 2.0 * a * e - v.weighted * ap) / aw_sum;
    grad[i] = huber_grad(e, cfg.delta) / static_cast<double>(n) + cfg.alpha * dweighted;
  }
  return grad;
}

// ---- forward / backward ----

namespace {

// Explicit per-row loops rather than a GEMM: packed matrix kernels round
// differently for rows in the SIMD body than in the remainder tail, which
// would break exact permutation equivariance of the forward pass.
Eigen::MatrixXd linear_apply(const LinearLayer& l, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), l.W.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < l.W.rows(); ++c) {
      double acc = l.b[c];
      for (Eigen::Index k = 0; k < l.W.cols(); ++k) acc += x(r, k) * l.W(c, k);
      out(r, c) = acc;
    }
  return out;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& pre) {
  return (pre.array() > 0.0).cast<double>().matrix();
}

Eigen::MatrixXd message_pass(const GraphBatch& g, const Eigen::MatrixXd& q) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  for (int i = 0; i < g.n(); ++i) {
    for (size_t a = 0; a < g.nbrs[i].size(); ++a) {
      const int j = g.nbrs[i][a];
      const double scale = g.e_max / g.nbr_dist[i][a];
      m.row(i) += scale * (q.row(i) - q.row(j)).cwiseAbs();
    }
  }
  return m;
}

// subgradient: sign(0) taken as 0
Eigen::MatrixXd message_pass_backward(const GraphBatch& g, const Eigen::MatrixXd& q,
                                      const Eigen::MatrixXd& gm) {
  Eigen::MatrixXd gq = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  for (int i = 0; i < g.n(); ++i) {
    for (size_t a = 0; a < g.nbrs[i].size(); ++a) {
      const int j = g.nbrs[i][a];
      const double scale = g.e_max / g.nbr_dist[i][a];
      for (int c = 0; c < q.cols(); ++c) {
        const double diff = q(i, c) - q(j, c);
        if (diff == 0.0) continue;
        const double s = diff > 0 ? scale : -scale;
        gq(i, c) += gm(i, c) * s;
        gq(j, c) -= gm(i, c) * s;
      }
    }
  }
  return gq;
}

struct Trace {
  std::vector<Eigen::MatrixXd> enc_pre, enc_act;
  std::vector<Eigen::MatrixXd> blk_in, blk_q, blk_m, blk_pre, blk_act;
  std::vector<Eigen::MatrixXd> dec_pre, dec_act;
};

Eigen::MatrixXd run_forward(const NetParams& p, const GraphBatch& g, Trace* trace) {
  Eigen::MatrixXd h = g.u_std;  // n x 1
  for (const auto& l : p.encoder) {
    Eigen::MatrixXd pre = linear_apply(l, h);
    h = relu(pre);
    if (trace) {
      trace->enc_pre.push_back(std::move(pre));
      trace->enc_act.push_back(h);
    }
  }
  for (const auto& blk : p.blocks) {
    if (trace) trace->blk_in.push_back(h);
    Eigen::MatrixXd q = linear_apply(blk.pre, h);
    Eigen::MatrixXd m = message_pass(g, q);
    Eigen::MatrixXd pre = linear_apply(blk.post, m);
    h = relu(pre);  // the aggregate replaces the node state
    if (trace) {
      trace->blk_q.push_back(std::move(q));
      trace->blk_m.push_back(std::move(m));
      trace->blk_pre.push_back(std::move(pre));
      trace->blk_act.push_back(h);
    }
  }
  for (size_t i = 0; i < p.decoder.size(); ++i) {
    Eigen::MatrixXd pre = linear_apply(p.decoder[i], h);
    h = i + 1 < p.decoder.size() ? relu(pre) : pre;  // last layer stays linear
    if (trace) {
      trace->dec_pre.push_back(std::move(pre));
      trace->dec_act.push_back(h);
    }
  }
  return h;
}

}  // namespace

Eigen::VectorXd forward(const NetParams& params, const GraphBatch& graph) {
  return run_forward(params, graph, nullptr).col(0);
}

LossValue loss_and_gradient(const NetParams& params, const GraphBatch& graph,
                            const Eigen::VectorXd& target, const LossConfig& cfg,
                            Eigen::VectorXd& grad_out) {
  Trace tr;
  const Eigen::MatrixXd out = run_forward(params, graph, &tr);
  LossValue value;
  const Eigen::VectorXd dpred = loss_gradient_wrt_pred(out.col(0), target, cfg, &value);

  NetParams grads = NetParams::zeros(params.encoder_dims(), params.gnn_levels());
  Eigen::MatrixXd gact = dpred;

  for (int i = static_cast<int>(params.decoder.size()) - 1; i >= 0; --i) {
    Eigen::MatrixXd gpre = i + 1 < static_cast<int>(params.decoder.size())
                               ? (gact.array() * relu_mask(tr.dec_pre[i]).array()).matrix()
                               : gact;
    const Eigen::MatrixXd& input =
        i > 0 ? tr.dec_act[i - 1]
              : (params.blocks.empty() ? tr.enc_act.back() : tr.blk_act.back());
    grads.decoder[i].W = gpre.transpose() * input;
    grads.decoder[i].b = gpre.colwise().sum().transpose();
    gact = gpre * params.decoder[i].W;
  }

  for (int i = static_cast<int>(params.blocks.size()) - 1; i >= 0; --i) {
    Eigen::MatrixXd gpre = (gact.array() * relu_mask(tr.blk_pre[i]).array()).matrix();
    grads.blocks[i].post.W = gpre.transpose() * tr.blk_m[i];
    grads.blocks[i].post.b = gpre.colwise().sum().transpose();
    Eigen::MatrixXd gm = gpre * params.blocks[i].post.W;
    Eigen::MatrixXd gq = message_pass_backward(graph, tr.blk_q[i], gm);
    grads.blocks[i].pre.W = gq.transpose() * tr.blk_in[i];
    grads.blocks[i].pre.b = gq.colwise().sum().transpose();
    gact = gq * params.blocks[i].pre.W;
  }

  for (int i = static_cast<int>(params.encoder.size()) - 1; i >= 0; --i) {
    Eigen::MatrixXd gpre = (gact.array() * relu_mask(tr.enc_pre[i]).array()).matrix();
    const Eigen::MatrixXd input = i > 0 ? tr.enc_act[i - 1] : Eigen::MatrixXd(graph.u_std);
    grads.encoder[i].W = gpre.transpose() * input;
    grads.encoder[i].b = gpre.colwise().sum().transpose();
    gact = gpre * params.encoder[i].W;
  }

  grad_out = grads.flatten();
  return value;
}

// ---- training ----

namespace {

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(0, i)]);
}

}  // namespace

TrainResult train(NetParams init, const std::vector<TrainSample>& samples,
                  const TrainConfig& cfg, Rng& rng) {
  if (samples.empty()) throw ConfigError("training corpus is empty");
  for (const auto& s : samples)
    if (s.target.size() != s.graph.n())
      throw ConfigError("target length does not match graph size");

  const int total = static_cast<int>(samples.size());
  std::vector<int> order(total);
  for (int i = 0; i < total; ++i) order[i] = i;
  shuffle_indices(order, rng);

  int n_val = total >= 2 ? std::clamp(static_cast<int>(std::lround(cfg.val_fraction * total)),
                                      1, total - 1)
                         : 1;
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx = total >= 2
                                   ? std::vector<int>(order.begin() + n_val, order.end())
                                   : std::vector<int>{0};

  Eigen::VectorXd x = init.flatten();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long step = 0;

  TrainResult result;
  result.params = init;
  result.best_val = std::numeric_limits<double>::infinity();

  auto eval_set = [&](const std::vector<int>& idx) {
    double acc = 0.0;
    for (int i : idx) {
      const Eigen::VectorXd pred = forward(init, samples[i].graph);
      acc += loss_value(pred, samples[i].target, cfg.loss).total;
    }
    return acc / static_cast<double>(idx.size());
  };

  Eigen::VectorXd grad;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_indices(train_idx, rng);
    double train_acc = 0.0;
    for (int i : train_idx) {
      const LossValue lv =
          loss_and_gradient(init, samples[i].graph, samples[i].target, cfg.loss, grad);
      if (!std::isfinite(lv.total) || !grad.allFinite())
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch));
      train_acc += lv.total;
      ++step;
      m = b1 * m + (1.0 - b1) * grad;
      v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
      const double mc = 1.0 - std::pow(b1, static_cast<double>(step));
      const double vc = 1.0 - std::pow(b2, static_cast<double>(step));
      x -= (cfg.lr / mc) * m.cwiseQuotient(((v / vc).cwiseSqrt().array() + eps).matrix());
      init.unflatten(x);
    }
    TrainCurvePoint pt;
    pt.epoch = epoch;
    pt.train_loss = train_acc / static_cast<double>(train_idx.size());
    pt.val_loss = eval_set(val_idx);
    result.curve.push_back(pt);
    if (pt.val_loss < result.best_val) {
      result.best_val = pt.val_loss;
      result.best_epoch = epoch;
      result.params = init;
    }
  }
  return result;
}

void save_train_curve(const std::vector<TrainCurvePoint>& curve, const std::string& path) {
  CsvWriter csv(path, "epoch,train_loss,val_loss");
  for (const auto& pt : curve) {
    csv.field(pt.epoch);
    csv.field(pt.train_loss);
    csv.field(pt.val_loss);
    csv.end_row();
  }
}

// ---- serialization ----

namespace {

constexpr char kModelMagic[8] = {'L', 'A', 'M', 'G', 'M', 'D', 'L', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("model file truncated");
  return value;
}

}  // namespace

void ModelBundle::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kModelMagic, sizeof(kModelMagic));
  const std::vector<int> dims = params.encoder_dims();
  write_pod(out, static_cast<int32_t>(dims.size()));
  for (int d : dims) write_pod(out, static_cast<int32_t>(d));
  write_pod(out, static_cast<int32_t>(params.gnn_levels()));
  const Eigen::VectorXd flat = params.flatten();
  write_pod(out, static_cast<int64_t>(flat.size()));
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  write_pod(out, norm.offset);
  write_pod(out, norm.scale);
  write_pod(out, static_cast<uint8_t>(norm.degenerate ? 1 : 0));
  write_pod(out, mean_size);
  write_pod(out, static_cast<int32_t>(knn));
  if (!out) throw IoError("failed writing " + path);
}

ModelBundle ModelBundle::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    throw IoError("not a model file: " + path);
  const int n_dims = read_pod<int32_t>(in);
  if (n_dims < 2 || n_dims > 64) throw IoError("corrupt model header");
  std::vector<int> dims(n_dims);
  for (int& d : dims) d = read_pod<int32_t>(in);
  const int levels = read_pod<int32_t>(in);
  ModelBundle bundle;
  bundle.params = NetParams::zeros(dims, levels);
  const int64_t n_params = read_pod<int64_t>(in);
  if (n_params != bundle.params.parameter_count())
    throw IoError("model parameter count mismatch");
  Eigen::VectorXd flat(n_params);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(n_params * sizeof(double)));
  if (!in) throw IoError("model file truncated");
  bundle.params.unflatten(flat);
  bundle.norm.offset = read_pod<double>(in);
  bundle.norm.scale = read_pod<double>(in);
  bundle.norm.degenerate = read_pod<uint8_t>(in) != 0;
  bundle.mean_size = read_pod<double>(in);
  bundle.knn = read_pod<int32_t>(in);
  return bundle;
}

SizingField predict_sizing(const ModelBundle& model, const SampleSet& samples,
                           const BoundaryMesh& domain) {
  const GraphBatch graph = build_graph(samples, domain, model.knn);
  const Eigen::VectorXd out = forward(model.params, graph);
  SizingField field;
  field.points = samples.points;
  field.sizes.resize(out.size());
  for (long i = 0; i < out.size(); ++i)
    field.sizes[i] = std::clamp(out[i], 0.0, 1.0);  // network output is unit scale
  field.normalized = true;
  field.norm = model.norm;
  SizingField physical = denormalize(field);
  for (int i : graph.isolated) physical.sizes[i] = model.mean_size;
  return physical;
}

}  // namespace lamg
