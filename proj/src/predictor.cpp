#include "gnas/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gnas/error.hpp"
#include "gnas/rng.hpp"

namespace gnas {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kPlateauThreshold = 1e-4;
constexpr std::size_t kEvalBatch = 64;

Eigen::VectorXd leaky(const Eigen::VectorXd& z, double slope) {
  return z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Eigen::VectorXd leaky_grad(const Eigen::VectorXd& z, double slope) {
  return z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

template <typename Derived>
void check_finite(const Eigen::MatrixBase<Derived>& m, const char* stage, int layer) {
  if (!m.allFinite()) {
    throw DomainError(std::string("non-finite value in ") + stage + " layer " +
                      std::to_string(layer));
  }
}

/// Rounds every entry to the nearest float32 so weights survive the file
/// format unchanged.
void snap_to_storage(ParameterSet& p) {
  for (auto& [name, t] : p.tensors()) {
    *t = t->unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
  }
}

}  // namespace

// --- enums -----------------------------------------------------------------

std::string_view to_string(Readout r) {
  return r == Readout::GlobalNode ? "global_node" : "mean_pool";
}
std::string_view to_string(TargetMetric m) {
  return m == TargetMetric::Latency ? "latency" : "peak_memory";
}
Readout parse_readout(std::string_view s) {
  if (s == "global_node") return Readout::GlobalNode;
  if (s == "mean_pool") return Readout::MeanPool;
  throw ConfigError("unknown readout '" + std::string(s) + "'");
}
TargetMetric parse_target_metric(std::string_view s) {
  if (s == "latency") return TargetMetric::Latency;
  if (s == "peak_memory" || s == "memory") return TargetMetric::PeakMemory;
  throw ConfigError("unknown target metric '" + std::string(s) + "'");
}

// --- config ----------------------------------------------------------------

int PredictorConfig::device_index(const std::string& name) const {
  const auto it = std::find(devices.begin(), devices.end(), name);
  return it == devices.end() ? -1 : static_cast<int>(it - devices.begin());
}

void PredictorConfig::validate() const {
  for (int d : gcn_dims) {
    if (d < 1) throw ConfigError("gcn_dims entries must be >= 1");
  }
  for (int d : mlp_dims) {
    if (d < 1) throw ConfigError("mlp_dims entries must be >= 1");
  }
  if (mlp_dims[2] != 1) throw ConfigError("the last mlp dim must be 1");
  if (devices.empty()) throw ConfigError("predictor needs at least one device");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw ConfigError("leaky_slope must lie in [0, 1)");
  }
}

PredictorConfig PredictorConfig::full_scale() {
  PredictorConfig cfg;
  cfg.gcn_dims = {256, 512, 512};
  cfg.mlp_dims = {256, 128, 1};
  return cfg;
}

// --- parameters ------------------------------------------------------------

std::vector<std::pair<std::string, Eigen::MatrixXd*>> ParameterSet::tensors() {
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> out;
  for (int l = 0; l < 3; ++l) out.emplace_back("gcn" + std::to_string(l) + ".weight", &gcn[l]);
  for (int l = 0; l < 3; ++l) {
    out.emplace_back("mlp" + std::to_string(l) + ".weight", &mlp[l]);
    out.emplace_back("mlp" + std::to_string(l) + ".bias", &bias[l]);
  }
  return out;
}

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> ParameterSet::tensors() const {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> out;
  for (auto& [name, t] : const_cast<ParameterSet*>(this)->tensors()) out.emplace_back(name, t);
  return out;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet z = *this;
  z.set_zero();
  return z;
}

void ParameterSet::set_zero() {
  for (auto& [name, t] : tensors()) t->setZero();
}

ModelWeights init_model(const PredictorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  auto uniform = [&rng](Eigen::Index rows, Eigen::Index cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
    }
    return m;
  };

  ModelWeights w;
  w.config = cfg;
  int in = kFeatureWidth;
  for (int l = 0; l < 3; ++l) {
    w.params.gcn[l] = uniform(in, cfg.gcn_dims[l]);
    in = cfg.gcn_dims[l];
  }
  in = cfg.gcn_dims[2] + cfg.num_devices();
  for (int l = 0; l < 3; ++l) {
    w.params.mlp[l] = uniform(in, cfg.mlp_dims[l]);
    w.params.bias[l] = Eigen::MatrixXd::Zero(cfg.mlp_dims[l], 1);
    in = cfg.mlp_dims[l];
  }
  snap_to_storage(w.params);
  return w;
}

// --- forward / backward ----------------------------------------------------

double forward(const ModelWeights& w, const ArchGraph& ag, int device_index,
               ForwardCache* cache) {
  const auto& cfg = w.config;
  if (ag.encoding_version != cfg.encoding_version) {
    throw DomainError("architecture graph encoding version " +
                      std::to_string(ag.encoding_version) + " does not match predictor version " +
                      std::to_string(cfg.encoding_version));
  }
  if (device_index < 0 || device_index >= cfg.num_devices()) {
    throw DomainError("device index " + std::to_string(device_index) + " out of range");
  }
  const Eigen::Index m = ag.node_count();
  if (ag.adjacency.cols() != m || ag.features.rows() != m ||
      ag.features.cols() != w.params.gcn[0].rows()) {
    throw DomainError("architecture graph shape does not match the predictor");
  }

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.a_hat = ag.adjacency + Eigen::MatrixXd::Identity(m, m);
  c.h[0] = ag.features;
  for (int l = 0; l < 3; ++l) {
    c.s[l] = c.a_hat * c.h[l];
    c.z[l] = c.s[l] * w.params.gcn[l];
    check_finite(c.z[l], "graph-conv", l);
    c.h[l + 1] = c.z[l].cwiseMax(0.0);
  }

  const int d3 = cfg.gcn_dims[2];
  c.head_in = Eigen::VectorXd::Zero(d3 + cfg.num_devices());
  if (cfg.readout == Readout::GlobalNode) {
    c.readout_row = ag.global_index();
    c.head_in.head(d3) = c.h[3].row(c.readout_row).transpose();
  } else {
    c.head_in.head(d3) = c.h[3].colwise().mean().transpose();
  }
  c.head_in(d3 + device_index) = 1.0;

  const Eigen::VectorXd* in = &c.head_in;
  for (int l = 0; l < 3; ++l) {
    c.mlp_z[l] = w.params.mlp[l].transpose() * (*in) + w.params.bias[l].col(0);
    check_finite(c.mlp_z[l], "perceptron", l);
    c.mlp_a[l] = leaky(c.mlp_z[l], cfg.leaky_slope);
    in = &c.mlp_a[l];
  }
  c.output = c.mlp_a[2](0);
  return c.output;
}

void backward(const ModelWeights& w, const ForwardCache& c, double grad_output,
              ParameterSet& grads) {
  const double slope = w.config.leaky_slope;
  Eigen::VectorXd d = Eigen::VectorXd::Constant(1, grad_output);
  for (int l = 2; l >= 0; --l) {
    const Eigen::VectorXd dz = d.cwiseProduct(leaky_grad(c.mlp_z[l], slope));
    const Eigen::VectorXd& in = l == 0 ? c.head_in : c.mlp_a[l - 1];
    grads.mlp[l].noalias() += in * dz.transpose();
    grads.bias[l].col(0) += dz;
    d = w.params.mlp[l] * dz;
  }

  const int d3 = w.config.gcn_dims[2];
  const Eigen::Index m = c.h[3].rows();
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(m, d3);
  if (w.config.readout == Readout::GlobalNode) {
    dh.row(c.readout_row) = d.head(d3).transpose();
  } else {
    dh.rowwise() = d.head(d3).transpose() / static_cast<double>(m);
  }
  for (int l = 2; l >= 0; --l) {
    const Eigen::MatrixXd dz = dh.cwiseProduct((c.z[l].array() > 0.0).cast<double>().matrix());
    grads.gcn[l].noalias() += c.s[l].transpose() * dz;
    if (l > 0) dh.noalias() = c.a_hat.transpose() * (dz * w.params.gcn[l].transpose());
  }
}

template <typename T>
std::vector<double> forward_batch_impl(const ModelWeights& w,
                                       std::span<const TrainingSample* const> batch,
                                       const LossGradient& loss_grad, ParameterSet* grads) {
  using Eigen::Index;
  using MatrixXd = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  const auto& cfg = w.config;
  struct Params {
    std::array<MatrixXd, 3> gcn, mlp, bias;
  } P;
  for (int l = 0; l < 3; ++l) {
    P.gcn[l] = w.params.gcn[l].cast<T>();
    P.mlp[l] = w.params.mlp[l].cast<T>();
    P.bias[l] = w.params.bias[l].cast<T>();
  }
  std::vector<MatrixXd> adjacency;
  adjacency.reserve(batch.size());
  const Index nb = static_cast<Index>(batch.size());
  if (nb == 0) return {};
  const bool global = cfg.readout == Readout::GlobalNode;

  std::vector<Index> offset(batch.size() + 1, 0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const ArchGraph& ag = batch[b]->graph;
    if (ag.encoding_version != cfg.encoding_version) {
      throw DomainError("architecture graph encoding version " +
                        std::to_string(ag.encoding_version) +
                        " does not match predictor version " +
                        std::to_string(cfg.encoding_version));
    }
    const int dev = batch[b]->device_index;
    if (dev < 0 || dev >= cfg.num_devices()) {
      throw DomainError("device index " + std::to_string(dev) + " out of range");
    }
    const Index m = ag.node_count();
    if (ag.adjacency.cols() != m || ag.features.rows() != m ||
        ag.features.cols() != P.gcn[0].rows()) {
      throw DomainError("architecture graph shape does not match the predictor");
    }
    offset[b + 1] = offset[b] + m;
    adjacency.push_back(ag.adjacency.cast<T>());
  }
  const Index rows = offset.back();
  auto block = [&](MatrixXd& mat, std::size_t b) {
    return mat.middleRows(offset[b], offset[b + 1] - offset[b]);
  };
  // (A + I) H per graph.
  auto propagate = [&](MatrixXd& h) {
    MatrixXd out(h.rows(), h.cols());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      block(out, b).noalias() = adjacency[b] * block(h, b);
      block(out, b) += block(h, b);
    }
    return out;
  };
  // (A + I)^T D per graph.
  auto propagate_back = [&](MatrixXd& d) {
    MatrixXd out(d.rows(), d.cols());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      block(out, b).noalias() = adjacency[b].transpose() * block(d, b);
      block(out, b) += block(d, b);
    }
    return out;
  };

  MatrixXd h0(rows, P.gcn[0].rows());
  for (std::size_t b = 0; b < batch.size(); ++b) block(h0, b) = batch[b]->graph.features.cast<T>();
  std::array<MatrixXd, 3> s;
  std::array<MatrixXd, 3> z;
  s[0] = propagate(h0);
  z[0].noalias() = s[0] * P.gcn[0];
  check_finite(z[0], "graph-conv", 0);
  MatrixXd h1 = z[0].cwiseMax(T(0));
  s[1] = propagate(h1);
  z[1].noalias() = s[1] * P.gcn[1];
  check_finite(z[1], "graph-conv", 1);
  MatrixXd h2 = z[1].cwiseMax(T(0));

  const int d3 = cfg.gcn_dims[2];
  MatrixXd head_in = MatrixXd::Zero(nb, d3 + cfg.num_devices());
  std::vector<Index> readout(batch.size());
  if (global) {
    s[2].resize(nb, h2.cols());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& ag = batch[b]->graph;
      readout[b] = ag.global_index();
      s[2].row(b).noalias() = adjacency[b].row(readout[b]) * block(h2, b);
      s[2].row(b) += h2.row(offset[b] + readout[b]);
    }
    z[2].noalias() = s[2] * P.gcn[2];
    check_finite(z[2], "graph-conv", 2);
    head_in.leftCols(d3) = z[2].cwiseMax(T(0));
  } else {
    s[2] = propagate(h2);
    z[2].noalias() = s[2] * P.gcn[2];
    check_finite(z[2], "graph-conv", 2);
    const MatrixXd h3 = z[2].cwiseMax(T(0));
    for (std::size_t b = 0; b < batch.size(); ++b) {
      head_in.row(b).head(d3) = h3.middleRows(offset[b], offset[b + 1] - offset[b]).colwise().mean();
    }
  }
  for (std::size_t b = 0; b < batch.size(); ++b) head_in(b, d3 + batch[b]->device_index) = 1.0;

  const T slope = static_cast<T>(cfg.leaky_slope);
  std::array<MatrixXd, 3> mz;
  std::array<MatrixXd, 3> ma;
  const MatrixXd* in = &head_in;
  for (int l = 0; l < 3; ++l) {
    mz[l].noalias() = (*in) * P.mlp[l];
    mz[l].rowwise() += P.bias[l].col(0).transpose();
    check_finite(mz[l], "perceptron", l);
    ma[l] = mz[l].unaryExpr([slope](T v) { return v > T(0) ? v : slope * v; });
    in = &ma[l];
  }
  std::vector<double> out(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) out[b] = static_cast<double>(ma[2](static_cast<Index>(b), 0));
  if (!grads) return out;

  MatrixXd d(nb, 1);
  for (std::size_t b = 0; b < batch.size(); ++b) d(static_cast<Index>(b), 0) = static_cast<T>(loss_grad(b, out[b]));
  for (int l = 2; l >= 0; --l) {
    const MatrixXd dz =
        d.cwiseProduct(mz[l].unaryExpr([slope](T v) { return v > T(0) ? T(1) : slope; }));
    grads->mlp[l] += ((l == 0 ? head_in : ma[l - 1]).transpose() * dz).template cast<double>();
    grads->bias[l].col(0) += dz.colwise().sum().transpose().template cast<double>();
    d.noalias() = dz * P.mlp[l].transpose();
  }

  MatrixXd dh2;
  if (global) {
    const MatrixXd dz = d.leftCols(d3).cwiseProduct((z[2].array() > T(0)).template cast<T>().matrix());
    grads->gcn[2] += (s[2].transpose() * dz).template cast<double>();
    const MatrixXd ds = dz * P.gcn[2].transpose();
    dh2 = MatrixXd::Zero(rows, ds.cols());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      block(dh2, b).noalias() = adjacency[b].row(readout[b]).transpose() * ds.row(b);
      dh2.row(offset[b] + readout[b]) += ds.row(b);
    }
  } else {
    MatrixXd dh3(rows, d3);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Index m = offset[b + 1] - offset[b];
      block(dh3, b).rowwise() = d.row(b).head(d3) / static_cast<T>(m);
    }
    const MatrixXd dz = dh3.cwiseProduct((z[2].array() > T(0)).template cast<T>().matrix());
    grads->gcn[2] += (s[2].transpose() * dz).template cast<double>();
    MatrixXd ds = dz * P.gcn[2].transpose();
    dh2 = propagate_back(ds);
  }
  const MatrixXd dz1 = dh2.cwiseProduct((z[1].array() > T(0)).template cast<T>().matrix());
  grads->gcn[1] += (s[1].transpose() * dz1).template cast<double>();
  MatrixXd ds1 = dz1 * P.gcn[1].transpose();
  const MatrixXd dh1 = propagate_back(ds1);
  const MatrixXd dz0 = dh1.cwiseProduct((z[0].array() > T(0)).template cast<T>().matrix());
  grads->gcn[0] += (s[0].transpose() * dz0).template cast<double>();
  return out;
}

std::vector<double> forward_batch(const ModelWeights& w,
                                  std::span<const TrainingSample* const> batch,
                                  const LossGradient& loss_grad, ParameterSet* grads,
                                  Precision precision) {
  return precision == Precision::Single ? forward_batch_impl<float>(w, batch, loss_grad, grads)
                                        : forward_batch_impl<double>(w, batch, loss_grad, grads);
}

double predict(const ModelWeights& w, const ArchGraph& ag, int device_index) {
  return std::exp(forward(w, ag, device_index) + w.target_log_offset);
}

double mape_loss(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size()) throw DomainError("mape_loss: length mismatch");
  if (pred.empty()) throw DomainError("mape_loss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!(target[i] > 0.0)) throw DomainError("mape_loss: targets must be positive");
    sum += std::abs(pred[i] - target[i]) / target[i];
  }
  return sum / static_cast<double>(pred.size());
}

// --- training --------------------------------------------------------------

std::vector<TrainingSample> make_samples(const LabeledDataset& data, const PredictorConfig& cfg) {
  std::vector<TrainingSample> out;
  out.reserve(data.records.size());
  for (const auto& r : data.records) {
    const int dev = cfg.device_index(r.device);
    if (dev < 0) continue;
    TrainingSample s;
    s.graph = build_arch_graph(canonicalize(r.genotype), r.stats);
    s.device_index = dev;
    s.target = cfg.metric == TargetMetric::Latency ? r.latency_ms
                                                   : static_cast<double>(r.peak_mem_bytes);
    s.key = r.key;
    out.push_back(std::move(s));
  }
  return out;
}

TrainConfig TrainConfig::for_memory() {
  TrainConfig tc;
  tc.batch_size = 16;
  tc.learning_rate = 0.0003;
  return tc;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) {
    throw ConfigError("plateau_factor must lie in (0, 1]");
  }
  if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw ConfigError("split_fraction must lie in (0, 1)");
  }
}

bool in_training_split(const std::string& key, double split_fraction) {
  constexpr std::uint64_t kBuckets = 1'000'000;
  const std::uint64_t bucket = splitmix64(fnv1a64(key)) % kBuckets;
  return static_cast<double>(bucket) < split_fraction * static_cast<double>(kBuckets);
}

PlateauScheduler::PlateauScheduler(double lr, double factor, int patience)
    : lr_(lr), factor_(factor), patience_(patience),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::step(double metric) {
  if (metric < best_ * (1.0 - kPlateauThreshold)) {
    best_ = metric;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
  }
  return lr_;
}

TrainResult train(const ModelWeights& w, const std::vector<TrainingSample>& data,
                  const TrainConfig& tc) {
  tc.validate();
  if (data.empty()) throw DomainError("cannot train on an empty dataset");
  for (const auto& s : data) {
    if (!(s.target > 0.0) || !std::isfinite(s.target)) {
      throw DomainError("training targets must be positive and finite");
    }
  }

  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (in_training_split(data[i].key, tc.split_fraction) ? train_idx : val_idx).push_back(i);
  }
  if (train_idx.empty()) train_idx = val_idx;
  if (val_idx.empty()) val_idx = train_idx;

  TrainResult result;
  result.weights = w;
  ModelWeights& cur = result.weights;

  double min_log = std::numeric_limits<double>::infinity();
  for (std::size_t i : train_idx) min_log = std::min(min_log, std::log(data[i].target));
  cur.target_log_offset = min_log - 1.0;

  ParameterSet grads = cur.params.zeros_like();
  ParameterSet adam_m = grads;
  ParameterSet adam_v = grads;
  auto weights = cur.params.tensors();
  auto grad_t = grads.tensors();
  auto m_t = adam_m.tensors();
  auto v_t = adam_v.tensors();

  PlateauScheduler scheduler(tc.learning_rate, tc.plateau_factor, tc.plateau_patience);
  Rng rng(derive_seed(tc.seed, "train/shuffle"));
  std::int64_t step = 0;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = scheduler.learning_rate();
    std::vector<std::size_t> order = train_idx;
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    double mape_sum = 0.0;
    const auto batch = static_cast<std::size_t>(tc.batch_size);
    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      grads.set_zero();
      std::vector<const TrainingSample*> members;
      for (std::size_t k = start; k < end; ++k) members.push_back(&data[order[k]]);
      double batch_loss = 0.0;
      forward_batch(
          cur, members,
          [&](std::size_t i, double out) {
            const double target = members[i]->target;
            const double y = std::log(target) - cur.target_log_offset;
            const double err = out - y;
            batch_loss += std::abs(err) / y;
            mape_sum += std::abs(std::exp(out + cur.target_log_offset) - target) / target;
            const double sign = err > 0.0 ? 1.0 : (err < 0.0 ? -1.0 : 0.0);
            return sign / y * scale;
          },
          &grads, tc.precision);
      if (!std::isfinite(batch_loss)) {
        throw DomainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(b));
      }
      loss_sum += batch_loss;

      ++step;
      const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
      for (std::size_t t = 0; t < weights.size(); ++t) {
        Eigen::MatrixXd& p = *weights[t].second;
        const Eigen::MatrixXd& g = *grad_t[t].second;
        Eigen::MatrixXd& mm = *m_t[t].second;
        Eigen::MatrixXd& vv = *v_t[t].second;
        p *= (1.0 - lr * tc.weight_decay);
        mm = kAdamBeta1 * mm + (1.0 - kAdamBeta1) * g;
        vv = kAdamBeta2 * vv + (1.0 - kAdamBeta2) * g.cwiseProduct(g);
        p.array() -= lr * (mm.array() / bc1) / ((vv.array() / bc2).sqrt() + kAdamEps);
      }
    }

    double val_sum = 0.0;
    for (std::size_t start = 0; start < val_idx.size(); start += kEvalBatch) {
      std::vector<const TrainingSample*> members;
      for (std::size_t k = start; k < std::min(val_idx.size(), start + kEvalBatch); ++k) {
        members.push_back(&data[val_idx[k]]);
      }
      const auto outputs = forward_batch(cur, members, {}, nullptr, tc.precision);
      for (std::size_t i = 0; i < members.size(); ++i) {
        const double target = members[i]->target;
        val_sum += std::abs(std::exp(outputs[i] + cur.target_log_offset) - target) / target;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_idx.size());
    rec.train_mape = mape_sum / static_cast<double>(train_idx.size());
    rec.val_mape = val_sum / static_cast<double>(val_idx.size());
    rec.learning_rate = lr;
    if (!std::isfinite(rec.val_mape)) {
      throw DomainError("non-finite validation error at epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    scheduler.step(rec.val_mape);
  }

  snap_to_storage(cur.params);
  return result;
}

ModelWeights warm_start(const ModelWeights& target, const ModelWeights& source) {
  const auto& a = target.config;
  const auto& b = source.config;
  if (a.gcn_dims != b.gcn_dims || a.mlp_dims != b.mlp_dims ||
      a.num_devices() != b.num_devices() || a.readout != b.readout) {
    throw ConfigError("warm start requires identical predictor shapes");
  }
  if (a.encoding_version != b.encoding_version) {
    throw ConfigError("warm start requires identical encoding versions");
  }
  ModelWeights out = source;
  out.config.metric = a.metric;
  return out;
}

EvalMetrics evaluate(const ModelWeights& w, const std::vector<TrainingSample>& data,
                     const std::vector<double>& bounds) {
  if (data.empty()) throw DomainError("cannot evaluate on an empty dataset");
  EvalMetrics m;
  m.count = data.size();
  std::vector<double> rel(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    rel[i] = std::abs(predict(w, s.graph, s.device_index) - s.target) / s.target;
  }
  m.mape = std::accumulate(rel.begin(), rel.end(), 0.0) / static_cast<double>(rel.size());
  for (double b : bounds) {
    const auto hits = std::count_if(rel.begin(), rel.end(), [b](double r) { return r <= b; });
    m.within_bound.emplace_back(b, static_cast<double>(hits) / static_cast<double>(rel.size()));
  }
  return m;
}

}  // namespace gnas
