#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gnas/arch_graph.hpp"
#include "gnas/device_cost.hpp"

namespace gnas {

enum class Readout : std::uint8_t { GlobalNode, MeanPool };
enum class TargetMetric : std::uint8_t { Latency, PeakMemory };

std::string_view to_string(Readout r);
std::string_view to_string(TargetMetric m);
Readout parse_readout(std::string_view s);
TargetMetric parse_target_metric(std::string_view s);

struct PredictorConfig {
  std::array<int, 3> gcn_dims{32, 32, 32};
  std::array<int, 3> mlp_dims{16, 8, 1};
  /// Device vocabulary of the one-hot input; its size is the device count.
  std::vector<std::string> devices{"gpu_like"};
  double leaky_slope = 0.01;
  int encoding_version = kEncodingVersion;
  Readout readout = Readout::GlobalNode;
  TargetMetric metric = TargetMetric::Latency;

  int num_devices() const { return static_cast<int>(devices.size()); }
  int device_index(const std::string& name) const;  // -1 when unknown
  void validate() const;

  /// 256-512-512 encoder and 256-128-1 head.
  static PredictorConfig full_scale();

  friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

/// Trainable tensors. Graph-conv weights are (in x out); perceptron weights
/// are (in x out) with column-vector biases.
struct ParameterSet {
  std::array<Eigen::MatrixXd, 3> gcn;
  std::array<Eigen::MatrixXd, 3> mlp;
  std::array<Eigen::MatrixXd, 3> bias;

  /// Stable (name, tensor) listing used for file I/O, optimizers and tests.
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> tensors();
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> tensors() const;

  ParameterSet zeros_like() const;
  void set_zero();
};

struct ModelWeights {
  PredictorConfig config;
  ParameterSet params;
  /// Predictions are exp(forward + offset); training picks the offset so the
  /// log-space targets start at 1.
  double target_log_offset = 0.0;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
ModelWeights init_model(const PredictorConfig& cfg, std::uint64_t seed);

/// Intermediate values kept for backpropagation.
struct ForwardCache {
  Eigen::MatrixXd a_hat;                 // A + I
  std::array<Eigen::MatrixXd, 4> h;      // h[0] = X, h[l] = relu(z[l-1])
  std::array<Eigen::MatrixXd, 3> s;      // a_hat * h[l]
  std::array<Eigen::MatrixXd, 3> z;      // s[l] * W_l
  Eigen::VectorXd head_in;               // readout || device one-hot
  std::array<Eigen::VectorXd, 3> mlp_z;  // pre-activations
  std::array<Eigen::VectorXd, 3> mlp_a;  // activations
  Eigen::Index readout_row = 0;
  double output = 0.0;
};

/// Three graph convolutions H <- relu((A + I) H W), readout, device one-hot,
/// three leaky-relu perceptron layers. Returns the log-space prediction.
/// Throws DomainError on shape mismatch or a non-finite intermediate.
double forward(const ModelWeights& w, const ArchGraph& ag, int device_index,
               ForwardCache* cache = nullptr);

/// Accumulates d(loss)/d(params) into `grads`, given d(loss)/d(output).
void backward(const ModelWeights& w, const ForwardCache& cache, double grad_output,
              ParameterSet& grads);

/// Natural-unit prediction (ms or bytes).
double predict(const ModelWeights& w, const ArchGraph& ag, int device_index);

/// mean(|pred - target| / target). Throws DomainError on length mismatch,
/// empty input or non-positive targets.
double mape_loss(const std::vector<double>& pred, const std::vector<double>& target);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainingSample {
  ArchGraph graph;
  int device_index = 0;
  double target = 0.0;  // natural units, > 0
  std::string key;      // split identity
};

/// Gradient of one sample's loss with respect to its log-space output.
using LossGradient = std::function<double(std::size_t index, double output)>;

enum class Precision : std::uint8_t { Single, Double };

/// Batched forward() over `batch`. With `grads`, also accumulates the
/// gradient of the summed per-sample losses described by `loss_grad`.
/// Only the readout row of the last graph-conv layer is computed.
std::vector<double> forward_batch(const ModelWeights& w,
                                  std::span<const TrainingSample* const> batch,
                                  const LossGradient& loss_grad = {},
                                  ParameterSet* grads = nullptr,
                                  Precision precision = Precision::Double);

/// Builds samples for `cfg.metric` from records whose device is in
/// `cfg.devices`; other records are skipped.
std::vector<TrainingSample> make_samples(const LabeledDataset& data, const PredictorConfig& cfg);

struct TrainConfig {
  int epochs = 250;
  int batch_size = 32;
  double learning_rate = 0.0008;
  double weight_decay = 0.01;
  double plateau_factor = 0.5;
  int plateau_patience = 10;
  std::uint64_t seed = 0;
  double split_fraction = 0.7;
  /// Arithmetic of the batched passes; optimizer state stays double.
  Precision precision = Precision::Single;

  /// Batch 16 and learning rate 0.0003.
  static TrainConfig for_memory();
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // log-space MAPE that is optimized
  double train_mape = 0.0;  // natural units, measured during the epoch
  double val_mape = 0.0;    // natural units, after the epoch
  double learning_rate = 0.0;
};

struct TrainResult {
  ModelWeights weights;
  std::vector<EpochRecord> history;
};

/// Deterministic split by hashed key: true for the training side.
bool in_training_split(const std::string& key, double split_fraction);

/// Reduces the learning rate by `factor` once the monitored metric has not
/// improved (relative threshold 1e-4) for `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience);
  /// Feeds one epoch's metric; returns the learning rate for the next epoch.
  double step(double metric);
  double learning_rate() const { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double best_;
  int bad_epochs_ = 0;
};

/// Mini-batch AdamW on the log-space MAPE. Throws DomainError on an empty
/// dataset or a non-finite loss (with epoch and batch index).
TrainResult train(const ModelWeights& w, const std::vector<TrainingSample>& data,
                  const TrainConfig& tc);

/// Copy of `source` with `target`'s metric; shapes and encoding must match.
ModelWeights warm_start(const ModelWeights& target, const ModelWeights& source);

struct EvalMetrics {
  double mape = 0.0;
  std::vector<std::pair<double, double>> within_bound;  // (bound, fraction)
  std::size_t count = 0;
};

EvalMetrics evaluate(const ModelWeights& w, const std::vector<TrainingSample>& data,
                     const std::vector<double>& bounds);

// ---------------------------------------------------------------------------
// Weights file: "NASPRED1", u64 little-endian header length, JSON header,
// little-endian float32 payloads at the header's byte offsets.
// ---------------------------------------------------------------------------

struct ArtifactStamp {
  std::string config_hash;
  std::string tool_version;
};

void save_weights(std::ostream& out, const ModelWeights& w, const ArtifactStamp& stamp);
void save_weights(const std::string& path, const ModelWeights& w, const ArtifactStamp& stamp);
std::pair<ModelWeights, ArtifactStamp> load_weights(std::istream& in);
std::pair<ModelWeights, ArtifactStamp> load_weights(const std::string& path);

Json to_json(const PredictorConfig& cfg);
PredictorConfig predictor_config_from_json(const Json& j);

}  // namespace gnas
