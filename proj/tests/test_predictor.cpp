#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gnas/config.hpp"
#include "gnas/dataset.hpp"
#include "gnas/design_space.hpp"
#include "gnas/error.hpp"
#include "gnas/predictor.hpp"
#include "gnas/rng.hpp"

using namespace gnas;

namespace {

PredictorConfig toy(int devices = 1) {
  PredictorConfig c;
  c.gcn_dims = {8, 8, 8};
  c.mlp_dims = {8, 4, 1};
  c.devices.clear();
  for (int i = 0; i < devices; ++i) c.devices.push_back("dev" + std::to_string(i));
  return c;
}

std::vector<TrainingSample> random_samples(int count, std::uint64_t seed, int devices = 1) {
  const DesignSpace space(SpaceConfig{});
  std::vector<TrainingSample> out;
  for (int i = 0; i < count; ++i) {
    TrainingSample s;
    s.graph = build_arch_graph(canonicalize(space.sample(derive_seed(seed, i))), GraphStats{});
    s.device_index = i % devices;
    s.target = 1.0 + i % 7;
    s.key = "s" + std::to_string(i);
    out.push_back(std::move(s));
  }
  return out;
}

double loss_of(const ModelWeights& w, const TrainingSample& s) {
  const double y = std::log(s.target) - w.target_log_offset;
  return std::abs(forward(w, s.graph, s.device_index) - y) / y;
}

// Largest per-tensor relative error between analytic and central-difference
// gradients of the log-space loss of one sample.
double gradient_error(const ModelWeights& w0, const TrainingSample& s) {
  ModelWeights w = w0;
  ForwardCache cache;
  const double y = std::log(s.target) - w.target_log_offset;
  const double out = forward(w, s.graph, s.device_index, &cache);
  ParameterSet grads = w.params.zeros_like();
  backward(w, cache, (out > y ? 1.0 : -1.0) / y, grads);

  auto params = w.params.tensors();
  auto analytic = grads.tensors();
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Eigen::MatrixXd& p = *params[t].second;
    Eigen::MatrixXd numeric(p.rows(), p.cols());
    constexpr double h = 1e-6;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double keep = p.data()[i];
      p.data()[i] = keep + h;
      const double up = loss_of(w, s);
      p.data()[i] = keep - h;
      const double down = loss_of(w, s);
      p.data()[i] = keep;
      numeric.data()[i] = (up - down) / (2 * h);
    }
    const double scale = std::max(numeric.norm(), 1e-8);
    worst = std::max(worst, (numeric - *analytic[t].second).norm() / scale);
  }
  return worst;
}

ModelWeights constant_model(double value) {
  ModelWeights w = init_model(toy(), 1);
  w.params.set_zero();
  w.target_log_offset = 0.0;
  w.params.bias[2](0, 0) = std::log(value);
  return w;
}

}  // namespace

TEST(Init, DeterministicAndBounded) {
  const ModelWeights a = init_model(toy(), 5);
  const ModelWeights b = init_model(toy(), 5);
  const auto ta = a.params.tensors();
  const auto tb = b.params.tensors();
  for (std::size_t t = 0; t < ta.size(); ++t) {
    EXPECT_TRUE(*ta[t].second == *tb[t].second);
    const Eigen::MatrixXd& m = *ta[t].second;
    EXPECT_TRUE(m.allFinite());
    if (ta[t].first.find("bias") != std::string::npos) {
      EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0);
    } else {
      EXPECT_LE(m.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(static_cast<double>(m.rows())));
    }
  }
  EXPECT_EQ(a.params.gcn[0].rows(), kFeatureWidth);
  EXPECT_EQ(a.params.mlp[0].rows(), 8 + 1);
}

TEST(Init, RejectsBadDims) {
  PredictorConfig c = toy();
  c.mlp_dims = {8, 4, 2};
  EXPECT_THROW(init_model(c, 1), ConfigError);
  c = toy();
  c.gcn_dims[1] = 0;
  EXPECT_THROW(init_model(c, 1), ConfigError);
}

TEST(Forward, ZeroWeightsGiveZero) {
  ModelWeights w = init_model(toy(), 1);
  w.params.set_zero();
  EXPECT_EQ(forward(w, build_arch_graph(dgcnn_preset(), GraphStats{}), 0), 0.0);
}

TEST(Forward, DeviceReachesHead) {
  const ModelWeights w = init_model(toy(2), 3);
  const ArchGraph ag = build_arch_graph(dgcnn_preset(), GraphStats{});
  EXPECT_NE(forward(w, ag, 0), forward(w, ag, 1));
  EXPECT_THROW(forward(w, ag, 2), DomainError);
}

TEST(Forward, EncodingVersionChecked) {
  const ModelWeights w = init_model(toy(), 3);
  ArchGraph ag = build_arch_graph(dgcnn_preset(), GraphStats{});
  ag.encoding_version = kEncodingVersion + 1;
  EXPECT_THROW(forward(w, ag, 0), DomainError);
}

TEST(Forward, PermutationInvariant) {
  const ModelWeights w = init_model(toy(), 4);
  const DesignSpace space(SpaceConfig{});
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const ArchGraph ag = build_arch_graph(canonicalize(space.sample(i)), GraphStats{});
    std::vector<Eigen::Index> perm(ag.node_count());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<Eigen::Index>(perm));
    ASSERT_NEAR(forward(w, ag, 0), forward(w, permute_nodes(ag, perm), 0), 1e-6);
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  const auto samples = random_samples(6, 17);
  for (std::uint64_t seed : {1, 2, 3}) {
    ModelWeights w = init_model(toy(), seed);
    w.target_log_offset = -1.0;
    for (const auto& s : samples) EXPECT_LT(gradient_error(w, s), 1e-4) << seed;
  }
}

TEST(Gradient, MeanPoolReadout) {
  PredictorConfig c = toy();
  c.readout = Readout::MeanPool;
  ModelWeights w = init_model(c, 9);
  w.target_log_offset = -1.0;
  for (const auto& s : random_samples(4, 18)) EXPECT_LT(gradient_error(w, s), 1e-4);
}

TEST(Batch, MatchesPerSamplePasses) {
  for (Readout r : {Readout::GlobalNode, Readout::MeanPool}) {
    PredictorConfig c = toy(2);
    c.readout = r;
    const ModelWeights w = init_model(c, 21);
    const auto samples = random_samples(9, 22, 2);
    std::vector<const TrainingSample*> batch;
    for (const auto& s : samples) batch.push_back(&s);
    auto grad_of = [](std::size_t i, double out) { return 0.5 * out - static_cast<double>(i); };

    ParameterSet expected = w.params.zeros_like();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      ForwardCache cache;
      const double out = forward(w, samples[i].graph, samples[i].device_index, &cache);
      backward(w, cache, grad_of(i, out), expected);
    }
    ParameterSet dbl = w.params.zeros_like();
    ParameterSet sgl = w.params.zeros_like();
    const auto out_d = forward_batch(w, batch, grad_of, &dbl, Precision::Double);
    const auto out_s = forward_batch(w, batch, grad_of, &sgl, Precision::Single);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double ref = forward(w, samples[i].graph, samples[i].device_index);
      EXPECT_NEAR(out_d[i], ref, 1e-12);
      EXPECT_NEAR(out_s[i], ref, 1e-5);
    }
    const auto te = expected.tensors();
    const auto td = dbl.tensors();
    const auto ts = sgl.tensors();
    for (std::size_t t = 0; t < te.size(); ++t) {
      const double scale = std::max(te[t].second->norm(), 1e-12);
      EXPECT_LT((*td[t].second - *te[t].second).norm() / scale, 1e-12) << te[t].first;
      EXPECT_LT((*ts[t].second - *te[t].second).norm() / scale, 1e-4) << te[t].first;
    }
  }
}

TEST(Mape, Examples) {
  EXPECT_NEAR(mape_loss({110}, {100}), 0.10, 1e-15);
  EXPECT_EQ(mape_loss({3, 4}, {3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(mape_loss({50, 150}, {100, 100}), 0.5);
  EXPECT_THROW(mape_loss({1}, {0}), DomainError);
  EXPECT_THROW(mape_loss({1, 2}, {1}), DomainError);
  EXPECT_THROW(mape_loss({}, {}), DomainError);
}

TEST(Scheduler, HalvesAfterPatience) {
  PlateauScheduler s(0.1, 0.5, 3);
  EXPECT_DOUBLE_EQ(s.step(1.0), 0.1);
  EXPECT_DOUBLE_EQ(s.step(1.0), 0.1);
  EXPECT_DOUBLE_EQ(s.step(1.0), 0.1);
  EXPECT_DOUBLE_EQ(s.step(1.0), 0.05);
  EXPECT_DOUBLE_EQ(s.step(0.5), 0.05);
  EXPECT_DOUBLE_EQ(s.step(0.6), 0.05);
}

TEST(Train, HistoryRecordsScheduler) {
  const auto samples = random_samples(40, 31);
  TrainConfig tc;
  tc.epochs = 30;
  tc.plateau_patience = 2;
  tc.learning_rate = 0.05;
  tc.seed = 4;
  const TrainResult r = train(init_model(toy(), 2), samples, tc);
  ASSERT_EQ(r.history.size(), 30u);
  PlateauScheduler replay(tc.learning_rate, tc.plateau_factor, tc.plateau_patience);
  for (const auto& e : r.history) {
    ASSERT_DOUBLE_EQ(e.learning_rate, replay.learning_rate());
    replay.step(e.val_mape);
  }
  EXPECT_LT(r.history.back().learning_rate, tc.learning_rate);
}

TEST(Train, SingleSampleSingleEpoch) {
  const auto samples = random_samples(1, 32);
  TrainConfig tc;
  tc.epochs = 1;
  const TrainResult r = train(init_model(toy(), 2), samples, tc);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.history[0].train_loss));
  EXPECT_THROW(train(init_model(toy(), 2), {}, tc), DomainError);
}

TEST(Train, BitwiseDeterministic) {
  const auto samples = random_samples(60, 33);
  TrainConfig tc;
  tc.epochs = 5;
  tc.seed = 11;
  const TrainResult a = train(init_model(toy(), 2), samples, tc);
  const TrainResult b = train(init_model(toy(), 2), samples, tc);
  const auto ta = a.weights.params.tensors();
  const auto tb = b.weights.params.tensors();
  for (std::size_t t = 0; t < ta.size(); ++t) EXPECT_TRUE(*ta[t].second == *tb[t].second);
  EXPECT_EQ(a.weights.target_log_offset, b.weights.target_log_offset);
}

TEST(Train, LearnsCostModelLabels) {
  RunConfig cfg = default_config();
  cfg.devices = {builtin_profile("gpu_like")};
  cfg.predictor.devices = {"gpu_like"};
  cfg.set_seed(7);
  const LabeledDataset data = [&] {
    std::stringstream ss;
    write_dataset(ss, generate_records(cfg, 400, 7), config_hash(cfg));
    return read_labeled_dataset(ss);
  }();
  const auto samples = make_samples(data, cfg.predictor);
  TrainConfig tc = cfg.train;
  tc.epochs = 40;
  const TrainResult r = train(init_model(cfg.predictor, 7), samples, tc);
  EXPECT_LT(r.history.back().train_loss, 0.5 * r.history.front().train_loss);

  // Held-out comparison against the best constant guess, the training median.
  std::vector<TrainingSample> val;
  std::vector<double> train_logs;
  for (const auto& s : samples) {
    if (in_training_split(s.key, tc.split_fraction)) {
      train_logs.push_back(std::log(s.target));
    } else {
      val.push_back(s);
    }
  }
  std::nth_element(train_logs.begin(), train_logs.begin() + train_logs.size() / 2,
                   train_logs.end());
  const double median = std::exp(train_logs[train_logs.size() / 2]);
  const EvalMetrics learned = evaluate(r.weights, val, {0.5});
  const EvalMetrics baseline = evaluate(constant_model(median), val, {0.5});
  EXPECT_LT(learned.mape, 0.5 * baseline.mape);
  EXPECT_GT(learned.within_bound[0].second, baseline.within_bound[0].second + 0.1);
}

TEST(Evaluate, ConstantAndPerfect) {
  std::vector<TrainingSample> two = random_samples(2, 40);
  two[0].target = 50;
  two[1].target = 150;
  const EvalMetrics m = evaluate(constant_model(100), two, {0.1});
  EXPECT_NEAR(m.mape, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(m.within_bound[0].second, 0.0);

  two[0].target = two[1].target = 100;
  const EvalMetrics p = evaluate(constant_model(100), two, {0.01, 0.05, 0.1});
  EXPECT_NEAR(p.mape, 0.0, 1e-12);
  for (const auto& [b, f] : p.within_bound) EXPECT_EQ(f, 1.0);
}

TEST(Evaluate, BoundsNested) {
  const auto samples = random_samples(50, 41);
  const EvalMetrics m = evaluate(init_model(toy(), 3), samples, {0.01, 0.05, 0.1, 0.5, 2.0});
  ASSERT_EQ(m.within_bound.size(), 5u);
  for (std::size_t i = 1; i < m.within_bound.size(); ++i) {
    EXPECT_GE(m.within_bound[i].second, m.within_bound[i - 1].second);
  }
  EXPECT_THROW(evaluate(init_model(toy(), 3), {}, {0.1}), DomainError);
}

TEST(WarmStart, CopiesSource) {
  const ModelWeights source = init_model(toy(), 1);
  ModelWeights target = init_model(toy(), 2);
  target.config.metric = TargetMetric::PeakMemory;
  const ModelWeights w = warm_start(target, source);
  const ArchGraph ag = build_arch_graph(dgcnn_preset(), GraphStats{});
  EXPECT_EQ(forward(w, ag, 0), forward(source, ag, 0));
  EXPECT_EQ(w.config.metric, TargetMetric::PeakMemory);

  PredictorConfig other = toy();
  other.gcn_dims = {8, 8, 4};
  EXPECT_THROW(warm_start(init_model(other, 1), source), ConfigError);
}

TEST(WarmStart, MemoryTrainingConverges) {
  RunConfig cfg = default_config();
  cfg.devices = {builtin_profile("gpu_like")};
  cfg.predictor.devices = {"gpu_like"};
  cfg.set_seed(3);
  std::stringstream ss;
  write_dataset(ss, generate_records(cfg, 300, 3), config_hash(cfg));
  const LabeledDataset data = read_labeled_dataset(ss);
  PredictorConfig mem_cfg = cfg.predictor;
  mem_cfg.metric = TargetMetric::PeakMemory;
  TrainConfig tc = cfg.train;
  tc.epochs = 20;
  TrainConfig mc = cfg.memory_train;
  mc.epochs = 20;
  const ModelWeights lat =
      train(init_model(cfg.predictor, 1), make_samples(data, cfg.predictor), tc).weights;
  const TrainResult warm =
      train(warm_start(init_model(mem_cfg, 2), lat), make_samples(data, mem_cfg), mc);
  EXPECT_EQ(warm.weights.config.metric, TargetMetric::PeakMemory);
  EXPECT_LT(warm.history.back().train_loss, 0.5 * warm.history.front().train_loss);
}

TEST(WeightsFile, RoundTripIsBitExact) {
  PredictorConfig c = toy(3);
  c.readout = Readout::MeanPool;
  ModelWeights w = init_model(c, 12);
  w.target_log_offset = -3.25;
  std::stringstream ss;
  save_weights(ss, w, {"0123456789abcdef", "9.9.9"});
  EXPECT_EQ(ss.str().substr(0, 8), "NASPRED1");
  const auto [back, stamp] = load_weights(ss);
  EXPECT_EQ(stamp.config_hash, "0123456789abcdef");
  EXPECT_EQ(stamp.tool_version, "9.9.9");
  EXPECT_EQ(back.config, w.config);
  EXPECT_EQ(back.target_log_offset, w.target_log_offset);
  const auto ta = w.params.tensors();
  const auto tb = back.params.tensors();
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t t = 0; t < ta.size(); ++t) {
    EXPECT_EQ(ta[t].first, tb[t].first);
    EXPECT_TRUE(*ta[t].second == *tb[t].second) << ta[t].first;
  }
}

TEST(WeightsFile, RejectsGarbage) {
  std::stringstream bad("NOTAFILE and more bytes");
  EXPECT_THROW(load_weights(bad), FormatError);
  std::stringstream truncated("NASPRED1");
  EXPECT_THROW(load_weights(truncated), FormatError);
}
