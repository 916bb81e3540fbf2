#include "gnas/cli.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gnas/arch_graph.hpp"
#include "gnas/config.hpp"
#include "gnas/dataset.hpp"
#include "gnas/error.hpp"
#include "gnas/mem_model.hpp"
#include "gnas/predictor.hpp"
#include "gnas/rng.hpp"
#include "gnas/search.hpp"

namespace gnas {

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig cfg = g.config_path.empty() ? default_config() : load_config(g.config_path);
  if (g.seed) cfg.set_seed(*g.seed);
  return cfg;
}

void emit(std::ostream& out, const Json& j) { out << j.dump(2) << '\n'; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// JSON text, "@path" or a path to a JSON file.
Genotype genotype_argument(const std::string& value) {
  const auto first = value.find_first_not_of(" \t\n");
  if (first != std::string::npos && value[first] == '{') return parse_genotype(value);
  return parse_genotype(read_file(value[0] == '@' ? value.substr(1) : value));
}

Genotype preset_argument(const std::string& name) {
  if (name == "dgcnn") return dgcnn_preset();
  throw ConfigError("unknown preset '" + name + "' (known: dgcnn)");
}

struct GraphOverrides {
  std::optional<std::int64_t> points;
  std::optional<std::int64_t> k;
  std::optional<std::int64_t> batch;
  std::optional<std::int64_t> dim;

  void attach(CLI::App* app) {
    app->add_option("--points", points, "Points per cloud");
    app->add_option("--k", k, "Neighbours per point");
    app->add_option("--batch", batch, "Batch size");
    app->add_option("--dim", dim, "Input feature width");
  }

  GraphStats apply(GraphStats s) const {
    if (points) s.num_points = *points;
    if (k) s.neighbors_per_node = *k;
    if (batch) s.batch_size = *batch;
    if (dim) s.input_feature_dim = *dim;
    s.validate();
    return s;
  }
};

struct ArchitectureArgs {
  std::string preset;
  std::string genotype;

  void attach(CLI::App* app) {
    auto* p = app->add_option("--preset", preset, "Built-in architecture (dgcnn)");
    auto* g = app->add_option("--genotype", genotype, "Genotype JSON text or file");
    p->excludes(g);
  }

  Genotype resolve() const {
    if (!preset.empty()) return preset_argument(preset);
    if (!genotype.empty()) return genotype_argument(genotype);
    throw ConfigError("one of --preset or --genotype is required");
  }
};

double mib(double bytes) { return bytes / (1024.0 * 1024.0); }

// --- subcommands -------------------------------------------------------------

int run_gen_dataset(const GlobalOptions& g, std::int64_t count, const std::string& out_path,
                    std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const auto records = generate_records(cfg, count, cfg.seed);
  const std::string hash = config_hash(cfg);
  if (out_path.empty() || out_path == "-") {
    write_dataset(out, records, hash);
    return kExitOk;
  }
  std::ofstream file(out_path, std::ios::trunc);
  if (!file) throw FormatError("cannot open '" + out_path + "' for writing");
  write_dataset(file, records, hash);
  file.close();
  if (!file) throw FormatError("failed to write '" + out_path + "'");
  Json summary{{"path", out_path},     {"records", records.size()},  {"seed", cfg.seed},
               {"config_hash", hash}, {"tool_version", kToolVersion}};
  if (g.json) {
    emit(out, summary);
  } else {
    out << "wrote " << records.size() << " records to " << out_path << " (config " << hash
        << ")\n";
  }
  return kExitOk;
}

void report_rejects(const LabeledDataset& data, std::ostream& err) {
  for (const auto& r : data.rejects) {
    err << "warning: skipped line " << r.line_number << ": " << r.reason << '\n';
  }
}

Json eval_json(const EvalMetrics& m) {
  Json bounds;
  for (const auto& [b, frac] : m.within_bound) {
    std::ostringstream key;
    key << b;
    bounds[key.str()] = frac;
  }
  return Json{{"count", m.count}, {"mape", m.mape}, {"within_bound", bounds}};
}

std::vector<TrainingSample> side_of(const std::vector<TrainingSample>& samples, double fraction,
                                    const std::string& split) {
  if (split == "all") return samples;
  std::vector<TrainingSample> out;
  for (const auto& s : samples) {
    if (in_training_split(s.key, fraction) == (split == "train")) out.push_back(s);
  }
  return out;
}

int run_train(const GlobalOptions& g, const std::string& data_path, const std::string& out_path,
              const std::string& metric, const std::vector<std::string>& devices,
              std::optional<int> epochs, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(g);
  PredictorConfig pc = cfg.predictor;
  pc.metric = parse_target_metric(metric);
  if (!devices.empty()) pc.devices = devices;
  pc.validate();
  TrainConfig tc = pc.metric == TargetMetric::Latency ? cfg.train : cfg.memory_train;
  if (epochs) tc.epochs = *epochs;

  const LabeledDataset data = read_labeled_dataset(data_path);
  report_rejects(data, err);
  const auto samples = make_samples(data, pc);
  if (samples.empty()) throw DomainError("no records match the predictor's devices");

  const TrainResult result = train(init_model(pc, derive_seed(tc.seed, "init")), samples, tc);
  const std::string hash = config_hash(cfg);
  save_weights(out_path, result.weights, ArtifactStamp{hash, kToolVersion});

  const auto held_out = side_of(samples, tc.split_fraction, "val");
  const EvalMetrics val = evaluate(result.weights, held_out.empty() ? samples : held_out,
                                   {0.05, 0.1, 0.2});
  const auto& last = result.history.back();
  Json summary{{"weights", out_path},
               {"metric", to_string(pc.metric)},
               {"devices", pc.devices},
               {"samples", samples.size()},
               {"epochs", result.history.size()},
               {"final_train_loss", last.train_loss},
               {"final_learning_rate", last.learning_rate},
               {"validation", eval_json(val)},
               {"config_hash", hash},
               {"tool_version", kToolVersion}};
  if (g.json) {
    emit(out, summary);
  } else {
    out << "trained " << to_string(pc.metric) << " predictor on " << samples.size()
        << " samples for " << result.history.size() << " epochs\n"
        << "validation MAPE " << val.mape << ", within 10%: " << val.within_bound[1].second
        << "\nweights written to " << out_path << '\n';
  }
  return kExitOk;
}

int run_eval(const GlobalOptions& g, const std::string& weights_path, const std::string& data_path,
             const std::string& split, std::vector<double> bounds, std::ostream& out,
             std::ostream& err) {
  const RunConfig cfg = resolve_config(g);
  const auto [w, stamp] = load_weights(weights_path);
  const LabeledDataset data = read_labeled_dataset(data_path);
  report_rejects(data, err);
  const auto samples = side_of(make_samples(data, w.config), cfg.train.split_fraction, split);
  if (samples.empty()) throw DomainError("no records to evaluate");
  if (bounds.empty()) bounds = {0.05, 0.1, 0.2};
  const EvalMetrics m = evaluate(w, samples, bounds);
  if (g.json) {
    Json j = eval_json(m);
    j["metric"] = to_string(w.config.metric);
    j["split"] = split;
    emit(out, j);
  } else {
    out << "MAPE " << m.mape << " over " << m.count << " samples\n";
    for (const auto& [b, frac] : m.within_bound) out << "  within " << b << ": " << frac << '\n';
  }
  return kExitOk;
}

int run_predict(const GlobalOptions& g, const std::string& weights_path,
                const ArchitectureArgs& arch, const GraphOverrides& over, std::string device,
                std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const auto [w, stamp] = load_weights(weights_path);
  if (device.empty()) device = w.config.devices.front();
  const int idx = w.config.device_index(device);
  if (idx < 0) throw ConfigError("model was not trained for device '" + device + "'");
  const GraphStats stats = over.apply(cfg.stats);
  const Genotype canonical = canonicalize(arch.resolve());
  const double value = predict(w, build_arch_graph(canonical, stats), idx);
  const bool latency_model = w.config.metric == TargetMetric::Latency;
  if (g.json) {
    emit(out, Json{{"metric", to_string(w.config.metric)},
                   {"device", device},
                   {latency_model ? "latency_ms" : "peak_mem_bytes", value}});
  } else {
    out << to_string(w.config.metric) << " on " << device << ": " << value
        << (latency_model ? " ms" : " bytes") << '\n';
  }
  return kExitOk;
}

int run_estimate_mem(const GlobalOptions& g, const ArchitectureArgs& arch,
                     const GraphOverrides& over, bool trace, const std::string& weights_path,
                     std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const GraphStats stats = over.apply(cfg.stats);
  const Genotype canonical = canonicalize(arch.resolve());
  const PeakEstimate est = estimate_peak_memory_detail(canonical, stats);
  Json j{{"peak_mem_bytes", est.peak},
         {"peak_mem_mib", mib(static_cast<double>(est.peak))},
         {"peak_checkpoint", est.peak_checkpoint},
         {"stats", to_json(stats)}};
  if (!weights_path.empty()) {
    const auto [w, stamp] = load_weights(weights_path);
    if (w.config.metric != TargetMetric::PeakMemory) {
      throw ConfigError("--weights must hold a peak_memory predictor");
    }
    const double predicted = predict(w, build_arch_graph(canonical, stats), 0);
    j["predicted_peak_mem_bytes"] = predicted;
    j["robust_peak_mem_bytes"] = robust_peak_memory(predicted, static_cast<double>(est.peak));
  }
  if (trace) j["trace"] = memory_trace_to_json(simulate_memory_trace(canonical, stats));
  if (g.json) {
    emit(out, j);
  } else {
    out << "peak memory " << est.peak << " bytes (" << std::setprecision(4)
        << mib(static_cast<double>(est.peak)) << " MiB) at " << est.peak_checkpoint << '\n';
  }
  return kExitOk;
}

std::unique_ptr<HardwareEvaluator> make_hw_evaluator(const RunConfig& cfg) {
  const DeviceProfile& device = cfg.device(cfg.search.device);
  if (cfg.search.hw_eval == HwEvalKind::CostModel) {
    return std::make_unique<CostModelEvaluator>(device, cfg.stats);
  }
  if (cfg.latency_weights.empty()) {
    throw ConfigError("hw_eval = predictor needs [search] latency_weights");
  }
  auto latency_model = load_weights(cfg.latency_weights).first;
  std::optional<ModelWeights> memory_model;
  if (!cfg.memory_weights.empty()) memory_model = load_weights(cfg.memory_weights).first;
  return std::make_unique<PredictorEvaluator>(std::move(latency_model), std::move(memory_model),
                                              device, cfg.stats);
}

int run_search_cmd(const GlobalOptions& g, const std::string& out_path, std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const DesignSpace space(cfg.space);
  const auto hw = make_hw_evaluator(cfg);
  const auto acc = make_accuracy_evaluator(cfg.search.accuracy_eval);
  const std::string hash = config_hash(cfg);
  const FullSearchResult result = run_search(space, cfg.search, acc, *hw, hash);
  Json j = to_json(result);
  j["config"] = to_json(cfg);
  if (!out_path.empty()) {
    std::ofstream file(out_path, std::ios::trunc);
    if (!file) throw FormatError("cannot open '" + out_path + "' for writing");
    file << j.dump(2) << '\n';
    if (!file) throw FormatError("failed to write '" + out_path + "'");
  }
  if (g.json) {
    emit(out, j);
  } else {
    out << render_report(result, cfg.search);
  }
  return result.operations.feasible ? kExitOk : kExitDomain;
}

/// Pearson matrix over the metric columns of a labeled dataset: latency and
/// energy per device plus peak memory.
int run_correlation(const GlobalOptions& g, const std::string& data_path, int samples,
                    std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(g);
  std::vector<ArchitectureRecord> records;
  if (!data_path.empty()) {
    std::ifstream in(data_path);
    if (!in) throw FormatError("cannot open dataset '" + data_path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        records.push_back(architecture_record_from_json(Json::parse(line)));
      } catch (const std::exception& e) {
        err << "warning: skipped line " << line_no << ": " << e.what() << '\n';
      }
    }
  } else {
    if (samples < 2) throw ConfigError("--samples must be >= 2");
    records = generate_records(cfg, samples, derive_seed(cfg.seed, "correlation"));
  }
  if (records.size() < 2) throw DomainError("correlation needs at least two records");

  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  auto column = [&](const std::string& name) -> std::vector<double>& {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return columns[i];
    }
    names.push_back(name);
    columns.emplace_back();
    return columns.back();
  };
  for (const auto& r : records) {
    for (const auto& l : r.labels) {
      column("latency_ms@" + l.device).push_back(l.latency_ms);
      column("energy_mj@" + l.device).push_back(l.energy_mj);
    }
    column("peak_mem_bytes").push_back(static_cast<double>(r.labels.front().peak_mem_bytes));
  }
  for (const auto& c : columns) {
    if (c.size() != records.size()) throw DomainError("records carry different device sets");
  }

  Json matrix = Json::array();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < columns.size(); ++j) {
      try {
        row.push_back(correlation(columns[i], columns[j]));
      } catch (const DomainError&) {
        row.push_back(nullptr);
      }
    }
    matrix.push_back(std::move(row));
  }
  if (g.json) {
    emit(out, Json{{"records", records.size()}, {"metrics", names}, {"matrix", matrix}});
  } else {
    out << "Pearson correlation over " << records.size() << " architectures\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
      out << std::setw(22) << std::left << names[i];
      for (const auto& v : matrix[i]) {
        out << ' ' << std::setw(7) << std::right << std::fixed << std::setprecision(3)
            << (v.is_null() ? std::nan("") : v.get<double>());
      }
      out << '\n';
    }
  }
  return kExitOk;
}

/// Collects the stamps of one artifact and checks they are present and
/// consistent.
int run_inspect(const GlobalOptions& g, const std::string& path, std::ostream& out) {
  const std::string bytes = read_file(path);
  Json report{{"path", path}};
  std::set<std::string> hashes;
  std::set<std::string> versions;
  std::size_t unstamped = 0;

  auto note = [&](const Json& j) {
    if (!j.is_object() || !j.contains("config_hash") || !j.contains("tool_version")) {
      ++unstamped;
      return;
    }
    hashes.insert(j.at("config_hash").get<std::string>());
    versions.insert(j.at("tool_version").get<std::string>());
  };

  if (bytes.size() >= 8 && std::memcmp(bytes.data(), "NASPRED1", 8) == 0) {
    std::istringstream in(bytes);
    const auto [w, stamp] = load_weights(in);
    report["kind"] = "predictor_weights";
    report["predictor"] = to_json(w.config);
    report["target_log_offset"] = w.target_log_offset;
    note(Json{{"config_hash", stamp.config_hash}, {"tool_version", stamp.tool_version}});
    if (stamp.config_hash.empty()) unstamped = 1;
  } else {
    Json whole;
    bool single = false;
    try {
      whole = Json::parse(bytes);
      single = whole.is_object() && whole.contains("reproducibility");
    } catch (const nlohmann::json::exception&) {
    }
    if (single) {
      report["kind"] = "search_report";
      note(whole.at("reproducibility"));
      report["best_score"] = whole.value("best_score", 0.0);
      report["feasible"] = whole.value("feasible", false);
    } else {
      report["kind"] = "dataset";
      std::istringstream in(bytes);
      std::string line;
      std::size_t lines = 0;
      std::size_t malformed = 0;
      while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++lines;
        try {
          note(Json::parse(line));
        } catch (const nlohmann::json::exception&) {
          ++malformed;
        }
      }
      report["lines"] = lines;
      report["malformed_lines"] = malformed;
      std::istringstream again(bytes);
      const LabeledDataset data = read_labeled_dataset(again);
      report["records"] = data.records.size();
      report["rejected_lines"] = data.rejects.size();
    }
  }

  report["config_hashes"] = hashes;
  report["tool_versions"] = versions;
  report["unstamped"] = unstamped;
  const bool consistent = unstamped == 0 && hashes.size() == 1 && versions.size() == 1;
  const bool version_match = consistent && *versions.begin() == kToolVersion;
  report["stamp_consistent"] = consistent;
  report["tool_version_matches"] = version_match;
  if (!g.config_path.empty() || g.seed) {
    const std::string current = config_hash(resolve_config(g));
    report["current_config_hash"] = current;
    report["config_matches"] = consistent && *hashes.begin() == current;
  }
  const bool verified = consistent && version_match;
  report["verified"] = verified;

  if (g.json) {
    emit(out, report);
  } else {
    out << path << ": " << report["kind"].get<std::string>() << '\n';
    out << "  config hash " << (hashes.empty() ? std::string("(none)") : *hashes.begin())
        << ", tool version " << (versions.empty() ? std::string("(none)") : *versions.begin())
        << '\n';
    out << "  " << (verified ? "stamps verified" : "stamp verification FAILED") << '\n';
  }
  return verified ? kExitOk : kExitDomain;
}

int run_preset_export(const GlobalOptions& g, const std::string& name, const std::string& out_path,
                      std::ostream& out) {
  const Genotype preset = preset_argument(name);
  const std::string text = to_json(preset).dump(g.json ? 2 : -1);
  if (!out_path.empty()) {
    std::ofstream file(out_path, std::ios::trunc);
    if (!file) throw FormatError("cannot open '" + out_path + "' for writing");
    file << text << '\n';
  } else {
    out << text << '\n';
  }
  return kExitOk;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hardware-aware graph network architecture search toolkit", "gnas"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--config", global.config_path, "INI configuration file");
  app.add_option("--seed", global.seed, "Override the configured root seed");
  app.add_flag("--json", global.json, "Machine-readable JSON on stdout");

  std::function<int()> action;

  auto* gen = app.add_subcommand("gen-dataset", "Sample and label architectures as JSONL");
  std::int64_t count = 0;
  std::string gen_out;
  gen->add_option("--count", count, "Number of records")->required();
  gen->add_option("--out,-o", gen_out, "Output path (stdout when omitted)");
  gen->callback([&] { action = [&] { return run_gen_dataset(global, count, gen_out, out); }; });

  auto* tr = app.add_subcommand("train-predictor", "Train a latency or memory predictor");
  std::string tr_data;
  std::string tr_out;
  std::string tr_metric = "latency";
  std::vector<std::string> tr_devices;
  std::optional<int> tr_epochs;
  tr->add_option("--data", tr_data, "Dataset JSONL")->required();
  tr->add_option("--out,-o", tr_out, "Weights output path")->required();
  tr->add_option("--metric", tr_metric, "latency or peak_memory")
      ->check(CLI::IsMember({"latency", "peak_memory"}));
  tr->add_option("--device", tr_devices, "Restrict to these devices");
  tr->add_option("--epochs", tr_epochs, "Override the configured epoch count");
  tr->callback([&] {
    action = [&] {
      return run_train(global, tr_data, tr_out, tr_metric, tr_devices, tr_epochs, out, err);
    };
  });

  auto* ev = app.add_subcommand("eval-predictor", "Score a predictor against labeled data");
  std::string ev_weights;
  std::string ev_data;
  std::string ev_split = "all";
  std::vector<double> ev_bounds;
  ev->add_option("--weights", ev_weights, "Weights file")->required();
  ev->add_option("--data", ev_data, "Dataset JSONL")->required();
  ev->add_option("--split", ev_split, "all, train or val")
      ->check(CLI::IsMember({"all", "train", "val"}));
  ev->add_option("--bounds", ev_bounds, "Relative error bounds")->delimiter(',');
  ev->callback([&] {
    action = [&] { return run_eval(global, ev_weights, ev_data, ev_split, ev_bounds, out, err); };
  });

  auto* pr = app.add_subcommand("predict", "Predict latency or memory for one architecture");
  std::string pr_weights;
  std::string pr_device;
  ArchitectureArgs pr_arch;
  GraphOverrides pr_over;
  pr->add_option("--weights", pr_weights, "Weights file")->required();
  pr->add_option("--device", pr_device, "Device name");
  pr_arch.attach(pr);
  pr_over.attach(pr);
  pr->callback([&] {
    action = [&] { return run_predict(global, pr_weights, pr_arch, pr_over, pr_device, out); };
  });

  auto* em = app.add_subcommand("estimate-mem", "Closed-form peak memory of an architecture");
  ArchitectureArgs em_arch;
  GraphOverrides em_over;
  bool em_trace = false;
  std::string em_weights;
  em_arch.attach(em);
  em_over.attach(em);
  em->add_flag("--trace", em_trace, "Include the simulated allocation trace");
  em->add_option("--weights", em_weights, "Memory predictor to combine with the estimate");
  em->callback([&] {
    action = [&] { return run_estimate_mem(global, em_arch, em_over, em_trace, em_weights, out); };
  });

  auto* se = app.add_subcommand("search", "Two-stage evolutionary architecture search");
  std::string se_out;
  se->add_option("--out,-o", se_out, "Also write the JSON report here");
  se->callback([&] { action = [&] { return run_search_cmd(global, se_out, out); }; });

  auto* co = app.add_subcommand("analyze-correlation",
                                "Latency vs. peak memory correlation per device");
  int co_samples = 1000;
  std::string co_data;
  co->add_option("--data", co_data, "Architecture-record JSONL (sampled when omitted)");
  co->add_option("--samples", co_samples, "Architectures to sample without --data");
  co->callback([&] {
    action = [&] { return run_correlation(global, co_data, co_samples, out, err); };
  });

  auto* in = app.add_subcommand("inspect", "Show and verify the stamps of an artifact");
  std::string in_path;
  in->add_option("path", in_path, "Dataset, weights file or search report")->required();
  in->callback([&] { action = [&] { return run_inspect(global, in_path, out); }; });

  auto* pe = app.add_subcommand("preset-export", "Print a built-in architecture as JSON");
  std::string pe_name = "dgcnn";
  std::string pe_out;
  pe->add_option("--preset", pe_name, "Preset name");
  pe->add_option("--out,-o", pe_out, "Output path");
  pe->callback([&] { action = [&] { return run_preset_export(global, pe_name, pe_out, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
}

}  // namespace gnas
