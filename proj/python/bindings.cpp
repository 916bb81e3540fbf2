#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "gnas/arch_graph.hpp"
#include "gnas/cli.hpp"
#include "gnas/config.hpp"
#include "gnas/dataset.hpp"
#include "gnas/error.hpp"
#include "gnas/mem_model.hpp"
#include "gnas/search.hpp"

namespace py = pybind11;
using namespace gnas;

namespace {

// Genotypes, stats and results cross the boundary as JSON text; the Python
// wrapper converts them to dicts.

GraphStats stats_arg(const std::string& text) {
  if (text.empty()) return GraphStats{};
  GraphStats s = graph_stats_from_json(Json::parse(text));
  s.validate();
  return s;
}

RunConfig config_arg(const std::string& path) {
  return path.empty() ? default_config() : load_config(path);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the gnas toolkit";
  m.attr("__version__") = kToolVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("sample_genotype", [](int num_positions, std::uint64_t seed) {
    SpaceConfig cfg;
    cfg.num_positions = num_positions;
    return genotype_to_string(sample_genotype(DesignSpace(cfg), seed));
  }, py::arg("num_positions") = 12, py::arg("seed") = 0);

  m.def("canonicalize", [](const std::string& g) {
    return genotype_to_string(canonicalize(parse_genotype(g)));
  });

  m.def("dgcnn_preset", [] { return genotype_to_string(dgcnn_preset()); });

  m.def("cardinality", [](int num_positions, const std::string& level) {
    SpaceConfig cfg;
    cfg.num_positions = num_positions;
    CardinalityLevel l = CardinalityLevel::Joint;
    if (level == "operations") {
      l = CardinalityLevel::Operations;
    } else if (level == "functions") {
      l = CardinalityLevel::Functions;
    } else if (level != "joint") {
      throw ConfigError("level must be operations, functions or joint");
    }
    return DesignSpace(cfg).cardinality(l).str();
  }, py::arg("num_positions") = 12, py::arg("level") = "operations");

  m.def("estimate_peak_memory", [](const std::string& g, const std::string& stats) {
    return estimate_peak_memory(canonicalize(parse_genotype(g)), stats_arg(stats));
  }, py::arg("genotype"), py::arg("stats") = "");

  m.def("memory_trace", [](const std::string& g, const std::string& stats) {
    return memory_trace_to_json(simulate_memory_trace(canonicalize(parse_genotype(g)),
                                                      stats_arg(stats))).dump();
  }, py::arg("genotype"), py::arg("stats") = "");

  m.def("latency", [](const std::string& g, const std::string& device, const std::string& stats) {
    return latency(builtin_profile(device), canonicalize(parse_genotype(g)), stats_arg(stats));
  }, py::arg("genotype"), py::arg("device") = "gpu_like", py::arg("stats") = "");

  m.def("latency_breakdown",
        [](const std::string& g, const std::string& device, const std::string& stats) {
          const auto parts = breakdown(builtin_profile(device), canonicalize(parse_genotype(g)),
                                       stats_arg(stats));
          std::map<std::string, double> out;
          for (auto k : kAllOperations) out[std::string(to_string(k))] = parts[static_cast<int>(k)];
          return out;
        },
        py::arg("genotype"), py::arg("device") = "gpu_like", py::arg("stats") = "");

  m.def("device_names", [] {
    std::vector<std::string> names;
    for (const auto& d : builtin_profiles()) names.push_back(d.name);
    return names;
  });

  m.def("arch_graph", [](const std::string& g, const std::string& stats) {
    const ArchGraph ag = build_arch_graph(canonicalize(parse_genotype(g)), stats_arg(stats));
    return py::make_tuple(ag.adjacency, ag.features);
  }, py::arg("genotype"), py::arg("stats") = "");

  m.def("correlation", &correlation);

  m.def("search", [](const std::string& config_path, std::optional<std::uint64_t> seed) {
    RunConfig cfg = config_arg(config_path);
    if (seed) cfg.set_seed(*seed);
    if (cfg.search.hw_eval != HwEvalKind::CostModel) {
      throw ConfigError("the Python binding searches with the cost model only");
    }
    const CostModelEvaluator hw(cfg.device(cfg.search.device), cfg.stats);
    py::gil_scoped_release release;
    const auto r = run_search(DesignSpace(cfg.space), cfg.search,
                              make_accuracy_evaluator(cfg.search.accuracy_eval), hw,
                              config_hash(cfg));
    return to_json(r).dump();
  }, py::arg("config") = "", py::arg("seed") = py::none());

  m.def("gen_dataset", [](const std::string& config_path, std::int64_t count, std::uint64_t seed) {
    const RunConfig cfg = config_arg(config_path);
    std::ostringstream out;
    write_dataset(out, generate_records(cfg, count, seed), config_hash(cfg));
    return out.str();
  }, py::arg("config") = "", py::arg("count") = 10, py::arg("seed") = 0);

  m.def("config_hash", [](const std::string& config_path) {
    return config_hash(config_arg(config_path));
  }, py::arg("config") = "");

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"gnas"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
