#include "gnas/search.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "gnas/arch_graph.hpp"
#include "gnas/error.hpp"
#include "gnas/mem_model.hpp"
#include "gnas/rng.hpp"

namespace gnas {

// --- constraints & evaluators ----------------------------------------------

void Constraints::validate() const {
  if (!(c_lat_ms > 0.0)) throw ConfigError("c_lat_ms must be > 0");
  if (!(c_mem_bytes > 0.0)) throw ConfigError("c_mem_bytes must be > 0");
}

bool is_feasible(const EfficiencyMetrics& eff, const Constraints& c) {
  return eff.latency_ms < c.c_lat_ms && eff.peak_mem_bytes < c.c_mem_bytes;
}

CostModelEvaluator::CostModelEvaluator(DeviceProfile profile, GraphStats stats)
    : profile_(std::move(profile)), stats_(stats) {
  profile_.validate();
  stats_.validate();
}

EfficiencyMetrics CostModelEvaluator::evaluate(const Genotype& canonical) const {
  EfficiencyMetrics m;
  m.latency_ms = latency(profile_, canonical, stats_);
  m.peak_mem_bytes = static_cast<double>(estimate_peak_memory(canonical, stats_));
  m.energy_mj = energy(profile_, m.latency_ms);
  return m;
}

PredictorEvaluator::PredictorEvaluator(ModelWeights latency_model,
                                       std::optional<ModelWeights> memory_model,
                                       const DeviceProfile& device, GraphStats stats)
    : latency_(std::move(latency_model)),
      memory_(std::move(memory_model)),
      device_(device),
      stats_(stats) {
  stats_.validate();
  latency_device_ = latency_.config.device_index(device_.name);
  if (latency_device_ < 0) {
    throw ConfigError("latency predictor was not trained for device '" + device_.name + "'");
  }
  if (memory_) {
    memory_device_ = memory_->config.device_index(device_.name);
    if (memory_device_ < 0) {
      throw ConfigError("memory predictor was not trained for device '" + device_.name + "'");
    }
  }
}

EfficiencyMetrics PredictorEvaluator::evaluate(const Genotype& canonical) const {
  const ArchGraph ag = build_arch_graph(canonical, stats_);
  EfficiencyMetrics m;
  m.latency_ms = predict(latency_, ag, latency_device_);
  const double estimated = static_cast<double>(estimate_peak_memory(canonical, stats_));
  m.peak_mem_bytes =
      memory_ ? robust_peak_memory(predict(*memory_, ag, memory_device_), estimated) : estimated;
  m.energy_mj = energy(device_, m.latency_ms);
  return m;
}

double default_accuracy_landscape(const Genotype& g) {
  const Genotype c = canonicalize(g);
  int aggregates = 0;
  int combines = 0;
  int samples = 0;
  for (const auto& p : c.positions) {
    aggregates += p.op == OperationKind::Aggregate;
    combines += p.op == OperationKind::Combine;
    samples += p.op == OperationKind::Sample;
  }
  auto relative = [](MessageType t) {
    return t == MessageType::RelativePos || t == MessageType::SourceConcatRelative ||
           t == MessageType::TargetConcatRelative;
  };
  const bool bonus = relative(c.upper.message_type) || relative(c.lower.message_type);
  const double acc = 0.55 + 0.06 * std::min(aggregates, 3) + 0.04 * std::min(combines, 4) +
                     0.05 * std::min(samples, 1) - 0.02 * std::max(samples - 2, 0) +
                     (bonus ? 0.02 : 0.0);
  return std::clamp(acc, 0.0, 0.95);
}

AccuracyEvaluator make_accuracy_evaluator(const std::string& name) {
  if (name == "default") return default_accuracy_landscape;
  if (name == "constant") return [](const Genotype&) { return 0.5; };
  throw ConfigError("unknown accuracy landscape '" + name + "'");
}

// --- objective ---------------------------------------------------------------

std::string_view to_string(HwEvalKind k) {
  return k == HwEvalKind::CostModel ? "cost_model" : "predictor";
}

HwEvalKind parse_hw_eval(std::string_view s) {
  if (s == "cost_model") return HwEvalKind::CostModel;
  if (s == "predictor") return HwEvalKind::Predictor;
  throw ConfigError("unknown hw_eval '" + std::string(s) + "'");
}

void SearchConfig::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  constraints.validate();
  if (population < 2) throw ConfigError("population must be >= 2");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (t1() < 1 || t2() < 1) throw ConfigError("stage iteration budgets must be >= 1");
  if (stage1_samples < 1) throw ConfigError("stage1_samples must be >= 1");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) {
    throw ConfigError("mutation_rate must lie in [0, 1]");
  }
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) {
    throw ConfigError("crossover_rate must lie in [0, 1]");
  }
  if (elite_count < 0 || elite_count >= population) {
    throw ConfigError("elite_count must lie in [0, population)");
  }
  if (lat_ref_ms && !(*lat_ref_ms > 0.0)) throw ConfigError("lat_ref_ms must be > 0");
  if (mem_ref_bytes && !(*mem_ref_bytes > 0.0)) throw ConfigError("mem_ref_bytes must be > 0");
  stats.validate();
}

ObjectiveSpec resolve_objective(const SearchConfig& cfg, const HardwareEvaluator& hw) {
  ObjectiveSpec spec;
  spec.alpha = cfg.alpha;
  spec.beta = cfg.beta;
  spec.constraints = cfg.constraints;
  std::optional<EfficiencyMetrics> preset;
  auto preset_metrics = [&]() -> const EfficiencyMetrics& {
    if (!preset) preset = hw.evaluate(canonicalize(dgcnn_preset()));
    return *preset;
  };
  if (cfg.lat_ref_ms) {
    spec.lat_ref_ms = *cfg.lat_ref_ms;
  } else if (std::isfinite(cfg.constraints.c_lat_ms)) {
    spec.lat_ref_ms = cfg.constraints.c_lat_ms;
  } else {
    spec.lat_ref_ms = preset_metrics().latency_ms;
  }
  if (cfg.mem_ref_bytes) {
    spec.mem_ref_bytes = *cfg.mem_ref_bytes;
  } else if (std::isfinite(cfg.constraints.c_mem_bytes)) {
    spec.mem_ref_bytes = cfg.constraints.c_mem_bytes;
  } else {
    spec.mem_ref_bytes = preset_metrics().peak_mem_bytes;
  }
  return spec;
}

double objective(double accuracy, const EfficiencyMetrics& eff, const ObjectiveSpec& spec) {
  if (!(spec.alpha >= 0.0) || !(spec.beta >= 0.0)) {
    throw ConfigError("alpha and beta must be non-negative");
  }
  if (!is_feasible(eff, spec.constraints)) return 0.0;
  double normalized = 0.0;
  if (std::isfinite(spec.lat_ref_ms)) normalized += eff.latency_ms / spec.lat_ref_ms;
  if (std::isfinite(spec.mem_ref_bytes)) normalized += eff.peak_mem_bytes / spec.mem_ref_bytes;
  return spec.alpha * accuracy - spec.beta * normalized;
}

// --- evolution -------------------------------------------------------------

bool ranks_before(const Individual& a, const Individual& b) {
  if (a.feasible != b.feasible) return a.feasible;
  const double sa = a.score.value_or(-kUnbounded);
  const double sb = b.score.value_or(-kUnbounded);
  if (sa != sb) return sa > sb;
  return a.genotype < b.genotype;
}

std::vector<Individual> ea_step(const std::vector<Individual>& pop, const EaParams& params,
                                std::uint64_t seed, const Variation& variation) {
  if (pop.empty()) throw DomainError("ea_step needs a non-empty population");
  for (const auto& ind : pop) {
    if (!ind.score) throw DomainError("ea_step received an unscored individual");
  }
  const auto target = static_cast<std::size_t>(params.population);
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&pop](std::size_t a, std::size_t b) { return ranks_before(pop[a], pop[b]); });

  std::vector<Individual> next;
  next.reserve(target);
  const auto elites =
      std::min({static_cast<std::size_t>(std::max(params.elite_count, 0)), pop.size(), target});
  for (std::size_t i = 0; i < elites; ++i) next.push_back(pop[order[i]]);

  Rng rng(seed);
  auto tournament = [&]() -> const Individual& {
    const Individual& a = pop[rng.uniform_index(pop.size())];
    const Individual& b = pop[rng.uniform_index(pop.size())];
    return ranks_before(b, a) ? b : a;
  };
  while (next.size() < target) {
    const Individual& p1 = tournament();
    const Individual& p2 = tournament();
    const std::uint64_t cross_seed = rng.next();
    const std::uint64_t mut_seed = rng.next();
    Genotype child = rng.bernoulli(params.crossover_rate)
                         ? variation.crossover(p1.genotype, p2.genotype, cross_seed)
                         : p1.genotype;
    child = variation.mutate(child, mut_seed);
    next.push_back(Individual{std::move(child), std::nullopt, true});
  }
  return next;
}

namespace {

GenerationStats summarize(const std::vector<Individual>& pop) {
  GenerationStats s;
  const auto best = std::min_element(pop.begin(), pop.end(), ranks_before);
  s.best = best->score.value_or(0.0);
  double sum = 0.0;
  for (const auto& ind : pop) sum += ind.score.value_or(0.0);
  s.mean = sum / static_cast<double>(pop.size());
  return s;
}

struct Evaluation {
  double score = 0.0;
  bool feasible = false;
  double accuracy = 0.0;
  EfficiencyMetrics metrics;
};

/// Scores operation sequences once each; repeated candidates hit the cache.
class OperationScorer {
 public:
  OperationScorer(const AccuracyEvaluator& acc, const HardwareEvaluator& hw, ObjectiveSpec spec)
      : acc_(acc), hw_(hw), spec_(spec) {}

  const Evaluation& score(const Genotype& g) {
    const auto it = cache_.find(g);
    if (it != cache_.end()) return it->second;
    const Genotype canonical = canonicalize(g);
    Evaluation e;
    e.metrics = hw_.evaluate(canonical);
    e.feasible = is_feasible(e.metrics, spec_.constraints);
    // Infeasible candidates are not worth an accuracy evaluation.
    e.accuracy = e.feasible ? acc_(canonical) : 0.0;
    e.score = objective(e.accuracy, e.metrics, spec_);
    return cache_.emplace(g, e).first->second;
  }

  void apply(Individual& ind) {
    const Evaluation& e = score(ind.genotype);
    ind.score = e.score;
    ind.feasible = e.feasible;
  }

  std::int64_t evaluated() const { return static_cast<std::int64_t>(cache_.size()); }
  const std::map<Genotype, Evaluation>& cache() const { return cache_; }

 private:
  const AccuracyEvaluator& acc_;
  const HardwareEvaluator& hw_;
  ObjectiveSpec spec_;
  std::map<Genotype, Evaluation> cache_;
};

}  // namespace

FunctionSearchResult search_functions(const DesignSpace& space, const AccuracyEvaluator& acc,
                                      const SearchConfig& cfg) {
  cfg.validate();
  const std::uint64_t root = derive_seed(cfg.seed, "stage1");

  // Fixed operation configurations shared by every candidate pair.
  std::vector<std::vector<OperationKind>> probes;
  for (int j = 0; j < cfg.stage1_samples; ++j) {
    probes.push_back(space.sample_operations(derive_seed(root, "probe/" + std::to_string(j))));
  }

  const std::vector<OperationKind> placeholder(static_cast<std::size_t>(space.num_positions()),
                                               OperationKind::Connect);
  std::map<std::pair<FunctionSet, FunctionSet>, double> cache;
  auto score_pair = [&](Individual& ind) {
    const auto key = std::make_pair(ind.genotype.upper, ind.genotype.lower);
    auto it = cache.find(key);
    if (it == cache.end()) {
      double sum = 0.0;
      for (const auto& ops : probes) sum += acc(make_genotype(ops, key.first, key.second));
      it = cache.emplace(key, sum / static_cast<double>(probes.size())).first;
    }
    ind.score = it->second;
    ind.feasible = true;
  };

  std::vector<Individual> pop;
  for (int i = 0; i < cfg.population; ++i) {
    const std::uint64_t s = derive_seed(root, "init/" + std::to_string(i));
    Genotype g = make_genotype(placeholder, space.sample_function_set(derive_seed(s, 0)),
                               space.sample_function_set(derive_seed(s, 1)));
    pop.push_back(Individual{std::move(g), std::nullopt, true});
  }
  for (auto& ind : pop) score_pair(ind);

  Variation variation{
      [&](const Genotype& g, std::uint64_t s) {
        return space.mutate(g, cfg.mutation_rate, s, MutationScope::FunctionsOnly);
      },
      [&](const Genotype& a, const Genotype& b, std::uint64_t s) {
        return space.crossover(a, b, s);
      }};
  const EaParams params{cfg.population, cfg.elite_count, cfg.crossover_rate, cfg.mutation_rate};

  FunctionSearchResult out;
  Individual best = *std::min_element(pop.begin(), pop.end(), ranks_before);
  out.history.push_back(summarize(pop));
  for (int t = 1; t < cfg.t1(); ++t) {
    pop = ea_step(pop, params, derive_seed(root, "gen/" + std::to_string(t)), variation);
    for (auto& ind : pop) {
      score_pair(ind);
      if (ranks_before(ind, best)) best = ind;
    }
    out.history.push_back(summarize(pop));
  }
  out.upper = best.genotype.upper;
  out.lower = best.genotype.lower;
  out.score = *best.score;
  out.evaluated_count = static_cast<std::int64_t>(cache.size()) * cfg.stage1_samples;
  return out;
}

SearchResult search_operations(const DesignSpace& space, const FunctionSet& upper,
                               const FunctionSet& lower, const AccuracyEvaluator& acc,
                               const HardwareEvaluator& hw, const SearchConfig& cfg) {
  cfg.validate();
  const std::uint64_t root = derive_seed(cfg.seed, "stage2");
  OperationScorer scorer(acc, hw, resolve_objective(cfg, hw));

  std::vector<Individual> pop;
  for (int i = 0; i < cfg.population; ++i) {
    auto ops = space.sample_operations(derive_seed(root, "init/" + std::to_string(i)));
    pop.push_back(Individual{make_genotype(ops, upper, lower), std::nullopt, true});
  }
  for (auto& ind : pop) scorer.apply(ind);

  Variation variation{
      [&](const Genotype& g, std::uint64_t s) {
        return space.mutate(g, cfg.mutation_rate, s, MutationScope::PositionsOnly);
      },
      [&](const Genotype& a, const Genotype& b, std::uint64_t s) {
        return space.crossover(a, b, s);
      }};
  const EaParams params{cfg.population, cfg.elite_count, cfg.crossover_rate, cfg.mutation_rate};

  SearchResult out;
  Individual best = *std::min_element(pop.begin(), pop.end(), ranks_before);
  out.history.push_back(summarize(pop));
  for (int t = 1; t < cfg.t2(); ++t) {
    pop = ea_step(pop, params, derive_seed(root, "gen/" + std::to_string(t)), variation);
    for (auto& ind : pop) {
      scorer.apply(ind);
      if (ranks_before(ind, best)) best = ind;
    }
    out.history.push_back(summarize(pop));
  }

  out.evaluated_count = scorer.evaluated();
  const Evaluation& e = scorer.score(best.genotype);
  if (e.feasible) {
    out.feasible = true;
    out.best = best.genotype;
    out.best_score = e.score;
    out.metrics = e.metrics;
    out.accuracy = e.accuracy;
  }
  return out;
}

BruteForceResult brute_force_optimum(const DesignSpace& space, const FunctionSet& upper,
                                     const FunctionSet& lower, const AccuracyEvaluator& acc,
                                     const HardwareEvaluator& hw, const SearchConfig& cfg) {
  const BigInt total = space.cardinality(CardinalityLevel::Operations);
  if (total > BigInt(kBruteForceLimit)) {
    throw ConfigError("brute force refused: 4^" + std::to_string(space.num_positions()) +
                      " sequences exceed the limit of 10^6");
  }
  cfg.validate();
  OperationScorer scorer(acc, hw, resolve_objective(cfg, hw));
  const auto n = static_cast<std::size_t>(space.num_positions());
  const auto count = static_cast<std::uint64_t>(total);

  BruteForceResult out;
  std::optional<Individual> best;
  std::vector<OperationKind> ops(n);
  for (std::uint64_t code = 0; code < count; ++code) {
    std::uint64_t rest = code;
    for (std::size_t i = n; i-- > 0;) {
      ops[i] = kAllOperations[rest % kAllOperations.size()];
      rest /= kAllOperations.size();
    }
    Individual ind{make_genotype(ops, upper, lower), std::nullopt, true};
    scorer.apply(ind);
    if (!best || ranks_before(ind, *best)) best = std::move(ind);
  }
  out.evaluated_count = scorer.evaluated();
  out.feasible = best->feasible;
  out.score = *best->score;
  if (best->feasible) out.best = best->genotype;
  return out;
}

FullSearchResult run_search(const DesignSpace& space, const SearchConfig& cfg,
                            const AccuracyEvaluator& acc, const HardwareEvaluator& hw,
                            const std::string& config_hash) {
  FullSearchResult r;
  r.functions = search_functions(space, acc, cfg);
  r.operations = search_operations(space, r.functions.upper, r.functions.lower, acc, hw, cfg);
  r.seed = cfg.seed;
  r.config_hash = config_hash;
  r.evaluated_count = r.functions.evaluated_count + r.operations.evaluated_count;
  return r;
}

double correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DomainError("correlation: length mismatch");
  if (xs.size() < 2) throw DomainError("correlation needs at least two points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("undefined correlation");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// --- serialization -----------------------------------------------------------

namespace {

Json bound(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json optional_bound(const std::optional<double>& v) {
  return v ? bound(*v) : Json("auto");
}

Json history_json(const std::vector<GenerationStats>& h) {
  Json out = Json::array();
  for (const auto& g : h) out.push_back(Json::array({g.best, g.mean}));
  return out;
}

}  // namespace

Json to_json(const SearchConfig& cfg) {
  Json j;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["c_lat_ms"] = bound(cfg.constraints.c_lat_ms);
  j["c_mem_bytes"] = bound(cfg.constraints.c_mem_bytes);
  j["population"] = cfg.population;
  j["max_iterations"] = cfg.max_iterations;
  j["stage1_iterations"] = cfg.t1();
  j["stage2_iterations"] = cfg.t2();
  j["stage1_samples"] = cfg.stage1_samples;
  j["mutation_rate"] = cfg.mutation_rate;
  j["crossover_rate"] = cfg.crossover_rate;
  j["elite_count"] = cfg.elite_count;
  j["seed"] = cfg.seed;
  j["device"] = cfg.device;
  j["stats"] = to_json(cfg.stats);
  j["hw_eval"] = to_string(cfg.hw_eval);
  j["accuracy_eval"] = cfg.accuracy_eval;
  j["lat_ref_ms"] = optional_bound(cfg.lat_ref_ms);
  j["mem_ref_bytes"] = optional_bound(cfg.mem_ref_bytes);
  return j;
}

Json to_json(const EfficiencyMetrics& m) {
  Json j;
  j["latency_ms"] = m.latency_ms;
  j["peak_mem_bytes"] = m.peak_mem_bytes;
  j["energy_mj"] = m.energy_mj ? Json(*m.energy_mj) : Json(nullptr);
  return j;
}

Json to_json(const FullSearchResult& r) {
  const auto& ops = r.operations;
  Json j;
  j["feasible"] = ops.feasible;
  j["best"] = ops.best ? to_json(*ops.best) : Json(nullptr);
  j["best_canonical"] = ops.best ? to_json(canonicalize(*ops.best)) : Json(nullptr);
  j["best_score"] = ops.best_score;
  j["accuracy"] = ops.accuracy;
  j["metrics"] = to_json(ops.metrics);
  Json fns;
  fns["upper"] = to_json(r.functions.upper);
  fns["lower"] = to_json(r.functions.lower);
  fns["score"] = r.functions.score;
  fns["evaluated_count"] = r.functions.evaluated_count;
  fns["history"] = history_json(r.functions.history);
  j["functions"] = std::move(fns);
  j["history"] = history_json(ops.history);
  j["evaluated_count"] = r.evaluated_count;
  Json repro;
  repro["seed"] = r.seed;
  repro["config_hash"] = r.config_hash;
  repro["evaluated_count"] = r.evaluated_count;
  repro["tool_version"] = GNAS_VERSION;
  j["reproducibility"] = std::move(repro);
  return j;
}

std::string render_report(const FullSearchResult& r, const SearchConfig& cfg) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "search on " << cfg.device << " (" << to_string(cfg.hw_eval) << ", seed " << r.seed
     << ")\n";
  os << "  stage 1: upper " << to_json(r.functions.upper).dump() << "\n";
  os << "           lower " << to_json(r.functions.lower).dump() << "\n";
  os << "  function pair score " << r.functions.score << " over " << cfg.stage1_samples
     << " probe configurations\n";
  const auto& ops = r.operations;
  if (!ops.feasible) {
    os << "  stage 2: no feasible architecture found\n";
  } else {
    os << "  stage 2: best score " << ops.best_score << ", accuracy " << ops.accuracy << "\n";
    os << "  latency " << ops.metrics.latency_ms << " ms, peak memory "
       << ops.metrics.peak_mem_bytes << " bytes ("
       << ops.metrics.peak_mem_bytes / (1024.0 * 1024.0) << " MiB)";
    if (ops.metrics.energy_mj) os << ", energy " << *ops.metrics.energy_mj << " mJ";
    os << "\n  operations:";
    for (const auto& p : canonicalize(*ops.best).positions) {
      os << ' ' << (p.forced_identity ? std::string_view("identity") : to_string(p.op));
    }
    os << "\n";
  }
  os << "  evaluated " << r.evaluated_count << " candidates, config " << r.config_hash << "\n";
  return os.str();
}

}  // namespace gnas
