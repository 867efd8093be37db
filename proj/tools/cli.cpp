#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "bimetric/anngraph.hpp"
#include "bimetric/covertree.hpp"
#include "bimetric/dataset.hpp"
#include "bimetric/harness.hpp"
#include "bimetric/metric.hpp"
#include "bimetric/parallel.hpp"
#include "bimetric/seed.hpp"
#include "bimetric/synth.hpp"

namespace bimetric::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {}
  void operator()(const std::string& line) const { err_ << "bimetric: " << line << '\n'; }

 private:
  std::ostream& err_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string hex16(std::uint64_t value) {
  char text[17];
  std::snprintf(text, sizeof text, "%016llx", static_cast<unsigned long long>(value));
  return text;
}

void require_file(const fs::path& path, const char* key) {
  if (path.empty()) throw ConfigError(std::string(key) + " is not set");
  if (!fs::exists(path)) throw ConfigError(std::string(key) + ": no such file '" + path.string() + "'");
}

SynthParams synth_params(const RunConfig& config, std::uint64_t seed) {
  SynthParams params;
  params.name = config.name.empty() ? "synthetic" : config.name;
  params.n = config.synth_n;
  params.queries = config.synth_queries;
  params.dim = config.synth_dim;
  params.C = config.synth_C;
  if (config.synth_model == "linear") {
    params.model = ProxyModel::kLinear;
  } else if (config.synth_model == "warped") {
    params.model = ProxyModel::kWarped;
  } else {
    throw ConfigError("synth-model must be linear or warped");
  }
  if (config.synth_weights == "uniform") {
    params.weights = AxisWeights::kUniform;
  } else if (config.synth_weights == "bimodal") {
    params.weights = AxisWeights::kBimodal;
  } else {
    throw ConfigError("synth-weights must be uniform or bimodal");
  }
  params.warp_features = config.synth_warp_features;
  params.warp_frequency = config.synth_warp_frequency;
  params.query_shift = config.synth_query_shift;
  params.qrels_k = config.k;
  params.seed = seed;
  return params;
}

std::unique_ptr<BiMetricDataset> load_dataset(const RunConfig& config, std::uint64_t seed,
                                              bool tag_seed) {
  auto dataset = std::make_unique<BiMetricDataset>();
  if (config.source == "synthetic") {
    *dataset = generate_synthetic(synth_params(config, seed));
    if (tag_seed) dataset->name += "-s" + std::to_string(seed);
    return dataset;
  }
  if (config.source != "files") throw ConfigError("source must be files or synthetic");
  require_file(config.corpus_proxy, "corpus-proxy");
  require_file(config.corpus_truth, "corpus-truth");
  require_file(config.queries_proxy, "queries-proxy");
  require_file(config.queries_truth, "queries-truth");
  require_file(config.qrels, "qrels");
  dataset->name = config.name.empty() ? config.corpus_proxy.stem().string() : config.name;
  dataset->corpus_proxy = std::make_shared<const EmbeddingSet>(load_fvecs(config.corpus_proxy));
  dataset->corpus_truth = std::make_shared<const EmbeddingSet>(load_fvecs(config.corpus_truth));
  dataset->queries_proxy = std::make_shared<const EmbeddingSet>(load_fvecs(config.queries_proxy));
  dataset->queries_truth = std::make_shared<const EmbeddingSet>(load_fvecs(config.queries_truth));
  dataset->qrels = load_qrels(config.qrels);
  dataset->validate();
  return dataset;
}

std::vector<std::uint64_t> active_seeds(const RunConfig& config, const Log& log) {
  if (config.seeds.empty()) throw ConfigError("seeds is empty");
  if (config.source == "files" && config.seeds.size() > 1) {
    log("seeds only vary synthetic instances; using seed " + std::to_string(config.seeds.front()));
    return {config.seeds.front()};
  }
  return config.seeds;
}

GraphBuildOptions graph_options(const RunConfig& config, unsigned threads) {
  if (!(config.alpha > 1.0)) throw ConfigError("alpha must be > 1");
  GraphBuildOptions options;
  options.alpha = config.alpha;
  options.cap = config.cap == 0 ? std::nullopt : std::optional<std::uint32_t>(config.cap);
  options.threads = threads;
  return options;
}

fs::path graph_path(const RunConfig& config, const EmbeddingSet& corpus, MetricKind kind) {
  std::uint64_t h = fnv1a64(corpus.values().data(), corpus.values().size_bytes());
  h = fnv1a64(&config.alpha, sizeof config.alpha, h);
  h = fnv1a64(&config.cap, sizeof config.cap, h);
  return config.out_dir / ("graph-" + to_string(kind) + "-" + hex16(h) + ".bmag");
}

fs::path cover_path(const RunConfig& config, const EmbeddingSet& corpus) {
  std::uint64_t h = fnv1a64(corpus.values().data(), corpus.values().size_bytes());
  h = fnv1a64(&config.T, sizeof config.T, h);
  return config.out_dir / ("cover-" + hex16(h) + ".json");
}

struct GraphInfo {
  std::unique_ptr<ReachabilityGraph> graph;
  fs::path path;
  bool built = false;
  double seconds = 0.0;
};

GraphInfo obtain_graph(const RunConfig& config, const DistanceOracle& metric, bool allow_build,
                       unsigned threads, const Log& log) {
  GraphInfo info;
  info.path = graph_path(config, *metric.corpus(), metric.kind());
  if (fs::exists(info.path)) {
    info.graph = std::make_unique<ReachabilityGraph>(load_graph(info.path));
    return info;
  }
  if (!allow_build) {
    throw ConfigError("missing index '" + info.path.string() + "' (run build or set build-if-missing)");
  }
  log("building " + to_string(metric.kind()) + " graph over " +
      std::to_string(metric.corpus_size()) + " points");
  const auto start = std::chrono::steady_clock::now();
  info.graph = std::make_unique<ReachabilityGraph>(
      build_alpha_graph(metric, graph_options(config, threads)));
  info.seconds = seconds_since(start);
  info.built = true;
  fs::create_directories(config.out_dir);
  save_graph(info.path, *info.graph);
  return info;
}

json graph_json(const GraphInfo& info, MetricKind kind) {
  const auto& g = *info.graph;
  json out = {{"metric", to_string(kind)},
              {"path", info.path.string()},
              {"n", g.n},
              {"alpha", g.alpha},
              {"cap", g.cap ? json(*g.cap) : json(nullptr)},
              {"start_node", g.start_node},
              {"edges", g.edge_count()},
              {"max_outdegree", g.max_degree()},
              {"mean_outdegree", g.mean_degree()},
              {"built", info.built}};
  if (info.built) out["build_seconds"] = info.seconds;
  return out;
}

std::vector<MethodSpec> method_specs(const RunConfig& config) {
  if (config.methods.empty()) throw ConfigError("methods is empty");
  if (config.k == 0) throw ConfigError("k must be >= 1");
  std::vector<MethodSpec> specs;
  for (const auto& name : config.methods) {
    MethodSpec spec;
    try {
      spec.method = parse_method(name);
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
    spec.k = config.k;
    if (spec.method != Method::kBimetricOurs) {
      specs.push_back(spec);
      continue;
    }
    if (config.start_modes.empty()) throw ConfigError("start-modes is empty");
    for (const auto& mode : config.start_modes) {
      MethodSpec ours = spec;
      if (mode == "top-Q/2" || mode == "half-budget") {
        ours.start_mode = StartMode::kHalfBudget;
      } else if (mode == "default" || mode == "default-entry") {
        ours.start_mode = StartMode::kDefaultEntry;
      } else if (mode.rfind("top-", 0) == 0) {
        ours.start_mode = StartMode::kFixed;
        try {
          const long long count = std::stoll(mode.substr(4));
          if (count < 1) throw std::out_of_range(mode);
          ours.fixed_starts = static_cast<std::size_t>(count);
        } catch (const std::logic_error&) {
          throw ConfigError("bad start mode '" + mode + "'");
        }
      } else {
        throw ConfigError("bad start mode '" + mode + "'");
      }
      specs.push_back(ours);
    }
  }
  return specs;
}

bool needs_truth_graph(const std::vector<MethodSpec>& specs) {
  for (const auto& spec : specs) {
    if (spec.method == Method::kSingleMetric) return true;
  }
  return false;
}

void check_budgets(const RunConfig& config) {
  if (config.budgets.empty()) throw ConfigError("budgets is empty");
  for (std::size_t i = 0; i < config.budgets.size(); ++i) {
    if (config.budgets[i] < config.k) throw ConfigError("every budget must be >= k");
    if (i > 0 && config.budgets[i] <= config.budgets[i - 1]) {
      throw ConfigError("budgets must be strictly ascending");
    }
  }
}

// Dataset, indices and context for one seed; owns what the context points at.
struct Prepared {
  std::unique_ptr<BiMetricDataset> dataset;
  GraphInfo proxy;
  GraphInfo truth;
  SearchContext context;
};

std::unique_ptr<Prepared> prepare(const RunConfig& config, std::uint64_t seed, bool tag_seed,
                                  bool with_truth_graph, unsigned threads, const Log& log) {
  auto prepared = std::make_unique<Prepared>();
  prepared->dataset = load_dataset(config, seed, tag_seed);
  prepared->context = SearchContext::for_dataset(*prepared->dataset);
  auto& context = prepared->context;
  prepared->proxy = obtain_graph(config, context.d, config.build_if_missing, threads, log);
  context.proxy_graph = prepared->proxy.graph.get();
  if (with_truth_graph) {
    prepared->truth = obtain_graph(config, context.D, config.build_if_missing, threads, log);
    context.truth_graph = prepared->truth.graph.get();
  }
  if (config.beam_stage1 > 0) context.stage1_beam = config.beam_stage1;
  context.stage2_beam = config.beam_stage2;
  context.threads = threads;
  return prepared;
}

int cmd_gen_synth(RunConfig config, std::ostream& out, const Log& log) {
  config.source = "synthetic";
  const auto dataset = load_dataset(config, config.seeds.empty() ? 0 : config.seeds.front(), false);
  fs::create_directories(config.out_dir);
  const json paths = {{"corpus-proxy", (config.out_dir / "corpus_proxy.fvecs").string()},
                      {"corpus-truth", (config.out_dir / "corpus_truth.fvecs").string()},
                      {"queries-proxy", (config.out_dir / "queries_proxy.fvecs").string()},
                      {"queries-truth", (config.out_dir / "queries_truth.fvecs").string()},
                      {"qrels", (config.out_dir / "qrels.tsv").string()}};
  save_fvecs(paths["corpus-proxy"].get<std::string>(), *dataset->corpus_proxy);
  save_fvecs(paths["corpus-truth"].get<std::string>(), *dataset->corpus_truth);
  save_fvecs(paths["queries-proxy"].get<std::string>(), *dataset->queries_proxy);
  save_fvecs(paths["queries-truth"].get<std::string>(), *dataset->queries_truth);
  save_qrels(paths["qrels"].get<std::string>(), dataset->qrels);
  log("wrote " + dataset->name + " to " + config.out_dir.string());
  out << json{{"name", dataset->name},
              {"n", dataset->corpus_size()},
              {"queries", dataset->query_count()},
              {"proxy_dim", dataset->corpus_proxy->dim()},
              {"truth_dim", dataset->corpus_truth->dim()},
              {"files", paths}}
             .dump(2)
      << '\n';
  return kOk;
}

int cmd_stats(const RunConfig& config, std::ostream& out, const Log& log) {
  const auto seeds = active_seeds(config, log);
  const auto dataset = load_dataset(config, seeds.front(), false);
  StatsOptions options;
  options.seed = child_seed(seeds.front(), "stats");
  const auto stats = compute_stats(*dataset->corpus_proxy, options, dataset->corpus_truth.get());
  json report = json::parse(stats.to_json());
  report["dataset"] = dataset->name;
  report["queries"] = dataset->query_count();
  out << report.dump(2) << '\n';
  return kOk;
}

int cmd_build(const RunConfig& config, std::ostream& out, unsigned threads, const Log& log) {
  if (config.index != "graph" && config.index != "cover" && config.index != "all") {
    throw ConfigError("index must be graph, cover or all");
  }
  const auto seeds = active_seeds(config, log);
  const auto specs = method_specs(config);
  json report = json::array();
  for (const auto seed : seeds) {
    const auto dataset = load_dataset(config, seed, seeds.size() > 1);
    const auto context = SearchContext::for_dataset(*dataset);
    json entry = {{"dataset", dataset->name}, {"graphs", json::array()}};
    if (config.index != "cover") {
      entry["graphs"].push_back(
          graph_json(obtain_graph(config, context.d, true, threads, log), MetricKind::kProxy));
      if (needs_truth_graph(specs)) {
        entry["graphs"].push_back(
            graph_json(obtain_graph(config, context.D, true, threads, log), MetricKind::kTruth));
      }
    }
    if (config.index != "graph") {
      if (!(config.T >= 1.0)) throw ConfigError("T must be >= 1");
      CoverTreeOptions options;
      options.T = config.T;
      options.seed = child_seed(seed, "cover-scale");
      const auto start = std::chrono::steady_clock::now();
      const auto tree = build_cover_tree(context.d, options);
      const double elapsed = seconds_since(start);
      const auto path = cover_path(config, *dataset->corpus_proxy);
      fs::create_directories(config.out_dir);
      save_cover_tree(path, tree);
      entry["cover_tree"] = {{"path", path.string()},
                             {"T", tree.T},
                             {"nodes", tree.nodes.size()},
                             {"top_level", tree.top_level},
                             {"scale_exact", tree.scale_exact},
                             {"build_seconds", elapsed}};
    }
    report.push_back(entry);
  }
  out << (report.size() == 1 ? report[0] : report).dump(2) << '\n';
  return kOk;
}

int cmd_search(const RunConfig& config, std::ostream& out, unsigned threads, const Log& log) {
  RunConfig one = config;
  one.methods = {config.method};
  one.start_modes = {config.start_modes.empty() ? "top-Q/2" : config.start_modes.front()};
  const auto spec = method_specs(one).front();
  const auto seeds = active_seeds(config, log);
  auto prepared = prepare(config, seeds.front(), false, spec.method == Method::kSingleMetric,
                          threads, log);
  for (const auto id : config.query) {
    if (id >= prepared->dataset->query_count()) {
      throw ConfigError("query id " + std::to_string(id) + " out of range");
    }
  }
  prepared->context.query_ids = config.query;
  if (config.Q < spec.k) throw ConfigError("Q must be >= k");
  const auto outcomes = run_method(prepared->context, spec, config.Q);
  json results = json::array();
  for (const auto& outcome : outcomes) {
    results.push_back({{"query", outcome.query},
                       {"top_k", outcome.top_k},
                       {"calls_D", outcome.calls_D},
                       {"calls_d", outcome.calls_d}});
  }
  out << json{{"dataset", prepared->dataset->name},
              {"method", spec.label()},
              {"Q", config.Q},
              {"results", results}}
             .dump(2)
      << '\n';
  return kOk;
}

int cmd_sweep(const RunConfig& config, std::ostream& out, unsigned threads, const Log& log) {
  check_budgets(config);
  const auto specs = method_specs(config);
  const auto seeds = active_seeds(config, log);
  std::vector<std::unique_ptr<Prepared>> prepared;
  std::vector<SweepInstance> instances;
  for (const auto seed : seeds) {
    prepared.push_back(prepare(config, seed, seeds.size() > 1, needs_truth_graph(specs), threads, log));
    const auto& p = *prepared.back();
    log("ground truth for " + p.dataset->name);
    instances.push_back({p.dataset->name, p.context,
                         cached_truth(*p.dataset, config.k, config.out_dir, threads)});
  }
  SweepOptions options;
  options.record_wall_clock = config.wall_clock;
  options.on_cell = [&](const SweepRow& row, std::span<const QueryOutcome>) {
    log(row.dataset + " " + row.method + " Q=" + std::to_string(row.Q) +
        " recall@10=" + std::to_string(row.recall_at_10));
  };
  const auto result = sweep(instances, specs, config.budgets, options);
  if (config.csv == "-") {
    result.write_csv(out, config.start_mode_column);
    return kOk;
  }
  const fs::path path = config.csv.empty() ? config.out_dir / "sweep.csv" : config.csv;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  result.write_csv(path, config.start_mode_column);
  log("wrote " + std::to_string(result.rows.size()) + " rows to " + path.string());
  return kOk;
}

json counterexample_json(const std::optional<std::pair<NodeId, NodeId>>& pair) {
  if (!pair) return nullptr;
  return {{"p", pair->first}, {"q", pair->second}};
}

int cmd_verify(const RunConfig& config, std::ostream& out, unsigned threads, const Log& log) {
  const auto seeds = active_seeds(config, log);
  const auto dataset = load_dataset(config, seeds.front(), false);
  if (dataset->corpus_size() > 2000) throw ConfigError("verify needs n <= 2000 for exhaustive checks");
  const auto context = SearchContext::for_dataset(*dataset);
  json checks = json::array();
  bool ok = true;
  auto record = [&](json check) {
    if (!check["ok"].get<bool>()) {
      if (ok) log("FAILED " + check["name"].get<std::string>() + ": " + check.dump());
      ok = false;
    }
    checks.push_back(std::move(check));
  };

  if (config.index != "cover") {
    const auto info = obtain_graph(config, context.d, config.build_if_missing, threads, log);
    const auto& graph = *info.graph;
    const auto under_d = verify_shortcut_reachability(graph, context.d, graph.alpha);
    record({{"name", "reachability-d"},
            {"alpha", graph.alpha},
            {"ok", under_d.ok},
            {"counterexample", counterexample_json(under_d.counterexample)}});
    if (config.verify_alpha_D > 0.0) {
      const auto under_D = verify_shortcut_reachability(graph, context.D, config.verify_alpha_D);
      record({{"name", "reachability-D"},
              {"alpha", config.verify_alpha_D},
              {"ok", under_D.ok},
              {"counterexample", counterexample_json(under_D.counterexample)}});
    }
  }
  if (config.verify_C > 0.0) {
    const auto report =
        validate_c_approx(context.d, context.D, config.verify_C, PairSelection::exhaustive(), 1);
    json check = json::parse(report.to_json());
    check["name"] = "c-approximation";
    check["ok"] = report.ok();
    record(std::move(check));
  }
  if (config.index != "graph") {
    const auto path = cover_path(config, *dataset->corpus_proxy);
    CoverTree tree;
    if (fs::exists(path)) {
      tree = load_cover_tree(path);
    } else {
      CoverTreeOptions options;
      options.T = config.T;
      options.seed = child_seed(seeds.front(), "cover-scale");
      tree = build_cover_tree(context.d, options);
    }
    const auto check =
        verify_cover_tree(tree, context.d, config.verify_C > 0.0 ? &context.D : nullptr);
    record({{"name", "cover-tree"},
            {"ok", check.ok},
            {"explicit_nodes", check.explicit_nodes},
            {"levels", check.levels},
            {"failures", check.failures}});
  }
  out << json{{"dataset", dataset->name}, {"ok", ok}, {"checks", checks}}.dump(2) << '\n';
  return ok ? kOk : kVerifyFailed;
}

int cmd_truth_cache(const RunConfig& config, std::ostream& out, unsigned threads, const Log& log) {
  if (config.k == 0) throw ConfigError("k must be >= 1");
  const auto seeds = active_seeds(config, log);
  json report = json::array();
  for (const auto seed : seeds) {
    const auto dataset = load_dataset(config, seed, seeds.size() > 1);
    const auto truth = cached_truth(*dataset, config.k, config.out_dir, threads);
    report.push_back({{"dataset", dataset->name},
                      {"path", (config.out_dir / ("truth-" + hex16(dataset_hash(*dataset, config.k)) +
                                                  ".bmgt"))
                                   .string()},
                      {"queries", truth.size()},
                      {"k", config.k}});
  }
  out << (report.size() == 1 ? report[0] : report).dump(2) << '\n';
  return kOk;
}

void add_options(CLI::App& app, RunConfig& c) {
  app.add_option("--source", c.source, "Dataset source: files or synthetic")->capture_default_str();
  app.add_option("--name", c.name, "Dataset name for CSV rows");
  app.add_option("--corpus-proxy", c.corpus_proxy, "Corpus under the proxy model (fvecs)");
  app.add_option("--corpus-truth", c.corpus_truth, "Corpus under the truth model (fvecs)");
  app.add_option("--queries-proxy", c.queries_proxy, "Queries under the proxy model (fvecs)");
  app.add_option("--queries-truth", c.queries_truth, "Queries under the truth model (fvecs)");
  app.add_option("--qrels", c.qrels, "Relevance judgments (query doc grade)");
  app.add_option("--out-dir", c.out_dir, "Directory for indices, caches and CSVs")
      ->capture_default_str();
  app.add_option("--csv", c.csv, "Sweep CSV path; - for stdout");

  app.add_option("--synth-n", c.synth_n, "Synthetic corpus size")->capture_default_str();
  app.add_option("--synth-queries", c.synth_queries, "Synthetic query count")->capture_default_str();
  app.add_option("--synth-dim", c.synth_dim, "Synthetic ball dimension")->capture_default_str();
  app.add_option("--synth-C", c.synth_C, "Synthetic approximation factor")->capture_default_str();
  app.add_option("--synth-model", c.synth_model, "Proxy model: linear or warped")
      ->capture_default_str();
  app.add_option("--synth-weights", c.synth_weights, "Axis scales: uniform or bimodal")
      ->capture_default_str();
  app.add_option("--synth-warp-features", c.synth_warp_features, "Warped model feature count")
      ->capture_default_str();
  app.add_option("--synth-warp-frequency", c.synth_warp_frequency, "Warped model frequency")
      ->capture_default_str();
  app.add_option("--synth-query-shift", c.synth_query_shift,
                 "Displacement of each query before proxy embedding")
      ->capture_default_str();

  app.add_option("--index", c.index, "Indices to build or verify: graph, cover or all")
      ->capture_default_str();
  app.add_option("--alpha", c.alpha, "Graph pruning parameter")->capture_default_str();
  app.add_option("--cap", c.cap, "Max out-degree, 0 for uncapped")->capture_default_str();
  app.add_option("--beam-stage1", c.beam_stage1, "First-stage beam, 0 for size default")
      ->capture_default_str();
  app.add_option("--beam-stage2", c.beam_stage2, "Second-stage beam, 0 for Q")
      ->capture_default_str();
  app.add_option("--T", c.T, "Cover tree approximation parameter")->capture_default_str();
  app.add_option("--eps", c.eps, "Cover tree search epsilon")->capture_default_str();
  app.add_flag("--build-if-missing,!--no-build-if-missing", c.build_if_missing,
               "Build absent indices instead of failing")
      ->capture_default_str();

  app.add_option("--budgets", c.budgets, "Ascending D-call budgets")->capture_default_str();
  app.add_option("--methods", c.methods,
                 "bimetric-ours, bimetric-baseline and/or single-metric")
      ->capture_default_str();
  app.add_option("--start-modes", c.start_modes, "top-Q/2, top-<K> or default")
      ->capture_default_str();
  app.add_option("--k", c.k, "Result size")->capture_default_str();
  app.add_option("--seeds", c.seeds, "Seeds; each gives one synthetic instance")
      ->capture_default_str();
  app.add_flag("--start-mode-column,!--no-start-mode-column", c.start_mode_column,
               "Append a start_mode column to the CSV")
      ->capture_default_str();
  app.add_flag("--wall-clock,!--no-wall-clock", c.wall_clock,
               "Record wall seconds (off gives byte-stable CSVs)")
      ->capture_default_str();

  app.add_option("--verify-C", c.verify_C, "Check d <= D <= C d at this C, 0 to skip")
      ->capture_default_str();
  app.add_option("--verify-alpha-D", c.verify_alpha_D,
                 "Check reachability under D at this alpha, 0 to skip")
      ->capture_default_str();

  app.add_option("--query", c.query, "Query ids for search (default all)");
  app.add_option("--Q", c.Q, "Budget for search")->capture_default_str();
  app.add_option("--method", c.method, "Method for search")->capture_default_str();

  app.add_option("--threads", c.threads, "Worker threads, 0 for all cores")
      ->envname("BIMETRIC_THREADS")
      ->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig config;
  CLI::App app{"Bi-metric nearest neighbor search: build, search, verify, sweep."};
  app.set_config("--config", "", "TOML config; flags override its keys");
  app.require_subcommand(1);
  add_options(app, config);

  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic instance as fvecs + qrels");
  auto* stats = app.add_subcommand("stats", "Aspect ratio, doubling estimate, c_hat as JSON");
  auto* build = app.add_subcommand("build", "Build and persist indices, print stats as JSON");
  auto* search = app.add_subcommand("search", "Answer queries with one method as JSON");
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the budget sweep and write CSV");
  auto* verify = app.add_subcommand("verify", "Check index invariants, JSON report");
  auto* truth = app.add_subcommand("truth-cache", "Compute and cache ground truth");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  const Log log(err);
  try {
    const unsigned threads = resolve_threads(config.threads);
    if (gen->parsed()) return cmd_gen_synth(config, out, log);
    if (stats->parsed()) return cmd_stats(config, out, log);
    if (build->parsed()) return cmd_build(config, out, threads, log);
    if (search->parsed()) return cmd_search(config, out, threads, log);
    if (sweep_cmd->parsed()) return cmd_sweep(config, out, threads, log);
    if (verify->parsed()) return cmd_verify(config, out, threads, log);
    if (truth->parsed()) return cmd_truth_cache(config, out, threads, log);
  } catch (const IoError& e) {
    log(std::string("io error: ") + e.what());
    return kIoError;
  } catch (const FormatError& e) {
    log(std::string("format error: ") + e.what());
    return kIoError;
  } catch (const ParseError& e) {
    log(std::string("parse error: ") + e.what());
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    log(std::string("io error: ") + e.what());
    return kIoError;
  } catch (const std::exception& e) {
    log(std::string("config error: ") + e.what());
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace bimetric::cli
