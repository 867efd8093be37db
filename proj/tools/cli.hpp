#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace bimetric::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kIoError = 3 };

// Every key of the config file and every flag of the binary, one to one.
struct RunConfig {
  // "files" reads the five paths below; "synthetic" generates one instance
  // per seed from the synth-* keys.
  std::string source = "files";
  std::string name;
  std::filesystem::path corpus_proxy;
  std::filesystem::path corpus_truth;
  std::filesystem::path queries_proxy;
  std::filesystem::path queries_truth;
  std::filesystem::path qrels;
  std::filesystem::path out_dir = "bimetric-out";
  std::filesystem::path csv;  // empty: <out_dir>/sweep.csv, "-": stdout

  std::size_t synth_n = 1000;
  std::size_t synth_queries = 100;
  std::size_t synth_dim = 8;
  double synth_C = 3.0;
  std::string synth_model = "linear";
  std::string synth_weights = "uniform";
  std::size_t synth_warp_features = 4;
  double synth_warp_frequency = 4.0;
  double synth_query_shift = 0.0;

  std::string index = "graph";  // graph, cover or all
  double alpha = 1.2;
  std::uint32_t cap = 64;  // 0: uncapped
  std::size_t beam_stage1 = 0;  // 0: 5000, or 30000 above a million points
  std::size_t beam_stage2 = 0;  // 0: Q
  double T = 1.0;
  double eps = 0.5;
  bool build_if_missing = true;

  std::vector<std::uint64_t> budgets{100, 200, 400, 800, 1600};
  std::vector<std::string> methods{"bimetric-ours", "bimetric-baseline"};
  // Stage-two starts for bimetric-ours: "top-Q/2", "top-<K>" or "default".
  // Several modes run ours once per mode.
  std::vector<std::string> start_modes{"top-Q/2"};
  std::size_t k = 10;
  std::vector<std::uint64_t> seeds{0};
  bool start_mode_column = false;
  bool wall_clock = true;

  // verify: factor for validate_c_approx (0 skips it) and the alpha to
  // check under D (0 skips it).
  double verify_C = 0.0;
  double verify_alpha_D = 0.0;

  // search: query ids (empty: all) and the budget.
  std::vector<std::uint32_t> query;
  std::uint64_t Q = 100;
  std::string method = "bimetric-ours";

  unsigned threads = 0;  // 0: hardware concurrency
};

// Parses argv, runs the chosen subcommand, and returns its exit code.
// Machine-readable results go to `out`, logs and errors to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bimetric::cli
