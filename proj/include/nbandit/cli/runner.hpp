#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nbandit/cli/config.hpp"

namespace nbandit::cli {

inline constexpr const char* kRegretHeader = "run_id,seed,algorithm,t,cumulative_regret,retrains_total,wall_ms";

struct SummaryRow {
  std::string algorithm;
  int runs = 0;
  double mean_final_regret = 0.0;
  double std_final_regret = 0.0;  // sample standard deviation, 0 for one run
};

struct RunResult {
  std::vector<std::filesystem::path> csv_files;  // one per algorithm, in config order
  std::filesystem::path summary;
  std::vector<SummaryRow> rows;
};

/// Worker count: BANDIT_THREADS if set and positive, else the hardware
/// concurrency, never more than `jobs`.
int worker_count(int jobs);

/// Sees each finished episode; calls are serialised but arrive in completion
/// order.
using EpisodeHook =
    std::function<void(const AlgorithmSpec& algorithm, std::uint64_t seed, const Policy& policy, const PolicyTrace&)>;

/// Runs every (seed, algorithm) episode, writes `<output>/<algorithm>.csv`
/// and `<output>/summary.csv`.
RunResult run_experiment(const ExperimentConfig& cfg, const EpisodeHook& hook = {});

/// CSV file name for an algorithm entry (':' and '/' become '_').
std::string csv_name(const std::string& algorithm);

}  // namespace nbandit::cli
