#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nbandit::cli {

struct RegretRow {
  int run_id = 0;
  std::uint64_t seed = 0;
  std::string algorithm;
  int t = 0;
  double cumulative_regret = 0.0;
  int retrains_total = 0;
  double wall_ms = 0.0;
};

/// Parses one regret CSV. Throws std::runtime_error on a header mismatch, a
/// malformed row or a file without data rows.
std::vector<RegretRow> read_regret_csv(const std::filesystem::path& path);

struct Curve {
  std::string algorithm;
  int runs = 0;
  std::vector<int> t;
  std::vector<double> mean;
  std::vector<double> std;  // sample std across runs at each t; 0 for one run
};

/// Groups rows by algorithm (first-seen order) and averages over runs.
/// Every run of an algorithm must cover the same rounds.
std::vector<Curve> aggregate_curves(const std::vector<RegretRow>& rows);

/// Mean line per algorithm plus a ±1 std band when it has two or more runs.
std::string render_svg(const std::vector<Curve>& curves);

void plot_files(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& output);

}  // namespace nbandit::cli
