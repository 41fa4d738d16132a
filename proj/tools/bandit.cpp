#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "nbandit/bandit_env.hpp"
#include "nbandit/cli/config.hpp"
#include "nbandit/cli/plot.hpp"
#include "nbandit/cli/runner.hpp"
#include "nbandit/cli/verify_cmd.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const auto cfg = nbandit::cli::load_config(config_path);
  const auto result = nbandit::cli::run_experiment(cfg);
  for (const auto& row : result.rows)
    std::cout << row.algorithm << ": final regret " << row.mean_final_regret << " +- " << row.std_final_regret
              << " over " << row.runs << " runs\n";
  std::cout << "wrote " << result.summary.string() << '\n';
  return 0;
}

int cmd_fetch(const std::string& kind, const std::string& input, const std::string& output, int per_class,
              std::uint64_t seed) {
  const auto data = nbandit::load_uci(input, nbandit::parse_uci_kind(kind), per_class, seed);
  std::ofstream file;
  if (!output.empty()) {
    file.open(output, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + output);
  }
  std::ostream& out = output.empty() ? std::cout : file;
  out << std::setprecision(17) << "label";
  for (Eigen::Index j = 0; j < data.features.front().size(); ++j) out << ",x" << j;
  out << '\n';
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    out << data.labels[i];
    for (Eigen::Index j = 0; j < data.features[i].size(); ++j) out << ',' << data.features[i](j);
    out << '\n';
  }
  std::cerr << data.features.size() << " rows, " << data.num_classes << " classes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural contextual bandit experiments"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the experiment described by an INI config");
  run->add_option("config", config_path, "config file")->required();

  std::vector<std::string> csvs;
  std::string svg_out = "regret.svg";
  auto* plot = app.add_subcommand("plot", "plot cumulative regret CSVs as SVG");
  plot->add_option("csv", csvs, "regret CSV files")->required();
  plot->add_option("-o,--output", svg_out, "output SVG");

  std::string check, report_path;
  auto* verify = app.add_subcommand("verify", "run one empirical check (ntk krr coverage concentration dual)");
  verify->add_option("check", check, "check name")->required();
  verify->add_option("-o,--output", report_path, "report CSV (default: stdout)");

  std::string kind, input, fetch_out;
  int per_class = 500;
  std::uint64_t seed = 1;
  auto* data = app.add_subcommand("data", "dataset utilities");
  data->require_subcommand(1);
  auto* fetch = data->add_subcommand("fetch", "preprocess a pre-downloaded UCI file into a CSV");
  fetch->add_option("kind", kind, "mushroom or statlog")->required();
  fetch->add_option("path", input, "local raw data file")->required()->check(CLI::ExistingFile);
  fetch->add_option("-o,--output", fetch_out, "output CSV (default: stdout)");
  fetch->add_option("--per-class", per_class, "rows kept per class");
  fetch->add_option("--seed", seed, "subsampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*plot) {
      std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
      nbandit::cli::plot_files(paths, svg_out);
      return 0;
    }
    if (*verify) {
      if (report_path.empty()) return nbandit::cli::run_verify(check, std::cout, std::cerr);
      std::ofstream out(report_path, std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + report_path);
      return nbandit::cli::run_verify(check, out, std::cerr);
    }
    if (*fetch) return cmd_fetch(kind, input, fetch_out, per_class, seed);
  } catch (const nbandit::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
