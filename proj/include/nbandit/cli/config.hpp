#pragma once

// Experiment configuration, read from an INI file:
//
//   [experiment]   horizon, seeds, algorithms, output, wall_clock
//   [environment]  kind (h1|h2|h3|mushroom|statlog), dim, actions, noise,
//                  rescale, path, per_class
//   [network]      depth, width, smoothness
//   [train]        lambda, eta, epochs
//   [confidence]   rkhs_norm, noise, delta
//   [<algorithm>]  per-algorithm keys and overrides of the shared ones
//
// An algorithm entry is `type` or `type:label` (e.g. `neural_gcb:F1`); its
// section is named after the full entry.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "nbandit/algorithms.hpp"
#include "nbandit/bandit_env.hpp"

namespace nbandit::cli {

/// Thrown for every malformed config; the message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AlgorithmType { neural_gcb, neural_ucb, lin_ucb, random };

std::string to_string(AlgorithmType t);

struct AlgorithmSpec {
  std::string name;  // as listed, also the CSV `algorithm` column
  AlgorithmType type = AlgorithmType::random;
  NetConfig net;  // input_dim is filled in once the environment is known
  TrainSpec train;
  ConfidenceParams confidence;
  BatchSchedule batch;
  double sigma0 = 1.0;
  double eta0 = 0.2;
  double alpha0 = 0.0;  // <= 0: default 20·log T
  bool time_varying_beta = false;
  double lin_lambda = 1.0;
  double lin_delta = 0.1;
};

struct EnvironmentSpec {
  std::string kind = "h1";
  int dim = 5;
  int actions = 4;
  double noise = 0.1;
  double rescale = 1.0;
  std::filesystem::path path;  // UCI file for mushroom / statlog
  int per_class = 500;

  bool is_dataset() const { return kind == "mushroom" || kind == "statlog"; }
};

struct ExperimentConfig {
  int horizon = 1000;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output = "results";
  bool wall_clock = true;
  EnvironmentSpec environment;
  std::vector<AlgorithmSpec> algorithms;

  void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Environment for one seed. Synthetic reward parameters and dataset
/// subsamples are drawn from streams derived from `seed`.
std::unique_ptr<Environment> make_environment(const EnvironmentSpec& spec, std::uint64_t seed);

/// Policy for one seed on an environment of the given shape.
std::unique_ptr<Policy> make_policy(const AlgorithmSpec& spec, int horizon, const Environment& env,
                                    std::uint64_t seed);

}  // namespace nbandit::cli
