#pragma once

// Bandit policies (NeuralGCB, NeuralUCB, LinUCB, uniform random, oracle)
// and the episode driver.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nbandit/bandit_env.hpp"
#include "nbandit/design.hpp"
#include "nbandit/network.hpp"

namespace nbandit {

enum class BatchMode { fixed, adaptive };

BatchMode parse_batch_mode(const std::string& name);

/// Per-level batch parameter q_r. Levels past the end of `q` reuse the last
/// entry, so {4, 20, 40} reads "q_1 = 4, q_2 = 20, q_r = 40 for r >= 3".
struct BatchSchedule {
  BatchMode mode = BatchMode::fixed;
  std::vector<double> q{1.0};

  double q_for(int level) const;  // level is 1-based
  void validate() const;
};

/// One neural model: a design over gradients at W0 plus the weights of its
/// most recent training run.
struct LevelModel {
  DesignState design;
  std::shared_ptr<const Weights> weights;  // W0 until the first retrain
  int retrains = 0;

  LevelModel(const NetConfig& cfg, std::shared_ptr<const Weights> w0, double lambda);
};

struct Predictions {
  std::vector<double> means;
  std::vector<double> sigmas;  // σ̂, not σ̂²
  bool retrained = false;
};

/// Fixed: |Ψ| - fb >= q. Adaptive: det(Z) > q·det(Z_fb), compared in logs.
bool needs_retrain(const DesignState& design, double q, BatchMode mode);

/// Variances from the design (gradients at W0), then a retrain from W0 on
/// the level's own samples if the batch rule fires, then means from the
/// current weights. Called with no contexts it only applies the retrain
/// rule.
Predictions get_predictions(LevelModel& level, const TrainSpec& spec, std::span<const Eigen::VectorXd> contexts,
                            double q, BatchMode mode);

/// (mean + β·σ, mean - β·σ)
std::pair<double, double> ucb_lcb(double mean, double sigma, double beta);

struct Decision {
  int action = 0;
  int level = 0;  // level r that produced the action (0 for flat policies)
  int label = 0;  // υ ∈ {1,2,3} for NeuralGCB, 0 otherwise
  int store_level = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  virtual Decision select(const ContextSet& contexts) = 0;
  virtual void update(const ContextSet& contexts, const Decision& decision, double y) = 0;
  /// Retrain counts per level (a single entry for flat neural policies).
  virtual std::vector<int> retrains_per_level() const { return {}; }
};

// ---------------------------------------------------------------- NeuralGCB

struct GcbConfig {
  int horizon = 1000;  // T
  double sigma0 = 1.0;
  double eta0 = 0.2;
  double alpha0 = 0.0;  // <= 0 means 20·log T
  BatchSchedule batch;
  NetConfig net;
  TrainSpec train;
  ConfidenceParams confidence;
  bool time_varying_beta = false;  // β = beta_neural_ucb per level instead of beta_practical

  int levels() const;  // R = ⌈log₂ T⌉, at least 1
  double alpha() const;
  void validate() const;
};

/// Per-level view handed to the selection rule.
struct LevelPredictions {
  std::vector<double> means;
  std::vector<double> sigmas;
  double beta = 0.0;
};

struct GcbSelection {
  Decision decision;
  std::vector<std::vector<int>> active_sets;  // Â_1, Â_2, … as visited
  std::vector<int> max_mu;                    // per visited level
};

/// The while-loop of one NeuralGCB round, independent of how predictions are
/// produced. `ctr` holds the exploitation counts of levels 1..R (index r-1).
/// `predict(r, active)` returns level-r predictions indexed by action; only
/// the entries of `active` are read.
GcbSelection gcb_select(const GcbConfig& cfg, int t, int num_actions, std::span<const int> ctr,
                        const std::function<LevelPredictions(int, const std::vector<int>&)>& predict);

struct GcbLevel {
  LevelModel model;
  int ctr = 0;
  int max_mu = 0;
  std::vector<std::pair<int, int>> psi;  // (t, υ_t)
};

class NeuralGcb final : public Policy {
 public:
  NeuralGcb(GcbConfig cfg, std::uint64_t seed);

  std::string name() const override { return "neural_gcb"; }
  Decision select(const ContextSet& contexts) override;
  void update(const ContextSet& contexts, const Decision& decision, double y) override;
  std::vector<int> retrains_per_level() const override;

  const GcbConfig& config() const { return cfg_; }
  const std::vector<GcbLevel>& levels() const { return levels_; }
  const GcbSelection& last_selection() const { return last_; }
  int rounds() const { return t_; }

 private:
  GcbConfig cfg_;
  std::shared_ptr<const Weights> w0_;
  std::vector<GcbLevel> levels_;
  GcbSelection last_;
  int t_ = 0;
};

struct RoundResult {
  Decision decision;
  Round round;
};

/// select → pull → update against `env`'s current context set.
RoundResult neural_gcb_round(NeuralGcb& policy, const ContextSet& contexts, Environment& env);

// ---------------------------------------------------------------- baselines

struct NeuralUcbConfig {
  BatchSchedule batch;
  NetConfig net;
  TrainSpec train;
  ConfidenceParams confidence;
};

class NeuralUcb final : public Policy {
 public:
  NeuralUcb(NeuralUcbConfig cfg, std::uint64_t seed);

  std::string name() const override { return "neural_ucb"; }
  Decision select(const ContextSet& contexts) override;
  void update(const ContextSet& contexts, const Decision& decision, double y) override;
  std::vector<int> retrains_per_level() const override { return {model_.retrains}; }

  const LevelModel& model() const { return model_; }

 private:
  NeuralUcbConfig cfg_;
  LevelModel model_;
};

RoundResult neural_ucb_round(NeuralUcb& policy, const ContextSet& contexts, Environment& env);

struct LinUcbConfig {
  double lambda = 1.0;
  double delta = 0.1;
  int horizon = 1000;
  int num_actions = 2;

  /// 1 + √(log(2TK/δ)/2).
  double beta() const;
};

/// Ridge regression on raw contexts with score θ̂·x + β√(xᵀA⁻¹x).
class LinUcb final : public Policy {
 public:
  LinUcb(LinUcbConfig cfg, int dim);

  std::string name() const override { return "lin_ucb"; }
  Decision select(const ContextSet& contexts) override;
  void update(const ContextSet& contexts, const Decision& decision, double y) override;

  Eigen::VectorXd theta() const;

 private:
  LinUcbConfig cfg_;
  Eigen::MatrixXd gram_;  // λI + XᵀX
  Eigen::VectorXd xty_;
};

RoundResult lin_ucb_round(LinUcb& policy, const ContextSet& contexts, Environment& env);

class UniformRandom final : public Policy {
 public:
  explicit UniformRandom(std::uint64_t seed);

  std::string name() const override { return "random"; }
  Decision select(const ContextSet& contexts) override;
  void update(const ContextSet&, const Decision&, double) override {}

 private:
  Rng rng_;
};

/// Plays the best noiseless mean of the environment it observes.
class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(const Environment& env) : env_(env) {}

  std::string name() const override { return "oracle"; }
  Decision select(const ContextSet& contexts) override;
  void update(const ContextSet&, const Decision&, double) override {}

 private:
  const Environment& env_;
};

// ---------------------------------------------------------------- episodes

struct TraceRow {
  int t = 0;
  int level = 0;
  int label = 0;
  int action = 0;
  double regret = 0.0;
  double cumulative_regret = 0.0;
  int retrains_total = 0;
  double wall_ms = 0.0;  // elapsed since the episode started
};

struct RetrainEvent {
  int t = 0;
  int level = 0;  // 1-based
};

struct PolicyTrace {
  std::vector<TraceRow> rows;
  std::vector<RetrainEvent> retrains;

  double final_regret() const { return rows.empty() ? 0.0 : rows.back().cumulative_regret; }
};

/// Drives T rounds. Errors are rethrown as std::runtime_error carrying the
/// round index. With `wall_clock` off every wall_ms is 0.
PolicyTrace run_episode(Policy& policy, Environment& env, int horizon, bool wall_clock = true);

}  // namespace nbandit
