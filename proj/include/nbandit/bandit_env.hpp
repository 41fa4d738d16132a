#pragma once

// Contextual bandit environments: synthetic reward functions on the unit
// sphere and classification datasets turned into bandits by block one-hot
// embedding.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nbandit/rng.hpp"

namespace nbandit {

struct ContextSet {
  std::vector<Eigen::VectorXd> vectors;  // one unit vector per action
  int round = 0;

  int num_actions() const { return static_cast<int>(vectors.size()); }
};

enum class RewardKind { h1, h2, h3, classification };

RewardKind parse_reward_kind(const std::string& name);
std::string to_string(RewardKind kind);

struct RewardModel {
  RewardKind kind = RewardKind::h1;
  Eigen::VectorXd a;   // h1, h2: unit vector
  Eigen::MatrixXd A;   // h3
  int block_dim = 0;   // classification: feature dimension per action block
  int label = 0;       // classification: 0-based correct block of the current round
  double noise = 0.0;  // ν, Gaussian noise standard deviation
  double scale = 1.0;  // optional rescaling of synthetic rewards

  void validate() const;
};

/// h1: 4(a·x)², h2: 4 sin²(a·x), h3: ‖Ax‖, classification: 1 if x lives in
/// block `label` else 0.
double reward(const RewardModel& model, const Eigen::VectorXd& x);

/// reward(model, x) + N(0, ν²).
double observe(const RewardModel& model, const Eigen::VectorXd& x, Rng& rng);

/// K i.i.d. uniform points on S^{d-1}.
ContextSet sample_contexts(int d, int k, Rng& rng);

/// Draws a ~ U(S^{d-1}) for h1/h2 or A with N(0, 0.25) entries for h3.
RewardModel make_synthetic_model(RewardKind kind, int d, double noise, Rng& rng);

/// (0,…,x,…,0) ∈ R^{K·d} with x in block `block`.
Eigen::VectorXd block_embed(const Eigen::VectorXd& x, int block, int num_blocks);

/// One round's outcome.
struct Round {
  int t = 0;
  int action = 0;
  double observed = 0.0;
  double regret = 0.0;  // h(x*) - h(x_a) on noiseless means
};

struct RegretTrace {
  std::vector<double> cumulative;

  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

/// Appends R(t) = R(t-1) + round.regret. Negative regret is rejected.
RegretTrace regret_update(RegretTrace trace, const Round& round);

class Environment {
 public:
  virtual ~Environment() = default;

  virtual int context_dim() const = 0;
  virtual int num_actions() const = 0;
  /// Draws round t's context set (t is 1-based and strictly increasing).
  virtual const ContextSet& next_contexts() = 0;
  /// Noiseless mean reward of `action` in the current round.
  virtual double mean_reward(int action) const = 0;
  /// Noisy observation of `action` in the current round.
  virtual double pull(int action) = 0;

  /// Regret of `action` against the best mean in the current round.
  double regret_of(int action) const;
};

class SyntheticEnv final : public Environment {
 public:
  SyntheticEnv(RewardModel model, int d, int k, std::uint64_t seed);

  int context_dim() const override { return d_; }
  int num_actions() const override { return k_; }
  const ContextSet& next_contexts() override;
  double mean_reward(int action) const override;
  double pull(int action) override;

  const RewardModel& model() const { return model_; }

 private:
  RewardModel model_;
  int d_;
  int k_;
  Rng context_rng_;
  Rng noise_rng_;
  ContextSet current_;
  std::vector<double> means_;
};

struct Dataset {
  std::vector<Eigen::VectorXd> features;
  std::vector<int> labels;  // 1-based class ids
  int num_classes = 0;
};

/// Classification data as a K-armed bandit. Rows are visited in an order
/// shuffled by `seed`, reshuffled on every pass.
class ClassificationEnv final : public Environment {
 public:
  ClassificationEnv(Dataset data, double noise, std::uint64_t seed);

  int context_dim() const override { return block_dim_ * data_.num_classes; }
  int num_actions() const override { return data_.num_classes; }
  const ContextSet& next_contexts() override;
  double mean_reward(int action) const override;
  double pull(int action) override;

 private:
  void reshuffle();

  Dataset data_;
  int block_dim_;
  RewardModel model_;
  Rng shuffle_rng_;
  Rng noise_rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  ContextSet current_;
};

/// Wraps a labelled dataset (unit-norm rows, labels in [1, K]).
std::unique_ptr<ClassificationEnv> classification_to_bandit(Dataset data, double noise, std::uint64_t seed);

enum class UciKind { mushroom, statlog };

UciKind parse_uci_kind(const std::string& name);

/// Reads and preprocesses a UCI file:
///  - mushroom: label first (e/p → 1/2), drop veil-type, ordinal-encode the
///    21 remaining attributes in alphabetical category order;
///  - statlog: whitespace-separated, label last, drop the time column, map
///    {1} → 1 and {2,3,5,6,7} → 2, drop class 4.
/// Then min-max scale every column to [0, 1], L2-normalise rows and draw
/// `per_class` rows of each class with `seed`.
Dataset load_uci(const std::filesystem::path& path, UciKind kind, int per_class, std::uint64_t seed);

}  // namespace nbandit
