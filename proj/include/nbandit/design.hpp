#pragma once

// Incremental design in the gradient feature space, held in its dual (t×t)
// form.
//
// With features g_i = g(x_i; W0) and k̂(x, x') = g(x)·g(x')/m, the state keeps
// the Cholesky factor of λI + K̂ row by row. Via Woodbury,
//
//   σ̂²(x) = g(x)ᵀ Z⁻¹ g(x)/m = (k̂(x,x) - k̂_Xᵀ(λI + K̂)⁻¹k̂_X)/λ,
//   Z = λI + (1/m)Σ g_i g_iᵀ,
//
// and det(Z)/det(λI) = det(I + K̂/λ), so the p×p matrix Z is never formed.
// States are immutable values; design_add returns a new state that shares
// every unchanged row with its parent.

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "nbandit/network.hpp"

namespace nbandit {

struct ConfidenceParams {
  double rkhs_norm = 1.0;  // S
  double noise = 0.1;      // ν
  double lambda = 0.1;
  double delta = 0.1;

  void validate() const;
};

class DesignState {
 public:
  DesignState(NetConfig cfg, std::shared_ptr<const Weights> w0, double lambda);

  const NetConfig& config() const { return cfg_; }
  const Weights& initial_weights() const { return *w0_; }
  double lambda() const { return lambda_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  const Eigen::VectorXd& point(std::size_t i) const { return *points_[i]; }
  double reward(std::size_t i) const { return rewards_[i]; }
  const std::vector<double>& rewards() const { return rewards_; }

  /// g(x; W0) for a context, as used by every variance computation.
  GradientVector feature(const Eigen::VectorXd& x) const;

  /// K̂ as a dense matrix (for checks; O(t²)).
  Eigen::MatrixXd kernel_matrix() const;
  /// Lower-triangular factor of λI + K̂ as a dense matrix.
  Eigen::MatrixXd cholesky_factor() const;

  double logdet_now() const { return logdet_now_; }
  double logdet_fb() const { return logdet_fb_; }
  std::size_t fb_index() const { return fb_index_; }

  /// The per-add log-det increments, in insertion order.
  const std::vector<double>& logdet_increments() const { return increments_; }

  double posterior_variance_of_feature(const GradientVector& g) const;

  friend DesignState design_add(const DesignState& state, const Eigen::VectorXd& x, double y);
  friend DesignState mark_retrained(const DesignState& state);

 private:
  using Row = std::shared_ptr<const std::vector<double>>;

  // Solves L v = k̂_X(g) by forward substitution over the stored rows.
  Eigen::VectorXd solve_lower(const Eigen::VectorXd& k) const;
  Eigen::VectorXd cross_kernel(const GradientVector& g) const;

  NetConfig cfg_;
  std::shared_ptr<const Weights> w0_;
  double lambda_;
  std::vector<std::shared_ptr<const Eigen::VectorXd>> points_;
  std::vector<std::shared_ptr<const GradientVector>> features_;
  std::vector<Row> khat_rows_;  // row i holds K̂(i, 0..i)
  std::vector<Row> chol_rows_;  // row i holds L(i, 0..i)
  std::vector<double> rewards_;
  std::vector<double> increments_;
  double logdet_now_ = 0.0;
  double logdet_fb_ = 0.0;
  std::size_t fb_index_ = 0;
};

/// Appends (x, y). Throws FactorizationError if the new Schur complement is
/// not positive.
DesignState design_add(const DesignState& state, const Eigen::VectorXd& x, double y);

/// σ̂²(x); lies in [0, ‖g‖²/(λm)].
double posterior_variance(const DesignState& state, const Eigen::VectorXd& x);

/// det(Z)/det(Z_fb) = exp(logdet_now - logdet_fb).
double logdet_ratio(const DesignState& state);

/// Snapshot logdet_fb := logdet_now and fb_index := size().
DesignState mark_retrained(const DesignState& state);

/// Constant width 2S + ν√((2/λ)·log(1/δ)).
double beta_practical(const ConfidenceParams& cp);

/// 2S + ν√(log det(I + K̂/λ) + 2·log(1/δ)).
double beta_neural_ucb(const ConfidenceParams& cp, const DesignState& state);

}  // namespace nbandit
