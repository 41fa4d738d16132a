#include "nbandit/design.hpp"

#include <cmath>

#include "nbandit/ntk.hpp"

namespace nbandit {

void ConfidenceParams::validate() const {
  if (!(rkhs_norm > 0.0)) throw std::invalid_argument("ConfidenceParams: S must be > 0");
  if (!(noise >= 0.0)) throw std::invalid_argument("ConfidenceParams: nu must be >= 0");
  if (!(lambda > 0.0)) throw std::invalid_argument("ConfidenceParams: lambda must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("ConfidenceParams: delta must be in (0, 1)");
}

DesignState::DesignState(NetConfig cfg, std::shared_ptr<const Weights> w0, double lambda)
    : cfg_(cfg), w0_(std::move(w0)), lambda_(lambda) {
  cfg_.validate();
  if (!w0_) throw std::invalid_argument("DesignState: missing initial weights");
  check_weights(cfg_, *w0_);
  if (!(lambda_ > 0.0)) throw std::invalid_argument("DesignState: lambda must be > 0");
}

GradientVector DesignState::feature(const Eigen::VectorXd& x) const { return gradient(cfg_, *w0_, x); }

Eigen::VectorXd DesignState::cross_kernel(const GradientVector& g) const {
  Eigen::VectorXd k(static_cast<Eigen::Index>(features_.size()));
  for (std::size_t i = 0; i < features_.size(); ++i)
    k[static_cast<Eigen::Index>(i)] = features_[i]->dot(g) / cfg_.width;
  return k;
}

Eigen::VectorXd DesignState::solve_lower(const Eigen::VectorXd& k) const {
  const auto t = static_cast<Eigen::Index>(chol_rows_.size());
  Eigen::VectorXd v(t);
  for (Eigen::Index i = 0; i < t; ++i) {
    const double* row = chol_rows_[static_cast<std::size_t>(i)]->data();
    double acc = k[i];
    for (Eigen::Index j = 0; j < i; ++j) acc -= row[j] * v[j];
    v[i] = acc / row[i];
  }
  return v;
}

double DesignState::posterior_variance_of_feature(const GradientVector& g) const {
  const double self = g.squaredNorm() / cfg_.width;
  if (empty()) return self / lambda_;
  const Eigen::VectorXd v = solve_lower(cross_kernel(g));
  return std::max(0.0, (self - v.squaredNorm()) / lambda_);
}

Eigen::MatrixXd DesignState::kernel_matrix() const {
  const auto t = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd k(t, t);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = (*khat_rows_[static_cast<std::size_t>(i)])[static_cast<std::size_t>(j)];
      k(j, i) = k(i, j);
    }
  return k;
}

Eigen::MatrixXd DesignState::cholesky_factor() const {
  const auto t = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(t, t);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      l(i, j) = (*chol_rows_[static_cast<std::size_t>(i)])[static_cast<std::size_t>(j)];
  return l;
}

DesignState design_add(const DesignState& state, const Eigen::VectorXd& x, double y) {
  DesignState next = state;
  auto g = std::make_shared<const GradientVector>(state.feature(x));
  const Eigen::VectorXd k = state.cross_kernel(*g);
  const double k_new = g->squaredNorm() / state.cfg_.width;
  const Eigen::VectorXd v = state.solve_lower(k);
  const double schur = state.lambda_ + k_new - v.squaredNorm();
  if (!(schur > 0.0)) throw FactorizationError("design_add: Schur complement is not positive");

  std::vector<double> khat_row(k.data(), k.data() + k.size());
  khat_row.push_back(k_new);
  std::vector<double> chol_row(v.data(), v.data() + v.size());
  chol_row.push_back(std::sqrt(schur));

  const double increment = std::log(schur / state.lambda_);
  next.points_.push_back(std::make_shared<const Eigen::VectorXd>(x));
  next.features_.push_back(std::move(g));
  next.khat_rows_.push_back(std::make_shared<const std::vector<double>>(std::move(khat_row)));
  next.chol_rows_.push_back(std::make_shared<const std::vector<double>>(std::move(chol_row)));
  next.rewards_.push_back(y);
  next.increments_.push_back(increment);
  next.logdet_now_ += increment;
  return next;
}

double posterior_variance(const DesignState& state, const Eigen::VectorXd& x) {
  return state.posterior_variance_of_feature(state.feature(x));
}

double logdet_ratio(const DesignState& state) { return std::exp(state.logdet_now() - state.logdet_fb()); }

DesignState mark_retrained(const DesignState& state) {
  DesignState next = state;
  next.logdet_fb_ = next.logdet_now_;
  next.fb_index_ = next.size();
  return next;
}

double beta_practical(const ConfidenceParams& cp) {
  cp.validate();
  return 2.0 * cp.rkhs_norm + cp.noise * std::sqrt(2.0 / cp.lambda * std::log(1.0 / cp.delta));
}

double beta_neural_ucb(const ConfidenceParams& cp, const DesignState& state) {
  cp.validate();
  return 2.0 * cp.rkhs_norm + cp.noise * std::sqrt(state.logdet_now() + 2.0 * std::log(1.0 / cp.delta));
}

}  // namespace nbandit
