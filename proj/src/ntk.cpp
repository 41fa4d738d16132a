#include "nbandit/ntk.hpp"

#include <cmath>
#include <string>

namespace nbandit {
namespace {

constexpr double kUnitTol = 1e-6;

void check_unit(const Eigen::VectorXd& x) {
  if (std::abs(x.norm() - 1.0) > kUnitTol) throw std::invalid_argument("ntk: input is not on the unit sphere");
}

// Identical inputs get ρ = 1 exactly; a computed x·x can land one ulp short.
double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a == b ? 1.0 : a.dot(b); }

Eigen::LLT<Eigen::MatrixXd> factor_shifted(const KernelMatrix& k, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("ridge lambda must be > 0");
  Eigen::MatrixXd a = k.entries;
  a.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw FactorizationError("Cholesky of lambda*I + K failed");
  return llt;
}

}  // namespace

void NtkSpec::validate() const {
  if (depth < 1) throw std::invalid_argument("NtkSpec: L must be >= 1");
  if (smoothness < 1) throw std::invalid_argument("NtkSpec: s must be >= 1");
  dual_cfg.validate();
}

double ntk_scalar(const NtkSpec& spec, double rho) {
  spec.validate();
  const int s = spec.smoothness;
  const double slope = static_cast<double>(s) * s / (2.0 * s - 1.0);
  double cov = clamp_correlation(rho);
  // Θ^(l) = Σ^(l) + Θ^(l-1)·Σ̇^(l) unrolls to the sum-of-products form.
  double theta = cov;
  for (int l = 1; l <= spec.depth; ++l) {
    const double dot = slope * dual(s - 1, cov, spec.dual_cfg);
    cov = dual(s, cov, spec.dual_cfg);
    theta = theta * dot + cov;
  }
  return theta;
}

KernelMatrix ntk_gram(const NtkSpec& spec, std::span<const Eigen::VectorXd> xs) {
  spec.validate();
  for (const auto& x : xs) check_unit(x);
  const auto n = static_cast<Eigen::Index>(xs.size());
  KernelMatrix k{Eigen::MatrixXd(n, n)};
  const double diag = ntk_scalar(spec, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    k.entries(i, i) = diag;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = ntk_scalar(spec, correlation(xs[i], xs[j]));
      k.entries(i, j) = v;
      k.entries(j, i) = v;
    }
  }
  return k;
}

Eigen::VectorXd ntk_cross(const NtkSpec& spec, std::span<const Eigen::VectorXd> xs, const Eigen::VectorXd& x) {
  check_unit(x);
  Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    check_unit(xs[i]);
    out[static_cast<Eigen::Index>(i)] = ntk_scalar(spec, correlation(xs[i], x));
  }
  return out;
}

double krr_predict(const KernelMatrix& k, const Eigen::VectorXd& y, const Eigen::VectorXd& k_x, double lambda) {
  if (y.size() != k.size() || k_x.size() != k.size())
    throw std::invalid_argument("krr_predict: dimension mismatch");
  if (k.size() == 0) return 0.0;
  const auto llt = factor_shifted(k, lambda);
  return k_x.dot(llt.solve(y));
}

double info_gain(const KernelMatrix& k, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("info_gain: lambda must be > 0");
  if (k.size() == 0) return 0.0;
  Eigen::MatrixXd a = k.entries / lambda;
  a.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw FactorizationError("Cholesky of I + K/lambda failed");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double effective_dimension(const KernelMatrix& k, double lambda) {
  if (k.size() == 0) return 0.0;
  const auto llt = factor_shifted(k, lambda);
  // K(K+λI)⁻¹ and (K+λI)⁻¹K share their trace.
  return llt.solve(k.entries).trace();
}

double effective_dimension_eigen(const KernelMatrix& k, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("effective_dimension: lambda must be > 0");
  if (k.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k.entries, Eigen::EigenvaluesOnly);
  const Eigen::ArrayXd ev = eig.eigenvalues().array();
  return (ev / (ev + lambda)).sum();
}

}  // namespace nbandit
