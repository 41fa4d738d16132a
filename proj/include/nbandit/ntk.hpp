#pragma once

// Analytic NT kernel Θ^(L) of the σ_s network and kernel ridge regression
// quantities built on Gram matrices.

#include <span>
#include <stdexcept>

#include <Eigen/Dense>

#include "nbandit/activation.hpp"

namespace nbandit {

struct NtkSpec {
  int depth = 1;
  int smoothness = 1;
  DualEvalConfig dual_cfg;

  void validate() const;
};

/// Raised when λI + K is not numerically positive definite. No jitter is
/// ever added; a failure points at duplicated inputs or a bad ridge.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetric PSD Gram matrix.
struct KernelMatrix {
  Eigen::MatrixXd entries;

  Eigen::Index size() const { return entries.rows(); }
};

/// Θ^(L)(ρ) through the Σ / Σ̇ recursion on unit-sphere inputs:
///   Σ⁰ = ρ, Σˡ = σ̄_s(Σˡ⁻¹), Σ̇ˡ = s²/(2s-1)·σ̄_{s-1}(Σˡ⁻¹), Σ̇^{L+1} = 1,
///   Θ = Σ_{l=1}^{L+1} Σˡ⁻¹ Π_{j=l}^{L+1} Σ̇ʲ.
double ntk_scalar(const NtkSpec& spec, double rho);

/// entries(i,j) = Θ(X_i·X_j); the diagonal uses ρ = 1 exactly.
KernelMatrix ntk_gram(const NtkSpec& spec, std::span<const Eigen::VectorXd> xs);

/// k_X(x) = [Θ(X_i·x)]_i.
Eigen::VectorXd ntk_cross(const NtkSpec& spec, std::span<const Eigen::VectorXd> xs, const Eigen::VectorXd& x);

/// k_xᵀ(λI + K)⁻¹Y via Cholesky.
double krr_predict(const KernelMatrix& k, const Eigen::VectorXd& y, const Eigen::VectorXd& k_x, double lambda);

/// log det(I + K/λ) of the given design.
double info_gain(const KernelMatrix& k, double lambda);

/// tr(K(K + λI)⁻¹) by Cholesky solves.
double effective_dimension(const KernelMatrix& k, double lambda);

/// Same quantity from the eigenvalues of K.
double effective_dimension_eigen(const KernelMatrix& k, double lambda);

}  // namespace nbandit
