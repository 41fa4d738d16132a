#pragma once

// The σ_s(u) = max(0,u)^s activation family and its dual activations.
//
// The dual of σ_s is σ̄_s(ρ) = c_s·E[σ_s(X)σ_s(Y)] where (X,Y) are standard
// normals with correlation ρ. It is the one-layer map of the NT kernel
// recursion (see ntk.hpp).

namespace nbandit {

struct DualEvalConfig {
  int quadrature_nodes = 200;
  long mc_samples = 1'000'000;  // only read by the Monte Carlo oracle

  void validate() const;
};

/// max(0,x)^s, s >= 1.
double sigma(int s, double x);

/// Derivative s·max(0,x)^(s-1). For s = 1 this is the indicator {x > 0}, so
/// sigma_prime(1, 0) == 0: the left derivative of the kink.
double sigma_prime(int s, double x);

/// c_s = 2/(2s-1)!!, with (-1)!! = 1 so that c_0 = 2.
double norm_const(int s);

/// Clamps a correlation that drifted past ±1 by at most 1e-9; anything
/// further out throws std::domain_error.
double clamp_correlation(double rho);

/// σ̄_s(ρ). Closed arc-cosine forms for s ∈ {0,1}; dual_quadrature otherwise.
double dual(int s, double rho, const DualEvalConfig& cfg = {});

/// σ̄_s(ρ) by fixed-node quadrature, valid for every s >= 0.
///
/// Writing (X,Y) = r·(cos θ, cos(θ-φ)) with φ = arccos ρ, the expectation
/// factorises into E[r^{2s}] = 2^s s! times an angular integral of
/// cos^s θ cos^s(θ-φ) over the arc where both factors are positive. The
/// angular integrand is smooth on that arc, so Gauss–Legendre converges
/// geometrically and no random numbers enter the kernel path.
double dual_quadrature(int s, double rho, const DualEvalConfig& cfg = {});

/// |σ̄_s'(ρ) - s²/(2s-1)·σ̄_{s-1}(ρ)| with σ̄_s' from central differences.
/// Requires s >= 2 and |ρ| < 1.
double dual_derivative_check(int s, double rho, const DualEvalConfig& cfg = {});

}  // namespace nbandit
