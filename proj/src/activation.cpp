#include "nbandit/activation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbandit {
namespace {

constexpr double kPi = std::numbers::pi;

struct GaussLegendre {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

GaussLegendre make_gauss_legendre(int n) {
  GaussLegendre rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-15) break;
    }
    // Recompute the derivative at the converged node for the weight.
    double p0 = 1.0, p1 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

const GaussLegendre& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<const GaussLegendre>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<const GaussLegendre>(make_gauss_legendre(n));
  return *slot;
}

double double_factorial_odd(int s) {
  // (2s-1)!!, with s = 0 giving 1.
  double out = 1.0;
  for (int k = 2 * s - 1; k > 1; k -= 2) out *= k;
  return out;
}

double ipow(double x, int s) {
  double out = 1.0;
  for (int i = 0; i < s; ++i) out *= x;
  return out;
}

}  // namespace

void DualEvalConfig::validate() const {
  if (quadrature_nodes < 16)
    throw std::invalid_argument("DualEvalConfig: quadrature_nodes must be >= 16");
  if (mc_samples < 1) throw std::invalid_argument("DualEvalConfig: mc_samples must be >= 1");
}

double sigma(int s, double x) {
  if (s < 1) throw std::invalid_argument("sigma: s must be >= 1");
  return x > 0.0 ? ipow(x, s) : 0.0;
}

double sigma_prime(int s, double x) {
  if (s < 1) throw std::invalid_argument("sigma_prime: s must be >= 1");
  if (x <= 0.0) return 0.0;
  return s * ipow(x, s - 1);
}

double norm_const(int s) {
  if (s < 0) throw std::invalid_argument("norm_const: s must be >= 0");
  return 2.0 / double_factorial_odd(s);
}

double clamp_correlation(double rho) {
  constexpr double kSlack = 1e-9;
  if (!(rho >= -1.0 - kSlack && rho <= 1.0 + kSlack))
    throw std::domain_error("correlation " + std::to_string(rho) + " outside [-1, 1]");
  return std::clamp(rho, -1.0, 1.0);
}

double dual_quadrature(int s, double rho, const DualEvalConfig& cfg) {
  if (s < 0) throw std::invalid_argument("dual: s must be >= 0");
  cfg.validate();
  rho = clamp_correlation(rho);
  const double phi = std::acos(rho);
  // Both cosines are positive on θ ∈ (φ - π/2, π/2).
  const double lo = phi - kPi / 2.0;
  const double hi = kPi / 2.0;
  const double half = 0.5 * (hi - lo);
  if (half <= 0.0) return 0.0;
  const double mid = 0.5 * (hi + lo);
  const auto& rule = gauss_legendre(cfg.quadrature_nodes);
  double integral = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double theta = mid + half * rule.nodes[i];
    const double a = std::max(0.0, std::cos(theta));
    const double b = std::max(0.0, std::cos(theta - phi));
    integral += rule.weights[i] * ipow(a * b, s);
  }
  integral *= half;
  // E[r^{2s}] for a 2-d standard normal is 2^s s!.
  double radial = 1.0;
  for (int k = 1; k <= s; ++k) radial *= 2.0 * k;
  return norm_const(s) * radial * integral / (2.0 * kPi);
}

double dual(int s, double rho, const DualEvalConfig& cfg) {
  if (s < 0) throw std::invalid_argument("dual: s must be >= 0");
  rho = clamp_correlation(rho);
  if (s == 0) return (kPi - std::acos(rho)) / kPi;
  if (s == 1) return (std::sqrt(std::max(0.0, 1.0 - rho * rho)) + rho * (kPi - std::acos(rho))) / kPi;
  return dual_quadrature(s, rho, cfg);
}

double dual_derivative_check(int s, double rho, const DualEvalConfig& cfg) {
  if (s < 2) throw std::invalid_argument("dual_derivative_check: s must be >= 2");
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("dual_derivative_check: |rho| must be < 1");
  const double h = std::min(1e-5, 0.5 * (1.0 - std::abs(rho)));
  const double fd = (dual(s, rho + h, cfg) - dual(s, rho - h, cfg)) / (2.0 * h);
  const double identity = static_cast<double>(s) * s / (2.0 * s - 1.0) * dual(s - 1, rho, cfg);
  return std::abs(fd - identity);
}

}  // namespace nbandit
