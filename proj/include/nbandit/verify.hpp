#pragma once

// Desk-scale empirical checks of the kernel and confidence theory.
// Every check is a pure function of its spec (seeds included) and returns a
// report that serialises to CSV.

#include <cstdint>
#include <string>
#include <vector>

#include "nbandit/activation.hpp"
#include "nbandit/network.hpp"

namespace nbandit {

// Frozen tolerances. Each value was set once from the run named next to it
// (`bandit verify <check>` or the acceptance binary) and not tuned since.
namespace tolerance {
inline constexpr double kNtkClosedForm = 1e-10;    // analytic identity, no calibration
inline constexpr double kNtkSelfValue = 1e-12;     // analytic identity
inline constexpr double kGradientRel = 1e-5;       // finite differences, h = 1e-6
inline constexpr double kNtkWidth4096 = 0.15;      // verify ntk: median max error 0.099 at m=4096, 100 pairs
inline constexpr double kKrrGap = 0.1;             // verify krr: gap ~1e-3 at m=2048
inline constexpr double kWoodbury = 1e-8;          // double-precision solves on p <= 200
inline constexpr double kCoverage = 0.85;          // verify coverage: 0.9 minus 0.05 slack
inline constexpr double kDualQuadrature = 1e-6;    // 200 Gauss-Legendre nodes vs arc-cosine forms
inline constexpr double kDualDerivative = 1e-6;    // central differences on the quadrature
inline constexpr double kDualMonteCarloSe = 5.0;   // |MC - exact| in standard errors
inline constexpr double kBinomialSe = 2.0;         // tail frequencies: bound + 2 standard errors
}  // namespace tolerance

/// c_s·mean σ_s(X)σ_s(Y) over `samples` correlated normal pairs, plus the
/// standard error of that mean.
struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};
MonteCarloEstimate dual_monte_carlo(int s, double rho, long samples, std::uint64_t seed);

// ---------------------------------------------------------------- NTK convergence

struct ConvergenceSpec {
  int depth = 1;
  int smoothness = 1;
  int input_dim = 5;
  std::vector<int> widths{64, 256, 1024, 4096};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int pairs = 100;
};

struct ConvergenceReport {
  std::vector<int> widths;
  std::vector<std::vector<double>> max_errors;  // [width][seed]
  std::vector<double> medians;                  // per width

  bool strictly_decreasing() const;
  std::string to_csv() const;
};

/// Per width and seed: max over `pairs` random unit pairs of
/// |empirical_kernel - ntk_scalar|.
ConvergenceReport check_ntk_convergence(const ConvergenceSpec& spec);

// ---------------------------------------------------------------- NN vs KRR

struct KrrSpec {
  int depth = 1;
  int smoothness = 1;
  int input_dim = 5;
  int width = 2048;
  int n_train = 10;
  int n_test = 20;
  double noise = 0.0;
  TrainSpec train{0.1, 1e-3, 2000};
  std::uint64_t seed = 1;
};

struct KrrReport {
  int width = 0;
  double max_gap = 0.0;      // max |f_NN - f_NTK| over the test points
  double max_abs_ntk = 0.0;  // scale of the KRR predictions, for context
  std::vector<double> nn, ntk;

  std::string to_csv() const;
};

/// Trains from a zero-output init on n points with labels 4(a·x)² + noise,
/// then compares against KRR with the analytic kernel Θ/m and ridge λ.
KrrReport check_krr_equivalence(const KrrSpec& spec);

// ---------------------------------------------------------------- coverage

struct CoverageSpec {
  int depth = 1;
  int smoothness = 1;
  int input_dim = 5;
  int width = 1024;
  int n_train = 200;
  int n_test = 200;
  int anchors = 20;
  double rkhs_norm = 1.0;  // S
  double noise = 0.1;      // ν
  double delta = 0.1;
  TrainSpec train{0.1, 1e-3, 200};
  double beta_scale = 1.0;  // multiplies beta_practical; < 1 probes that the band is not vacuous
  std::uint64_t seed = 1;
};

struct CoverageReport {
  int n_test = 0;
  int n_covered = 0;
  double beta = 0.0;
  double max_abs_reward = 0.0;

  double fraction() const { return n_test == 0 ? 0.0 : static_cast<double>(n_covered) / n_test; }
  std::string to_csv() const;
};

/// Reward h(x) = Σ_j α_j Θ(x·z_j)/m over random anchors z_j, scaled to RKHS
/// norm S under the kernel Θ/m. Contexts are drawn i.i.d. (independent of the
/// noise), the net is trained once, and a test point is covered when
/// |h(x) - f(x;W)| <= β·σ̂(x).
CoverageReport check_coverage(const CoverageSpec& spec);

// ---------------------------------------------------------------- concentration

/// μ_{k,ρ} = E[σ_k(X)σ_k(Y)] = σ̄_k(ρ)/c_k.
double activation_moment(int k, double rho, const DualEvalConfig& cfg = {});

/// Upper-tail bound on P(S_n - μ >= t) (two regimes split at t*(n)).
double concentration_upper_bound(int s, double rho, long n, double t);
/// Lower-tail bound exp(-n t² / (2 μ_{2s,ρ})).
double concentration_lower_bound(int s, double rho, long n, double t);
/// t*(n) separating the two upper-tail regimes.
double concentration_crossover(int s, double rho, long n);

struct ConcentrationSpec {
  int smoothness = 1;
  double rho = 0.0;
  long n = 1000;
  int trials = 5000;
  std::vector<double> thresholds;  // empty: three defaults from the bounds
  long oracle_samples = 10'000'000;
  std::uint64_t seed = 1;
};

struct ConcentrationRow {
  double t = 0.0;
  double upper_freq = 0.0, lower_freq = 0.0, two_sided_freq = 0.0;
  double upper_bound = 0.0, lower_bound = 0.0, two_sided_bound = 0.0;
  double std_error = 0.0;  // binomial standard error of two_sided_freq
  bool pass = false;
};

struct ConcentrationReport {
  double mu_oracle = 0.0;  // Monte Carlo estimate used as the centre
  double mu_exact = 0.0;   // σ̄_s(ρ)/c_s
  std::vector<ConcentrationRow> rows;

  bool pass() const;
  std::string to_csv() const;
};

/// Draws `trials` independent S_n = (1/n)Σσ_s(X_i)σ_s(Y_i), centres them on a
/// Monte Carlo estimate of μ_{s,ρ}, and compares tail frequencies against
/// the bounds (each side and their sum) with binomial slack.
ConcentrationReport check_concentration(const ConcentrationSpec& spec);

// ---------------------------------------------------------------- dual triangle

struct DualReport {
  struct Row {
    int s = 0;
    double rho = 0.0;
    double closed = 0.0;  // NaN when s > 1
    double quadrature = 0.0;
    double monte_carlo = 0.0;
    double mc_std_error = 0.0;
    double derivative_gap = 0.0;  // NaN when s < 2
    bool pass = false;
  };
  std::vector<Row> rows;

  bool pass() const;
  std::string to_csv() const;
};

/// Closed form vs quadrature (s <= 1), quadrature vs Monte Carlo, and the
/// derivative identity (s >= 2) over a small grid of s and ρ.
DualReport check_dual(long mc_samples = 1'000'000, std::uint64_t seed = 1);

}  // namespace nbandit
