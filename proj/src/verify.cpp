#include "nbandit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nbandit/bandit_env.hpp"
#include "nbandit/design.hpp"
#include "nbandit/ntk.hpp"
#include "nbandit/rng.hpp"

namespace nbandit {

namespace {

double relu_pow(int s, double x) {
  if (x <= 0.0) return 0.0;
  return s == 0 ? 1.0 : std::pow(x, s);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::ostringstream csv_stream() {
  std::ostringstream os;
  os << std::setprecision(17);
  return os;
}

Eigen::VectorXd unit_vector(int d, Rng& rng) { return sample_contexts(d, 1, rng).vectors.front(); }

}  // namespace

MonteCarloEstimate dual_monte_carlo(int s, double rho, long samples, std::uint64_t seed) {
  if (s < 0) throw std::invalid_argument("smoothness must be >= 0");
  if (samples < 2) throw std::invalid_argument("need at least two samples");
  rho = clamp_correlation(rho);
  Rng rng(seed);
  std::normal_distribution<double> n01;
  const double tail = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  double mean = 0.0, m2 = 0.0;
  for (long i = 0; i < samples; ++i) {
    const double x = n01(rng);
    const double y = rho * x + tail * n01(rng);
    const double z = relu_pow(s, x) * relu_pow(s, y);
    const double delta = z - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (z - mean);
  }
  const double c = norm_const(s);
  const double var = m2 / static_cast<double>(samples - 1);
  return {c * mean, c * std::sqrt(var / static_cast<double>(samples))};
}

// ---------------------------------------------------------------- NTK convergence

bool ConvergenceReport::strictly_decreasing() const {
  for (std::size_t i = 1; i < medians.size(); ++i)
    if (!(medians[i] < medians[i - 1])) return false;
  return !medians.empty();
}

std::string ConvergenceReport::to_csv() const {
  auto os = csv_stream();
  os << "width,seed_index,max_error,median\n";
  for (std::size_t w = 0; w < widths.size(); ++w)
    for (std::size_t k = 0; k < max_errors[w].size(); ++k)
      os << widths[w] << ',' << k << ',' << max_errors[w][k] << ',' << medians[w] << '\n';
  return os.str();
}

ConvergenceReport check_ntk_convergence(const ConvergenceSpec& spec) {
  if (spec.widths.empty() || spec.seeds.empty() || spec.pairs < 1)
    throw std::invalid_argument("convergence check needs widths, seeds and pairs");
  for (std::size_t i = 1; i < spec.widths.size(); ++i)
    if (spec.widths[i] <= spec.widths[i - 1]) throw std::invalid_argument("widths must be strictly increasing");

  const NtkSpec ntk{spec.depth, spec.smoothness, {}};
  ConvergenceReport rep;
  rep.widths = spec.widths;
  for (int m : spec.widths) {
    const NetConfig cfg{spec.depth, m, spec.smoothness, spec.input_dim};
    cfg.validate();
    std::vector<double> errs;
    for (std::uint64_t seed : spec.seeds) {
      const Weights w0 = init_weights(cfg, derive_seed(seed, streams::kInit));
      // Pairs depend on the seed only, so every width sees the same inputs.
      Rng rng(derive_seed(seed, streams::kContexts));
      double worst = 0.0;
      for (int p = 0; p < spec.pairs; ++p) {
        const Eigen::VectorXd x = unit_vector(spec.input_dim, rng);
        const Eigen::VectorXd x2 = unit_vector(spec.input_dim, rng);
        const double err = std::abs(empirical_kernel(cfg, w0, x, x2) - ntk_scalar(ntk, x.dot(x2)));
        worst = std::max(worst, err);
      }
      errs.push_back(worst);
    }
    rep.medians.push_back(median(errs));
    rep.max_errors.push_back(std::move(errs));
  }
  return rep;
}

// ---------------------------------------------------------------- NN vs KRR

std::string KrrReport::to_csv() const {
  auto os = csv_stream();
  os << "width,point,f_nn,f_ntk,gap\n";
  for (std::size_t i = 0; i < nn.size(); ++i)
    os << width << ',' << i << ',' << nn[i] << ',' << ntk[i] << ',' << std::abs(nn[i] - ntk[i]) << '\n';
  return os.str();
}

KrrReport check_krr_equivalence(const KrrSpec& spec) {
  if (spec.n_train < 0 || spec.n_test < 1) throw std::invalid_argument("bad KRR sample sizes");
  const NetConfig cfg{spec.depth, spec.width, spec.smoothness, spec.input_dim};
  cfg.validate();
  const NtkSpec ntk{spec.depth, spec.smoothness, {}};
  const Weights w0 = init_weights(cfg, derive_seed(spec.seed, streams::kInit));

  Rng ctx(derive_seed(spec.seed, streams::kContexts));
  Rng noise(derive_seed(spec.seed, streams::kNoise));
  Rng problem(derive_seed(spec.seed, streams::kProblem));
  const Eigen::VectorXd a = unit_vector(spec.input_dim, problem);
  std::normal_distribution<double> eps(0.0, 1.0);

  std::vector<Sample> data;
  std::vector<Eigen::VectorXd> xs;
  Eigen::VectorXd y(spec.n_train);
  for (int i = 0; i < spec.n_train; ++i) {
    Eigen::VectorXd x = unit_vector(spec.input_dim, ctx);
    const double ax = a.dot(x);
    y(i) = 4.0 * ax * ax + spec.noise * eps(noise);
    data.push_back({x, y(i)});
    xs.push_back(std::move(x));
  }

  const Weights w = data.empty() ? w0 : train(cfg, w0, data, spec.train);
  const double m = static_cast<double>(spec.width);
  KernelMatrix k = ntk_gram(ntk, xs);
  k.entries /= m;

  KrrReport rep;
  rep.width = spec.width;
  for (int i = 0; i < spec.n_test; ++i) {
    const Eigen::VectorXd x = unit_vector(spec.input_dim, ctx);
    const double f_nn = forward(cfg, w, x);
    const double f_ntk = krr_predict(k, y, ntk_cross(ntk, xs, x) / m, spec.train.lambda);
    rep.nn.push_back(f_nn);
    rep.ntk.push_back(f_ntk);
    rep.max_gap = std::max(rep.max_gap, std::abs(f_nn - f_ntk));
    rep.max_abs_ntk = std::max(rep.max_abs_ntk, std::abs(f_ntk));
  }
  return rep;
}

// ---------------------------------------------------------------- coverage

std::string CoverageReport::to_csv() const {
  auto os = csv_stream();
  os << "n_test,n_covered,beta,fraction,max_abs_reward\n";
  os << n_test << ',' << n_covered << ',' << beta << ',' << fraction() << ',' << max_abs_reward << '\n';
  return os.str();
}

CoverageReport check_coverage(const CoverageSpec& spec) {
  if (spec.n_train < 0 || spec.n_test < 1 || spec.anchors < 1) throw std::invalid_argument("bad coverage sizes");
  const NetConfig cfg{spec.depth, spec.width, spec.smoothness, spec.input_dim};
  cfg.validate();
  const ConfidenceParams cp{spec.rkhs_norm, spec.noise, spec.train.lambda, spec.delta};
  cp.validate();
  const NtkSpec ntk{spec.depth, spec.smoothness, {}};
  const double m = static_cast<double>(spec.width);

  Rng problem(derive_seed(spec.seed, streams::kProblem));
  std::vector<Eigen::VectorXd> anchors;
  for (int j = 0; j < spec.anchors; ++j) anchors.push_back(unit_vector(spec.input_dim, problem));
  std::normal_distribution<double> n01;
  Eigen::VectorXd alpha(spec.anchors);
  for (int j = 0; j < spec.anchors; ++j) alpha(j) = n01(problem);
  const Eigen::MatrixXd gz = ntk_gram(ntk, anchors).entries / m;
  const double norm = std::sqrt(alpha.dot(gz * alpha));
  if (!(norm > 0.0)) throw std::runtime_error("degenerate RKHS reward");
  alpha *= spec.rkhs_norm / norm;
  auto h = [&](const Eigen::VectorXd& x) { return alpha.dot(ntk_cross(ntk, anchors, x)) / m; };

  auto w0 = std::make_shared<const Weights>(init_weights(cfg, derive_seed(spec.seed, streams::kInit)));
  DesignState design(cfg, w0, spec.train.lambda);
  Rng ctx(derive_seed(spec.seed, streams::kContexts));
  Rng noise(derive_seed(spec.seed, streams::kNoise));
  std::vector<Sample> data;
  for (int i = 0; i < spec.n_train; ++i) {
    Eigen::VectorXd x = unit_vector(spec.input_dim, ctx);
    const double y = h(x) + spec.noise * n01(noise);
    design = design_add(design, x, y);
    data.push_back({std::move(x), y});
  }
  const Weights w = data.empty() ? *w0 : train(cfg, *w0, data, spec.train);

  CoverageReport rep;
  rep.n_test = spec.n_test;
  rep.beta = spec.beta_scale * beta_practical(cp);
  for (int i = 0; i < spec.n_test; ++i) {
    const Eigen::VectorXd x = unit_vector(spec.input_dim, ctx);
    const double hx = h(x);
    rep.max_abs_reward = std::max(rep.max_abs_reward, std::abs(hx));
    const double width = rep.beta * std::sqrt(posterior_variance(design, x));
    if (std::abs(hx - forward(cfg, w, x)) <= width) ++rep.n_covered;
  }
  return rep;
}

// ---------------------------------------------------------------- concentration

double activation_moment(int k, double rho, const DualEvalConfig& cfg) { return dual(k, rho, cfg) / norm_const(k); }

double concentration_crossover(int s, double rho, long n) {
  const double a = std::sqrt(3.0 * activation_moment(4 * s, rho));
  return std::pow(a / (4.0 * (1.0 + rho)), 2.0 - 1.0 / s) *
         std::pow(static_cast<double>(n), -static_cast<double>(s - 1) / (2.0 * s - 1.0));
}

double concentration_upper_bound(int s, double rho, long n, double t) {
  const double nn = static_cast<double>(n);
  if (t <= concentration_crossover(s, rho, n)) {
    const double a = std::sqrt(3.0 * activation_moment(4 * s, rho));
    return (nn + 1.0) * std::exp(-nn * t * t / (2.0 * a));
  }
  return (nn + 1.0) * std::exp(-std::pow(nn * t, 1.0 / s) / (8.0 * (1.0 + rho)));
}

double concentration_lower_bound(int s, double rho, long n, double t) {
  return std::exp(-static_cast<double>(n) * t * t / (2.0 * activation_moment(2 * s, rho)));
}

bool ConcentrationReport::pass() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
}

std::string ConcentrationReport::to_csv() const {
  auto os = csv_stream();
  os << "t,upper_freq,upper_bound,lower_freq,lower_bound,two_sided_freq,two_sided_bound,std_error,mu_oracle,"
        "mu_exact,pass\n";
  for (const auto& r : rows)
    os << r.t << ',' << r.upper_freq << ',' << r.upper_bound << ',' << r.lower_freq << ',' << r.lower_bound << ','
       << r.two_sided_freq << ',' << r.two_sided_bound << ',' << r.std_error << ',' << mu_oracle << ',' << mu_exact
       << ',' << (r.pass ? 1 : 0) << '\n';
  return os.str();
}

ConcentrationReport check_concentration(const ConcentrationSpec& spec) {
  const int s = spec.smoothness;
  if (s < 1) throw std::invalid_argument("concentration check needs s >= 1");
  if (!(spec.rho > -1.0 && spec.rho < 1.0)) throw std::invalid_argument("rho must lie in (-1, 1)");
  if (spec.n < 1 || spec.trials < 1) throw std::invalid_argument("n and trials must be positive");

  ConcentrationReport rep;
  rep.mu_exact = activation_moment(s, spec.rho);
  rep.mu_oracle = dual_monte_carlo(s, spec.rho, spec.oracle_samples, derive_seed(spec.seed, streams::kProblem)).mean /
                  norm_const(s);

  std::vector<double> ts = spec.thresholds;
  if (ts.empty()) {
    // Lower-tail bound equal to 0.5 and 0.05, and upper-tail bound equal to 0.5.
    const double mu2 = activation_moment(2 * s, spec.rho);
    const double nn = static_cast<double>(spec.n);
    ts.push_back(std::sqrt(2.0 * mu2 * std::log(2.0) / nn));
    ts.push_back(std::sqrt(2.0 * mu2 * std::log(20.0) / nn));
    const double a = std::sqrt(3.0 * activation_moment(4 * s, spec.rho));
    ts.push_back(std::sqrt(2.0 * a * std::log(2.0 * (nn + 1.0)) / nn));
  }

  Rng rng(derive_seed(spec.seed, streams::kContexts));
  std::normal_distribution<double> n01;
  const double tail = std::sqrt(1.0 - spec.rho * spec.rho);
  std::vector<double> dev(static_cast<std::size_t>(spec.trials));
  for (auto& d : dev) {
    double sum = 0.0;
    for (long i = 0; i < spec.n; ++i) {
      const double x = n01(rng);
      const double y = spec.rho * x + tail * n01(rng);
      sum += relu_pow(s, x) * relu_pow(s, y);
    }
    d = sum / static_cast<double>(spec.n) - rep.mu_oracle;
  }

  const double trials = static_cast<double>(spec.trials);
  auto se = [&](double bound) {
    const double b = std::clamp(bound, 0.0, 1.0);
    return std::sqrt(b * (1.0 - b) / trials);
  };
  for (double t : ts) {
    ConcentrationRow row;
    row.t = t;
    const auto up = std::count_if(dev.begin(), dev.end(), [t](double d) { return d >= t; });
    const auto lo = std::count_if(dev.begin(), dev.end(), [t](double d) { return d <= -t; });
    row.upper_freq = static_cast<double>(up) / trials;
    row.lower_freq = static_cast<double>(lo) / trials;
    row.two_sided_freq = row.upper_freq + row.lower_freq;
    row.upper_bound = concentration_upper_bound(s, spec.rho, spec.n, t);
    row.lower_bound = concentration_lower_bound(s, spec.rho, spec.n, t);
    row.two_sided_bound = row.upper_bound + row.lower_bound;
    row.std_error = se(row.two_sided_bound);
    const double k = tolerance::kBinomialSe;
    row.pass = row.upper_freq <= std::min(1.0, row.upper_bound) + k * se(row.upper_bound) &&
               row.lower_freq <= std::min(1.0, row.lower_bound) + k * se(row.lower_bound) &&
               row.two_sided_freq <= std::min(1.0, row.two_sided_bound) + k * row.std_error;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------- dual triangle

bool DualReport::pass() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
}

std::string DualReport::to_csv() const {
  auto os = csv_stream();
  os << "s,rho,closed,quadrature,monte_carlo,mc_std_error,derivative_gap,pass\n";
  for (const auto& r : rows)
    os << r.s << ',' << r.rho << ',' << r.closed << ',' << r.quadrature << ',' << r.monte_carlo << ','
       << r.mc_std_error << ',' << r.derivative_gap << ',' << (r.pass ? 1 : 0) << '\n';
  return os.str();
}

DualReport check_dual(long mc_samples, std::uint64_t seed) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  DualReport rep;
  std::uint64_t stream = 0;
  for (int s = 0; s <= 3; ++s) {
    for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
      DualReport::Row row;
      row.s = s;
      row.rho = rho;
      row.quadrature = dual_quadrature(s, rho);
      row.closed = s <= 1 ? dual(s, rho) : nan;
      const auto mc = dual_monte_carlo(s, rho, mc_samples, derive_seed(seed, ++stream));
      row.monte_carlo = mc.mean;
      row.mc_std_error = mc.std_error;
      row.derivative_gap = s >= 2 ? dual_derivative_check(s, rho) : nan;

      bool ok = std::abs(mc.mean - row.quadrature) <= tolerance::kDualMonteCarloSe * mc.std_error + 1e-12;
      if (s <= 1) ok = ok && std::abs(row.closed - row.quadrature) <= tolerance::kDualQuadrature;
      if (s >= 2) ok = ok && row.derivative_gap <= tolerance::kDualDerivative;
      row.pass = ok;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace nbandit
