#include "nbandit/cli/verify_cmd.hpp"

#include <algorithm>

#include "nbandit/verify.hpp"

namespace nbandit::cli {

namespace {

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

int verdict(bool ok, const std::string& check, const std::string& metric, std::ostream& log) {
  log << (ok ? "PASS " : "FAIL ") << check << ": " << metric << '\n';
  return ok ? 0 : 1;
}

int verify_ntk(std::ostream& out, std::ostream& log) {
  bool ok = true;
  std::string metric;
  for (int s : {1, 2}) {
    ConvergenceSpec spec;
    spec.smoothness = s;
    const auto rep = check_ntk_convergence(spec);
    out << "# s=" << s << '\n' << rep.to_csv();
    const bool dec = rep.strictly_decreasing();
    ok = ok && dec;
    metric += "s=" + std::to_string(s) + " medians";
    for (double m : rep.medians) metric += " " + std::to_string(m);
    metric += dec ? " (decreasing); " : " (NOT decreasing); ";
    if (s == 1) ok = ok && rep.medians.back() < tolerance::kNtkWidth4096;
  }
  return verdict(ok, "ntk", metric + "bound at m=4096: " + std::to_string(tolerance::kNtkWidth4096), log);
}

int verify_krr(std::ostream& out, std::ostream& log) {
  KrrSpec spec;
  const auto main = check_krr_equivalence(spec);
  out << main.to_csv();
  std::vector<double> small, large;
  for (std::uint64_t seed : {1, 2, 3}) {
    KrrSpec s = spec;
    s.seed = seed;
    s.width = 1024;
    small.push_back(check_krr_equivalence(s).max_gap);
    s.width = 4096;
    large.push_back(check_krr_equivalence(s).max_gap);
  }
  const double g1 = median3(small), g4 = median3(large);
  const bool ok = main.max_gap < tolerance::kKrrGap && g4 <= g1;
  return verdict(ok, "krr",
                 "max gap " + std::to_string(main.max_gap) + " at m=2048 (bound " + std::to_string(tolerance::kKrrGap) +
                     "), median gap m=1024 " + std::to_string(g1) + " vs m=4096 " + std::to_string(g4),
                 log);
}

int verify_coverage(std::ostream& out, std::ostream& log) {
  const auto rep = check_coverage(CoverageSpec{});
  out << rep.to_csv();
  return verdict(rep.fraction() >= tolerance::kCoverage, "coverage",
                 "fraction " + std::to_string(rep.fraction()) + " (bound " + std::to_string(tolerance::kCoverage) + ")",
                 log);
}

int verify_concentration(std::ostream& out, std::ostream& log) {
  const auto rep = check_concentration(ConcentrationSpec{});
  out << rep.to_csv();
  std::string metric;
  for (const auto& r : rep.rows)
    metric += "t=" + std::to_string(r.t) + " freq " + std::to_string(r.two_sided_freq) + " bound " +
              std::to_string(r.two_sided_bound) + "; ";
  return verdict(rep.pass(), "concentration", metric, log);
}

int verify_dual(std::ostream& out, std::ostream& log) {
  const auto rep = check_dual();
  out << rep.to_csv();
  int failed = 0;
  for (const auto& r : rep.rows) failed += r.pass ? 0 : 1;
  return verdict(rep.pass(), "dual", std::to_string(failed) + " of " + std::to_string(rep.rows.size()) + " rows failed",
                 log);
}

}  // namespace

const std::vector<std::string>& verify_checks() {
  static const std::vector<std::string> names{"ntk", "krr", "coverage", "concentration", "dual"};
  return names;
}

int run_verify(const std::string& check, std::ostream& out, std::ostream& log) {
  if (check == "ntk") return verify_ntk(out, log);
  if (check == "krr") return verify_krr(out, log);
  if (check == "coverage") return verify_coverage(out, log);
  if (check == "concentration") return verify_concentration(out, log);
  if (check == "dual") return verify_dual(out, log);
  log << "unknown check '" << check << "'; expected one of: ntk krr coverage concentration dual\n";
  return 2;
}

}  // namespace nbandit::cli
