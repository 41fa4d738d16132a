#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nbandit::cli {

/// Names accepted by `bandit verify`.
const std::vector<std::string>& verify_checks();

/// Runs one check with its frozen tolerances, writes the report CSV to `out`
/// and a verdict line to `log`. Returns 0 on pass, 1 on failure, 2 for an
/// unknown check.
int run_verify(const std::string& check, std::ostream& out, std::ostream& log);

}  // namespace nbandit::cli
