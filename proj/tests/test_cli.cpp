#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nbandit/cli/config.hpp"
#include "nbandit/cli/plot.hpp"
#include "nbandit/cli/runner.hpp"
#include "nbandit/cli/verify_cmd.hpp"

using namespace nbandit;
using namespace nbandit::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kData = NBANDIT_TEST_DATA;
const std::string kBinary = NBANDIT_BINARY;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("nbandit_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string small_config(const fs::path& out) {
  return "[experiment]\n"
         "horizon = 50\n"
         "seeds = 1, 2\n"
         "algorithms = neural_gcb, lin_ucb\n"
         "output = " +
         out.string() +
         "\n"
         "wall_clock = off\n"
         "[environment]\nkind = h2\ndim = 3\nactions = 3\n"
         "[network]\nwidth = 8\n"
         "[train]\nepochs = 20\n";
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(
      "[experiment]\nhorizon = 300\nseeds = 4 5,6\nalgorithms = neural_gcb, neural_gcb:adaptive, random\n"
      "output = out\n"
      "[environment]\nkind = h3\ndim = 4\nactions = 5\nnoise = 0.2\n"
      "[network]\ndepth = 2\nwidth = 16\nsmoothness = 2\n"
      "[train]\nlambda = 0.5\neta = 0.01\nepochs = 40\n"
      "[confidence]\nrkhs_norm = 4\n"
      "[neural_gcb:adaptive]\ntype = neural_gcb\nbatch = adaptive\nq = 2\nsigma0 = 2\nlambda = 0.05\n");
  CHECK(cfg.horizon == 300);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5, 6});
  CHECK(cfg.environment.kind == "h3");
  CHECK(cfg.environment.actions == 5);
  REQUIRE(cfg.algorithms.size() == 3u);
  const auto& base = cfg.algorithms[0];
  CHECK(base.type == AlgorithmType::neural_gcb);
  CHECK(base.net.depth == 2);
  CHECK(base.net.smoothness == 2);
  CHECK(base.train.eta == 0.01);
  CHECK(base.confidence.rkhs_norm == 4.0);
  CHECK(base.confidence.lambda == 0.5);
  const auto& adaptive = cfg.algorithms[1];
  CHECK(adaptive.name == "neural_gcb:adaptive");
  CHECK(adaptive.batch.mode == BatchMode::adaptive);
  CHECK(adaptive.batch.q == std::vector<double>{2.0});
  CHECK(adaptive.sigma0 == 2.0);
  CHECK(adaptive.train.lambda == 0.05);
  CHECK(adaptive.confidence.lambda == 0.05);
  CHECK(cfg.algorithms[2].type == AlgorithmType::random);
  CHECK(csv_name("neural_gcb:adaptive") == "neural_gcb_adaptive.csv");
}

TEST_CASE("config errors name the offending key") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string head = "[experiment]\nhorizon = 10\nseeds = 1\nalgorithms = lin_ucb\n";
  CHECK(message(head + "colour = red\n").find("[experiment] colour") != std::string::npos);
  CHECK(message("[experiment]\nhorizon = ten\nseeds = 1\nalgorithms = lin_ucb\n").find("horizon") !=
        std::string::npos);
  CHECK(message("[experiment]\nhorizon = 10\nalgorithms = lin_ucb\n").find("seeds") != std::string::npos);
  CHECK(message(head + "[neural_ucb]\nwidth = 8\n").find("neural_ucb") != std::string::npos);
  CHECK(message(head + "[lin_ucb]\nwidth = 8\n").find("[lin_ucb] width") != std::string::npos);
  CHECK(message(head + "[environment]\nkind = h9\n").find("kind") != std::string::npos);
  CHECK(message("[experiment\nhorizon = 1\n").find("line 1") != std::string::npos);
  CHECK_FALSE(message(head).size());
  CHECK_THROWS_AS(load_config("/nonexistent/x.ini"), ConfigError);
}

TEST_CASE("run writes one CSV per algorithm and a summary") {
  const auto dir = scratch("run");
  const auto cfg = parse_config(small_config(dir));
  const auto result = run_experiment(cfg);
  REQUIRE(result.csv_files.size() == 2u);
  CHECK(result.csv_files[0] == dir / "neural_gcb.csv");
  for (const auto& f : result.csv_files) {
    const auto rows = read_regret_csv(f);
    CHECK(rows.size() == 100u);
    CHECK(rows.front().t == 1);
    CHECK(rows.back().t == 50);
    for (const auto& r : rows) CHECK(r.wall_ms == 0.0);
    CHECK(slurp(f).rfind(std::string(kRegretHeader) + "\n", 0) == 0);
  }

  const auto rows = read_regret_csv(result.csv_files[0]);
  double finals[2] = {0, 0};
  for (const auto& r : rows)
    if (r.t == 50) finals[r.seed - 1] = r.cumulative_regret;
  CHECK(rows.back().retrains_total > 0);
  const double mean = (finals[0] + finals[1]) / 2.0;
  const double sd = std::abs(finals[0] - finals[1]) / std::sqrt(2.0);
  REQUIRE(result.rows.size() == 2u);
  CHECK(result.rows[0].runs == 2);
  CHECK(std::abs(result.rows[0].mean_final_regret - mean) < 1e-12);
  CHECK(std::abs(result.rows[0].std_final_regret - sd) < 1e-9);
  CHECK(fs::exists(result.summary));

  // Same seeds, same bytes, also with several workers.
  const auto first = slurp(result.csv_files[0]) + slurp(result.csv_files[1]) + slurp(result.summary);
  setenv("BANDIT_THREADS", "2", 1);
  const auto again = run_experiment(cfg);
  unsetenv("BANDIT_THREADS");
  CHECK(slurp(again.csv_files[0]) + slurp(again.csv_files[1]) + slurp(again.summary) == first);
}

TEST_CASE("worker count") {
  setenv("BANDIT_THREADS", "3", 1);
  CHECK(worker_count(10) == 3);
  CHECK(worker_count(2) == 2);
  unsetenv("BANDIT_THREADS");
  CHECK(worker_count(1) == 1);
}

TEST_CASE("plotting") {
  const auto dir = scratch("plot");
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir / name) << body;
    return dir / name;
  };
  const std::string h = std::string(kRegretHeader) + "\n";
  const auto two = write("two.csv", h +
                                        "0,1,a,1,1.0,0,0\n0,1,a,2,3.0,0,0\n"
                                        "1,2,a,1,2.0,0,0\n1,2,a,2,5.0,0,0\n");
  const auto curves = aggregate_curves(read_regret_csv(two));
  REQUIRE(curves.size() == 1u);
  CHECK(curves[0].runs == 2);
  CHECK(curves[0].t == std::vector<int>{1, 2});
  CHECK(curves[0].mean == std::vector<double>{1.5, 4.0});
  CHECK(curves[0].std[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(curves[0].std[1] == doctest::Approx(std::sqrt(2.0)));
  CHECK(render_svg(curves).find("class=\"band\"") != std::string::npos);

  const auto one = write("one.csv", h + "0,1,b,1,1.0,0,0\n0,1,b,2,1.5,0,0\n");
  const auto single = aggregate_curves(read_regret_csv(one));
  CHECK(single[0].std == std::vector<double>{0.0, 0.0});
  const auto svg = render_svg(single);
  CHECK(svg.find("class=\"band\"") == std::string::npos);
  CHECK(svg.find("class=\"mean\"") != std::string::npos);

  plot_files({two, one}, dir / "out.svg");
  CHECK(slurp(dir / "out.svg").rfind("<svg", 0) == 0);

  CHECK_THROWS_AS(read_regret_csv(write("empty.csv", "")), std::runtime_error);
  CHECK_THROWS_AS(read_regret_csv(write("header.csv", h)), std::runtime_error);
  CHECK_THROWS_AS(read_regret_csv(write("bad.csv", "a,b\n1,2\n")), std::runtime_error);
  CHECK_THROWS_AS(read_regret_csv(write("short.csv", h + "0,1,a,1\n")), std::runtime_error);
  const auto ragged = write("ragged.csv", h + "0,1,a,1,1,0,0\n1,2,a,1,1,0,0\n1,2,a,2,1,0,0\n");
  CHECK_THROWS_AS(aggregate_curves(read_regret_csv(ragged)), std::runtime_error);
}

TEST_CASE("verify command") {
  std::ostringstream out, log;
  CHECK(run_verify("nope", out, log) == 2);
  CHECK(verify_checks().size() == 5u);
  std::ostringstream out2, log2;
  CHECK(run_verify("dual", out2, log2) == 0);
  CHECK(out2.str().rfind("s,rho,", 0) == 0);
}

TEST_CASE("binary exit codes") {
  const auto dir = scratch("binary");
  CHECK(shell(kBinary + " --help") == 0);
  CHECK(shell(kBinary) == 2);
  CHECK(shell(kBinary + " verify nope") == 2);
  CHECK(shell(kBinary + " frobnicate") == 2);
  CHECK(shell(kBinary + " run /nonexistent.ini") == 1);

  std::ofstream(dir / "bad.ini") << "[experiment]\nhorizon = 5\n";
  CHECK(shell(kBinary + " run " + (dir / "bad.ini").string()) == 1);

  const auto csv = dir / "statlog.csv";
  CHECK(shell(kBinary + " data fetch statlog " + (kData / "statlog_tiny.trn").string() + " --per-class 2 -o " +
              csv.string()) == 0);
  const auto text = slurp(csv);
  CHECK(text.rfind("label,x0,x1,x2,x3,x4,x5,x6,x7\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  CHECK(shell(kBinary + " data fetch statlog " + (kData / "statlog_tiny.trn").string() + " --per-class 9") == 1);

  std::ofstream(dir / "tiny.ini") << small_config(dir / "out");
  CHECK(shell(kBinary + " run " + (dir / "tiny.ini").string()) == 0);
  CHECK(shell(kBinary + " plot " + (dir / "out" / "lin_ucb.csv").string() + " -o " + (dir / "p.svg").string()) ==
        0);
  CHECK(fs::exists(dir / "p.svg"));
}

TEST_CASE("shipped example configs parse") {
  int n = 0;
  for (const auto& entry : fs::directory_iterator(kData.parent_path().parent_path() / "configs")) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
    ++n;
  }
  CHECK(n >= 3);
}
