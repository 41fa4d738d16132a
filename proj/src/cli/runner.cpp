#include "nbandit/cli/runner.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace nbandit::cli {

namespace {

void fsync_path(const std::filesystem::path& p) {
  const int fd = ::open(p.c_str(), O_RDONLY);
  if (fd < 0) throw std::runtime_error("cannot reopen " + p.string() + " for fsync");
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw std::runtime_error("fsync failed for " + p.string());
}

std::string format_rows(int run_id, std::uint64_t seed, const std::string& algorithm, const PolicyTrace& trace) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const auto& r : trace.rows)
    os << run_id << ',' << seed << ',' << algorithm << ',' << r.t << ',' << r.cumulative_regret << ','
       << r.retrains_total << ',' << r.wall_ms << '\n';
  return os.str();
}

}  // namespace

std::string csv_name(const std::string& algorithm) {
  std::string out = algorithm;
  for (char& c : out)
    if (c == ':' || c == '/' || c == '\\') c = '_';
  return out + ".csv";
}

int worker_count(int jobs) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BANDIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<int>(v);
  }
  return std::max(1, std::min(n, jobs));
}

RunResult run_experiment(const ExperimentConfig& cfg, const EpisodeHook& hook) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output);

  const int n_alg = static_cast<int>(cfg.algorithms.size());
  const int n_seed = static_cast<int>(cfg.seeds.size());
  const int jobs = n_alg * n_seed;

  RunResult result;
  std::vector<std::ofstream> files;
  for (const auto& a : cfg.algorithms) {
    const auto path = cfg.output / csv_name(a.name);
    files.emplace_back(path, std::ios::trunc);
    if (!files.back()) throw std::runtime_error("cannot write " + path.string());
    files.back() << kRegretHeader << '\n';
    result.csv_files.push_back(path);
  }

  // Job j is (seed j / n_alg, algorithm j % n_alg). Workers fill slots; this
  // thread writes them strictly in job order, so output never depends on
  // scheduling.
  struct Slot {
    std::optional<std::string> rows;
    double final_regret = 0.0;
    std::exception_ptr error;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(jobs));
  std::mutex mu;
  std::mutex hook_mu;
  std::condition_variable ready;
  std::atomic<int> next{0};
  std::atomic<bool> abort{false};
  int alive = 0;  // guarded by mu

  auto worker = [&] {
    for (int j = next++; j < jobs && !abort; j = next++) {
      const int s = j / n_alg;
      const auto& alg = cfg.algorithms[static_cast<std::size_t>(j % n_alg)];
      const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(s)];
      Slot out;
      try {
        auto env = make_environment(cfg.environment, seed);
        auto policy = make_policy(alg, cfg.horizon, *env, seed);
        const PolicyTrace trace = run_episode(*policy, *env, cfg.horizon, cfg.wall_clock);
        out.rows = format_rows(s, seed, alg.name, trace);
        out.final_regret = trace.final_regret();
        if (hook) {
          std::lock_guard lock(hook_mu);
          hook(alg, seed, *policy, trace);
        }
      } catch (...) {
        out.error = std::current_exception();
        out.rows = std::string();
        abort = true;
      }
      {
        std::lock_guard lock(mu);
        slots[static_cast<std::size_t>(j)] = std::move(out);
      }
      ready.notify_all();
    }
    {
      std::lock_guard lock(mu);
      --alive;
    }
    ready.notify_all();
  };

  std::vector<std::jthread> pool;
  const int workers = worker_count(jobs);
  alive = workers;
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);

  std::vector<std::vector<double>> finals(static_cast<std::size_t>(n_alg));
  std::exception_ptr failure;
  for (int j = 0; j < jobs; ++j) {
    Slot slot;
    {
      std::unique_lock lock(mu);
      ready.wait(lock, [&] { return slots[static_cast<std::size_t>(j)].rows.has_value() || alive == 0; });
      if (!slots[static_cast<std::size_t>(j)].rows) break;  // aborted before this job ran
      slot = std::move(slots[static_cast<std::size_t>(j)]);
    }
    if (slot.error) {
      failure = slot.error;
      break;
    }
    auto& f = files[static_cast<std::size_t>(j % n_alg)];
    f << *slot.rows;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + result.csv_files[static_cast<std::size_t>(j % n_alg)].string());
    finals[static_cast<std::size_t>(j % n_alg)].push_back(slot.final_regret);
  }
  abort = true;
  pool.clear();
  if (!failure)
    for (const auto& s : slots)
      if (s.error) {
        failure = s.error;
        break;
      }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t a = 0; a < files.size(); ++a) {
    files[a].close();
    fsync_path(result.csv_files[a]);
  }

  for (int a = 0; a < n_alg; ++a) {
    const auto& v = finals[static_cast<std::size_t>(a)];
    SummaryRow row;
    row.algorithm = cfg.algorithms[static_cast<std::size_t>(a)].name;
    row.runs = static_cast<int>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    row.mean_final_regret = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - row.mean_final_regret) * (x - row.mean_final_regret);
    row.std_final_regret = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    result.rows.push_back(row);
  }

  result.summary = cfg.output / "summary.csv";
  {
    std::ofstream out(result.summary, std::ios::trunc);
    out << std::setprecision(17) << "algorithm,runs,mean_final_regret,std_final_regret\n";
    for (const auto& r : result.rows)
      out << r.algorithm << ',' << r.runs << ',' << r.mean_final_regret << ',' << r.std_final_regret << '\n';
    if (!out) throw std::runtime_error("cannot write " + result.summary.string());
  }
  fsync_path(result.summary);
  return result;
}

}  // namespace nbandit::cli
