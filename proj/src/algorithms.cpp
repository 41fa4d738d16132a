#include "nbandit/algorithms.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace nbandit {

BatchMode parse_batch_mode(const std::string& name) {
  if (name == "fixed") return BatchMode::fixed;
  if (name == "adaptive") return BatchMode::adaptive;
  throw std::invalid_argument("unknown batch mode: " + name);
}

double BatchSchedule::q_for(int level) const {
  if (q.empty()) throw std::logic_error("empty batch schedule");
  if (level < 1) throw std::invalid_argument("batch level must be >= 1");
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(level - 1), q.size() - 1);
  return q[i];
}

void BatchSchedule::validate() const {
  if (q.empty()) throw std::invalid_argument("batch schedule needs at least one q");
  for (double v : q) {
    if (!std::isfinite(v)) throw std::invalid_argument("batch q must be finite");
    if (mode == BatchMode::fixed && (v < 1.0 || v != std::floor(v)))
      throw std::invalid_argument("fixed batch q must be a positive integer");
    if (mode == BatchMode::adaptive && v <= 1.0) throw std::invalid_argument("adaptive batch q must exceed 1");
  }
}

LevelModel::LevelModel(const NetConfig& cfg, std::shared_ptr<const Weights> w0, double lambda)
    : design(cfg, w0, lambda), weights(std::move(w0)) {}

bool needs_retrain(const DesignState& design, double q, BatchMode mode) {
  if (mode == BatchMode::fixed) return static_cast<double>(design.size() - design.fb_index()) >= q;
  return design.logdet_now() - design.logdet_fb() > std::log(q);
}

Predictions get_predictions(LevelModel& level, const TrainSpec& spec, std::span<const Eigen::VectorXd> contexts,
                            double q, BatchMode mode) {
  Predictions out;
  out.sigmas.reserve(contexts.size());
  for (const auto& x : contexts) out.sigmas.push_back(std::sqrt(posterior_variance(level.design, x)));

  if (needs_retrain(level.design, q, mode)) {
    const DesignState& d = level.design;
    std::vector<Sample> data;
    data.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) data.push_back({d.point(i), d.reward(i)});
    TrainSpec ts = spec;
    ts.lambda = d.lambda();
    level.weights = std::make_shared<const Weights>(train(d.config(), d.initial_weights(), data, ts));
    level.design = mark_retrained(d);
    ++level.retrains;
    out.retrained = true;
  }

  out.means.reserve(contexts.size());
  for (const auto& x : contexts) out.means.push_back(forward(level.design.config(), *level.weights, x));
  return out;
}

std::pair<double, double> ucb_lcb(double mean, double sigma, double beta) {
  if (!(sigma >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("ucb_lcb needs sigma, beta >= 0");
  return {mean + beta * sigma, mean - beta * sigma};
}

namespace {

int argmax(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Round play(Environment& env, int t, int action) {
  Round r;
  r.t = t;
  r.action = action;
  r.regret = env.regret_of(action);
  r.observed = env.pull(action);
  return r;
}

}  // namespace

// ---------------------------------------------------------------- NeuralUCB

NeuralUcb::NeuralUcb(NeuralUcbConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      model_(cfg_.net, std::make_shared<const Weights>(init_weights(cfg_.net, derive_seed(seed, streams::kInit))),
             cfg_.confidence.lambda) {
  cfg_.net.validate();
  cfg_.confidence.validate();
  cfg_.batch.validate();
}

Decision NeuralUcb::select(const ContextSet& contexts) {
  const auto p = get_predictions(model_, cfg_.train, contexts.vectors, cfg_.batch.q_for(1), cfg_.batch.mode);
  const double beta = beta_neural_ucb(cfg_.confidence, model_.design);
  std::vector<double> score(p.means.size());
  for (std::size_t a = 0; a < score.size(); ++a) score[a] = ucb_lcb(p.means[a], p.sigmas[a], beta).first;
  Decision d;
  d.action = argmax(score);
  return d;
}

void NeuralUcb::update(const ContextSet& contexts, const Decision& decision, double y) {
  model_.design = design_add(model_.design, contexts.vectors.at(decision.action), y);
  get_predictions(model_, cfg_.train, {}, cfg_.batch.q_for(1), cfg_.batch.mode);
}

RoundResult neural_ucb_round(NeuralUcb& policy, const ContextSet& contexts, Environment& env) {
  RoundResult out;
  out.decision = policy.select(contexts);
  out.round = play(env, contexts.round, out.decision.action);
  policy.update(contexts, out.decision, out.round.observed);
  return out;
}

// ---------------------------------------------------------------- LinUCB

// Classic width 1 + √(log(2TK/δ)/2); no tuning.
double LinUcbConfig::beta() const {
  return 1.0 + std::sqrt(std::log(2.0 * horizon * num_actions / delta) / 2.0);
}

LinUcb::LinUcb(LinUcbConfig cfg, int dim) : cfg_(cfg) {
  if (!(cfg_.lambda > 0.0)) throw std::invalid_argument("LinUCB lambda must be positive");
  if (!(cfg_.delta > 0.0 && cfg_.delta < 1.0)) throw std::invalid_argument("LinUCB delta must lie in (0,1)");
  if (cfg_.horizon < 1 || cfg_.num_actions < 1 || dim < 1) throw std::invalid_argument("LinUCB sizes must be positive");
  gram_ = cfg_.lambda * Eigen::MatrixXd::Identity(dim, dim);
  xty_ = Eigen::VectorXd::Zero(dim);
}

Eigen::VectorXd LinUcb::theta() const { return gram_.llt().solve(xty_); }

Decision LinUcb::select(const ContextSet& contexts) {
  const Eigen::LLT<Eigen::MatrixXd> llt(gram_);
  const Eigen::VectorXd th = llt.solve(xty_);
  const double beta = cfg_.beta();
  std::vector<double> score(contexts.vectors.size());
  for (std::size_t a = 0; a < score.size(); ++a) {
    const auto& x = contexts.vectors[a];
    score[a] = th.dot(x) + beta * std::sqrt(std::max(0.0, x.dot(llt.solve(x))));
  }
  Decision d;
  d.action = argmax(score);
  return d;
}

void LinUcb::update(const ContextSet& contexts, const Decision& decision, double y) {
  const auto& x = contexts.vectors.at(decision.action);
  gram_.noalias() += x * x.transpose();
  xty_ += y * x;
}

RoundResult lin_ucb_round(LinUcb& policy, const ContextSet& contexts, Environment& env) {
  RoundResult out;
  out.decision = policy.select(contexts);
  out.round = play(env, contexts.round, out.decision.action);
  policy.update(contexts, out.decision, out.round.observed);
  return out;
}

// ---------------------------------------------------------------- trivial policies

UniformRandom::UniformRandom(std::uint64_t seed) : rng_(derive_seed(seed, streams::kPolicy)) {}

Decision UniformRandom::select(const ContextSet& contexts) {
  std::uniform_int_distribution<int> pick(0, contexts.num_actions() - 1);
  Decision d;
  d.action = pick(rng_);
  return d;
}

Decision OraclePolicy::select(const ContextSet& contexts) {
  std::vector<double> means(contexts.vectors.size());
  for (std::size_t a = 0; a < means.size(); ++a) means[a] = env_.mean_reward(static_cast<int>(a));
  Decision d;
  d.action = argmax(means);
  return d;
}

// ---------------------------------------------------------------- episodes

PolicyTrace run_episode(Policy& policy, Environment& env, int horizon, bool wall_clock) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  PolicyTrace trace;
  trace.rows.reserve(static_cast<std::size_t>(horizon));
  std::vector<int> seen = policy.retrains_per_level();
  double cumulative = 0.0;
  int retrains_total = 0;

  for (int t = 1; t <= horizon; ++t) {
    try {
      const ContextSet& ctx = env.next_contexts();
      const Decision d = policy.select(ctx);
      if (d.action < 0 || d.action >= ctx.num_actions()) throw std::out_of_range("policy chose an invalid action");
      const double regret = env.regret_of(d.action);
      const double y = env.pull(d.action);
      policy.update(ctx, d, y);

      const std::vector<int> now = policy.retrains_per_level();
      if (seen.size() < now.size()) seen.resize(now.size(), 0);
      for (std::size_t l = 0; l < now.size(); ++l) {
        for (int k = seen[l]; k < now[l]; ++k) trace.retrains.push_back({t, static_cast<int>(l) + 1});
        retrains_total += now[l] - seen[l];
      }
      seen = now;

      cumulative += regret;
      TraceRow row;
      row.t = t;
      row.level = d.level;
      row.label = d.label;
      row.action = d.action;
      row.regret = regret;
      row.cumulative_regret = cumulative;
      row.retrains_total = retrains_total;
      if (wall_clock)
        row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      trace.rows.push_back(row);
    } catch (const std::exception& e) {
      throw std::runtime_error(policy.name() + " failed at round " + std::to_string(t) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace nbandit
