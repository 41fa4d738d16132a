#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "nbandit/algorithms.hpp"

namespace nbandit {

int GcbConfig::levels() const {
  int r = 0;
  long long p = 1;
  while (p < horizon) {
    p *= 2;
    ++r;
  }
  return std::max(r, 1);
}

double GcbConfig::alpha() const { return alpha0 > 0.0 ? alpha0 : 20.0 * std::log(static_cast<double>(horizon)); }

void GcbConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(sigma0 > 0.0)) throw std::invalid_argument("sigma0 must be positive");
  if (!(eta0 > 0.0)) throw std::invalid_argument("eta0 must be positive");
  if (!(alpha() > 0.0)) throw std::invalid_argument("alpha0 must be positive");
  batch.validate();
  net.validate();
  confidence.validate();
}

GcbSelection gcb_select(const GcbConfig& cfg, int t, int num_actions, std::span<const int> ctr,
                        const std::function<LevelPredictions(int, const std::vector<int>&)>& predict) {
  const int R = cfg.levels();
  if (num_actions < 1) throw std::invalid_argument("need at least one action");
  if (static_cast<int>(ctr.size()) < R) throw std::invalid_argument("ctr must cover every level");

  GcbSelection sel;
  std::vector<int> active(static_cast<std::size_t>(num_actions));
  for (int a = 0; a < num_actions; ++a) active[a] = a;
  const double exploit_width = cfg.eta0 / std::sqrt(static_cast<double>(t));
  const double alpha = cfg.alpha();

  for (int r = 1;; ++r) {
    sel.active_sets.push_back(active);
    const LevelPredictions p = predict(r, active);

    int mu_best = active.front();
    int ucb_best = active.front();
    int sig_best = active.front();
    std::vector<double> ucb(num_actions), lcb(num_actions);
    for (int a : active) {
      std::tie(ucb[a], lcb[a]) = ucb_lcb(p.means[a], p.sigmas[a], p.beta);
      if (p.means[a] > p.means[mu_best]) mu_best = a;
      if (ucb[a] > ucb[ucb_best]) ucb_best = a;
      if (p.sigmas[a] > p.sigmas[sig_best]) sig_best = a;
    }
    sel.max_mu.push_back(mu_best);

    const double threshold = cfg.sigma0 * std::ldexp(1.0, -r);
    Decision& d = sel.decision;
    d.level = r;

    if (p.sigmas[sig_best] <= threshold) {
      if (p.sigmas[ucb_best] <= exploit_width || r == R) {
        d.action = ucb_best;
        d.label = 1;
        d.store_level = std::min(r + 1, R);
        return sel;
      }
      double max_lcb = lcb[active.front()];
      for (int a : active) max_lcb = std::max(max_lcb, lcb[a]);
      std::vector<int> next;
      for (int a : active)
        if (ucb[a] >= max_lcb) next.push_back(a);
      assert(std::find(next.begin(), next.end(), ucb_best) != next.end());
      active = std::move(next);
      continue;
    }

    d.store_level = r;
    if (r == 1 || ctr[r - 1] > alpha * std::pow(4.0, r)) {
      d.action = sig_best;  // largest σ̂ among those above the threshold
      d.label = 2;
    } else {
      d.action = sel.max_mu[r - 2];
      d.label = 3;
    }
    return sel;
  }
}

NeuralGcb::NeuralGcb(GcbConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  cfg_.train.lambda = cfg_.confidence.lambda;
  w0_ = std::make_shared<const Weights>(init_weights(cfg_.net, derive_seed(seed, streams::kInit)));
  const int R = cfg_.levels();
  levels_.reserve(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r) levels_.push_back(GcbLevel{LevelModel(cfg_.net, w0_, cfg_.confidence.lambda)});
}

Decision NeuralGcb::select(const ContextSet& contexts) {
  ++t_;
  std::vector<int> ctr;
  ctr.reserve(levels_.size());
  for (const auto& l : levels_) ctr.push_back(l.ctr);

  const int K = contexts.num_actions();
  auto predict = [&](int r, const std::vector<int>& active) {
    GcbLevel& level = levels_[static_cast<std::size_t>(r - 1)];
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(active.size());
    for (int a : active) xs.push_back(contexts.vectors[static_cast<std::size_t>(a)]);
    const Predictions p =
        get_predictions(level.model, cfg_.train, xs, cfg_.batch.q_for(r), cfg_.batch.mode);
    LevelPredictions out;
    out.means.assign(static_cast<std::size_t>(K), 0.0);
    out.sigmas.assign(static_cast<std::size_t>(K), 0.0);
    for (std::size_t i = 0; i < active.size(); ++i) {
      out.means[static_cast<std::size_t>(active[i])] = p.means[i];
      out.sigmas[static_cast<std::size_t>(active[i])] = p.sigmas[i];
    }
    out.beta = cfg_.time_varying_beta ? beta_neural_ucb(cfg_.confidence, level.model.design)
                                      : beta_practical(cfg_.confidence);
    return out;
  };

  last_ = gcb_select(cfg_, t_, K, ctr, predict);
  for (std::size_t i = 0; i < last_.max_mu.size(); ++i) levels_[i].max_mu = last_.max_mu[i];
  return last_.decision;
}

void NeuralGcb::update(const ContextSet& contexts, const Decision& decision, double y) {
  GcbLevel& level = levels_.at(static_cast<std::size_t>(decision.store_level - 1));
  level.psi.emplace_back(t_, decision.label);
  level.model.design = design_add(level.model.design, contexts.vectors.at(decision.action), y);
  if (decision.label == 3) ++levels_.at(static_cast<std::size_t>(decision.level - 1)).ctr;
  get_predictions(level.model, cfg_.train, {}, cfg_.batch.q_for(decision.store_level), cfg_.batch.mode);
}

std::vector<int> NeuralGcb::retrains_per_level() const {
  std::vector<int> out;
  out.reserve(levels_.size());
  for (const auto& l : levels_) out.push_back(l.model.retrains);
  return out;
}

RoundResult neural_gcb_round(NeuralGcb& policy, const ContextSet& contexts, Environment& env) {
  RoundResult out;
  out.decision = policy.select(contexts);
  out.round.t = contexts.round;
  out.round.action = out.decision.action;
  out.round.regret = env.regret_of(out.decision.action);
  out.round.observed = env.pull(out.decision.action);
  policy.update(contexts, out.decision, out.round.observed);
  return out;
}

}  // namespace nbandit
