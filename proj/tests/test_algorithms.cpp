#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "nbandit/algorithms.hpp"
#include "nbandit/bandit_env.hpp"

using namespace nbandit;

namespace {

struct FakeLevel {
  std::vector<double> means;
  std::vector<double> sigmas;
  double beta = 1.0;
};

// Levels beyond the table reuse its last entry.
auto fake(const std::vector<FakeLevel>& table) {
  return [table](int r, const std::vector<int>&) {
    const auto& l = table[static_cast<std::size_t>(std::min<int>(r, static_cast<int>(table.size())) - 1)];
    return LevelPredictions{l.means, l.sigmas, l.beta};
  };
}

GcbConfig gcb_config(int horizon) {
  GcbConfig cfg;
  cfg.horizon = horizon;
  cfg.net = {1, 16, 1, 5};
  cfg.train = {0.1, 1e-3, 30};
  cfg.confidence = {1.0, 0.1, 0.1, 0.1};
  return cfg;
}

std::unique_ptr<SyntheticEnv> h2_env(std::uint64_t seed, int d = 5, int k = 4) {
  Rng rng(derive_seed(seed, streams::kProblem));
  return std::make_unique<SyntheticEnv>(make_synthetic_model(RewardKind::h2, d, 0.1, rng), d, k, seed);
}

class LinearEnv final : public Environment {
 public:
  LinearEnv(Eigen::VectorXd theta, int k, std::uint64_t seed) : theta_(std::move(theta)), k_(k), rng_(seed) {}
  int context_dim() const override { return static_cast<int>(theta_.size()); }
  int num_actions() const override { return k_; }
  const ContextSet& next_contexts() override {
    const int t = cs_.round + 1;
    cs_ = sample_contexts(context_dim(), k_, rng_);
    cs_.round = t;
    return cs_;
  }
  double mean_reward(int a) const override { return theta_.dot(cs_.vectors[static_cast<std::size_t>(a)]); }
  double pull(int a) override { return mean_reward(a); }

 private:
  Eigen::VectorXd theta_;
  int k_;
  Rng rng_;
  ContextSet cs_;
};

class Exploding final : public Policy {
 public:
  std::string name() const override { return "exploding"; }
  Decision select(const ContextSet&) override {
    if (++t_ == 3) throw std::runtime_error("boom");
    return {};
  }
  void update(const ContextSet&, const Decision&, double) override {}

 private:
  int t_ = 0;
};

}  // namespace

TEST_CASE("ucb_lcb") {
  const auto [u, l] = ucb_lcb(1.0, 0.5, 2.0);
  CHECK(u == 2.0);
  CHECK(l == 0.0);
  CHECK(ucb_lcb(-3.0, 0.0, 5.0) == std::pair<double, double>{-3.0, -3.0});
  CHECK_THROWS_AS(ucb_lcb(0.0, -1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ucb_lcb(0.0, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("batch schedule and config") {
  BatchSchedule b{BatchMode::fixed, {4, 20, 40}};
  CHECK(b.q_for(1) == 4);
  CHECK(b.q_for(3) == 40);
  CHECK(b.q_for(9) == 40);
  CHECK_NOTHROW(b.validate());
  CHECK_THROWS_AS((BatchSchedule{BatchMode::fixed, {2.5}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BatchSchedule{BatchMode::fixed, {0}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BatchSchedule{BatchMode::adaptive, {1.0}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BatchSchedule{BatchMode::fixed, {}}.validate()), std::invalid_argument);
  CHECK(parse_batch_mode("adaptive") == BatchMode::adaptive);
  CHECK_THROWS_AS(parse_batch_mode("lazy"), std::invalid_argument);

  GcbConfig cfg = gcb_config(1000);
  CHECK(cfg.levels() == 10);
  CHECK(cfg.alpha() == doctest::Approx(20.0 * std::log(1000.0)));
  cfg.horizon = 1;
  CHECK(cfg.levels() == 1);
  cfg.horizon = 2;
  CHECK(cfg.levels() == 1);
  cfg.horizon = 3;
  CHECK(cfg.levels() == 2);
  cfg.sigma0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  LinUcbConfig lin{1.0, 0.1, 1000, 4};
  CHECK(lin.beta() == doctest::Approx(1.0 + std::sqrt(std::log(2.0 * 1000 * 4 / 0.1) / 2.0)));
}

TEST_CASE("get_predictions: variances, means and the retrain rule") {
  const NetConfig net{1, 8, 1, 3};
  auto w0 = std::make_shared<const Weights>(init_weights(net, 1));
  const TrainSpec ts{0.1, 1e-2, 20};
  Rng rng(1);
  const auto probe = sample_contexts(3, 3, rng).vectors;

  SUBCASE("fixed q = 3") {
    LevelModel level(net, w0, 0.1);
    for (int i = 1; i <= 7; ++i) {
      level.design = design_add(level.design, sample_contexts(3, 1, rng).vectors[0], 1.0);
      const auto p = get_predictions(level, ts, probe, 3, BatchMode::fixed);
      CHECK(p.retrained == (i % 3 == 0));
      CHECK(level.retrains == i / 3);
      for (std::size_t a = 0; a < probe.size(); ++a) {
        CHECK(p.sigmas[a] == doctest::Approx(std::sqrt(posterior_variance(level.design, probe[a]))));
        CHECK(p.means[a] == forward(net, *level.weights, probe[a]));
      }
    }
    CHECK(level.weights != w0);
  }
  SUBCASE("q = 1 retrains on every add") {
    LevelModel level(net, w0, 0.1);
    for (int i = 1; i <= 4; ++i) {
      level.design = design_add(level.design, sample_contexts(3, 1, rng).vectors[0], 0.5);
      CHECK(get_predictions(level, ts, {}, 1, BatchMode::fixed).retrained);
      CHECK(level.design.fb_index() == level.design.size());
    }
    CHECK(level.retrains == 4);
  }
  SUBCASE("no data means no retrain and zero means") {
    LevelModel level(net, w0, 0.1);
    const auto p = get_predictions(level, ts, probe, 1, BatchMode::fixed);
    CHECK_FALSE(p.retrained);
    for (double m : p.means) CHECK(m == 0.0);
  }
  SUBCASE("adaptive q = 2") {
    LevelModel level(net, w0, 0.1);
    for (int i = 0; i < 20; ++i) {
      level.design = design_add(level.design, sample_contexts(3, 1, rng).vectors[0], 0.5);
      const bool expect = logdet_ratio(level.design) > 2.0;
      CHECK(needs_retrain(level.design, 2.0, BatchMode::adaptive) == expect);
      CHECK(get_predictions(level, ts, {}, 2.0, BatchMode::adaptive).retrained == expect);
      CHECK(logdet_ratio(level.design) <= 2.0);
    }
    CHECK(level.retrains >= 1);
    CHECK(level.retrains <= level.design.logdet_now() / std::log(2.0) + 1.0);
  }
}

TEST_CASE("gcb_select: branches") {
  const GcbConfig cfg = gcb_config(1000);
  const std::vector<int> ctr(10, 0);

  SUBCASE("high variance at level 1 explores") {
    const auto sel = gcb_select(cfg, 1, 3, ctr, fake({{{0, 0, 0}, {1.0, 2.0, 1.5}}}));
    CHECK(sel.decision.level == 1);
    CHECK(sel.decision.label == 2);
    CHECK(sel.decision.action == 1);
    CHECK(sel.decision.store_level == 1);
  }
  SUBCASE("confident UCB action exploits and is stored one level down") {
    const auto sel = gcb_select(cfg, 4, 3, ctr, fake({{{0.1, 0.5, 0.2}, {0.05, 0.01, 0.09}}}));
    CHECK(sel.decision.label == 1);
    CHECK(sel.decision.level == 1);
    CHECK(sel.decision.action == 1);
    CHECK(sel.decision.store_level == 2);
  }
  SUBCASE("exploitation budget at level 2") {
    // Level 1 is resolved but not confident; level 2 is uncertain.
    const std::vector<FakeLevel> table{{{0.3, 0.9, 0.5}, {0.1, 0.1, 0.1}, 1.0},
                                       {{0.0, 0.0, 0.0}, {0.3, 0.4, 0.1}, 1.0}};
    auto sel = gcb_select(cfg, 100, 3, ctr, fake(table));
    CHECK(sel.decision.level == 2);
    CHECK(sel.decision.label == 3);
    CHECK(sel.decision.action == 1);  // max_mu of level 1
    CHECK(sel.decision.store_level == 2);

    std::vector<int> spent = ctr;
    spent[1] = static_cast<int>(cfg.alpha() * 16.0) + 1;
    sel = gcb_select(cfg, 100, 3, spent, fake(table));
    CHECK(sel.decision.label == 2);
    CHECK(sel.decision.action == 1);  // largest σ̂ at level 2
  }
  SUBCASE("last level plays the UCB action") {
    const GcbConfig two = gcb_config(2);  // R = 1
    const auto sel = gcb_select(two, 1, 2, std::vector<int>{0}, fake({{{0.0, 1.0}, {0.3, 0.3}}}));
    CHECK(sel.decision.label == 1);
    CHECK(sel.decision.action == 1);
    CHECK(sel.decision.store_level == 1);
  }
  SUBCASE("elimination") {
    const std::vector<FakeLevel> table{{{0.0, 1.0, 5.0, 4.0}, {0.1, 0.1, 0.1, 0.1}, 1.0},
                                       {{0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0}, 1.0}};
    const auto sel = gcb_select(cfg, 100, 4, ctr, fake(table));
    REQUIRE(sel.active_sets.size() == 2u);
    CHECK(sel.active_sets[1] == std::vector<int>{2});
    CHECK(sel.decision.action == 2);
  }
  SUBCASE("t = 1 on a fresh policy is forced exploration at level 1") {
    GcbConfig real = gcb_config(1000);
    NeuralGcb gcb(real, 1);
    Rng rng(1);
    const auto d = gcb.select(sample_contexts(5, 4, rng));
    CHECK(d.level == 1);
    CHECK(d.label == 2);
  }
  CHECK_THROWS_AS(gcb_select(cfg, 1, 0, ctr, fake({{{}, {}}})), std::invalid_argument);
  CHECK_THROWS_AS(gcb_select(cfg, 1, 2, std::vector<int>{0}, fake({{{0, 0}, {1, 1}}})), std::invalid_argument);
}

TEST_CASE("gcb_select: properties on random predictions") {
  const GcbConfig cfg = gcb_config(1000);
  Rng rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> kd(1, 6);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = kd(rng);
    const int t = 1 + trial;
    std::vector<FakeLevel> table;
    for (int r = 1; r <= 10; ++r) {
      FakeLevel l;
      for (int a = 0; a < k; ++a) {
        l.means.push_back(4.0 * u(rng));
        l.sigmas.push_back(std::ldexp(u(rng) * 1.2, -r));
      }
      l.beta = 0.5 + u(rng);
      table.push_back(l);
    }
    std::vector<int> ctr(10);
    for (int& c : ctr) c = static_cast<int>(u(rng) * 2000);
    const auto sel = gcb_select(cfg, t, k, ctr, fake(table));

    // Active sets shrink and each keeps the previous level's UCB argmax.
    for (std::size_t r = 1; r < sel.active_sets.size(); ++r) {
      const auto& prev = sel.active_sets[r - 1];
      const auto& cur = sel.active_sets[r];
      CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      const auto& l = table[r - 1];
      int best = prev.front();
      for (int a : prev)
        if (l.means[a] + l.beta * l.sigmas[a] > l.means[best] + l.beta * l.sigmas[best]) best = a;
      CHECK(std::find(cur.begin(), cur.end(), best) != cur.end());
    }
    const auto& d = sel.decision;
    CHECK(d.level == static_cast<int>(sel.active_sets.size()));
    CHECK((d.label >= 1 && d.label <= 3));
    CHECK(d.store_level == (d.label == 1 ? std::min(d.level + 1, 10) : d.level));
    const auto& last = sel.active_sets.back();
    if (d.label != 3) CHECK(std::find(last.begin(), last.end(), d.action) != last.end());

    // Shifting every mean by a constant changes nothing.
    auto shifted = table;
    for (auto& l : shifted)
      for (double& m : l.means) m += 3.7;
    const auto s2 = gcb_select(cfg, t, k, ctr, fake(shifted));
    CHECK(s2.decision.action == d.action);
    CHECK(s2.decision.label == d.label);
    CHECK(s2.active_sets == sel.active_sets);
  }
}

TEST_CASE("NeuralGCB bookkeeping on a short run") {
  for (const auto mode : {BatchMode::fixed, BatchMode::adaptive}) {
    CAPTURE(static_cast<int>(mode));
    GcbConfig cfg = gcb_config(120);
    cfg.sigma0 = 0.5;
    cfg.alpha0 = 0.05;
    cfg.batch = mode == BatchMode::fixed ? BatchSchedule{mode, {1, 2, 4}} : BatchSchedule{mode, {2.0}};
    NeuralGcb gcb(cfg, 3);
    auto env = h2_env(3);
    const auto trace = run_episode(gcb, *env, 120, false);
    CHECK(gcb.rounds() == 120);

    std::set<int> times;
    std::size_t total = 0;
    std::map<int, int> labels;
    for (std::size_t r = 0; r < gcb.levels().size(); ++r) {
      const auto& level = gcb.levels()[r];
      const int rr = static_cast<int>(r) + 1;
      total += level.psi.size();
      CHECK(level.psi.size() == level.model.design.size());
      for (const auto& [t, label] : level.psi) {
        times.insert(t);
        ++labels[label];
      }
      CHECK(level.ctr <= cfg.alpha() * std::pow(4.0, rr) + 1.0);
      const auto n = static_cast<int>(level.psi.size());
      if (mode == BatchMode::fixed)
        CHECK(level.model.retrains == n / static_cast<int>(cfg.batch.q_for(rr)));
      else
        CHECK(level.model.retrains <= level.model.design.logdet_now() / std::log(2.0) + 1.0);
    }
    CHECK(total == 120u);
    CHECK(times.size() == 120u);
    CHECK(*times.begin() == 1);
    CHECK(*times.rbegin() == 120);
    CHECK(labels[2] > 0);

    int sum = 0;
    for (int r : gcb.retrains_per_level()) sum += r;
    CHECK(trace.rows.back().retrains_total == sum);
    CHECK(static_cast<int>(trace.retrains.size()) == sum);
  }
}

TEST_CASE("NeuralUCB") {
  NeuralUcbConfig cfg;
  cfg.net = {1, 16, 1, 5};
  cfg.train = {0.1, 1e-3, 30};
  cfg.confidence = {1.0, 0.1, 0.1, 0.1};
  Rng rng(5);
  const auto cs = sample_contexts(5, 6, rng);

  NeuralUcb ucb(cfg, 2);
  const auto d = ucb.select(cs);
  int best = 0;
  double best_sigma = -1.0;
  for (int a = 0; a < 6; ++a) {
    const double s = posterior_variance(ucb.model().design, cs.vectors[static_cast<std::size_t>(a)]);
    if (s > best_sigma) best_sigma = s, best = a;
  }
  CHECK(d.action == best);

  auto one = h2_env(4, 5, 1);
  NeuralUcb single(cfg, 4);
  CHECK(run_episode(single, *one, 30, false).final_regret() == 0.0);
  CHECK(single.model().retrains == 30);
}

TEST_CASE("LinUCB") {
  LinUcbConfig cfg{0.5, 0.1, 400, 4};
  LinUcb lin(cfg, 3);
  CHECK(lin.theta().isZero());
  ContextSet cs;
  for (int i : {2, 0, 1}) cs.vectors.push_back(Eigen::VectorXd::Unit(3, i));
  CHECK(lin.select(cs).action == 0);  // every score is β‖x‖/√λ, ties go to the lowest index

  Eigen::VectorXd theta(5);
  theta << 0.5, -0.3, 0.8, 0.1, 0.0;
  LinearEnv env(theta, 4, 9);
  LinUcb learner(LinUcbConfig{1.0, 0.1, 600, 4}, 5);
  const auto trace = run_episode(learner, env, 600, false);
  CHECK((learner.theta() - theta).norm() < 1e-2);
  const double late = trace.rows[599].cumulative_regret - trace.rows[499].cumulative_regret;
  const double early = trace.rows[99].cumulative_regret;
  CHECK(late < 0.25 * early);
}

TEST_CASE("reference policies and determinism") {
  auto env = h2_env(8);
  OraclePolicy oracle(*env);
  CHECK(run_episode(oracle, *env, 200, false).final_regret() == 0.0);

  Dataset data;
  data.num_classes = 2;
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    data.features.push_back(sample_contexts(3, 1, rng).vectors[0]);
    data.labels.push_back(1 + i % 2);
  }
  auto cls = classification_to_bandit(data, 0.0, 1);
  UniformRandom random(1);
  CHECK(std::abs(run_episode(random, *cls, 1000, false).final_regret() - 500.0) < 50.0);

  auto run = [] {
    GcbConfig cfg = gcb_config(60);
    NeuralGcb gcb(cfg, 11);
    auto e = h2_env(11);
    return run_episode(gcb, *e, 60, false);
  };
  const auto a = run(), b = run();
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].action == b.rows[i].action);
    CHECK(a.rows[i].label == b.rows[i].label);
    CHECK(a.rows[i].cumulative_regret == b.rows[i].cumulative_regret);
    CHECK(a.rows[i].wall_ms == 0.0);
  }
}

TEST_CASE("run_episode reports the failing round") {
  auto env = h2_env(1);
  Exploding policy;
  try {
    run_episode(policy, *env, 10, false);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("exploding failed at round 3") != std::string::npos);
  }
}
