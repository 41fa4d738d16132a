#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "nbandit/bandit_env.hpp"
#include "nbandit/network.hpp"
#include "nbandit/ntk.hpp"

using namespace nbandit;

namespace {

Eigen::VectorXd unit(int d, Rng& rng) { return sample_contexts(d, 1, rng).vectors.front(); }

Weights random_weights(const NetConfig& cfg, Rng& rng) {
  std::normal_distribution<double> n01;
  Weights w = init_weights(cfg, rng());
  for (auto& l : w.layers)
    for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] += 0.5 * n01(rng);  // break the pairing
  return w;
}

// Central differences of forward() over every parameter, row-major per layer.
Eigen::VectorXd fd_gradient(const NetConfig& cfg, Weights w, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(cfg.param_count()));
  Eigen::Index k = 0;
  for (auto& layer : w.layers)
    for (Eigen::Index i = 0; i < layer.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.cols(); ++j) {
        const double keep = layer(i, j);
        layer(i, j) = keep + h;
        const double up = forward(cfg, w, x);
        layer(i, j) = keep - h;
        const double down = forward(cfg, w, x);
        layer(i, j) = keep;
        g(k++) = (up - down) / (2.0 * h);
      }
  return g;
}

double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).lpNorm<Eigen::Infinity>() / std::max(b.lpNorm<Eigen::Infinity>(), 1e-12);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("config validation and sizes") {
  NetConfig cfg{2, 8, 1, 3};
  CHECK(cfg.param_count() == 8u * 3 + 64 + 8);
  CHECK(cfg.layer_scale() == doctest::Approx(std::sqrt(2.0 / 8.0)));
  CHECK_THROWS_AS((NetConfig{1, 7, 1, 3}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((NetConfig{0, 8, 1, 3}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((NetConfig{1, 8, 0, 3}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((TrainSpec{0.0, 1e-3, 10}.validate()), std::invalid_argument);
}

TEST_CASE("hand-evaluated forward pass") {
  const NetConfig cfg{1, 2, 1, 1};
  Weights w;
  w.layers = {Eigen::MatrixXd(2, 1), Eigen::MatrixXd(1, 2)};
  w.layers[0] << 1, -1;
  w.layers[1] << 1, 1;
  CHECK(forward(cfg, w, Eigen::VectorXd::Ones(1)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("zero-output initialisation") {
  const NetConfig cfg{2, 16, 2, 4};
  const Weights w = init_weights(cfg, 7);
  CHECK(w == init_weights(cfg, 7));
  CHECK_FALSE(w == init_weights(cfg, 8));
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(forward(cfg, w, unit(4, rng))) < 1e-14);
}

TEST_CASE("first-layer entries are standard normal") {
  const NetConfig cfg{1, 2048, 1, 5};
  const Weights w = init_weights(cfg, 3);
  const auto& a = w.layers[0];
  const double mean = a.mean();
  const double var = (a.array() - mean).square().sum() / static_cast<double>(a.size() - 1);
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("s-homogeneity through one layer") {
  const NetConfig cfg{2, 8, 2, 3};
  Rng rng(4);
  Weights w = random_weights(cfg, rng);
  const Eigen::VectorXd x = unit(3, rng);
  const auto before = forward_cached(cfg, w, x);
  w.layers[0] *= 2.0;
  const auto after = forward_cached(cfg, w, x);
  CHECK((after.pre[1] - 4.0 * before.pre[1]).norm() < 1e-12 * before.pre[1].norm());
}

TEST_CASE("gradient against finite differences") {
  SUBCASE("L=2, m=8, d=3, s=2") {
    const NetConfig cfg{2, 8, 2, 3};
    Rng rng(10);
    for (int k = 0; k < 5; ++k) {
      const Weights w = random_weights(cfg, rng);
      const Eigen::VectorXd x = unit(3, rng);
      CHECK(rel_error(gradient(cfg, w, x), fd_gradient(cfg, w, x, 1e-4)) < 1e-5);
    }
  }
  SUBCASE("random small nets") {
    Rng rng(11);
    std::uniform_int_distribution<int> depth(1, 3), half(1, 8), smooth(1, 3), dim(1, 4);
    for (int k = 0; k < 20; ++k) {
      const NetConfig cfg{depth(rng), 2 * half(rng), smooth(rng), dim(rng)};
      const Weights w = random_weights(cfg, rng);
      const Eigen::VectorXd x = unit(cfg.input_dim, rng);
      INFO("L=" << cfg.depth << " m=" << cfg.width << " s=" << cfg.smoothness);
      CHECK(rel_error(gradient(cfg, w, x), fd_gradient(cfg, w, x, 1e-4)) < 1e-5);
    }
  }
  SUBCASE("cached and uncached gradients agree bitwise") {
    const NetConfig cfg{2, 8, 1, 3};
    Rng rng(12);
    const Weights w = random_weights(cfg, rng);
    const Eigen::VectorXd x = unit(3, rng);
    const auto cache = forward_cached(cfg, w, x);
    CHECK(gradient(cfg, w, x) == gradient(cfg, w, x, &cache));
  }
}

TEST_CASE("gradient at the paired initialisation is nonzero") {
  const NetConfig cfg{1, 16, 1, 3};
  const Weights w = init_weights(cfg, 2);
  Rng rng(2);
  CHECK(gradient(cfg, w, unit(3, rng)).norm() > 0.0);
}

TEST_CASE("two-unit linear slice has closed-form gradient") {
  // f = √(2/2)·(u·σ(a) + v·σ(b)) with a, b > 0 and x = 1.
  const NetConfig cfg{1, 2, 1, 1};
  Weights w;
  w.layers = {Eigen::MatrixXd(2, 1), Eigen::MatrixXd(1, 2)};
  w.layers[0] << 0.7, 1.3;
  w.layers[1] << -0.4, 2.5;
  const auto g = gradient(cfg, w, Eigen::VectorXd::Ones(1));
  REQUIRE(g.size() == 4);
  CHECK(g(0) == doctest::Approx(-0.4));
  CHECK(g(1) == doctest::Approx(2.5));
  CHECK(g(2) == doctest::Approx(0.7));
  CHECK(g(3) == doctest::Approx(1.3));
}

TEST_CASE("empirical kernel symmetry and sign") {
  const NetConfig cfg{2, 32, 1, 4};
  const Weights w = init_weights(cfg, 9);
  Rng rng(9);
  for (int k = 0; k < 10; ++k) {
    const auto x = unit(4, rng), x2 = unit(4, rng);
    CHECK(empirical_kernel(cfg, w, x, x2) == empirical_kernel(cfg, w, x2, x));
    CHECK(empirical_kernel(cfg, w, x, x) >= 0.0);
  }
}

TEST_CASE("empirical kernel is close to the NT kernel at width 4096") {
  const NetConfig cfg{1, 4096, 1, 5};
  const NtkSpec ntk{1, 1, {}};
  std::vector<double> worst;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Weights w = init_weights(cfg, seed);
    Rng rng(seed + 100);
    double e = 0.0;
    for (int k = 0; k < 10; ++k) {
      const auto x = unit(5, rng), x2 = unit(5, rng);
      e = std::max(e, std::abs(empirical_kernel(cfg, w, x, x2) - ntk_scalar(ntk, x.dot(x2))));
    }
    worst.push_back(e);
  }
  CHECK(median(worst) < 0.15);
}

TEST_CASE("self-kernel concentrates with width") {
  const NtkSpec ntk{1, 1, {}};
  const double theta1 = ntk_scalar(ntk, 1.0);
  double prev = 1e9;
  for (int m : {64, 256, 1024, 4096}) {
    const NetConfig cfg{1, m, 1, 5};
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Weights w = init_weights(cfg, seed);
      Rng rng(seed + 50);
      const auto x = unit(5, rng);
      errs.push_back(std::abs(empirical_kernel(cfg, w, x, x) / theta1 - 1.0));
    }
    const double med = median(errs);
    INFO("m=" << m << " median " << med);
    CHECK(med < prev);
    prev = med;
  }
}

TEST_CASE("train: zero epochs and heavy ridge") {
  const NetConfig cfg{1, 4, 1, 2};
  const Weights w0 = init_weights(cfg, 1);
  Rng rng(1);
  std::vector<Sample> data{{unit(2, rng), 1.0}, {unit(2, rng), -0.5}};
  CHECK(train(cfg, w0, data, TrainSpec{0.1, 1e-3, 0}) == w0);

  auto dist = [&](const Weights& w) {
    double s = 0.0;
    for (std::size_t l = 0; l < w.layers.size(); ++l) s += (w.layers[l] - w0.layers[l]).squaredNorm();
    return std::sqrt(s);
  };
  const double free_move = dist(train(cfg, w0, data, TrainSpec{1e-3, 1e-3, 200}));
  const double pinned = dist(train(cfg, w0, data, TrainSpec{1e6, 1e-7, 200}));
  CHECK(free_move > 1e-2);
  CHECK(pinned < 1e-5);
}

TEST_CASE("train step equals the finite-difference gradient of the loss") {
  const NetConfig cfg{2, 6, 2, 3};
  Rng rng(21);
  const Weights w0 = random_weights(cfg, rng);
  std::vector<Sample> data;
  for (int i = 0; i < 5; ++i) data.push_back({unit(3, rng), 0.3 * i - 0.5});
  const double lambda = 0.2, eta = 1e-6;
  const Weights w1 = train(cfg, w0, data, TrainSpec{lambda, eta, 1});
  // At W = W0 the ridge term has zero gradient, so (W0 - W1)/η = ∇Σ(f - y)².
  Weights probe = w0;
  const double h = 1e-5;
  double worst = 0.0, scale = 0.0;
  for (std::size_t l = 0; l < probe.layers.size(); ++l)
    for (Eigen::Index i = 0; i < probe.layers[l].size(); ++i) {
      double& v = probe.layers[l].data()[i];
      const double keep = v;
      v = keep + h;
      const double up = train_loss(cfg, probe, w0, data, lambda);
      v = keep - h;
      const double down = train_loss(cfg, probe, w0, data, lambda);
      v = keep;
      const double fd = (up - down) / (2.0 * h);
      const double step = (w0.layers[l].data()[i] - w1.layers[l].data()[i]) / eta;
      worst = std::max(worst, std::abs(fd - step));
      scale = std::max(scale, std::abs(fd));
    }
  CHECK(worst / scale < 1e-5);
}

TEST_CASE("single point converges to the linearised ridge solution") {
  const NetConfig cfg{1, 64, 1, 3};
  const Weights w0 = init_weights(cfg, 5);
  Rng rng(5);
  const Eigen::VectorXd x = unit(3, rng);
  const double y = 0.1, lambda = 0.1;
  const double gg = gradient(cfg, w0, x).squaredNorm();
  const double ridge = gg * y / (gg + cfg.width * lambda);
  const Weights w = train(cfg, w0, std::vector<Sample>{{x, y}}, TrainSpec{lambda, 1e-3, 5000});
  CHECK(std::abs(forward(cfg, w, x) - ridge) < 1e-3);
}

TEST_CASE("loss is monotone for small steps") {
  const NetConfig cfg{2, 16, 1, 4};
  const Weights w0 = init_weights(cfg, 8);
  Rng rng(8);
  std::vector<Sample> data;
  std::normal_distribution<double> n01;
  for (int i = 0; i < 30; ++i) data.push_back({unit(4, rng), n01(rng)});
  double prev = std::numeric_limits<double>::infinity();
  int violations = 0;
  train(cfg, w0, data, TrainSpec{0.1, 1e-3, 300}, [&](int, double loss) {
    if (loss > prev + 1e-9) ++violations;
    prev = loss;
  });
  CHECK(violations == 0);
}

TEST_CASE("divergence is reported with its epoch") {
  const NetConfig cfg{1, 8, 2, 3};
  const Weights w0 = init_weights(cfg, 1);
  Rng rng(3);
  std::vector<Sample> data;
  for (int i = 0; i < 10; ++i) data.push_back({unit(3, rng), 100.0});
  try {
    train(cfg, w0, data, TrainSpec{0.1, 10.0, 1000});
    FAIL("expected divergence");
  } catch (const TrainDivergence& e) {
    CHECK(e.epoch() > 0);
  }
}

TEST_CASE("input validation") {
  const NetConfig cfg{1, 4, 1, 3};
  const Weights w = init_weights(cfg, 1);
  CHECK_THROWS_AS(forward(cfg, w, Eigen::VectorXd::Ones(3)), std::invalid_argument);
  CHECK_THROWS_AS(forward(cfg, w, Eigen::VectorXd::Ones(2).normalized()), std::invalid_argument);
  Weights bad = w;
  bad.layers[0](0, 0) = std::nan("");
  CHECK_THROWS_AS(check_weights(cfg, bad), std::invalid_argument);
}

TEST_CASE("weights file round trip") {
  const NetConfig cfg{2, 6, 3, 4};
  const Weights w = init_weights(cfg, 17);
  const auto dir = std::filesystem::temp_directory_path() / "nbandit_test_weights";
  std::filesystem::create_directories(dir);
  const auto path = dir / "w.nblw";
  save_weights(path, cfg, w);
  NetConfig read_cfg;
  CHECK(load_weights(path, &read_cfg) == w);
  CHECK(read_cfg == cfg);

  { std::ofstream(path, std::ios::app | std::ios::binary) << 'x'; }
  CHECK_THROWS(load_weights(path));
  { std::ofstream(path, std::ios::binary) << "NOPE1234"; }
  CHECK_THROWS(load_weights(path));
  std::filesystem::remove_all(dir);
}
