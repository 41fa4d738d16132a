#include "nbandit/network.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <fstream>
#include <random>
#include <sstream>

#include "nbandit/activation.hpp"
#include "nbandit/rng.hpp"

namespace nbandit {
namespace {

double act(int s, double v) {
  if (v <= 0.0) return 0.0;
  double out = v;
  for (int i = 1; i < s; ++i) out *= v;
  return out;
}

double act_prime(int s, double v) {
  if (v <= 0.0) return 0.0;
  double out = s;
  for (int i = 1; i < s; ++i) out *= v;
  return out;
}

Eigen::MatrixXd apply_act(int s, const Eigen::MatrixXd& m) {
  return m.unaryExpr([s](double v) { return act(s, v); });
}

Eigen::MatrixXd apply_act_prime(int s, const Eigen::MatrixXd& m) {
  return m.unaryExpr([s](double v) { return act_prime(s, v); });
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("weights file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("weights file truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

constexpr char kMagic[4] = {'N', 'B', 'L', 'W'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void NetConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("NetConfig: L must be >= 1");
  if (width < 2 || width % 2 != 0) throw std::invalid_argument("NetConfig: m must be a positive even integer");
  if (smoothness < 1) throw std::invalid_argument("NetConfig: s must be >= 1");
  if (input_dim < 1) throw std::invalid_argument("NetConfig: d must be >= 1");
}

std::size_t NetConfig::param_count() const {
  const auto m = static_cast<std::size_t>(width);
  return m * input_dim + static_cast<std::size_t>(depth - 1) * m * m + m;
}

double NetConfig::layer_scale() const { return std::sqrt(norm_const(smoothness) / width); }

bool operator==(const Weights& a, const Weights& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].rows() != b.layers[l].rows() || a.layers[l].cols() != b.layers[l].cols()) return false;
    if (std::memcmp(a.layers[l].data(), b.layers[l].data(), sizeof(double) * a.layers[l].size()) != 0)
      return false;
  }
  return true;
}

void TrainSpec::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("TrainSpec: lambda must be > 0");
  if (!(eta > 0.0)) throw std::invalid_argument("TrainSpec: eta must be > 0");
  if (epochs < 0) throw std::invalid_argument("TrainSpec: epochs must be >= 0");
}

TrainDivergence::TrainDivergence(int epoch, double loss)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                         " (loss = " + std::to_string(loss) + ")"),
      epoch_(epoch) {}

Weights init_weights(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int m = cfg.width;
  Weights w;
  w.layers.reserve(cfg.depth + 1);
  for (int l = 0; l <= cfg.depth; ++l) {
    const int rows = l == cfg.depth ? 1 : m;
    const int cols = l == 0 ? cfg.input_dim : m;
    Eigen::MatrixXd mat(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) mat(i, j) = normal(rng);
    w.layers.push_back(std::move(mat));
  }
  for (int l = 0; l < cfg.depth; ++l)
    for (int k = 0; k < m; k += 2) w.layers[l].row(k + 1) = w.layers[l].row(k);
  auto& out = w.layers.back();
  for (int k = 0; k < m; k += 2) out(0, k + 1) = -out(0, k);
  return w;
}

void check_weights(const NetConfig& cfg, const Weights& w) {
  if (static_cast<int>(w.layers.size()) != cfg.depth + 1)
    throw std::invalid_argument("weights: expected " + std::to_string(cfg.depth + 1) + " layers");
  for (int l = 0; l <= cfg.depth; ++l) {
    const int rows = l == cfg.depth ? 1 : cfg.width;
    const int cols = l == 0 ? cfg.input_dim : cfg.width;
    if (w.layers[l].rows() != rows || w.layers[l].cols() != cols)
      throw std::invalid_argument("weights: layer " + std::to_string(l + 1) + " has wrong shape");
    if (!w.layers[l].allFinite())
      throw std::invalid_argument("weights: layer " + std::to_string(l + 1) + " is not finite");
  }
}

void check_input(const NetConfig& cfg, const Eigen::VectorXd& x) {
  if (x.size() != cfg.input_dim)
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) + ", expected " +
                                std::to_string(cfg.input_dim));
  if (std::abs(x.norm() - 1.0) > 1e-6) throw std::invalid_argument("input is not on the unit sphere");
}

ForwardCache forward_cached(const NetConfig& cfg, const Weights& w, const Eigen::VectorXd& x) {
  check_input(cfg, x);
  const int s = cfg.smoothness;
  const double scale = cfg.layer_scale();
  ForwardCache cache;
  cache.pre.reserve(cfg.depth);
  cache.pre.push_back(w.layers[0] * x);
  for (int l = 1; l < cfg.depth; ++l) {
    Eigen::VectorXd h = scale * apply_act(s, cache.pre.back());
    cache.pre.push_back(w.layers[l] * h);
  }
  const Eigen::VectorXd h = scale * apply_act(s, cache.pre.back());
  cache.output = w.layers.back().row(0).dot(h);
  return cache;
}

double forward(const NetConfig& cfg, const Weights& w, const Eigen::VectorXd& x) {
  return forward_cached(cfg, w, x).output;
}

GradientVector gradient(const NetConfig& cfg, const Weights& w, const Eigen::VectorXd& x,
                        const ForwardCache* cache) {
  ForwardCache local;
  if (cache == nullptr) {
    local = forward_cached(cfg, w, x);
    cache = &local;
  } else {
    check_input(cfg, x);
  }
  const int s = cfg.smoothness;
  const int L = cfg.depth;
  const double scale = cfg.layer_scale();

  // Offsets of each layer block in the flat vector.
  std::vector<Eigen::Index> offset(L + 2, 0);
  for (int l = 0; l <= L; ++l) offset[l + 1] = offset[l] + w.layers[l].size();
  GradientVector g(offset[L + 1]);

  auto write_outer = [&](int l, const Eigen::VectorXd& b, const Eigen::VectorXd& h) {
    Eigen::Index k = offset[l];
    for (Eigen::Index i = 0; i < b.size(); ++i)
      for (Eigen::Index j = 0; j < h.size(); ++j) g[k++] = b[i] * h[j];
  };
  auto hidden = [&](int l) -> Eigen::VectorXd {  // h^(l), l >= 1
    return scale * apply_act(s, cache->pre[l - 1]);
  };

  Eigen::VectorXd b = Eigen::VectorXd::Ones(1);
  write_outer(L, b, hidden(L));
  for (int l = L; l >= 1; --l) {
    Eigen::VectorXd back = w.layers[l].transpose() * b;
    b = scale * apply_act_prime(s, cache->pre[l - 1]).cwiseProduct(back);
    if (l == 1)
      write_outer(0, b, x);
    else
      write_outer(l - 1, b, hidden(l - 1));
  }
  return g;
}

double empirical_kernel(const NetConfig& cfg, const Weights& w0, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& x2) {
  return gradient(cfg, w0, x).dot(gradient(cfg, w0, x2));
}

namespace {

struct BatchPass {
  std::vector<Eigen::MatrixXd> pre;     // f^(l), l = 1..L
  std::vector<Eigen::MatrixXd> hidden;  // h^(l), l = 0..L, h^(0) = X
  Eigen::RowVectorXd output;
};

BatchPass batch_forward(const NetConfig& cfg, const Weights& w, const Eigen::MatrixXd& X) {
  const int s = cfg.smoothness;
  const double scale = cfg.layer_scale();
  BatchPass pass;
  pass.hidden.push_back(X);
  for (int l = 0; l < cfg.depth; ++l) {
    pass.pre.push_back(w.layers[l] * pass.hidden.back());
    pass.hidden.push_back(scale * apply_act(s, pass.pre.back()));
  }
  pass.output = w.layers.back() * pass.hidden.back();
  return pass;
}

double penalty(const Weights& w, const Weights& w0) {
  double out = 0.0;
  for (std::size_t l = 0; l < w.layers.size(); ++l) out += (w.layers[l] - w0.layers[l]).squaredNorm();
  return out;
}

Eigen::MatrixXd stack_inputs(const NetConfig& cfg, std::span<const Sample> data, Eigen::VectorXd& y) {
  Eigen::MatrixXd X(cfg.input_dim, static_cast<Eigen::Index>(data.size()));
  y.resize(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    check_input(cfg, data[i].x);
    X.col(static_cast<Eigen::Index>(i)) = data[i].x;
    y[static_cast<Eigen::Index>(i)] = data[i].y;
  }
  return X;
}

}  // namespace

double train_loss(const NetConfig& cfg, const Weights& w, const Weights& w0,
                  std::span<const Sample> data, double lambda) {
  Eigen::VectorXd y;
  const Eigen::MatrixXd X = stack_inputs(cfg, data, y);
  const BatchPass pass = batch_forward(cfg, w, X);
  return (pass.output.transpose() - y).squaredNorm() + cfg.width * lambda * penalty(w, w0);
}

Weights train(const NetConfig& cfg, const Weights& w0, std::span<const Sample> data,
              const TrainSpec& spec, const TrainObserver& observer) {
  cfg.validate();
  spec.validate();
  check_weights(cfg, w0);
  Weights w = w0;
  if (spec.epochs == 0) return w;
  if (data.empty()) throw std::invalid_argument("train: empty dataset with a positive epoch count");

  Eigen::VectorXd y;
  const Eigen::MatrixXd X = stack_inputs(cfg, data, y);
  const int s = cfg.smoothness;
  const int L = cfg.depth;
  const double scale = cfg.layer_scale();
  const double ridge = cfg.width * spec.lambda;
  std::vector<Eigen::MatrixXd> grad(L + 1);

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    const BatchPass pass = batch_forward(cfg, w, X);
    const Eigen::RowVectorXd resid = pass.output - y.transpose();
    const double loss = resid.squaredNorm() + ridge * penalty(w, w0);
    if (!std::isfinite(loss)) throw TrainDivergence(epoch, loss);
    if (observer) observer(epoch, loss);

    Eigen::MatrixXd back = 2.0 * resid;  // ∂loss/∂f^(L+1), 1×n
    grad[L] = back * pass.hidden[L].transpose();
    for (int l = L; l >= 1; --l) {
      back = scale * apply_act_prime(s, pass.pre[l - 1]).cwiseProduct(w.layers[l].transpose() * back);
      grad[l - 1] = back * pass.hidden[l - 1].transpose();
    }
    for (int l = 0; l <= L; ++l)
      w.layers[l] -= spec.eta * (grad[l] + 2.0 * ridge * (w.layers[l] - w0.layers[l]));
  }
  for (const auto& layer : w.layers)
    if (!layer.allFinite()) throw TrainDivergence(spec.epochs, std::numeric_limits<double>::infinity());
  return w;
}

void save_weights(const std::filesystem::path& path, const NetConfig& cfg, const Weights& w) {
  check_weights(cfg, w);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(cfg.depth));
  put_u32(os, static_cast<std::uint32_t>(cfg.width));
  put_u32(os, static_cast<std::uint32_t>(cfg.smoothness));
  put_u32(os, static_cast<std::uint32_t>(cfg.input_dim));
  for (const auto& layer : w.layers)
    for (Eigen::Index i = 0; i < layer.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.cols(); ++j) put_f64(os, layer(i, j));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Weights load_weights(const std::filesystem::path& path, NetConfig* cfg_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path.string() + " is not a weights file");
  if (get_u32(is) != kVersion) throw std::runtime_error(path.string() + ": unsupported version");
  NetConfig cfg;
  cfg.depth = static_cast<int>(get_u32(is));
  cfg.width = static_cast<int>(get_u32(is));
  cfg.smoothness = static_cast<int>(get_u32(is));
  cfg.input_dim = static_cast<int>(get_u32(is));
  cfg.validate();
  Weights w;
  for (int l = 0; l <= cfg.depth; ++l) {
    const int rows = l == cfg.depth ? 1 : cfg.width;
    const int cols = l == 0 ? cfg.input_dim : cfg.width;
    Eigen::MatrixXd mat(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) mat(i, j) = get_f64(is);
    w.layers.push_back(std::move(mat));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error(path.string() + ": trailing bytes");
  check_weights(cfg, w);
  if (cfg_out != nullptr) *cfg_out = cfg;
  return w;
}

}  // namespace nbandit
