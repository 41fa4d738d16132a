#pragma once

// Finite-width fully connected σ_s network
//
//   f¹ = W¹x,  fˡ = √(c_s/m)·Wˡ·σ_s(fˡ⁻¹) for 1 < l <= L,
//   f(x; W) = √(c_s/m)·W^{L+1}·σ_s(f^L),
//
// together with its exact parameter gradient and full-batch ridge-regularised
// gradient descent.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nbandit {

struct NetConfig {
  int depth = 1;      // L, number of hidden layers
  int width = 32;     // m, must be even
  int smoothness = 1; // s
  int input_dim = 1;  // d

  void validate() const;
  /// p = m·d + (L-1)·m² + m
  std::size_t param_count() const;
  /// √(c_s/m)
  double layer_scale() const;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// L+1 layer matrices with shapes m×d, (L-1)× m×m, 1×m.
struct Weights {
  std::vector<Eigen::MatrixXd> layers;

  friend bool operator==(const Weights& a, const Weights& b);
};

/// Flat ∂f/∂W in layer order, row-major within each layer.
using GradientVector = Eigen::VectorXd;

struct TrainSpec {
  double lambda = 0.1;  // ridge weight; the regulariser is m·λ·‖W - W0‖²
  double eta = 1e-3;    // raw step size on the loss
  int epochs = 200;

  void validate() const;
};

/// One labelled sample for training.
struct Sample {
  Eigen::VectorXd x;
  double y = 0.0;
};

/// Pre-activations f¹..f^L and the output of one forward pass.
struct ForwardCache {
  std::vector<Eigen::VectorXd> pre;  // size L
  double output = 0.0;
};

class TrainDivergence : public std::runtime_error {
 public:
  TrainDivergence(int epoch, double loss);
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Weights with i.i.d. N(0,1) entries from a PRNG seeded by `seed`, then
/// paired: hidden rows 2k+1 copy rows 2k, and output entry 2k+1 is the
/// negation of entry 2k, so the network output is zero for every input.
Weights init_weights(const NetConfig& cfg, std::uint64_t seed);

/// Throws std::invalid_argument on shape mismatch or non-finite entries.
void check_weights(const NetConfig& cfg, const Weights& w);

/// Throws unless |‖x‖ - 1| <= 1e-6 and x has d entries.
void check_input(const NetConfig& cfg, const Eigen::VectorXd& x);

ForwardCache forward_cached(const NetConfig& cfg, const Weights& w, const Eigen::VectorXd& x);
double forward(const NetConfig& cfg, const Weights& w, const Eigen::VectorXd& x);

/// ∂f/∂W via bˡ = √(c_s/m)·Dˡ·(W^{l+1})ᵀ·b^{l+1}, ∂f/∂Wˡ = bˡ·(hˡ⁻¹)ᵀ.
/// Reuses `cache` when supplied; results are identical either way.
GradientVector gradient(const NetConfig& cfg, const Weights& w, const Eigen::VectorXd& x,
                        const ForwardCache* cache = nullptr);

/// g(x;W0)·g(x2;W0). This inner product converges to the analytic NT kernel
/// Θ^(L)(x·x2) as m grows (the layer scaling already carries the 1/m).
double empirical_kernel(const NetConfig& cfg, const Weights& w0, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& x2);

/// Σ(f(x_i;W) - y_i)² + m·λ·‖W - W0‖².
double train_loss(const NetConfig& cfg, const Weights& w, const Weights& w0,
                  std::span<const Sample> data, double lambda);

/// Called with (epoch j, loss at W_j) before each step.
using TrainObserver = std::function<void(int, double)>;

/// J full-batch steps W_{j+1} = W_j - η∇L(W_j) from W0.
/// Throws TrainDivergence when the loss or the weights stop being finite.
Weights train(const NetConfig& cfg, const Weights& w0, std::span<const Sample> data,
              const TrainSpec& spec, const TrainObserver& observer = {});

/// Little-endian "NBLW" file: magic, version, L, m, s, d as u32, then every
/// layer row-major as f64.
void save_weights(const std::filesystem::path& path, const NetConfig& cfg, const Weights& w);
Weights load_weights(const std::filesystem::path& path, NetConfig* cfg_out = nullptr);

}  // namespace nbandit
