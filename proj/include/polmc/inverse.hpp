#pragma once

// Residual encoder regression network, trained with Adam on L2 loss.

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "polmc/dataset.hpp"
#include "polmc/detection.hpp"

namespace polmc {

namespace nn {

/// y = W x + b with W stored row-major (out x in).
void dense_forward(std::span<const double> w, std::span<const double> b,
                   std::span<const double> x, std::span<double> y);

/// Accumulates dW += dy x^T and db += dy; writes dx = W^T dy (if non-empty).
void dense_backward(std::span<const double> w, std::span<const double> x,
                    std::span<const double> dy, std::span<double> dw, std::span<double> db,
                    std::span<double> dx);

/// The network nonlinearity is tanh (smooth, derivative bounded by 1).
inline double activation(double v) { return std::tanh(v); }
/// Derivative expressed through the activation output.
inline double activation_derivative(double out) { return 1.0 - out * out; }

/// y = h + W2 tanh(W1 h + b1) + b2, all of width n.
void residual_block_forward(std::span<const double> w1, std::span<const double> b1,
                            std::span<const double> w2, std::span<const double> b2,
                            std::span<const double> h, std::span<double> hidden,
                            std::span<double> y);

/// `hidden` is the tanh output saved by the forward pass. Accumulates
/// parameter gradients, writes dh.
void residual_block_backward(std::span<const double> w1, std::span<const double> w2,
                             std::span<const double> h, std::span<const double> hidden,
                             std::span<const double> dy, std::span<double> dw1,
                             std::span<double> db1, std::span<double> dw2, std::span<double> db2,
                             std::span<double> dh);

} // namespace nn

/// Mean squared error over the elements.
double l2_loss(std::span<const double> pred, std::span<const double> truth);
void l2_loss_gradient(std::span<const double> pred, std::span<const double> truth,
                      std::span<double> grad);

struct Architecture {
  std::uint32_t input_dim = 1024;
  std::uint32_t width = 64;
  std::uint32_t n_blocks = 3;
  std::uint32_t latent_dim = 16;
  std::uint32_t output_dim = 1;
  // Latent mean/log-variance with reparameterised sampling and a KL penalty.
  bool variational = false;
  double kl_weight = 1e-3;

  bool operator==(const Architecture &) const = default;
  void validate() const;
};

struct Batch {
  std::vector<std::vector<double>> x;
  std::vector<std::vector<double>> y;

  std::size_t size() const { return x.size(); }
};

class Network {
public:
  struct Dense {
    std::size_t offset = 0; // weights, then biases
    std::uint32_t in = 0;
    std::uint32_t out = 0;

    std::size_t weight_count() const { return static_cast<std::size_t>(in) * out; }
    std::size_t size() const { return weight_count() + out; }
  };

  explicit Network(const Architecture &arch, std::uint64_t seed = 0);

  const Architecture &architecture() const { return arch_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  const Dense &input_layer() const { return input_; }
  const std::vector<Dense> &block_layers() const { return blocks_; } // fc1, fc2 per block
  const Dense &latent_layer() const { return latent_; }
  const Dense &head_layer() const { return head_; }

  std::span<double> weights(const Dense &d) { return {params_.data() + d.offset, d.weight_count()}; }
  std::span<double> biases(const Dense &d) {
    return {params_.data() + d.offset + d.weight_count(), d.out};
  }

  /// Deterministic prediction (latent mean in variational mode).
  std::vector<double> forward(std::span<const double> x) const;

  /// Mean L2 loss over the batch (plus the weighted KL term in variational
  /// mode) and its exact gradient. `noise` supplies one latent_dim vector per
  /// sample in variational mode and is ignored otherwise.
  double loss_and_gradient(const Batch &batch, std::vector<double> &grad,
                           const std::vector<std::vector<double>> *noise = nullptr) const;

  double loss(const Batch &batch, const std::vector<std::vector<double>> *noise = nullptr) const;

private:
  Architecture arch_;
  std::vector<double> params_;
  Dense input_;
  std::vector<Dense> blocks_;
  Dense latent_;
  Dense head_;
};

struct AdamConfig {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t anneal_every = 500;
  double anneal_factor = 0.5;
};

struct AdamState {
  explicit AdamState(std::size_t n, const AdamConfig &cfg = {})
      : config(cfg), m(n, 0.0), v(n, 0.0) {}

  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step_count = 0;

  /// base_lr * anneal_factor^floor(step / anneal_every).
  double learning_rate_at(std::uint64_t step) const;
  double learning_rate() const { return learning_rate_at(step_count); }
};

/// One bias-corrected Adam update using the current annealed rate.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState &state);

struct TrainConfig {
  std::uint64_t steps = 0;  // optimizer steps; 0 means use epochs
  std::uint32_t epochs = 10;
  std::uint32_t batch_size = 32;
  std::uint64_t seed = 0;
  AdamConfig adam;
  std::uint64_t eval_every = 50;
  double divergence_threshold = 1e6;
};

struct LossCurves {
  std::vector<std::uint64_t> step; // evaluation points, starting at 0
  std::vector<double> train;       // full training-set loss
  std::vector<double> validation;
  std::vector<double> batch_loss;  // every optimizer step
  std::vector<double> learning_rate;
  std::uint64_t best_step = 0;
  double best_validation = 0.0;

  void write_csv(std::ostream &out) const;
};

/// Seeded mini-batch Adam. Leaves `net` at the best-validation checkpoint.
/// Throws RuntimeError if a loss exceeds the divergence threshold or is not
/// finite.
LossCurves train(Network &net, const Batch &train_set, const Batch &validation_set,
                 const TrainConfig &config);

/// Trained network plus everything needed to map a raw grid to a prediction.
struct Model {
  Network net{Architecture{}};
  Normalization features;
  Normalization targets;
  FeatureSpec feature_spec;
  GridGeometry grid_geometry;
  std::vector<std::string> target_names;
  std::uint64_t reference_photons = 0;

  /// Binary "POLN" layout.
  void write(std::ostream &out) const;
  static Model read(std::istream &in);
  void write_file(const std::string &path) const;
  static Model read_file(const std::string &path);
};

/// Normalised training inputs and standardised targets from a dataset.
Batch make_batch(const Dataset &data, const Normalization &features,
                 const Normalization &targets);

struct Prediction {
  std::vector<std::string> names;
  std::vector<double> values;
};

/// Raw (unnormalised) feature vector to property estimates.
Prediction infer_features(const Model &model, const std::vector<double> &raw_features);

/// Grid to property estimates; `launched` defaults to the training photon
/// count. Rejects grids whose geometry differs from the training data.
Prediction infer(const Model &model, const DetectorGrid &grid, double launched = 0.0);

} // namespace polmc
