#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "covplan/scene.hpp"

namespace covplan {

// Margin-band hinge loss over the three flag classes. Positive scores are
// pushed above gamma1, negative scores below gamma2; collision-inducing
// negatives carry the heavier weight.
struct LossConfig {
  double gamma1 = 0.7;
  double gamma2 = 0.3;
  double w1 = 1.0;
  double w0 = 1.0;
  double w0bar = 5.0;

  void validate() const;  // gamma1 > gamma2, w0bar >= w0, weights > 0
};

struct TrainConfig {
  double learning_rate = 0.05;
  int batch_size = 128;
  int epochs = 40;
  std::uint64_t seed = 1;
  double l2 = 0.0;
  bool standardize_inputs = true;

  void validate() const;
};

// Feedforward scorer: ReLU hidden layers, logistic-sigmoid output.
// Inputs pass through a fixed affine map (x - offset) * scale first;
// identity unless training computed a standardization.
struct NetworkParams {
  struct Layer {
    std::vector<double> W;  // row-major, rows = out, cols = in
    std::vector<double> b;
  };
  std::vector<int> layer_sizes;  // {in, h1, h2, out}
  std::vector<Layer> layers;
  std::vector<double> input_offset;
  std::vector<double> input_scale;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  void validate() const;
};

// Glorot-uniform initialization in +-sqrt(6/(fan_in+fan_out)), seeded.
NetworkParams init_network(const std::vector<int>& layer_sizes, std::uint64_t seed);

// Score vector y in (0,1)^M. Throws ContractError on dimension mismatch.
std::vector<double> forward(const NetworkParams& params, std::span<const double> x);

inline std::vector<double> forward(const NetworkParams& params, const Affordance& a) {
  return forward(params, std::span<const double>(a.values.data(), a.values.size()));
}

// Per-sample loss summed over the M output coordinates.
double loss(std::span<const double> y, std::span<const Flag> flags, const LossConfig& cfg);

// Gradient container shaped like the trainable layers.
struct Gradient {
  std::vector<NetworkParams::Layer> layers;
};

// Exact gradient of the mean batch loss (subgradient 0 at ReLU/hinge kinks).
Gradient grad(const NetworkParams& params, std::span<const LabeledSample> batch,
              const LossConfig& cfg);

struct TrainResult {
  NetworkParams params;
  std::vector<double> loss_history;  // mean dataset loss after each epoch
  double final_loss = 0.0;
};

// Mini-batch gradient descent with a fixed step. Deterministic given the
// seed. Throws TrainError (with the epoch index) when the loss diverges.
TrainResult train(const Dataset& dataset, int hidden1, int hidden2, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg);

// {i : y_i >= thresholds[i]}; may be empty.
std::vector<int> predict_set(const NetworkParams& params, std::span<const double> thresholds,
                             const Affordance& x);

std::vector<int> predict_set_from_scores(std::span<const double> y,
                                         std::span<const double> thresholds);

}  // namespace covplan
