#include "covplan/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "covplan/errors.hpp"
#include "covplan/rng.hpp"

namespace covplan {

void LossConfig::validate() const {
  if (!(gamma1 > gamma2) || gamma1 < 0.0 || gamma1 > 1.0 || gamma2 < 0.0 || gamma2 > 1.0)
    throw ContractError("LossConfig: require 0 <= gamma2 < gamma1 <= 1");
  if (w1 <= 0.0 || w0 <= 0.0 || w0bar <= 0.0)
    throw ContractError("LossConfig: weights must be positive");
  if (w0bar < w0) throw ContractError("LossConfig: w0bar must be >= w0");
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0 || batch_size < 1 || epochs < 1 || l2 < 0.0)
    throw ContractError("TrainConfig: learning_rate, batch_size, epochs must be positive");
}

void NetworkParams::validate() const {
  if (layer_sizes.size() < 2 || layers.size() != layer_sizes.size() - 1)
    throw ContractError("NetworkParams: layer count does not chain");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t rows = static_cast<std::size_t>(layer_sizes[l + 1]);
    const std::size_t cols = static_cast<std::size_t>(layer_sizes[l]);
    if (layers[l].W.size() != rows * cols || layers[l].b.size() != rows)
      throw ContractError("NetworkParams: layer " + std::to_string(l) + " has wrong shape");
  }
  if (input_offset.size() != static_cast<std::size_t>(input_dim()) ||
      input_scale.size() != static_cast<std::size_t>(input_dim()))
    throw ContractError("NetworkParams: input scaling has wrong shape");
}

NetworkParams init_network(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ContractError("init_network: need at least two layer sizes");
  for (int s : layer_sizes)
    if (s < 1) throw ContractError("init_network: layer sizes must be positive");
  NetworkParams p;
  p.layer_sizes = layer_sizes;
  p.input_offset.assign(static_cast<std::size_t>(layer_sizes.front()), 0.0);
  p.input_scale.assign(static_cast<std::size_t>(layer_sizes.front()), 1.0);
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    NetworkParams::Layer layer;
    layer.W.resize(static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out));
    for (double& w : layer.W) w = rng.uniform(-bound, bound);
    layer.b.assign(static_cast<std::size_t>(fan_out), 0.0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Forward pass keeping post-activation values per layer for backprop.
// activations[0] is the scaled input; the last entry is the output y.
void forward_trace(const NetworkParams& p, std::span<const double> x,
                   std::vector<std::vector<double>>& activations) {
  activations.resize(p.layers.size() + 1);
  auto& in = activations[0];
  in.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    in[i] = (x[i] - p.input_offset[i]) * p.input_scale[i];

  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    const auto& prev = activations[l];
    const std::size_t rows = layer.b.size();
    const std::size_t cols = prev.size();
    auto& out = activations[l + 1];
    out.resize(rows);
    const bool last = (l + 1 == p.layers.size());
    for (std::size_t r = 0; r < rows; ++r) {
      double z = layer.b[r];
      const double* wrow = layer.W.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) z += wrow[c] * prev[c];
      out[r] = last ? sigmoid(z) : std::max(0.0, z);
    }
  }
}

}  // namespace

std::vector<double> forward(const NetworkParams& params, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.input_dim())
    throw ContractError("forward: input dimension " + std::to_string(x.size()) +
                        " does not match network input " + std::to_string(params.input_dim()));
  std::vector<std::vector<double>> acts;
  forward_trace(params, x, acts);
  return acts.back();
}

double loss(std::span<const double> y, std::span<const Flag> flags, const LossConfig& cfg) {
  if (y.size() != flags.size()) throw ContractError("loss: y and flags length mismatch");
  double j = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    switch (flags[i]) {
      case Flag::kPositive: j += cfg.w1 * std::max(0.0, cfg.gamma1 - y[i]); break;
      case Flag::kNegSafe: j += cfg.w0 * std::max(0.0, y[i] - cfg.gamma2); break;
      case Flag::kNegColliding: j += cfg.w0bar * std::max(0.0, y[i] - cfg.gamma2); break;
    }
  }
  return j;
}

namespace {

Gradient zero_gradient(const NetworkParams& p) {
  Gradient g;
  g.layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    g.layers[l].W.assign(p.layers[l].W.size(), 0.0);
    g.layers[l].b.assign(p.layers[l].b.size(), 0.0);
  }
  return g;
}

// Accumulates one sample's loss gradient into g (unscaled).
void accumulate_sample_grad(const NetworkParams& p, const LabeledSample& sample,
                            const LossConfig& cfg, Gradient& g,
                            std::vector<std::vector<double>>& acts) {
  forward_trace(p, std::span<const double>(sample.affordance.values.data(), kAffordanceSize),
                acts);
  const auto& y = acts.back();

  // dJ/dy per coordinate; hinge kinks take subgradient 0 (strict inequalities).
  std::vector<double> delta(y.size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    switch (sample.flags[i]) {
      case Flag::kPositive:
        if (y[i] < cfg.gamma1) delta[i] = -cfg.w1;
        break;
      case Flag::kNegSafe:
        if (y[i] > cfg.gamma2) delta[i] = cfg.w0;
        break;
      case Flag::kNegColliding:
        if (y[i] > cfg.gamma2) delta[i] = cfg.w0bar;
        break;
    }
    // chain through the sigmoid
    delta[i] *= y[i] * (1.0 - y[i]);
  }

  // Backpropagate: delta holds dJ/dz for the current layer.
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& prev = acts[l];
    auto& gl = g.layers[l];
    const std::size_t rows = p.layers[l].b.size();
    const std::size_t cols = prev.size();
    for (std::size_t r = 0; r < rows; ++r) {
      gl.b[r] += delta[r];
      double* grow = gl.W.data() + r * cols;
      const double dr = delta[r];
      for (std::size_t c = 0; c < cols; ++c) grow[c] += dr * prev[c];
    }
    if (l == 0) break;
    const auto& layer = p.layers[l];
    std::vector<double> next(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double dr = delta[r];
      if (dr == 0.0) continue;
      const double* wrow = layer.W.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) next[c] += dr * wrow[c];
    }
    // ReLU subgradient: 0 at and below the kink.
    for (std::size_t c = 0; c < cols; ++c)
      if (acts[l][c] <= 0.0) next[c] = 0.0;
    delta = std::move(next);
  }
}

}  // namespace

Gradient grad(const NetworkParams& params, std::span<const LabeledSample> batch,
              const LossConfig& cfg) {
  if (batch.empty()) throw ContractError("grad: empty batch");
  Gradient g = zero_gradient(params);
  std::vector<std::vector<double>> acts;
  for (const LabeledSample& s : batch) accumulate_sample_grad(params, s, cfg, g, acts);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& layer : g.layers) {
    for (double& w : layer.W) w *= inv;
    for (double& b : layer.b) b *= inv;
  }
  return g;
}

TrainResult train(const Dataset& dataset, int hidden1, int hidden2, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg) {
  loss_cfg.validate();
  train_cfg.validate();
  if (dataset.samples.empty()) throw ContractError("train: empty dataset");
  const int m = dataset.basis_size;

  NetworkParams params =
      init_network({kAffordanceSize, hidden1, hidden2, m}, train_cfg.seed);

  if (train_cfg.standardize_inputs) {
    // Per-feature mean/std over the training set, stored with the model.
    const double n = static_cast<double>(dataset.samples.size());
    std::vector<double> mean(kAffordanceSize, 0.0), var(kAffordanceSize, 0.0);
    for (const auto& s : dataset.samples)
      for (int i = 0; i < kAffordanceSize; ++i) mean[static_cast<std::size_t>(i)] += s.affordance[i];
    for (double& mu : mean) mu /= n;
    for (const auto& s : dataset.samples)
      for (int i = 0; i < kAffordanceSize; ++i) {
        const double d = s.affordance[i] - mean[static_cast<std::size_t>(i)];
        var[static_cast<std::size_t>(i)] += d * d;
      }
    for (int i = 0; i < kAffordanceSize; ++i) {
      params.input_offset[static_cast<std::size_t>(i)] = mean[static_cast<std::size_t>(i)];
      const double sd = std::sqrt(var[static_cast<std::size_t>(i)] / n);
      params.input_scale[static_cast<std::size_t>(i)] = 1.0 / std::max(sd, 1e-8);
    }
  }

  Rng rng(derive_seed(train_cfg.seed, "shuffle"));
  std::vector<std::size_t> order(dataset.samples.size());
  std::iota(order.begin(), order.end(), 0);

  auto dataset_loss = [&](const NetworkParams& p) {
    double total = 0.0;
    for (const auto& s : dataset.samples) {
      const auto y = forward(p, s.affordance);
      total += loss(y, s.flags, loss_cfg);
    }
    return total / static_cast<double>(dataset.samples.size());
  };

  TrainResult result;
  std::vector<LabeledSample> batch;
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    // Fisher-Yates with the deterministic rng.
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(train_cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(train_cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(dataset.samples[order[i]]);
      Gradient g = grad(params, batch, loss_cfg);
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& layer = params.layers[l];
        const auto& gl = g.layers[l];
        for (std::size_t i = 0; i < layer.W.size(); ++i) {
          double step = gl.W[i];
          if (train_cfg.l2 > 0.0) step += train_cfg.l2 * layer.W[i];
          layer.W[i] -= train_cfg.learning_rate * step;
        }
        for (std::size_t i = 0; i < layer.b.size(); ++i)
          layer.b[i] -= train_cfg.learning_rate * gl.b[i];
      }
    }

    const double epoch_loss = dataset_loss(params);
    if (!std::isfinite(epoch_loss))
      throw TrainError("train: loss diverged at epoch " + std::to_string(epoch));
    result.loss_history.push_back(epoch_loss);
  }

  result.final_loss = result.loss_history.empty() ? dataset_loss(params)
                                                  : result.loss_history.back();
  result.params = std::move(params);
  return result;
}

std::vector<int> predict_set_from_scores(std::span<const double> y,
                                         std::span<const double> thresholds) {
  if (y.size() != thresholds.size())
    throw ContractError("predict_set: thresholds length mismatch");
  std::vector<int> out;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] >= thresholds[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> predict_set(const NetworkParams& params, std::span<const double> thresholds,
                             const Affordance& x) {
  const auto y = forward(params, x);
  return predict_set_from_scores(y, thresholds);
}

}  // namespace covplan
