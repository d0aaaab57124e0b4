#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wats/common.hpp"
#include "wats/wavelet.hpp"

namespace wats {

// Two-layer temperature network: tau = softplus(w2 . relu(w1 h + b1) + b2).
struct CalibratorParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Matrix w1;               // hidden x input
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;
  double dropout_rate = 0.0;
  std::uint64_t rng_seed = 0;

  // Uniform in +-1/sqrt(fan_in) per layer from a seeded generator.
  static CalibratorParams initialize(std::size_t input_dim, std::size_t hidden_dim,
                                     double dropout_rate, std::uint64_t seed);
  static CalibratorParams zeros(std::size_t input_dim, std::size_t hidden_dim);

  void validate() const;

  // Flat layout: w1 (row-major), b1, w2, b2.
  std::size_t parameter_count() const { return hidden_dim * (input_dim + 2) + 1; }
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  friend bool operator==(const CalibratorParams&, const CalibratorParams&) = default;
};

enum class Optimizer { Adam, PlainGD };
enum class SelectionMetric { Nll, Ece };

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t max_epochs = 1000;
  double weight_decay = 0.0;
  std::size_t patience = 100;
  Optimizer optimizer = Optimizer::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  SelectionMetric selection = SelectionMetric::Nll;

  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct LogitSet {
  std::size_t num_nodes = 0;
  std::size_t num_classes = 0;
  Matrix logits;
  std::vector<std::size_t> labels;
  Split split;

  // Checks shapes, label range, index range and split disjointness.
  void validate() const;
};

// Mask entries are 0 or 1/(1-rate) (inverted dropout), one row per node.
Matrix sample_dropout_mask(std::size_t rows, std::size_t hidden, double rate,
                           std::mt19937_64& rng);

// Per-node temperatures for all rows of h. In training mode a dropout mask is
// drawn from rng for the hidden activation.
std::vector<double> temperatures(const CalibratorParams& params, const WaveletFeatures& h,
                                 bool training_mode = false, std::mt19937_64* rng = nullptr);

// z[i][c] / tau[i].
Matrix scale_logits(const Matrix& logits, std::span<const double> tau);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // CalibratorParams::flatten layout
};

// Mean cross-entropy of softmax(z_i / tau_i) over subset plus
// weight_decay * ||theta||^2, with its analytic gradient. An optional mask
// (subset.size() x hidden) fixes the dropout pattern.
LossGradient wats_loss_gradient(const CalibratorParams& params, const WaveletFeatures& h,
                                const Matrix& logits, std::span<const std::size_t> labels,
                                std::span<const std::size_t> subset, double weight_decay,
                                const Matrix* dropout_mask = nullptr);

struct TrainResult {
  CalibratorParams params;  // best snapshot
  double best_score = 0.0;  // validation NLL (or ECE under SelectionMetric::Ece)
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::vector<double> best_history;  // best score after each improvement
};

TrainResult train_wats(const WaveletFeatures& h, const LogitSet& data,
                       const CalibratorParams& params0, const TrainConfig& cfg);

struct TemperatureInterval {
  double lo = 0.05;
  double hi = 20.0;
};

struct GlobalTemperature {
  double temperature = 1.0;
  double nll = 0.0;
};

// Mean NLL of softmax(z / tau) over subset.
double scaled_nll(const Matrix& logits, std::span<const std::size_t> labels,
                  std::span<const std::size_t> subset, double tau);

// Golden-section search for the validation-NLL minimizing temperature.
GlobalTemperature fit_global_ts(const LogitSet& data, TemperatureInterval interval = {});

struct EtsModel {
  double temperature = 1.0;
  std::array<double, 3> weights{1.0, 0.0, 0.0};  // scaled, raw, uniform
  double nll = 0.0;

  Matrix probabilities(const Matrix& logits) const;
};

// Ensemble of softmax(z/tau*), softmax(z) and uniform with simplex weights
// fitted by projected gradient descent on validation NLL.
EtsModel fit_ets(const LogitSet& data, TemperatureInterval interval = {});

// Euclidean projection onto the probability simplex.
std::array<double, 3> project_to_simplex(std::array<double, 3> v);

}  // namespace wats
