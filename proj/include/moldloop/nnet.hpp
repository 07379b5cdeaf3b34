#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moldloop/errors.hpp"

namespace moldloop::nnet {

enum class Activation { tanh_fn, logistic };

enum class RecurrenceKind { none, jordan_elman, narx };

struct Recurrence {
  RecurrenceKind kind = RecurrenceKind::none;
  double context_decay = 0.0;  // jordan_elman, in [0,1)
  double context_mix = 0.5;    // output share of the context feedback
  int input_lags = 0;          // narx, >= 1
  int output_lags = 0;         // narx, >= 0 (0 = pure tapped-delay line)
};

// Layered feed-forward core: affine + activation per hidden layer, linear
// output. Recurrent variants wrap this core.
struct Topology {
  std::vector<int> layer_sizes;
  Activation hidden_activation = Activation::tanh_fn;
  Recurrence recurrence;

  void validate_topology() const;
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int n_affine() const { return static_cast<int>(layer_sizes.size()) - 1; }
  // narx: width of one exogenous sample, derived from the input layer
  int narx_exogenous_size() const;
};

struct Normalization {
  std::vector<double> in_mean, in_scale, out_mean, out_scale;
  bool fitted = false;

  static Normalization identity(int n_in, int n_out);
};

struct Network {
  Topology topology;
  std::vector<std::vector<double>> weights;  // per affine layer, row-major out x in
  std::vector<std::vector<double>> biases;
  // jordan_elman context read-back projections, fixed at init
  std::vector<double> context_proj_hidden;  // input_size x hidden1
  std::vector<double> context_proj_output;  // input_size x output_size
  Normalization norm;
};

struct Gradients {
  std::vector<std::vector<double>> weights, biases;

  static Gradients zeros_like(const Network& net);
  void add_scaled(const Gradients& other, double scale);
  double max_abs() const;
};

struct Dataset {
  std::vector<std::vector<double>> inputs, targets;

  std::size_t size() const { return inputs.size(); }
  void add(std::vector<double> in, std::vector<double> out) {
    inputs.push_back(std::move(in));
    targets.push_back(std::move(out));
  }
};

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 2000;
  int batch_size = 0;  // 0 = full batch
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;
  int patience = 50;  // early-stop patience in epochs; <= 0 disables
  bool shuffle = true;

  void validate_config() const;
};

struct TrainHistory {
  std::vector<double> train_mse, val_mse;  // raw-scale, per epoch
  int best_epoch = -1;
};

// Weights and biases uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)],
// deterministic per seed; identity normalization until trained.
Network init_network(const Topology& topology, std::uint64_t seed);

// Raw-scale inference: normalizes the input, runs the core, denormalizes.
std::vector<double> forward(const Network& net, std::span<const double> input);

// Mean over the batch of (1/2)||f(x) - y||^2 in normalized space; the loss
// whose gradients batch_gradients returns.
double batch_loss(const Network& net, const Dataset& batch);

// Raw-scale mean squared error, averaged over outputs and samples.
double dataset_mse(const Network& net, const Dataset& data);

// Loss gradients averaged over the batch. The parallel kernel accumulates
// fixed 32-sample chunks and sums them in chunk order, so the result is
// bit-identical for any OpenMP thread count.
Gradients batch_gradients(const Network& net, const Dataset& batch);
Gradients batch_gradients(const Network& net, const Dataset& data, std::span<const int> indices);

// Serial reference for the parallel kernel, kept for tests and benchmarks.
Gradients batch_gradients_serial(const Network& net, const Dataset& batch);
Gradients batch_gradients_serial(const Network& net, const Dataset& data,
                                 std::span<const int> indices);

// The deterministic train/validation index split train() uses, exposed so
// callers can evaluate on exactly the held-out samples.
std::pair<std::vector<int>, std::vector<int>> train_val_split(std::size_t n,
                                                              const TrainConfig& config);

// Gradient descent with momentum. Normalization is fitted on the training
// split only; returns the best-validation-epoch weights.
std::pair<Network, TrainHistory> train(Network net, const Dataset& data,
                                       const TrainConfig& config);

// Fits normalization from the given samples (exposed for the recurrent
// trainer, which must match train()'s behavior exactly).
void fit_normalization(Network& net, const Dataset& data, std::span<const int> indices);

namespace detail {
// Core pass on an already-normalized input; returns all layer activations.
std::vector<std::vector<double>> core_activations(const Network& net,
                                                  std::span<const double> normalized_input);
// Accumulates the gradient of (1/2)||core(x) - y||^2 for one normalized sample.
void add_core_sample_gradient(const Network& net, std::span<const double> normalized_input,
                              std::span<const double> normalized_target, Gradients& g);
}  // namespace detail

// Versioned JSON serialization; doubles survive a round trip bit-exactly.
std::string to_json(const Network& net);
Network network_from_json(const std::string& text);
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace moldloop::nnet
