#include "moldloop/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "moldloop/rng.hpp"

namespace moldloop::nnet {

namespace {

constexpr int kChunk = 32;  // fixed gradient-accumulation chunk

double activate(Activation a, double z) {
  return a == Activation::tanh_fn ? std::tanh(z) : 1.0 / (1.0 + std::exp(-z));
}

// derivative expressed through the activation value
double activate_prime(Activation a, double y) {
  return a == Activation::tanh_fn ? 1.0 - y * y : y * (1.0 - y);
}

struct Workspace {
  // activations[0] is the normalized input; one entry per layer
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> deltas;
  std::vector<double> target_norm;

  void resize(const Topology& t) {
    activations.resize(t.layer_sizes.size());
    deltas.resize(t.layer_sizes.size());
    for (std::size_t l = 0; l < t.layer_sizes.size(); ++l) {
      activations[l].resize(static_cast<std::size_t>(t.layer_sizes[l]));
      deltas[l].resize(static_cast<std::size_t>(t.layer_sizes[l]));
    }
    target_norm.resize(static_cast<std::size_t>(t.layer_sizes.back()));
  }
};

void forward_core(const Network& net, Workspace& ws) {
  const auto& sizes = net.topology.layer_sizes;
  const int n_aff = net.topology.n_affine();
  for (int l = 0; l < n_aff; ++l) {
    const int n_in = sizes[static_cast<std::size_t>(l)];
    const int n_out = sizes[static_cast<std::size_t>(l) + 1];
    const auto& w = net.weights[static_cast<std::size_t>(l)];
    const auto& b = net.biases[static_cast<std::size_t>(l)];
    const auto& in = ws.activations[static_cast<std::size_t>(l)];
    auto& out = ws.activations[static_cast<std::size_t>(l) + 1];
    const bool last = (l == n_aff - 1);
    for (int i = 0; i < n_out; ++i) {
      double z = b[static_cast<std::size_t>(i)];
      const double* wrow = w.data() + static_cast<std::size_t>(i) * n_in;
      for (int j = 0; j < n_in; ++j) z += wrow[j] * in[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] =
          last ? z : activate(net.topology.hidden_activation, z);
    }
  }
}

void normalize_input(const Network& net, std::span<const double> x, std::vector<double>& out) {
  const auto& n = net.norm;
  out.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = (x[i] - n.in_mean[i]) / n.in_scale[i];
}

// Backprop for one sample with ws.activations[0] and ws.target_norm already
// holding the normalized input/target; forward pass included.
void accumulate_core(const Network& net, Workspace& ws, Gradients& g) {
  const auto& sizes = net.topology.layer_sizes;
  const int n_aff = net.topology.n_affine();
  forward_core(net, ws);

  auto& out_delta = ws.deltas.back();
  const auto& out_act = ws.activations.back();
  for (std::size_t i = 0; i < out_act.size(); ++i)
    out_delta[i] = out_act[i] - ws.target_norm[i];  // linear output layer

  for (int l = n_aff - 1; l >= 0; --l) {
    const int n_in = sizes[static_cast<std::size_t>(l)];
    const int n_out = sizes[static_cast<std::size_t>(l) + 1];
    const auto& delta = ws.deltas[static_cast<std::size_t>(l) + 1];
    const auto& act_in = ws.activations[static_cast<std::size_t>(l)];
    auto& gw = g.weights[static_cast<std::size_t>(l)];
    auto& gb = g.biases[static_cast<std::size_t>(l)];
    for (int i = 0; i < n_out; ++i) {
      const double d = delta[static_cast<std::size_t>(i)];
      gb[static_cast<std::size_t>(i)] += d;
      double* grow = gw.data() + static_cast<std::size_t>(i) * n_in;
      for (int j = 0; j < n_in; ++j) grow[j] += d * act_in[static_cast<std::size_t>(j)];
    }
    if (l > 0) {
      const auto& w = net.weights[static_cast<std::size_t>(l)];
      auto& delta_prev = ws.deltas[static_cast<std::size_t>(l)];
      for (int j = 0; j < n_in; ++j) {
        double s = 0.0;
        for (int i = 0; i < n_out; ++i)
          s += w[static_cast<std::size_t>(i) * n_in + j] * delta[static_cast<std::size_t>(i)];
        delta_prev[static_cast<std::size_t>(j)] =
            s * activate_prime(net.topology.hidden_activation,
                               act_in[static_cast<std::size_t>(j)]);
      }
    }
  }
}

// 0.5*||f(x)-y||^2 gradient contribution of one raw sample, accumulated into g.
void accumulate_sample(const Network& net, std::span<const double> x_raw,
                       std::span<const double> y_raw, Workspace& ws, Gradients& g) {
  auto& in0 = ws.activations[0];
  for (std::size_t i = 0; i < x_raw.size(); ++i)
    in0[i] = (x_raw[i] - net.norm.in_mean[i]) / net.norm.in_scale[i];
  for (std::size_t i = 0; i < y_raw.size(); ++i)
    ws.target_norm[i] = (y_raw[i] - net.norm.out_mean[i]) / net.norm.out_scale[i];
  accumulate_core(net, ws, g);
}

void check_batch(const Network& net, const Dataset& data, std::span<const int> indices) {
  if (indices.empty()) throw RangeError("batch_gradients: empty batch");
  const std::size_t n_in = static_cast<std::size_t>(net.topology.input_size());
  const std::size_t n_out = static_cast<std::size_t>(net.topology.output_size());
  for (int idx : indices) {
    const auto& x = data.inputs[static_cast<std::size_t>(idx)];
    const auto& y = data.targets[static_cast<std::size_t>(idx)];
    if (x.size() != n_in || y.size() != n_out)
      throw ShapeError("batch_gradients: sample " + std::to_string(idx) +
                       " shape (" + std::to_string(x.size()) + "->" + std::to_string(y.size()) +
                       ") does not match topology");
  }
}

std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

// ---------------------------------------------------------------------------

void Topology::validate_topology() const {
  if (layer_sizes.size() < 2) throw ShapeError("topology needs at least 2 layers");
  for (int s : layer_sizes)
    if (s < 1) throw ShapeError("topology layer sizes must be >= 1");
  switch (recurrence.kind) {
    case RecurrenceKind::none:
      break;
    case RecurrenceKind::jordan_elman:
      if (recurrence.context_decay < 0.0 || recurrence.context_decay >= 1.0)
        throw ShapeError("jordan_elman context_decay must be in [0,1)");
      if (recurrence.context_mix < 0.0 || recurrence.context_mix > 1.0)
        throw ShapeError("jordan_elman context_mix must be in [0,1]");
      break;
    case RecurrenceKind::narx: {
      if (recurrence.input_lags < 1) throw ShapeError("narx input_lags must be >= 1");
      if (recurrence.output_lags < 0) throw ShapeError("narx output_lags must be >= 0");
      narx_exogenous_size();  // throws if widths are inconsistent
      break;
    }
  }
}

int Topology::narx_exogenous_size() const {
  const int fed_back = output_size() * recurrence.output_lags;
  const int exo_total = input_size() - fed_back;
  if (exo_total < 1 || exo_total % recurrence.input_lags != 0)
    throw ShapeError("narx input layer (" + std::to_string(input_size()) +
                     ") must equal n_exo*input_lags + outputs*output_lags");
  return exo_total / recurrence.input_lags;
}

Normalization Normalization::identity(int n_in, int n_out) {
  Normalization n;
  n.in_mean.assign(static_cast<std::size_t>(n_in), 0.0);
  n.in_scale.assign(static_cast<std::size_t>(n_in), 1.0);
  n.out_mean.assign(static_cast<std::size_t>(n_out), 0.0);
  n.out_scale.assign(static_cast<std::size_t>(n_out), 1.0);
  n.fitted = false;
  return n;
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  g.weights.resize(net.weights.size());
  g.biases.resize(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights[l].assign(net.weights[l].size(), 0.0);
    g.biases[l].assign(net.biases[l].size(), 0.0);
  }
  return g;
}

void Gradients::add_scaled(const Gradients& other, double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i)
      weights[l][i] += scale * other.weights[l][i];
    for (std::size_t i = 0; i < biases[l].size(); ++i)
      biases[l][i] += scale * other.biases[l][i];
  }
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& layer : weights)
    for (double v : layer) m = std::max(m, std::fabs(v));
  for (const auto& layer : biases)
    for (double v : layer) m = std::max(m, std::fabs(v));
  return m;
}

void TrainConfig::validate_config() const {
  if (!(learning_rate > 0.0)) throw RangeError("learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw RangeError("momentum must be in [0,1)");
  if (epochs < 0) throw RangeError("epochs must be >= 0");
  if (validation_fraction < 0.0 || validation_fraction > 0.5)
    throw RangeError("validation_fraction must be in [0, 0.5]");
  if (batch_size < 0) throw RangeError("batch_size must be >= 0");
}

Network init_network(const Topology& topology, std::uint64_t seed) {
  topology.validate_topology();
  Network net;
  net.topology = topology;
  Rng rng(derive_seed(seed, "nnet.init"));
  const auto& sizes = topology.layer_sizes;
  for (int l = 0; l < topology.n_affine(); ++l) {
    const int n_in = sizes[static_cast<std::size_t>(l)];
    const int n_out = sizes[static_cast<std::size_t>(l) + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    std::vector<double> w(static_cast<std::size_t>(n_out) * n_in);
    std::vector<double> b(static_cast<std::size_t>(n_out));
    for (double& v : w) v = rng.uniform(-bound, bound);
    for (double& v : b) v = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  if (topology.recurrence.kind == RecurrenceKind::jordan_elman) {
    const int n_in = topology.input_size();
    const int h1 = sizes[1];
    const int n_out = topology.output_size();
    net.context_proj_hidden.resize(static_cast<std::size_t>(n_in) * h1);
    net.context_proj_output.resize(static_cast<std::size_t>(n_in) * n_out);
    const double bh = 1.0 / std::sqrt(static_cast<double>(h1));
    const double bo = 1.0 / std::sqrt(static_cast<double>(n_out));
    for (double& v : net.context_proj_hidden) v = rng.uniform(-bh, bh);
    for (double& v : net.context_proj_output) v = rng.uniform(-bo, bo);
  }
  net.norm = Normalization::identity(topology.input_size(), topology.output_size());
  return net;
}

std::vector<double> forward(const Network& net, std::span<const double> input) {
  if (static_cast<int>(input.size()) != net.topology.input_size())
    throw ShapeError("forward: input length " + std::to_string(input.size()) +
                     " != input layer " + std::to_string(net.topology.input_size()));
  Workspace ws;
  ws.resize(net.topology);
  normalize_input(net, input, ws.activations[0]);
  forward_core(net, ws);
  std::vector<double> out = ws.activations.back();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = out[i] * net.norm.out_scale[i] + net.norm.out_mean[i];
  return out;
}

double batch_loss(const Network& net, const Dataset& batch) {
  if (batch.size() == 0) throw RangeError("batch_loss: empty batch");
  Workspace ws;
  ws.resize(net.topology);
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    auto& in0 = ws.activations[0];
    const auto& x = batch.inputs[s];
    const auto& y = batch.targets[s];
    for (std::size_t i = 0; i < x.size(); ++i)
      in0[i] = (x[i] - net.norm.in_mean[i]) / net.norm.in_scale[i];
    forward_core(net, ws);
    const auto& out = ws.activations.back();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double t = (y[i] - net.norm.out_mean[i]) / net.norm.out_scale[i];
      const double d = out[i] - t;
      total += 0.5 * d * d;
    }
  }
  return total / static_cast<double>(batch.size());
}

double dataset_mse(const Network& net, const Dataset& data) {
  if (data.size() == 0) throw RangeError("dataset_mse: empty dataset");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto out = forward(net, data.inputs[s]);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = out[i] - data.targets[s][i];
      total += d * d;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

Gradients batch_gradients_serial(const Network& net, const Dataset& data,
                                 std::span<const int> indices) {
  check_batch(net, data, indices);
  Gradients g = Gradients::zeros_like(net);
  Workspace ws;
  ws.resize(net.topology);
  for (int idx : indices)
    accumulate_sample(net, data.inputs[static_cast<std::size_t>(idx)],
                      data.targets[static_cast<std::size_t>(idx)], ws, g);
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (auto& layer : g.weights)
    for (double& v : layer) v *= inv;
  for (auto& layer : g.biases)
    for (double& v : layer) v *= inv;
  return g;
}

Gradients batch_gradients_serial(const Network& net, const Dataset& batch) {
  const auto idx = all_indices(batch.size());
  return batch_gradients_serial(net, batch, idx);
}

Gradients batch_gradients(const Network& net, const Dataset& data,
                          std::span<const int> indices) {
  check_batch(net, data, indices);
  const int n = static_cast<int>(indices.size());
  const int n_chunks = (n + kChunk - 1) / kChunk;

  std::vector<Gradients> partials(static_cast<std::size_t>(n_chunks));
#pragma omp parallel for schedule(static)
  for (int c = 0; c < n_chunks; ++c) {
    Gradients part = Gradients::zeros_like(net);
    Workspace ws;
    ws.resize(net.topology);
    const int lo = c * kChunk;
    const int hi = std::min(n, lo + kChunk);
    for (int s = lo; s < hi; ++s) {
      const int idx = indices[static_cast<std::size_t>(s)];
      accumulate_sample(net, data.inputs[static_cast<std::size_t>(idx)],
                        data.targets[static_cast<std::size_t>(idx)], ws, part);
    }
    partials[static_cast<std::size_t>(c)] = std::move(part);
  }

  Gradients g = Gradients::zeros_like(net);
  for (const auto& part : partials) g.add_scaled(part, 1.0);
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& layer : g.weights)
    for (double& v : layer) v *= inv;
  for (auto& layer : g.biases)
    for (double& v : layer) v *= inv;
  return g;
}

Gradients batch_gradients(const Network& net, const Dataset& batch) {
  const auto idx = all_indices(batch.size());
  return batch_gradients(net, batch, idx);
}

void fit_normalization(Network& net, const Dataset& data, std::span<const int> indices) {
  const std::size_t n_in = static_cast<std::size_t>(net.topology.input_size());
  const std::size_t n_out = static_cast<std::size_t>(net.topology.output_size());
  auto fit = [&](std::size_t dim, const std::vector<std::vector<double>>& rows,
                 std::vector<double>& mean, std::vector<double>& scale) {
    mean.assign(dim, 0.0);
    scale.assign(dim, 0.0);
    for (int idx : indices)
      for (std::size_t i = 0; i < dim; ++i) mean[i] += rows[static_cast<std::size_t>(idx)][i];
    const double inv = 1.0 / static_cast<double>(indices.size());
    for (double& m : mean) m *= inv;
    for (int idx : indices)
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = rows[static_cast<std::size_t>(idx)][i] - mean[i];
        scale[i] += d * d;
      }
    for (double& s : scale) s = std::max(std::sqrt(s * inv), 1e-12);
  };
  fit(n_in, data.inputs, net.norm.in_mean, net.norm.in_scale);
  fit(n_out, data.targets, net.norm.out_mean, net.norm.out_scale);
  net.norm.fitted = true;
}

std::pair<std::vector<int>, std::vector<int>> train_val_split(std::size_t n,
                                                              const TrainConfig& config) {
  std::vector<int> order = all_indices(n);
  Rng rng(derive_seed(config.seed, "nnet.split"));
  if (config.shuffle) {
    for (int i = static_cast<int>(n) - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
  }
  const int n_val = static_cast<int>(std::ceil(config.validation_fraction * static_cast<double>(n)));
  const int n_train = static_cast<int>(n) - n_val;
  if (n_train < 1) throw RangeError("train: validation split leaves no training data");
  return {std::vector<int>(order.begin(), order.begin() + n_train),
          std::vector<int>(order.begin() + n_train, order.end())};
}

std::pair<Network, TrainHistory> train(Network net, const Dataset& data,
                                       const TrainConfig& config) {
  config.validate_config();
  TrainHistory history;
  if (config.epochs == 0) return {std::move(net), history};

  if (data.size() < 10) throw RangeError("train: dataset must have >= 10 samples");
  for (std::size_t s = 0; s < data.size(); ++s) {
    for (double v : data.inputs[s])
      if (!std::isfinite(v)) throw NumericalFault("train: non-finite input");
    for (double v : data.targets[s])
      if (!std::isfinite(v)) throw NumericalFault("train: non-finite target");
  }

  auto [train_idx, val_idx] = train_val_split(data.size(), config);
  const int n_train = static_cast<int>(train_idx.size());
  Rng rng(derive_seed(config.seed, "nnet.train"));

  fit_normalization(net, data, train_idx);

  Dataset train_set, val_set;
  for (int i : train_idx) train_set.add(data.inputs[static_cast<std::size_t>(i)],
                                        data.targets[static_cast<std::size_t>(i)]);
  for (int i : val_idx) val_set.add(data.inputs[static_cast<std::size_t>(i)],
                                    data.targets[static_cast<std::size_t>(i)]);

  Gradients velocity = Gradients::zeros_like(net);
  Network best = net;
  double best_score = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_best = 0;

  const int batch = (config.batch_size == 0 || config.batch_size >= n_train)
                        ? n_train
                        : config.batch_size;
  std::vector<int> epoch_order = all_indices(static_cast<std::size_t>(n_train));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle && batch < n_train) {
      for (int i = n_train - 1; i > 0; --i)
        std::swap(epoch_order[static_cast<std::size_t>(i)],
                  epoch_order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    }
    for (int start = 0; start < n_train; start += batch) {
      const int stop = std::min(n_train, start + batch);
      std::vector<int> batch_idx;
      batch_idx.reserve(static_cast<std::size_t>(stop - start));
      for (int s = start; s < stop; ++s)
        batch_idx.push_back(epoch_order[static_cast<std::size_t>(s)]);
      const Gradients g = batch_gradients(net, train_set, batch_idx);
      for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
          velocity.weights[l][i] =
              config.momentum * velocity.weights[l][i] - config.learning_rate * g.weights[l][i];
          net.weights[l][i] += velocity.weights[l][i];
        }
        for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
          velocity.biases[l][i] =
              config.momentum * velocity.biases[l][i] - config.learning_rate * g.biases[l][i];
          net.biases[l][i] += velocity.biases[l][i];
        }
      }
    }

    const double train_mse = dataset_mse(net, train_set);
    if (!std::isfinite(train_mse))
      throw DivergenceError("train: loss diverged at epoch " + std::to_string(epoch), epoch);
    history.train_mse.push_back(train_mse);
    double score = train_mse;
    if (!val_set.inputs.empty()) {
      const double val_mse = dataset_mse(net, val_set);
      if (!std::isfinite(val_mse))
        throw DivergenceError("train: validation loss diverged at epoch " + std::to_string(epoch),
                              epoch);
      history.val_mse.push_back(val_mse);
      score = val_mse;
    }
    if (score < best_score) {
      best_score = score;
      best = net;
      best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }

  history.best_epoch = best_epoch;
  return {std::move(best), history};
}

namespace detail {

std::vector<std::vector<double>> core_activations(const Network& net,
                                                  std::span<const double> normalized_input) {
  if (static_cast<int>(normalized_input.size()) != net.topology.input_size())
    throw ShapeError("core_activations: input width mismatch");
  Workspace ws;
  ws.resize(net.topology);
  std::copy(normalized_input.begin(), normalized_input.end(), ws.activations[0].begin());
  forward_core(net, ws);
  return ws.activations;
}

void add_core_sample_gradient(const Network& net, std::span<const double> normalized_input,
                              std::span<const double> normalized_target, Gradients& g) {
  Workspace ws;
  ws.resize(net.topology);
  std::copy(normalized_input.begin(), normalized_input.end(), ws.activations[0].begin());
  std::copy(normalized_target.begin(), normalized_target.end(), ws.target_norm.begin());
  accumulate_core(net, ws, g);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// serialization

namespace {

const char* activation_name(Activation a) {
  return a == Activation::tanh_fn ? "tanh" : "logistic";
}

Activation activation_from(const std::string& s) {
  if (s == "tanh") return Activation::tanh_fn;
  if (s == "logistic") return Activation::logistic;
  throw Error("unknown activation: " + s);
}

const char* recurrence_name(RecurrenceKind k) {
  switch (k) {
    case RecurrenceKind::none: return "none";
    case RecurrenceKind::jordan_elman: return "jordan_elman";
    case RecurrenceKind::narx: return "narx";
  }
  return "none";
}

RecurrenceKind recurrence_from(const std::string& s) {
  if (s == "none") return RecurrenceKind::none;
  if (s == "jordan_elman") return RecurrenceKind::jordan_elman;
  if (s == "narx") return RecurrenceKind::narx;
  throw Error("unknown recurrence kind: " + s);
}

}  // namespace

std::string to_json(const Network& net) {
  nlohmann::json j;
  j["format"] = "moldloop.network";
  j["version"] = 1;
  j["topology"] = {
      {"layer_sizes", net.topology.layer_sizes},
      {"activation", activation_name(net.topology.hidden_activation)},
      {"recurrence",
       {{"kind", recurrence_name(net.topology.recurrence.kind)},
        {"context_decay", net.topology.recurrence.context_decay},
        {"context_mix", net.topology.recurrence.context_mix},
        {"input_lags", net.topology.recurrence.input_lags},
        {"output_lags", net.topology.recurrence.output_lags}}}};
  j["normalization"] = {{"fitted", net.norm.fitted},
                        {"in_mean", net.norm.in_mean},
                        {"in_scale", net.norm.in_scale},
                        {"out_mean", net.norm.out_mean},
                        {"out_scale", net.norm.out_scale}};
  j["weights"] = net.weights;
  j["biases"] = net.biases;
  j["context_proj_hidden"] = net.context_proj_hidden;
  j["context_proj_output"] = net.context_proj_output;
  return j.dump(2);
}

Network network_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("format").get<std::string>() != "moldloop.network")
    throw Error("not a network document");
  if (j.at("version").get<int>() != 1)
    throw Error("unsupported network document version");
  Network net;
  const auto& jt = j.at("topology");
  net.topology.layer_sizes = jt.at("layer_sizes").get<std::vector<int>>();
  net.topology.hidden_activation = activation_from(jt.at("activation").get<std::string>());
  const auto& jr = jt.at("recurrence");
  net.topology.recurrence.kind = recurrence_from(jr.at("kind").get<std::string>());
  net.topology.recurrence.context_decay = jr.at("context_decay").get<double>();
  net.topology.recurrence.context_mix = jr.at("context_mix").get<double>();
  net.topology.recurrence.input_lags = jr.at("input_lags").get<int>();
  net.topology.recurrence.output_lags = jr.at("output_lags").get<int>();
  net.topology.validate_topology();
  const auto& jn = j.at("normalization");
  net.norm.fitted = jn.at("fitted").get<bool>();
  net.norm.in_mean = jn.at("in_mean").get<std::vector<double>>();
  net.norm.in_scale = jn.at("in_scale").get<std::vector<double>>();
  net.norm.out_mean = jn.at("out_mean").get<std::vector<double>>();
  net.norm.out_scale = jn.at("out_scale").get<std::vector<double>>();
  net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  net.context_proj_hidden = j.at("context_proj_hidden").get<std::vector<double>>();
  net.context_proj_output = j.at("context_proj_output").get<std::vector<double>>();

  const auto& sizes = net.topology.layer_sizes;
  if (net.weights.size() != static_cast<std::size_t>(net.topology.n_affine()) ||
      net.biases.size() != net.weights.size())
    throw ShapeError("network document: layer count mismatch");
  for (int l = 0; l < net.topology.n_affine(); ++l) {
    const std::size_t expect_w = static_cast<std::size_t>(sizes[static_cast<std::size_t>(l)]) *
                                 static_cast<std::size_t>(sizes[static_cast<std::size_t>(l) + 1]);
    if (net.weights[static_cast<std::size_t>(l)].size() != expect_w ||
        net.biases[static_cast<std::size_t>(l)].size() !=
            static_cast<std::size_t>(sizes[static_cast<std::size_t>(l) + 1]))
      throw ShapeError("network document: weight shape mismatch at layer " + std::to_string(l));
  }
  return net;
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  f << to_json(net) << '\n';
}

Network load_network(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return network_from_json(os.str());
}

}  // namespace moldloop::nnet
