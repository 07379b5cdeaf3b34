#include "moldloop/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "moldloop/rng.hpp"

namespace moldloop::nnet {

namespace {

void require_je(const Network& net, const char* op) {
  if (net.topology.recurrence.kind != RecurrenceKind::jordan_elman)
    throw ModeError(std::string(op) + ": network recurrence is not jordan_elman");
}

void require_narx(const Network& net, const char* op) {
  if (net.topology.recurrence.kind != RecurrenceKind::narx)
    throw ModeError(std::string(op) + ": network recurrence is not narx");
}

std::vector<double> normalize_vec(const Network& net, std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = (x[i] - net.norm.in_mean[i]) / net.norm.in_scale[i];
  return out;
}

}  // namespace

JeSession JeSession::start(const Network& net) {
  JeSession s;
  s.context.assign(static_cast<std::size_t>(net.topology.input_size()), 0.0);
  return s;
}

void je_condition(const Network& net, JeSession& session, std::span<const double> input) {
  require_je(net, "je_condition");
  const int n_in = net.topology.input_size();
  if (static_cast<int>(input.size()) != n_in)
    throw ShapeError("je_condition: input width mismatch");
  if (static_cast<int>(session.context.size()) != n_in)
    throw ShapeError("je_condition: session does not belong to this network");

  const std::vector<double> x = normalize_vec(net, input);
  const auto acts = detail::core_activations(net, x);
  const auto& hidden = acts[1];
  const auto& output = acts.back();

  const double decay = net.topology.recurrence.context_decay;
  const double mix = net.topology.recurrence.context_mix;
  const int h1 = net.topology.layer_sizes[1];
  const int n_out = net.topology.output_size();

  // decay-weighted blend keeps the context on the normalized input scale;
  // decay 0 leaves exactly the input
  for (int i = 0; i < n_in; ++i) {
    double fb_out = 0.0;
    const double* wy = net.context_proj_output.data() + static_cast<std::size_t>(i) * n_out;
    for (int k = 0; k < n_out; ++k) fb_out += wy[k] * output[static_cast<std::size_t>(k)];
    double fb_hid = 0.0;
    const double* wh = net.context_proj_hidden.data() + static_cast<std::size_t>(i) * h1;
    for (int k = 0; k < h1; ++k) fb_hid += wh[k] * hidden[static_cast<std::size_t>(k)];
    session.context[static_cast<std::size_t>(i)] =
        decay * (session.context[static_cast<std::size_t>(i)] + mix * fb_out +
                 (1.0 - mix) * fb_hid) +
        (1.0 - decay) * x[static_cast<std::size_t>(i)];
  }
}

std::vector<double> je_predict(const Network& net, const JeSession& session) {
  require_je(net, "je_predict");
  if (static_cast<int>(session.context.size()) != net.topology.input_size())
    throw ShapeError("je_predict: session does not belong to this network");
  const auto acts = detail::core_activations(net, session.context);
  std::vector<double> out = acts.back();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = out[i] * net.norm.out_scale[i] + net.norm.out_mean[i];
  return out;
}

double je_sequence_mse(const Network& net, const std::vector<Dataset>& sequences) {
  require_je(net, "je_sequence_mse");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& seq : sequences) {
    JeSession session = JeSession::start(net);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      je_condition(net, session, seq.inputs[t]);
      const auto pred = je_predict(net, session);
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - seq.targets[t][i];
        total += d * d;
        ++count;
      }
    }
  }
  if (count == 0) throw RangeError("je_sequence_mse: no steps");
  return total / static_cast<double>(count);
}

Network je_train(Network net, const std::vector<Dataset>& sequences,
                 const TrainConfig& config) {
  require_je(net, "je_train");
  config.validate_config();
  if (sequences.empty()) throw RangeError("je_train: no sequences");
  for (const auto& seq : sequences) {
    if (seq.size() == 0) throw RangeError("je_train: empty sequence");
    for (std::size_t t = 0; t < seq.size(); ++t)
      if (static_cast<int>(seq.inputs[t].size()) != net.topology.input_size() ||
          static_cast<int>(seq.targets[t].size()) != net.topology.output_size())
        throw ShapeError("je_train: sequence step width mismatch");
  }
  if (config.epochs == 0) return net;

  const int n_seq = static_cast<int>(sequences.size());
  std::vector<int> order(static_cast<std::size_t>(n_seq));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config.seed, "nnet.split"));
  if (config.shuffle) {
    for (int i = n_seq - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
  }
  const int n_val = static_cast<int>(std::ceil(config.validation_fraction * n_seq));
  const int n_train = n_seq - n_val;
  if (n_train < 1) throw RangeError("je_train: validation split leaves no sequences");
  std::vector<int> train_idx(order.begin(), order.begin() + n_train);
  std::vector<int> val_idx(order.begin() + n_train, order.end());

  // normalization over every step of the training sequences, in order
  Dataset flat;
  for (int si : train_idx) {
    const auto& seq = sequences[static_cast<std::size_t>(si)];
    for (std::size_t t = 0; t < seq.size(); ++t) flat.add(seq.inputs[t], seq.targets[t]);
  }
  std::vector<int> flat_idx(flat.size());
  std::iota(flat_idx.begin(), flat_idx.end(), 0);
  fit_normalization(net, flat, flat_idx);

  std::vector<Dataset> train_seqs, val_seqs;
  for (int si : train_idx) train_seqs.push_back(sequences[static_cast<std::size_t>(si)]);
  for (int si : val_idx) val_seqs.push_back(sequences[static_cast<std::size_t>(si)]);

  Gradients velocity = Gradients::zeros_like(net);
  Gradients grad = Gradients::zeros_like(net);
  Network best = net;
  double best_score = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<double> target_norm(static_cast<std::size_t>(net.topology.output_size()));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& seq : train_seqs) {
      JeSession session = JeSession::start(net);
      for (std::size_t t = 0; t < seq.size(); ++t) {
        // phase 1: conditioning on the input, output discarded
        je_condition(net, session, seq.inputs[t]);
        // phase 2: emit from the context, compare, back-propagate
        for (std::size_t i = 0; i < target_norm.size(); ++i)
          target_norm[i] =
              (seq.targets[t][i] - net.norm.out_mean[i]) / net.norm.out_scale[i];
        for (auto& layer : grad.weights) std::fill(layer.begin(), layer.end(), 0.0);
        for (auto& layer : grad.biases) std::fill(layer.begin(), layer.end(), 0.0);
        detail::add_core_sample_gradient(net, session.context, target_norm, grad);
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
          for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
            velocity.weights[l][i] = config.momentum * velocity.weights[l][i] -
                                     config.learning_rate * grad.weights[l][i];
            net.weights[l][i] += velocity.weights[l][i];
          }
          for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
            velocity.biases[l][i] = config.momentum * velocity.biases[l][i] -
                                    config.learning_rate * grad.biases[l][i];
            net.biases[l][i] += velocity.biases[l][i];
          }
        }
      }
    }

    const double train_mse = je_sequence_mse(net, train_seqs);
    if (!std::isfinite(train_mse))
      throw DivergenceError("je_train: loss diverged at epoch " + std::to_string(epoch), epoch);
    double score = train_mse;
    if (!val_seqs.empty()) {
      const double val_mse = je_sequence_mse(net, val_seqs);
      if (!std::isfinite(val_mse))
        throw DivergenceError("je_train: validation loss diverged at epoch " + std::to_string(epoch),
                              epoch);
      score = val_mse;
    }
    if (score < best_score) {
      best_score = score;
      best = net;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// NARX
// ---------------------------------------------------------------------------

namespace {

std::vector<double> tapped_delay_vector(const Network& net,
                                        const std::vector<std::vector<double>>& u_hist,
                                        const std::vector<std::vector<double>>& y_hist) {
  const auto& rec = net.topology.recurrence;
  const int nu = net.topology.narx_exogenous_size();
  const int ny = net.topology.output_size();
  if (static_cast<int>(u_hist.size()) < rec.input_lags)
    throw RangeError("narx: input history shorter than input_lags");
  if (static_cast<int>(y_hist.size()) < rec.output_lags)
    throw RangeError("narx: output history shorter than output_lags");

  std::vector<double> z;
  z.reserve(static_cast<std::size_t>(net.topology.input_size()));
  // u(t) ... u(t-du+1)
  for (int k = 0; k < rec.input_lags; ++k) {
    const auto& u = u_hist[u_hist.size() - 1 - static_cast<std::size_t>(k)];
    if (static_cast<int>(u.size()) != nu)
      throw ShapeError("narx: exogenous sample width != " + std::to_string(nu));
    z.insert(z.end(), u.begin(), u.end());
  }
  // y(t-1) ... y(t-dy)
  for (int k = 0; k < rec.output_lags; ++k) {
    const auto& y = y_hist[y_hist.size() - 1 - static_cast<std::size_t>(k)];
    if (static_cast<int>(y.size()) != ny)
      throw ShapeError("narx: output sample width != " + std::to_string(ny));
    z.insert(z.end(), y.begin(), y.end());
  }
  return z;
}

}  // namespace

std::vector<double> narx_predict(const Network& net,
                                 const std::vector<std::vector<double>>& input_history,
                                 const std::vector<std::vector<double>>& output_history) {
  require_narx(net, "narx_predict");
  return forward(net, tapped_delay_vector(net, input_history, output_history));
}

Dataset make_narx_dataset(const Network& net,
                          const std::vector<std::vector<std::vector<double>>>& exogenous,
                          const std::vector<std::vector<std::vector<double>>>& outputs) {
  require_narx(net, "make_narx_dataset");
  if (exogenous.size() != outputs.size())
    throw ShapeError("make_narx_dataset: sequence count mismatch");
  const auto& rec = net.topology.recurrence;
  Dataset data;
  for (std::size_t s = 0; s < exogenous.size(); ++s) {
    const auto& u_seq = exogenous[s];
    const auto& y_seq = outputs[s];
    if (u_seq.size() != y_seq.size())
      throw ShapeError("make_narx_dataset: sequence length mismatch");
    const std::size_t start =
        static_cast<std::size_t>(std::max(rec.input_lags - 1, rec.output_lags));
    for (std::size_t t = start; t < u_seq.size(); ++t) {
      std::vector<std::vector<double>> u_hist(u_seq.begin(), u_seq.begin() + t + 1);
      std::vector<std::vector<double>> y_hist(y_seq.begin(), y_seq.begin() + t);
      data.add(tapped_delay_vector(net, u_hist, y_hist), y_seq[t]);
    }
  }
  return data;
}

std::vector<std::vector<double>> narx_rollout(const Network& net,
                                              const std::vector<std::vector<double>>& exogenous,
                                              const std::vector<std::vector<double>>& output_seed) {
  require_narx(net, "narx_rollout");
  const auto& rec = net.topology.recurrence;
  if (static_cast<int>(output_seed.size()) < rec.output_lags)
    throw RangeError("narx_rollout: output seed shorter than output_lags");
  std::vector<std::vector<double>> y = output_seed;
  const std::size_t start =
      static_cast<std::size_t>(std::max<int>(rec.input_lags - 1, static_cast<int>(y.size())));
  for (std::size_t t = start; t < exogenous.size(); ++t) {
    std::vector<std::vector<double>> u_hist(exogenous.begin(), exogenous.begin() + t + 1);
    y.push_back(narx_predict(net, u_hist, y));
  }
  return y;
}

}  // namespace moldloop::nnet
