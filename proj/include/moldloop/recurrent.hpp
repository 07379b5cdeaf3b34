#pragma once

#include <vector>

#include "moldloop/nnet.hpp"

namespace moldloop::nnet {

// Caller-owned context state for a Jordan-Elman network; the network itself
// stays immutable at inference so trained nets are freely shareable.
struct JeSession {
  std::vector<double> context;  // normalized input space

  static JeSession start(const Network& net);
  void reset() { std::fill(context.begin(), context.end(), 0.0); }
};

// Conditioning phase for one step: forwards the raw input, ignores the
// output, and folds the input plus the decayed hidden/output feedback into
// the context. With context_decay 0 the context is exactly the input.
void je_condition(const Network& net, JeSession& session, std::span<const double> input);

// Output phase: runs the core from the context with null external input and
// returns the denormalized output.
std::vector<double> je_predict(const Network& net, const JeSession& session);

// Two-phase training over sequences: per step, condition on the input, emit
// from the context, compare with the target, back-propagate through the core.
// Both phases repeat over the whole training base each epoch. A trailing
// fraction of sequences is held out for best-weight selection.
Network je_train(Network net, const std::vector<Dataset>& sequences, const TrainConfig& config);

// Mean squared one-step error of the two-phase procedure over sequences,
// raw scale. Exposed for evaluation on held-out data.
double je_sequence_mse(const Network& net, const std::vector<Dataset>& sequences);

// ---------------------------------------------------------------------------
// NARX
// ---------------------------------------------------------------------------

// Series-parallel one-step prediction: the tapped-delay vector
// [u(t) ... u(t-du+1), y(t-1) ... y(t-dy)] feeds the core network. Histories
// are oldest-first and must cover the declared lags.
std::vector<double> narx_predict(const Network& net,
                                 const std::vector<std::vector<double>>& input_history,
                                 const std::vector<std::vector<double>>& output_history);

// Teacher-forced dataset over aligned exogenous/output sequences, for
// training the core with train().
Dataset make_narx_dataset(const Network& net,
                          const std::vector<std::vector<std::vector<double>>>& exogenous,
                          const std::vector<std::vector<std::vector<double>>>& outputs);

// Free-running (parallel mode) rollout for reporting: past predictions feed
// the output delay line.
std::vector<std::vector<double>> narx_rollout(const Network& net,
                                              const std::vector<std::vector<double>>& exogenous,
                                              const std::vector<std::vector<double>>& output_seed);

}  // namespace moldloop::nnet
