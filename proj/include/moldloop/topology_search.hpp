#pragma once

#include <string>
#include <vector>

#include "moldloop/nnet.hpp"

namespace moldloop::nnet {

struct CandidateResult {
  int hidden_units = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct UnitTest {
  int unit = 0;
  double f_statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

struct SearchReport {
  std::vector<CandidateResult> candidates;  // growth phase, per size
  int grown_units = 0;                      // best size before pruning
  double joint_f = 0.0;                     // whole-hidden-layer relevance test
  double joint_p = 1.0;
  bool joint_significant = false;
  std::vector<UnitTest> unit_tests;         // per-unit ablation tests
  int pruned_units = 0;                     // final hidden size
};

struct SearchConfig {
  TrainConfig train;
  Activation activation = Activation::tanh_fn;
  int growth_patience = 2;  // consecutive val-MSE rises that stop the growth
  double alpha = 0.05;      // pruning significance level
};

// Two-phase hidden-size selection for a single-hidden-layer network:
// grow until validation MSE rises growth_patience sizes in a row, keep the
// best-validation size, then test the hidden units' statistical relevance
// (joint F-test of the whole layer against the affine-only model, then
// per-unit ablation F-tests) and prune the non-significant ones.
std::pair<Topology, SearchReport> topology_search(const Dataset& data, int max_hidden_per_layer,
                                                  const SearchConfig& config);

}  // namespace moldloop::nnet
