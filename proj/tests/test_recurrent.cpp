#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "moldloop/metrology.hpp"
#include "moldloop/plant.hpp"
#include "moldloop/recurrent.hpp"
#include "moldloop/rng.hpp"
#include "moldloop/topology_search.hpp"

using namespace moldloop;
using namespace moldloop::nnet;

namespace {

Topology je_topology(double decay, std::vector<int> sizes = {1, 6, 1}) {
  Recurrence rec;
  rec.kind = RecurrenceKind::jordan_elman;
  rec.context_decay = decay;
  rec.context_mix = 0.5;
  return Topology{std::move(sizes), Activation::tanh_fn, rec};
}

// averaged plant pressure profiles as prediction sequences: input = current
// averaged point, target = next point
std::vector<Dataset> pressure_sequences(int n_cycles, std::uint64_t seed, bool noise) {
  plant::Plant press({}, noise);
  std::vector<Dataset> sequences;
  for (int i = 0; i < n_cycles; ++i) {
    plant::ProcessParams params;
    Rng rng(derive_seed(seed, "params", i));
    params.hold_pressure = rng.uniform(380.0, 420.0);
    params.melt_temp = rng.uniform(220.0, 240.0);
    const auto rec = press.run_cycle(params, {}, derive_seed(seed, "cycle", i));
    const auto avg = metrology::average_trace(rec.trace.mold_pressure, 20);
    Dataset seq;
    for (std::size_t t = 0; t + 1 < avg.size(); ++t) seq.add({avg[t]}, {avg[t + 1]});
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

double one_step_nrmse(const Network& net, const std::vector<Dataset>& held_out) {
  double se = 0.0;
  std::size_t n = 0;
  double lo = 1e300, hi = -1e300;
  for (const auto& seq : held_out) {
    JeSession session = JeSession::start(net);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      je_condition(net, session, seq.inputs[t]);
      const double pred = je_predict(net, session)[0];
      const double truth = seq.targets[t][0];
      se += (pred - truth) * (pred - truth);
      ++n;
      lo = std::min(lo, truth);
      hi = std::max(hi, truth);
    }
  }
  return std::sqrt(se / static_cast<double>(n)) / (hi - lo);
}

}  // namespace

TEST_CASE("context decay zero on single-step sequences equals feed-forward training") {
  Rng rng(5);
  std::vector<Dataset> sequences;
  Dataset flat;
  for (int i = 0; i < 12; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    const double y = std::sin(2.0 * x);
    Dataset step;
    step.add({x}, {y});
    sequences.push_back(step);
    flat.add({x}, {y});
  }

  TrainConfig tc;
  tc.learning_rate = 0.1;
  tc.momentum = 0.9;
  tc.epochs = 40;
  tc.batch_size = 1;
  tc.validation_fraction = 0.0;
  tc.patience = 0;
  tc.shuffle = false;
  tc.seed = 9;

  const Topology je_topo = je_topology(0.0, {1, 5, 1});
  Network je_net = init_network(je_topo, 9);

  // same core weights in a plain feed-forward wrapper
  Topology ff_topo = je_topo;
  ff_topo.recurrence = Recurrence{};
  Network ff_net = init_network(ff_topo, 9);
  ff_net.weights = je_net.weights;
  ff_net.biases = je_net.biases;

  const Network je_out = je_train(std::move(je_net), sequences, tc);
  auto [ff_out, hist] = train(std::move(ff_net), flat, tc);

  REQUIRE(je_out.weights.size() == ff_out.weights.size());
  for (std::size_t l = 0; l < je_out.weights.size(); ++l) {
    CHECK(je_out.weights[l] == ff_out.weights[l]);
    CHECK(je_out.biases[l] == ff_out.biases[l]);
  }
}

TEST_CASE("constant sequences drive the context to a fixed point and the error to zero") {
  std::vector<Dataset> sequences;
  Dataset seq;
  for (int t = 0; t < 30; ++t) seq.add({0.6}, {0.6});
  sequences.push_back(seq);

  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.momentum = 0.5;
  tc.epochs = 200;
  tc.validation_fraction = 0.0;
  tc.patience = 0;
  tc.shuffle = false;
  tc.seed = 4;
  const Network net = je_train(init_network(je_topology(0.5), 4), sequences, tc);

  JeSession session = JeSession::start(net);
  double prev_context = 0.0;
  double delta = 1.0;
  for (int t = 0; t < 60; ++t) {
    je_condition(net, session, std::vector<double>{0.6});
    delta = std::fabs(session.context[0] - prev_context);
    prev_context = session.context[0];
  }
  CHECK(delta < 1e-9);  // fixed point reached
  CHECK(std::fabs(je_predict(net, session)[0] - 0.6) < 0.02);
}

TEST_CASE("two-phase training predicts held-out plant pressure profiles") {
  const auto train_seqs = pressure_sequences(24, 100, false);
  const auto held_out = pressure_sequences(6, 200, false);

  TrainConfig tc;
  tc.learning_rate = 0.002;  // per-step updates want a small rate
  tc.momentum = 0.9;
  tc.epochs = 60;
  tc.validation_fraction = 0.2;
  tc.patience = 15;
  tc.shuffle = false;
  tc.seed = 21;
  const Network net = je_train(init_network(je_topology(0.3, {1, 16, 1}), 21), train_seqs, tc);
  CHECK(one_step_nrmse(net, held_out) < 0.1);
}

TEST_CASE("je operations reject the wrong recurrence kind") {
  const Network plain = init_network(Topology{{1, 3, 1}, Activation::tanh_fn, {}}, 1);
  std::vector<Dataset> seqs(1);
  seqs[0].add({0.1}, {0.2});
  TrainConfig tc;
  CHECK_THROWS_AS(static_cast<void>(je_train(plain, seqs, tc)), ModeError);
  JeSession session;
  session.context = {0.0};
  CHECK_THROWS_AS(static_cast<void>(je_predict(plain, session)), ModeError);
}

TEST_CASE("je training is bit-deterministic per seed") {
  const auto seqs = pressure_sequences(6, 300, false);
  TrainConfig tc;
  tc.epochs = 5;
  tc.shuffle = false;
  tc.validation_fraction = 0.0;
  tc.patience = 0;
  tc.seed = 8;
  const Network a = je_train(init_network(je_topology(0.4), 8), seqs, tc);
  const Network b = je_train(init_network(je_topology(0.4), 8), seqs, tc);
  for (std::size_t l = 0; l < a.weights.size(); ++l) CHECK(a.weights[l] == b.weights[l]);
}

// ---------------------------------------------------------------------------
// NARX
// ---------------------------------------------------------------------------

namespace {

Topology narx_topology(std::vector<int> sizes, int input_lags, int output_lags) {
  Recurrence rec;
  rec.kind = RecurrenceKind::narx;
  rec.input_lags = input_lags;
  rec.output_lags = output_lags;
  return Topology{std::move(sizes), Activation::tanh_fn, rec};
}

}  // namespace

TEST_CASE("a linear core reproduces the explicit ARX recursion") {
  // y(t) = 0.5 u(t) - 0.25 u(t-1) + 0.3 y(t-1) + 0.1
  Network net = init_network(narx_topology({3, 1}, 2, 1), 1);
  net.weights[0] = {0.5, -0.25, 0.3};
  net.biases[0] = {0.1};

  std::vector<std::vector<double>> u{{1.0}, {0.5}, {-0.75}};
  std::vector<std::vector<double>> y{{0.2}, {0.4}};

  // tapped-delay order: u(t), u(t-1), y(t-1)
  const double expect = 0.5 * (-0.75) - 0.25 * 0.5 + 0.3 * 0.4 + 0.1;
  CHECK(narx_predict(net, u, y)[0] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("zero histories through a zero net give zero") {
  Network net = init_network(narx_topology({4, 3, 2}, 1, 1), 1);
  for (auto& layer : net.weights) std::fill(layer.begin(), layer.end(), 0.0);
  for (auto& layer : net.biases) std::fill(layer.begin(), layer.end(), 0.0);
  std::vector<std::vector<double>> u{{0.0, 0.0}};
  std::vector<std::vector<double>> y{{0.0, 0.0}};
  const auto out = narx_predict(net, u, y);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("the 4-6-6-2 dynamic shape accepts 2 exogenous signals x 2 lags") {
  const Topology topo = narx_topology({4, 6, 6, 2}, 2, 0);
  CHECK_NOTHROW(topo.validate_topology());
  CHECK(topo.narx_exogenous_size() == 2);
  const Network net = init_network(topo, 3);

  std::vector<std::vector<double>> u{{0.1, 0.2}, {0.3, 0.4}};
  std::vector<std::vector<double>> y;
  CHECK(narx_predict(net, u, y).size() == 2);

  // short history is a range error
  std::vector<std::vector<double>> too_short{{0.1, 0.2}};
  CHECK_THROWS_AS(static_cast<void>(narx_predict(net, too_short, y)), RangeError);
  // inconsistent widths are a shape error
  const Topology bad = narx_topology({5, 6, 2}, 2, 0);
  CHECK_THROWS_AS(bad.validate_topology(), ShapeError);
}

TEST_CASE("series-parallel dataset and teacher-forced training track a NARX system") {
  // reference system: y(t) = 0.8 y(t-1) + 0.5 u(t) - 0.2 u(t-1)
  auto simulate = [](const std::vector<double>& u) {
    std::vector<double> y(u.size(), 0.0);
    for (std::size_t t = 1; t < u.size(); ++t)
      y[t] = 0.8 * y[t - 1] + 0.5 * u[t] - 0.2 * u[t - 1];
    return y;
  };

  std::vector<std::vector<std::vector<double>>> exo, out;
  Rng rng(17);
  for (int s = 0; s < 8; ++s) {
    std::vector<double> u;
    for (int t = 0; t < 60; ++t) u.push_back(rng.uniform(-1.0, 1.0));
    const auto y = simulate(u);
    std::vector<std::vector<double>> u_seq, y_seq;
    for (std::size_t t = 0; t < u.size(); ++t) {
      u_seq.push_back({u[t]});
      y_seq.push_back({y[t]});
    }
    exo.push_back(u_seq);
    out.push_back(y_seq);
  }

  const Topology topo = narx_topology({3, 6, 1}, 2, 1);
  Network net = init_network(topo, 7);
  const Dataset data = make_narx_dataset(net, exo, out);
  CHECK(data.size() == 8u * 59u);  // start index max(du-1, dy) = 1 trims one step

  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.momentum = 0.9;
  tc.epochs = 400;
  tc.validation_fraction = 0.2;
  tc.patience = 100;
  tc.seed = 7;
  auto [trained, hist] = train(std::move(net), data, tc);

  // one-step check on a fresh sequence
  std::vector<double> u_test;
  Rng rng2(18);
  for (int t = 0; t < 40; ++t) u_test.push_back(rng2.uniform(-1.0, 1.0));
  const auto y_test = simulate(u_test);
  double worst = 0.0;
  for (std::size_t t = 2; t < u_test.size(); ++t) {
    std::vector<std::vector<double>> u_hist, y_hist;
    for (std::size_t k = 0; k <= t; ++k) u_hist.push_back({u_test[k]});
    for (std::size_t k = 0; k < t; ++k) y_hist.push_back({y_test[k]});
    worst = std::max(worst, std::fabs(narx_predict(trained, u_hist, y_hist)[0] - y_test[t]));
  }
  CHECK(worst < 0.1);

  // free-running rollout stays close on the same sequence
  std::vector<std::vector<double>> u_hist_full;
  for (double u : u_test) u_hist_full.push_back({u});
  const auto rollout = narx_rollout(trained, u_hist_full, {{y_test[0]}});
  REQUIRE(rollout.size() == u_test.size());
  double rollout_err = 0.0;
  for (std::size_t t = 0; t < rollout.size(); ++t)
    rollout_err = std::max(rollout_err, std::fabs(rollout[t][0] - y_test[t]));
  CHECK(rollout_err < 0.5);
}

// ---------------------------------------------------------------------------
// topology search
// ---------------------------------------------------------------------------

TEST_CASE("nearly linear data settles on a small hidden layer") {
  Rng rng(31);
  Dataset data;
  for (int i = 0; i < 80; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    data.add({x}, {2.0 * x - 1.0 + rng.gaussian(0.0, 0.05)});
  }
  SearchConfig sc;
  sc.train.epochs = 300;
  sc.train.patience = 30;
  sc.train.validation_fraction = 0.25;
  sc.train.seed = 5;
  auto [topo, report] = topology_search(data, 8, sc);
  CHECK(report.pruned_units <= 2);
  CHECK(topo.layer_sizes[1] == report.pruned_units);
}

TEST_CASE("pure-noise targets prune to the minimal network in most seeds") {
  int minimal = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(derive_seed(seed, "noise"));
    Dataset data;
    for (int i = 0; i < 60; ++i) data.add({rng.uniform(-1.0, 1.0)}, {rng.gaussian()});
    SearchConfig sc;
    sc.train.epochs = 150;
    sc.train.patience = 20;
    sc.train.validation_fraction = 0.25;
    sc.train.seed = seed;
    auto [topo, report] = topology_search(data, 6, sc);
    bool any_significant = report.joint_significant;
    if (!any_significant) ++minimal;
  }
  CHECK(minimal >= 18);
}

TEST_CASE("selection consistency: no larger candidate beats the chosen size") {
  Rng rng(41);
  Dataset data;
  for (int i = 0; i < 120; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    data.add({x}, {std::sin(3.0 * x) + rng.gaussian(0.0, 0.02)});
  }
  SearchConfig sc;
  sc.train.epochs = 250;
  sc.train.patience = 25;
  sc.train.validation_fraction = 0.25;
  sc.train.seed = 3;
  auto [topo, report] = topology_search(data, 10, sc);
  double best_val = 1e300;
  for (const auto& c : report.candidates)
    if (c.hidden_units == report.grown_units) best_val = c.val_mse;
  for (const auto& c : report.candidates) CHECK(best_val <= c.val_mse + 1e-15);
  CHECK_THROWS_AS(static_cast<void>(topology_search(data, 0, sc)), RangeError);
}
