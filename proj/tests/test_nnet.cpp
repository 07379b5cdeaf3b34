#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "moldloop/nnet.hpp"
#include "moldloop/rng.hpp"

using namespace moldloop;
using namespace moldloop::nnet;

namespace {

Dataset xor_dataset() {
  // corners replicated to satisfy the minimum dataset size; batch-mean
  // invariance makes the replication gradient-neutral
  Dataset d;
  for (int rep = 0; rep < 4; ++rep) {
    d.add({0.0, 0.0}, {0.0});
    d.add({0.0, 1.0}, {1.0});
    d.add({1.0, 0.0}, {1.0});
    d.add({1.0, 1.0}, {0.0});
  }
  return d;
}

Dataset random_dataset(int n, int n_in, int n_out, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (int i = 0; i < n; ++i) {
    std::vector<double> x, y;
    for (int j = 0; j < n_in; ++j) x.push_back(rng.gaussian());
    for (int j = 0; j < n_out; ++j) y.push_back(rng.gaussian());
    d.add(std::move(x), std::move(y));
  }
  return d;
}

// central finite differences of batch_loss over every weight and bias
double max_fd_deviation(Network net, const Dataset& batch) {
  const Gradients g = batch_gradients(net, batch);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
      const double keep = net.weights[l][i];
      net.weights[l][i] = keep + h;
      const double up = batch_loss(net, batch);
      net.weights[l][i] = keep - h;
      const double dn = batch_loss(net, batch);
      net.weights[l][i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double an = g.weights[l][i];
      worst = std::max(worst, std::fabs(an - fd) / std::max({1.0, std::fabs(an), std::fabs(fd)}));
    }
    for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
      const double keep = net.biases[l][i];
      net.biases[l][i] = keep + h;
      const double up = batch_loss(net, batch);
      net.biases[l][i] = keep - h;
      const double dn = batch_loss(net, batch);
      net.biases[l][i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double an = g.biases[l][i];
      worst = std::max(worst, std::fabs(an - fd) / std::max({1.0, std::fabs(an), std::fabs(fd)}));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("init shapes follow the topology and reproduce per seed") {
  const Topology topo{{9, 21, 2}, Activation::tanh_fn, {}};
  const Network net = init_network(topo, 4);
  REQUIRE(net.weights.size() == 2);
  CHECK(net.weights[0].size() == 21u * 9u);
  CHECK(net.weights[1].size() == 2u * 21u);
  CHECK(net.biases[0].size() == 21u);
  CHECK(net.biases[1].size() == 2u);

  const double bound0 = 1.0 / std::sqrt(9.0);
  for (double w : net.weights[0]) CHECK(std::fabs(w) <= bound0);

  const Network again = init_network(topo, 4);
  CHECK(net.weights[0] == again.weights[0]);
  CHECK(net.weights[1] == again.weights[1]);
  const Network other = init_network(topo, 5);
  CHECK(net.weights[0] != other.weights[0]);

  CHECK_THROWS_AS(init_network(Topology{{3}, Activation::tanh_fn, {}}, 1), ShapeError);
  CHECK_THROWS_AS(init_network(Topology{{3, 0, 1}, Activation::tanh_fn, {}}, 1), ShapeError);
}

TEST_CASE("forward: zero nets, affine arithmetic, purity") {
  Topology topo{{2, 3, 1}, Activation::tanh_fn, {}};
  Network zero = init_network(topo, 1);
  for (auto& layer : zero.weights) std::fill(layer.begin(), layer.end(), 0.0);
  for (auto& layer : zero.biases) std::fill(layer.begin(), layer.end(), 0.0);
  CHECK(forward(zero, std::vector<double>{0.7, -2.0})[0] == 0.0);

  Network affine = init_network(Topology{{1, 1}, Activation::tanh_fn, {}}, 1);
  affine.weights[0] = {2.0};
  affine.biases[0] = {1.0};
  CHECK(forward(affine, std::vector<double>{3.0})[0] == doctest::Approx(7.0).epsilon(1e-15));

  const auto a = forward(affine, std::vector<double>{3.0});
  const auto b = forward(affine, std::vector<double>{3.0});
  CHECK(a == b);

  CHECK_THROWS_AS(forward(affine, std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("gradients match central finite differences") {
  // 10 random topologies/batches here; the acceptance suite runs 100
  const std::vector<std::vector<int>> shapes{{3, 5, 2}, {2, 4, 4, 1}, {6, 3, 3}, {1, 8, 1}, {4, 4}};
  int case_id = 0;
  for (const auto& shape : shapes) {
    for (Activation act : {Activation::tanh_fn, Activation::logistic}) {
      const Topology topo{shape, act, {}};
      const Network net = init_network(topo, 100 + static_cast<std::uint64_t>(case_id));
      const Dataset batch = random_dataset(7, shape.front(), shape.back(),
                                           200 + static_cast<std::uint64_t>(case_id));
      CHECK(max_fd_deviation(net, batch) < 1e-6);
      ++case_id;
    }
  }
}

TEST_CASE("gradient is zero at an exact fit") {
  Network net = init_network(Topology{{1, 1}, Activation::tanh_fn, {}}, 1);
  net.weights[0] = {2.0};
  net.biases[0] = {1.0};
  Dataset d;
  for (int i = 0; i < 12; ++i) {
    const double x = 0.25 * i;
    d.add({x}, {2.0 * x + 1.0});
  }
  const Gradients g = batch_gradients(net, d);
  CHECK(g.max_abs() < 1e-8);
}

TEST_CASE("duplicating every sample leaves the mean gradient unchanged") {
  const Topology topo{{3, 4, 2}, Activation::tanh_fn, {}};
  const Network net = init_network(topo, 8);
  const Dataset batch = random_dataset(9, 3, 2, 9);
  Dataset doubled = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) doubled.add(batch.inputs[i], batch.targets[i]);

  const Gradients g1 = batch_gradients(net, batch);
  const Gradients g2 = batch_gradients(net, doubled);
  for (std::size_t l = 0; l < g1.weights.size(); ++l)
    for (std::size_t i = 0; i < g1.weights[l].size(); ++i)
      CHECK(g1.weights[l][i] == doctest::Approx(g2.weights[l][i]).epsilon(1e-12));

  CHECK_THROWS_AS(batch_gradients(net, Dataset{}), RangeError);
}

TEST_CASE("XOR trains to a small error and separates the corners") {
  TrainConfig tc;
  tc.learning_rate = 0.5;
  tc.momentum = 0.9;
  tc.epochs = 2000;
  tc.validation_fraction = 0.0;
  tc.patience = 0;
  tc.shuffle = false;
  tc.seed = 3;
  const Topology topo{{2, 2, 1}, Activation::tanh_fn, {}};
  auto [net, history] = train(init_network(topo, tc.seed), xor_dataset(), tc);
  REQUIRE_FALSE(history.train_mse.empty());
  CHECK(history.train_mse.back() < 0.01);
  CHECK(std::fabs(forward(net, std::vector<double>{0, 0})[0] - 0.0) < 0.1);
  CHECK(std::fabs(forward(net, std::vector<double>{0, 1})[0] - 1.0) < 0.1);
  CHECK(std::fabs(forward(net, std::vector<double>{1, 0})[0] - 1.0) < 0.1);
  CHECK(std::fabs(forward(net, std::vector<double>{1, 1})[0] - 0.0) < 0.1);
}

TEST_CASE("zero epochs return the initial net untouched") {
  const Topology topo{{2, 3, 1}, Activation::tanh_fn, {}};
  const Network net = init_network(topo, 6);
  TrainConfig tc;
  tc.epochs = 0;
  auto [out, history] = train(net, xor_dataset(), tc);
  CHECK(out.weights[0] == net.weights[0]);
  CHECK(history.train_mse.empty());
  CHECK_FALSE(out.norm.fitted);
}

TEST_CASE("training is bit-deterministic per seed") {
  TrainConfig tc;
  tc.epochs = 50;
  tc.seed = 12;
  tc.batch_size = 4;
  const Dataset data = random_dataset(40, 3, 1, 5);
  const Topology topo{{3, 6, 1}, Activation::tanh_fn, {}};
  auto [a, ha] = train(init_network(topo, tc.seed), data, tc);
  auto [b, hb] = train(init_network(topo, tc.seed), data, tc);
  CHECK(a.weights[0] == b.weights[0]);
  CHECK(a.weights[1] == b.weights[1]);
  CHECK(ha.train_mse == hb.train_mse);
}

TEST_CASE("a divergent run names the epoch") {
  TrainConfig tc;
  tc.learning_rate = 1e9;
  tc.momentum = 0.0;
  tc.epochs = 50;
  tc.validation_fraction = 0.0;
  tc.seed = 2;
  const Dataset data = random_dataset(20, 2, 1, 3);
  const Topology topo{{2, 4, 1}, Activation::tanh_fn, {}};
  CHECK_THROWS_AS(static_cast<void>(train(init_network(topo, 2), data, tc)), DivergenceError);
}

TEST_CASE("training dataset preconditions") {
  TrainConfig tc;
  Dataset tiny;
  for (int i = 0; i < 5; ++i) tiny.add({0.1 * i}, {0.2 * i});
  const Topology topo{{1, 2, 1}, Activation::tanh_fn, {}};
  CHECK_THROWS_AS(static_cast<void>(train(init_network(topo, 1), tiny, tc)), RangeError);

  Dataset bad = random_dataset(12, 1, 1, 1);
  bad.inputs[3][0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(static_cast<void>(train(init_network(topo, 1), bad, tc)), NumericalFault);
}

TEST_CASE("monotone training sanity on noiseless linear data") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    Dataset data;
    for (int i = 0; i < 30; ++i) {
      const double x = rng.uniform(-1.0, 1.0);
      data.add({x}, {1.5 * x - 0.25});
    }
    TrainConfig tc;
    tc.epochs = 100;
    tc.validation_fraction = 0.0;
    tc.patience = 0;
    tc.seed = seed;
    const Topology topo{{1, 4, 1}, Activation::tanh_fn, {}};
    auto [net, history] = train(init_network(topo, seed), data, tc);
    REQUIRE(history.train_mse.size() >= 2);
    CHECK(history.train_mse.back() < history.train_mse.front());
  }
}

TEST_CASE("normalization round-trips and is fitted on the training split only") {
  const Dataset data = random_dataset(50, 3, 2, 77);
  TrainConfig tc;
  tc.epochs = 5;
  tc.seed = 7;
  const Topology topo{{3, 4, 2}, Activation::tanh_fn, {}};
  auto [net, history] = train(init_network(topo, 7), data, tc);
  REQUIRE(net.norm.fitted);
  for (std::size_t i = 0; i < 3; ++i) {
    const double x = 1.2345 + static_cast<double>(i);
    const double normed = (x - net.norm.in_mean[i]) / net.norm.in_scale[i];
    const double back = normed * net.norm.in_scale[i] + net.norm.in_mean[i];
    CHECK(std::fabs(back - x) < 1e-12);
  }
}

TEST_CASE("serialization round-trips bit-exactly") {
  const Topology topo{{4, 7, 3}, Activation::logistic, {}};
  Network net = init_network(topo, 123);
  Dataset data = random_dataset(30, 4, 3, 9);
  TrainConfig tc;
  tc.epochs = 10;
  tc.seed = 5;
  auto [trained, hist] = train(std::move(net), data, tc);

  const std::string text = to_json(trained);
  const Network loaded = network_from_json(text);
  CHECK(loaded.weights == trained.weights);
  CHECK(loaded.biases == trained.biases);
  CHECK(loaded.norm.in_mean == trained.norm.in_mean);
  CHECK(loaded.norm.in_scale == trained.norm.in_scale);
  CHECK(loaded.norm.out_mean == trained.norm.out_mean);
  CHECK(loaded.norm.out_scale == trained.norm.out_scale);
  CHECK(loaded.topology.layer_sizes == trained.topology.layer_sizes);

  // a second hop stays identical
  CHECK(to_json(loaded) == text);
}
