#include "moldloop/topology_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "moldloop/rng.hpp"
#include "moldloop/stats.hpp"

namespace moldloop::nnet {

namespace {

// Residual sum of squares of the net over the data, in units of the net's
// normalized output scale so models of different sizes compare on one scale.
double rss_normalized(const Network& net, const Dataset& data,
                      const std::vector<double>& out_scale) {
  double rss = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto pred = forward(net, data.inputs[s]);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = (pred[i] - data.targets[s][i]) / out_scale[i];
      rss += d * d;
    }
  }
  return rss;
}

// Ordinary least squares affine fit in normalized space; returns the RSS.
double ols_rss(const Dataset& data, const Normalization& norm) {
  const std::size_t n_in = norm.in_mean.size();
  const std::size_t n_out = norm.out_mean.size();
  const std::size_t dim = n_in + 1;  // affine term

  std::vector<double> xtx(dim * dim, 0.0);
  std::vector<double> xty(dim * n_out, 0.0);
  std::vector<double> x(dim);
  for (std::size_t s = 0; s < data.size(); ++s) {
    for (std::size_t i = 0; i < n_in; ++i)
      x[i] = (data.inputs[s][i] - norm.in_mean[i]) / norm.in_scale[i];
    x[n_in] = 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) xtx[i * dim + j] += x[i] * x[j];
      for (std::size_t o = 0; o < n_out; ++o) {
        const double y = (data.targets[s][o] - norm.out_mean[o]) / norm.out_scale[o];
        xty[i * n_out + o] += x[i] * y;
      }
    }
  }
  // ridge epsilon keeps degenerate designs solvable
  for (std::size_t i = 0; i < dim; ++i) xtx[i * dim + i] += 1e-9;

  // gaussian elimination with partial pivoting
  std::vector<double> a = xtx;
  std::vector<double> b = xty;
  for (std::size_t col = 0; col < dim; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < dim; ++r)
      if (std::fabs(a[r * dim + col]) > std::fabs(a[piv * dim + col])) piv = r;
    if (piv != col) {
      for (std::size_t j = 0; j < dim; ++j) std::swap(a[col * dim + j], a[piv * dim + j]);
      for (std::size_t o = 0; o < n_out; ++o) std::swap(b[col * n_out + o], b[piv * n_out + o]);
    }
    const double d = a[col * dim + col];
    for (std::size_t r = 0; r < dim; ++r) {
      if (r == col) continue;
      const double f = a[r * dim + col] / d;
      if (f == 0.0) continue;
      for (std::size_t j = col; j < dim; ++j) a[r * dim + j] -= f * a[col * dim + j];
      for (std::size_t o = 0; o < n_out; ++o) b[r * n_out + o] -= f * b[col * n_out + o];
    }
  }
  std::vector<double> coef(dim * n_out);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t o = 0; o < n_out; ++o) coef[i * n_out + o] = b[i * n_out + o] / a[i * dim + i];

  double rss = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    for (std::size_t i = 0; i < n_in; ++i)
      x[i] = (data.inputs[s][i] - norm.in_mean[i]) / norm.in_scale[i];
    x[n_in] = 1.0;
    for (std::size_t o = 0; o < n_out; ++o) {
      double pred = 0.0;
      for (std::size_t i = 0; i < dim; ++i) pred += x[i] * coef[i * n_out + o];
      const double y = (data.targets[s][o] - norm.out_mean[o]) / norm.out_scale[o];
      const double d = pred - y;
      rss += d * d;
    }
  }
  return rss;
}

Network ablate_unit(const Network& net, int unit) {
  Network cut = net;
  const int n_in = net.topology.layer_sizes[0];
  const int h = net.topology.layer_sizes[1];
  for (int j = 0; j < n_in; ++j)
    cut.weights[0][static_cast<std::size_t>(unit) * n_in + j] = 0.0;
  cut.biases[0][static_cast<std::size_t>(unit)] = 0.0;
  const int n_out = net.topology.layer_sizes[2];
  for (int i = 0; i < n_out; ++i)
    cut.weights[1][static_cast<std::size_t>(i) * h + unit] = 0.0;
  return cut;
}

}  // namespace

std::pair<Topology, SearchReport> topology_search(const Dataset& data, int max_hidden_per_layer,
                                                  const SearchConfig& config) {
  if (max_hidden_per_layer < 1)
    throw RangeError("topology_search: max_hidden_per_layer must be >= 1");
  if (data.size() < 10) throw RangeError("topology_search: dataset must have >= 10 samples");
  if (config.train.validation_fraction <= 0.0)
    throw RangeError("topology_search: needs a validation split to observe overfitting");

  const int n_in = static_cast<int>(data.inputs.front().size());
  const int n_out = static_cast<int>(data.targets.front().size());

  SearchReport report;
  std::vector<Network> trained;
  int consecutive_rises = 0;
  double prev_val = std::numeric_limits<double>::infinity();

  for (int h = 1; h <= max_hidden_per_layer; ++h) {
    Topology topo{{n_in, h, n_out}, config.activation, {}};
    TrainConfig tc = config.train;
    tc.seed = derive_seed(config.train.seed, "topology_search", static_cast<std::uint64_t>(h));
    auto [net, hist] = train(init_network(topo, tc.seed), data, tc);
    const double val = hist.val_mse.empty()
                           ? hist.train_mse.back()
                           : *std::min_element(hist.val_mse.begin(), hist.val_mse.end());
    const double trn = hist.train_mse.empty() ? 0.0 : hist.train_mse.back();
    report.candidates.push_back({h, trn, val});
    trained.push_back(std::move(net));

    if (val > prev_val) {
      if (++consecutive_rises >= config.growth_patience) break;
    } else {
      consecutive_rises = 0;
    }
    prev_val = val;
  }

  // best validation size among everything tried
  std::size_t best = 0;
  for (std::size_t i = 1; i < report.candidates.size(); ++i)
    if (report.candidates[i].val_mse < report.candidates[best].val_mse) best = i;
  report.grown_units = report.candidates[best].hidden_units;
  const Network& full = trained[best];
  const int h = report.grown_units;

  // phase 2: statistical relevance of the hidden layer
  const double n_obs = static_cast<double>(data.size()) * n_out;
  const double p_full = static_cast<double>(h) * (n_in + 1) + n_out * (h + 1);
  const double p_reduced = static_cast<double>(n_out) * (n_in + 1);
  const double resid_df = n_obs - p_full;
  if (resid_df < 1.0)
    throw InferenceError("topology_search: not enough samples to test " + std::to_string(h) +
                         " hidden units");

  const double rss_full = rss_normalized(full, data, full.norm.out_scale);
  const double rss_affine = ols_rss(data, full.norm);
  const double ms_resid = rss_full / resid_df;

  const double joint_num = (rss_affine - rss_full) / (p_full - p_reduced);
  report.joint_f = ms_resid > 0.0 ? std::max(0.0, joint_num) / ms_resid : 0.0;
  report.joint_p =
      report.joint_f > 0.0 ? stats::f_tail(report.joint_f, p_full - p_reduced, resid_df) : 1.0;
  report.joint_significant = report.joint_p < config.alpha;

  int kept = 0;
  for (int unit = 0; unit < h; ++unit) {
    const double rss_cut = rss_normalized(ablate_unit(full, unit), data, full.norm.out_scale);
    const double q = static_cast<double>(n_in + 1 + n_out);
    UnitTest ut;
    ut.unit = unit;
    ut.f_statistic = ms_resid > 0.0 ? std::max(0.0, (rss_cut - rss_full) / q) / ms_resid : 0.0;
    ut.p_value = ut.f_statistic > 0.0 ? stats::f_tail(ut.f_statistic, q, resid_df) : 1.0;
    ut.significant = report.joint_significant && ut.p_value < config.alpha;
    if (ut.significant) ++kept;
    report.unit_tests.push_back(ut);
  }
  report.pruned_units = std::max(1, kept);  // minimal network floor

  Topology selected{{n_in, report.pruned_units, n_out},
                    config.activation,
                    {}};
  return {selected, report};
}

}  // namespace moldloop::nnet
