#include "moldloop/control.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "moldloop/rng.hpp"
#include "moldloop/stats.hpp"

namespace moldloop::control {

namespace {

std::vector<double> quality_vector(const plant::PartQuality& q) {
  return {q.mass, q.length, q.width_a, q.width_b, q.thickness};
}

const plant::PartQuality& pick_quality(const plant::CycleRecord& rec) {
  return rec.measured_quality ? *rec.measured_quality : rec.true_quality;
}

// Machine parameters that take at least two distinct values in the dataset.
std::vector<std::string> varied_params(const std::vector<plant::CycleRecord>& cycles) {
  std::vector<std::string> out;
  for (const char* name : plant::kParamNames) {
    std::set<double> values;
    for (const auto& rec : cycles) values.insert(plant::get_param(rec.params, name));
    if (values.size() >= 2) out.emplace_back(name);
  }
  return out;
}

void check_fit_inputs(const std::vector<plant::CycleRecord>& cycles) {
  if (cycles.size() < 30)
    throw RangeError("model fit: need >= 30 cycles, got " + std::to_string(cycles.size()));
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t c) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

// Multi-restart fit: the best validation (or final training) MSE wins.
// Returns the winning net and the train config it ran with, so the caller
// can reproduce its train/validation split.
std::pair<nnet::Network, nnet::TrainConfig> fit_best(const nnet::Topology& topo,
                                                     const nnet::Dataset& data,
                                                     const FitConfig& config) {
  if (config.restarts < 1) throw RangeError("fit: restarts must be >= 1");
  nnet::Network best;
  nnet::TrainConfig best_tc = config.train;
  double best_score = std::numeric_limits<double>::infinity();
  for (int r = 0; r < config.restarts; ++r) {
    nnet::TrainConfig tc = config.train;
    tc.seed = derive_seed(config.train.seed, "fit.restart", static_cast<std::uint64_t>(r));
    auto [net, hist] = nnet::train(nnet::init_network(topo, tc.seed), data, tc);
    const double score = hist.val_mse.empty()
                             ? (hist.train_mse.empty() ? best_score : hist.train_mse.back())
                             : *std::min_element(hist.val_mse.begin(), hist.val_mse.end());
    if (score < best_score) {
      best_score = score;
      best = std::move(net);
      best_tc = tc;
    }
  }
  return {std::move(best), best_tc};
}

// Held-out Pearson correlation per output on the exact validation split
// train() will use.
std::vector<double> holdout_correlations(const nnet::Network& net, const nnet::Dataset& data,
                                         const nnet::TrainConfig& config) {
  auto [train_idx, val_idx] = nnet::train_val_split(data.size(), config);
  const auto& idx = val_idx.empty() ? train_idx : val_idx;
  std::vector<std::vector<double>> preds, truths;
  for (int i : idx) {
    preds.push_back(nnet::forward(net, data.inputs[static_cast<std::size_t>(i)]));
    truths.push_back(data.targets[static_cast<std::size_t>(i)]);
  }
  std::vector<double> corr;
  for (std::size_t o = 0; o < truths.front().size(); ++o)
    corr.push_back(stats::pearson(column(preds, o), column(truths, o)));
  return corr;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> normalized_error(const plant::PartQuality& measured,
                                     const plant::PartQuality& target,
                                     const QualityTolerance& tol) {
  const auto m = quality_vector(measured);
  const auto t = quality_vector(target);
  std::vector<double> err(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double band = (i == 0 ? tol.mass_rel : tol.dim_rel) * std::fabs(t[i]);
    if (!(band > 0.0)) throw RangeError("normalized_error: zero tolerance band");
    err[i] = (m[i] - t[i]) / band;
  }
  return err;
}

double rms(const std::vector<double>& errors) {
  if (errors.empty()) throw RangeError("rms: empty error vector");
  double s = 0.0;
  for (double e : errors) s += e * e;
  return std::sqrt(s / static_cast<double>(errors.size()));
}

bool conforms(const plant::PartQuality& quality, const plant::PartQuality& target,
              const QualityTolerance& tol) {
  for (double e : normalized_error(quality, target, tol))
    if (std::fabs(e) > 1.0) return false;
  return quality.defect_score < tol.defect_limit;
}

double ControlLog::min_rms() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) m = std::min(m, e.rms);
  return m;
}

const char* action_tag_name(ActionTag tag) {
  switch (tag) {
    case ActionTag::inverse_step: return "inverse_step";
    case ActionTag::regulation: return "regulation";
    case ActionTag::hold: return "hold";
  }
  return "hold";
}

// ---------------------------------------------------------------------------
// model fitting
// ---------------------------------------------------------------------------

std::array<double, 2> ForwardModel::predict(const plant::ProcessParams& params) const {
  std::vector<double> in;
  in.reserve(param_names.size());
  for (const auto& name : param_names) in.push_back(plant::get_param(params, name));
  const auto out = nnet::forward(net, in);
  return {out[0], out[1]};
}

ForwardModel fit_forward(const std::vector<plant::CycleRecord>& cycles, const FitConfig& config) {
  check_fit_inputs(cycles);
  const auto params = varied_params(cycles);
  if (params.empty())
    throw InferenceError("fit_forward: all machine parameters constant over the dataset");

  nnet::Dataset data;
  for (const auto& rec : cycles) {
    std::vector<double> in;
    for (const auto& name : params) in.push_back(plant::get_param(rec.params, name));
    const auto& q = pick_quality(rec);
    data.add(std::move(in), {q.mass, q.length});
  }

  std::vector<int> sizes{static_cast<int>(params.size())};
  for (int h : config.hidden) sizes.push_back(h);
  sizes.push_back(2);
  nnet::Topology topo{sizes, config.activation, {}};

  auto [net, used_tc] = fit_best(topo, data, config);
  ForwardModel model;
  model.holdout_correlation = holdout_correlations(net, data, used_tc);
  model.net = std::move(net);
  model.param_names = params;
  return model;
}

plant::ProcessParams InverseModel::infer(const plant::PartQuality& quality,
                                         const plant::ProcessParams& base,
                                         bool& clamped) const {
  if (!net.norm.fitted) throw StateError("inverse model is untrained");
  const auto out = nnet::forward(net, quality_vector(quality));
  plant::ProcessParams p = base;
  for (std::size_t i = 0; i < param_names.size(); ++i)
    plant::set_param(p, param_names[i], out[i]);
  return plant::clamp_to_ranges(p, plant::MachineRanges{}, clamped);
}

InverseModel fit_inverse(const std::vector<plant::CycleRecord>& cycles, const FitConfig& config) {
  check_fit_inputs(cycles);
  const auto params = varied_params(cycles);
  if (params.empty())
    throw InferenceError("fit_inverse: all machine parameters constant over the dataset");

  nnet::Dataset data;
  for (const auto& rec : cycles) {
    std::vector<double> out;
    for (const auto& name : params) out.push_back(plant::get_param(rec.params, name));
    data.add(quality_vector(pick_quality(rec)), std::move(out));
  }

  std::vector<int> sizes{5};
  for (int h : config.hidden) sizes.push_back(h);
  sizes.push_back(static_cast<int>(params.size()));
  nnet::Topology topo{sizes, config.activation, {}};

  auto [net, used_tc] = fit_best(topo, data, config);
  InverseModel model;
  model.holdout_correlation = holdout_correlations(net, data, used_tc);
  model.net = std::move(net);
  model.param_names = params;
  return model;
}

// ---------------------------------------------------------------------------
// inverse-model adjustment
// ---------------------------------------------------------------------------

ControlAction inverse_adjust(const InverseModel& inverse, const plant::PartQuality& measured,
                             const plant::PartQuality& target,
                             const plant::ProcessParams& current, double gain) {
  if (!(gain > 0.0) || gain > 1.0)
    throw RangeError("inverse_adjust: gain must be in (0, 1]");
  if (!inverse.net.norm.fitted) throw StateError("inverse_adjust: inverse model is untrained");

  bool clamp_implied = false, clamp_target = false;
  const plant::ProcessParams p_implied = inverse.infer(measured, current, clamp_implied);
  const plant::ProcessParams p_target = inverse.infer(target, current, clamp_target);

  ControlAction action;
  action.old_params = current;
  plant::ProcessParams next = current;
  double step_norm = 0.0;
  for (const auto& name : inverse.param_names) {
    const double delta = plant::get_param(p_implied, name) - plant::get_param(p_target, name);
    step_norm += delta * delta;
    plant::set_param(next, name, plant::get_param(current, name) - gain * delta);
  }
  bool clamped = false;
  action.new_params = plant::clamp_to_ranges(next, plant::MachineRanges{}, clamped);
  action.clamped = clamped;
  action.tag = step_norm == 0.0 ? ActionTag::hold : ActionTag::inverse_step;
  return action;
}

Csv control_log_csv(const ControlLog& log) {
  std::vector<std::string> header{"cycle"};
  for (const char* p : plant::kParamNames) header.push_back(std::string("param.") + p);
  for (const char* q : {"mass", "length", "width_a", "width_b", "thickness", "defect_score"})
    header.push_back(std::string("measured.") + q);
  for (const char* q : {"mass", "length", "width_a", "width_b", "thickness"})
    header.push_back(std::string("err.") + q);
  header.insert(header.end(), {"rms", "action", "clamped", "divergence_warning"});

  Csv csv(header);
  for (const auto& e : log.entries) {
    auto& row = csv.new_row();
    row.add(e.cycle_index);
    for (const char* p : plant::kParamNames)
      row.add(plant::get_param(e.action.old_params, p));
    row.add(e.measured.mass).add(e.measured.length).add(e.measured.width_a)
        .add(e.measured.width_b).add(e.measured.thickness).add(e.measured.defect_score);
    for (double err : e.error) row.add(err);
    row.add(e.rms).add(std::string(action_tag_name(e.action.tag))).add(e.action.clamped)
        .add(e.divergence_warning);
  }
  return csv;
}

ControlLog run_inverse_loop(const plant::Plant& press, const InverseModel& inverse,
                            const plant::PartQuality& target,
                            const plant::ProcessParams& start_params,
                            const InverseLoopConfig& config, std::uint64_t seed,
                            const ForwardModel* forward, std::vector<StepTiming>* timings) {
  if (!(config.gain > 0.0) || config.gain > 1.0)
    throw RangeError("run_inverse_loop: gain must be in (0, 1]");
  if (config.max_iters < 0) throw RangeError("run_inverse_loop: max_iters must be >= 0");

  ControlLog log;
  plant::ProcessParams params = start_params;
  int rises = 0;
  double prev_rms = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter <= config.max_iters; ++iter) {
    const auto state = plant::resolve(config.disturbance, iter);
    plant::CycleRecord rec =
        press.run_cycle(params, state, derive_seed(seed, "loop.cycle", iter));
    rec.cycle_index = iter;
    // the plan is re-packed per cycle: the idle window moves with cycle time
    const metrology::ChronogramPlan plan =
        metrology::schedule(config.catalog.all(), rec.cycle_time, config.ejection_offset);
    rec = metrology::measure_cycle(rec, plan, config.catalog,
                                   derive_seed(seed, "loop.measure", iter), config.noise);

    CycleLogEntry entry;
    entry.cycle_index = iter;
    entry.measured = *rec.measured_quality;
    entry.target = target;
    entry.error = normalized_error(entry.measured, target, config.tolerance);
    entry.rms = rms(entry.error);

    if (entry.rms > prev_rms) {
      if (++rises >= 2) {
        entry.divergence_warning = true;
        log.warnings.push_back("rms increased twice consecutively at cycle " +
                               std::to_string(iter));
      }
    } else {
      rises = 0;
    }
    prev_rms = entry.rms;

    const bool stop = entry.rms < config.rms_stop || iter == config.max_iters;
    if (stop) {
      entry.action.cycle_index = iter;
      entry.action.old_params = params;
      entry.action.new_params = params;
      entry.action.tag = ActionTag::hold;
      log.entries.push_back(std::move(entry));
      break;
    }

    const auto t0 = std::chrono::steady_clock::now();
    ControlAction action = inverse_adjust(inverse, entry.measured, target, params, config.gain);
    const auto t1 = std::chrono::steady_clock::now();
    action.cycle_index = iter;
    if (forward) {
      const auto pred = forward->predict(action.new_params);
      plant::PartQuality pq = target;
      pq.mass = pred[0];
      pq.length = pred[1];
      action.predicted = pq;
    }
    const auto t2 = std::chrono::steady_clock::now();
    if (timings)
      timings->push_back({iter, std::chrono::duration<double>(t1 - t0).count(),
                          std::chrono::duration<double>(t2 - t1).count()});
    params = action.new_params;
    entry.action = action;
    log.entries.push_back(std::move(entry));
  }
  return log;
}

// ---------------------------------------------------------------------------
// profile regulation
// ---------------------------------------------------------------------------

ControlLog regulate_profile(const std::vector<double>& reference_pressure,
                            const std::vector<double>& reference_temperature,
                            const plant::Plant& press, int n_cycles,
                            const plant::DisturbanceProfile& disturbance,
                            const RegulateConfig& config, std::uint64_t seed) {
  if (reference_pressure.empty()) throw RangeError("regulate_profile: empty reference");
  if (n_cycles < 1) throw RangeError("regulate_profile: n_cycles must be >= 1");

  plant::ProcessParams params;  // nominal set-points
  const plant::PartQuality target = press.quality_noise_free(params, {});
  const plant::MachineRanges ranges;

  ControlLog log;
  for (int i = 0; i < n_cycles; ++i) {
    const auto state = plant::resolve(disturbance, i);
    plant::CycleRecord rec =
        press.run_cycle(params, state, derive_seed(seed, "regulate.cycle", i));
    rec.cycle_index = i;

    const auto avg_p = metrology::average_trace(rec.trace.mold_pressure, config.window);
    const auto avg_t = metrology::average_trace(rec.trace.mold_temperature, config.window);
    if (avg_p.size() != reference_pressure.size())
      throw ShapeError("regulate_profile: averaged trace length " + std::to_string(avg_p.size()) +
                       " != reference length " + std::to_string(reference_pressure.size()));
    double err_p = 0.0;
    for (std::size_t k = 0; k < avg_p.size(); ++k) err_p += reference_pressure[k] - avg_p[k];
    err_p /= static_cast<double>(avg_p.size());
    double err_t = 0.0;
    const std::size_t nt = std::min(avg_t.size(), reference_temperature.size());
    if (nt > 0) {
      for (std::size_t k = 0; k < nt; ++k) err_t += reference_temperature[k] - avg_t[k];
      err_t /= static_cast<double>(nt);
    }

    double d_hp, d_mt;
    if (config.regulator) {
      const auto delta = nnet::forward(*config.regulator, std::vector<double>{err_p, err_t});
      d_hp = delta[0];
      d_mt = delta[1];
    } else {
      // proportional fallback: the pressure-error integral splits across the
      // two set-points, the temperature error anchors melt temperature
      const auto& g = config.gains;
      d_hp = g.pressure_split * g.pressure_gain * err_p;
      d_mt = -(1.0 - g.pressure_split) * g.temp_from_pressure * err_p + g.temp_gain * err_t;
    }

    CycleLogEntry entry;
    entry.cycle_index = i;
    entry.measured = rec.true_quality;
    entry.target = target;
    entry.error = normalized_error(rec.true_quality, target, config.tolerance);
    entry.rms = rms(entry.error);
    entry.action.cycle_index = i;
    entry.action.old_params = params;

    plant::ProcessParams next = params;
    next.hold_pressure += d_hp;
    next.melt_temp += d_mt;
    bool clamped = false;
    next = plant::clamp_to_ranges(next, ranges, clamped);
    entry.action.new_params = next;
    entry.action.clamped = clamped;
    entry.action.tag =
        (d_hp == 0.0 && d_mt == 0.0) ? ActionTag::hold : ActionTag::regulation;
    log.entries.push_back(std::move(entry));
    params = next;
  }
  return log;
}

// ---------------------------------------------------------------------------
// SPC and the comparison
// ---------------------------------------------------------------------------

SpcChart spc_chart(const std::vector<double>& feature_series, int baseline_n) {
  if (baseline_n < 20) throw RangeError("spc_chart: baseline_n must be >= 20");
  if (static_cast<int>(feature_series.size()) < baseline_n)
    throw RangeError("spc_chart: series shorter than baseline_n");

  SpcChart chart;
  chart.baseline_n = baseline_n;
  double sum = 0.0;
  for (int i = 0; i < baseline_n; ++i) sum += feature_series[static_cast<std::size_t>(i)];
  chart.center = sum / baseline_n;

  double mr = 0.0;
  for (int i = 1; i < baseline_n; ++i)
    mr += std::fabs(feature_series[static_cast<std::size_t>(i)] -
                    feature_series[static_cast<std::size_t>(i) - 1]);
  mr /= static_cast<double>(baseline_n - 1);
  chart.sigma = std::max(mr / 1.128, 1e-12);
  chart.ucl = chart.center + 3.0 * chart.sigma;
  chart.lcl = chart.center - 3.0 * chart.sigma;

  chart.out_of_control.resize(feature_series.size());
  for (std::size_t i = 0; i < feature_series.size(); ++i)
    chart.out_of_control[i] =
        (feature_series[i] > chart.ucl || feature_series[i] < chart.lcl) ? 1 : 0;
  return chart;
}

double Confusion::detection_rate() const {
  const int defects = true_positive + false_negative;
  return defects ? static_cast<double>(true_positive) / defects : 0.0;
}

double Confusion::false_positive_rate() const {
  const int good = false_positive + true_negative;
  return good ? static_cast<double>(false_positive) / good : 0.0;
}

double Confusion::accuracy() const {
  const int n = true_positive + false_positive + true_negative + false_negative;
  return n ? static_cast<double>(true_positive + true_negative) / n : 0.0;
}

double Confusion::f1() const {
  const double denom = 2.0 * true_positive + false_positive + false_negative;
  return denom > 0.0 ? 2.0 * true_positive / denom : 0.0;
}

ComparisonReport classify_parts(const nnet::Network& classifier,
                                const std::vector<plant::CycleRecord>& cycles,
                                const std::vector<int>& labels, int window, int spc_baseline_n,
                                double matched_detection) {
  if (cycles.empty()) throw RangeError("classify_parts: empty stream");
  if (labels.size() != cycles.size())
    throw RangeError("classify_parts: labels must cover every cycle");

  // network score per cycle from the full averaged profile
  std::vector<double> scores;
  std::vector<double> peaks;
  scores.reserve(cycles.size());
  for (const auto& rec : cycles) {
    const auto avg = metrology::average_trace(rec.trace.mold_pressure, window);
    scores.push_back(nnet::forward(classifier, avg)[0]);
    peaks.push_back(*std::max_element(rec.trace.mold_pressure.begin(),
                                      rec.trace.mold_pressure.end()));
  }

  // threshold matched to the requested detection rate: the highest cutoff
  // that still flags enough true defects
  std::vector<double> defect_scores;
  for (std::size_t i = 0; i < cycles.size(); ++i)
    if (labels[i]) defect_scores.push_back(scores[i]);
  ComparisonReport report;
  report.n_cycles = static_cast<int>(cycles.size());
  report.n_defects = static_cast<int>(defect_scores.size());

  double threshold = 0.5;
  if (!defect_scores.empty()) {
    std::sort(defect_scores.begin(), defect_scores.end(), std::greater<>());
    const std::size_t want = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(matched_detection * static_cast<double>(defect_scores.size()))));
    threshold = defect_scores[std::min(defect_scores.size(), want) - 1];
  }
  report.nn_threshold = threshold;

  const SpcChart chart = spc_chart(peaks, spc_baseline_n);
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    const bool defect = labels[i] != 0;
    const bool nn_flag = scores[i] >= threshold;
    const bool spc_flag = chart.out_of_control[i] != 0;
    auto count = [defect](Confusion& c, bool flagged) {
      if (defect && flagged) ++c.true_positive;
      else if (defect) ++c.false_negative;
      else if (flagged) ++c.false_positive;
      else ++c.true_negative;
    };
    count(report.nn, nn_flag);
    count(report.spc, spc_flag);
  }
  return report;
}

}  // namespace moldloop::control
