#include "moldloop/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "moldloop/recurrent.hpp"
#include "moldloop/rng.hpp"
#include "moldloop/stats.hpp"
#include "moldloop/topology_search.hpp"
#include "moldloop/version.hpp"

namespace moldloop::runtime {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

plant::Plant make_plant(const ScenarioConfig& cfg) {
  return plant::Plant(cfg.coefficients, cfg.noise);
}

control::QualityTolerance tolerance_of(const ScenarioConfig& cfg) {
  control::QualityTolerance tol;
  tol.mass_rel = cfg.control.mass_tol_rel;
  tol.dim_rel = cfg.control.dim_tol_rel;
  return tol;
}

nnet::Activation activation_of(const ScenarioConfig& cfg) {
  return cfg.network.activation == "logistic" ? nnet::Activation::logistic
                                              : nnet::Activation::tanh_fn;
}

std::string artifact(const ScenarioConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out_dir) / name).string();
}

void add_artifact(RunReport& report, const Csv& csv, const std::string& path) {
  csv.save(path);
  report.artifact_paths.push_back(path);
}

// Random settings inside the bound factor ranges, per-cycle deterministic.
plant::ProcessParams sample_params(const ScenarioConfig& cfg, std::uint64_t seed, int cycle) {
  Rng rng(derive_seed(seed, "data.params", static_cast<std::uint64_t>(cycle)));
  plant::ProcessParams p = cfg.nominal;
  for (const auto& f : cfg.design.factors) {
    if (!f.param) continue;
    plant::set_param(p, *f.param, rng.uniform(f.low, f.high));
  }
  return p;
}

std::vector<plant::CycleRecord> generate_training_cycles(const ScenarioConfig& cfg,
                                                         const plant::Plant& press, int n,
                                                         std::uint64_t seed) {
  std::vector<plant::CycleRecord> cycles(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const plant::ProcessParams params = sample_params(cfg, seed, i);
    plant::CycleRecord rec =
        press.run_cycle(params, {}, derive_seed(seed, "data.cycle", i));
    rec.cycle_index = i;
    const metrology::ChronogramPlan plan = metrology::schedule(
        cfg.instruments.all(), rec.cycle_time, cfg.budget.ejection_offset);
    rec = metrology::measure_cycle(rec, plan, cfg.instruments,
                                   derive_seed(seed, "data.measure", i), cfg.noise);
    cycles[static_cast<std::size_t>(i)] = std::move(rec);
  }
  return cycles;
}

Csv cycles_csv(const std::vector<plant::CycleRecord>& cycles) {
  std::vector<std::string> header{"cycle"};
  for (const char* p : plant::kParamNames) header.push_back(std::string("param.") + p);
  for (const char* q : {"mass", "length", "width_a", "width_b", "thickness", "defect_score"})
    header.push_back(std::string("true.") + q);
  for (const char* q : {"mass", "length", "width_a", "width_b", "thickness", "defect_score"})
    header.push_back(std::string("measured.") + q);
  Csv csv(header);
  for (const auto& rec : cycles) {
    auto& row = csv.new_row();
    row.add(rec.cycle_index);
    for (const char* p : plant::kParamNames) row.add(plant::get_param(rec.params, p));
    const auto add_quality = [&row](const plant::PartQuality& q) {
      row.add(q.mass).add(q.length).add(q.width_a).add(q.width_b).add(q.thickness)
          .add(q.defect_score);
    };
    add_quality(rec.true_quality);
    add_quality(rec.measured_quality ? *rec.measured_quality : plant::PartQuality{});
  }
  return csv;
}

double measured_feature(const plant::CycleRecord& rec, const std::string& name) {
  const plant::PartQuality& q = rec.measured_quality ? *rec.measured_quality : rec.true_quality;
  if (name == "mass") return q.mass;
  if (name == "length") return q.length;
  if (name == "width_a") return q.width_a;
  if (name == "width_b") return q.width_b;
  if (name == "thickness") return q.thickness;
  if (name == "defect_score") return q.defect_score;
  if (name == "peak_pressure")
    return *std::max_element(rec.trace.mold_pressure.begin(), rec.trace.mold_pressure.end());
  throw ConfigError("unknown response feature '" + name + "'");
}

json quality_json(const plant::PartQuality& q) {
  return json{{"mass", q.mass},           {"length", q.length},       {"width_a", q.width_a},
              {"width_b", q.width_b},     {"thickness", q.thickness}, {"defect_score", q.defect_score}};
}

// ---------------------------------------------------------------------------
// scenarios
// ---------------------------------------------------------------------------

json run_screen(const ScenarioConfig& cfg, RunReport& report) {
  const plant::Plant press = make_plant(cfg);
  doe::DesignMatrix design = cfg.design.type == "factorial"
                                 ? doe::factorial_design(cfg.design.n_factors, cfg.design.levels)
                                 : doe::pb_design(cfg.design.n_factors);
  doe::bind_factors(design, cfg.design.factors);
  const auto decoded = doe::decode(design, cfg.design.factors, cfg.nominal);

  std::vector<double> responses(static_cast<std::size_t>(design.n_runs));
#pragma omp parallel for schedule(static)
  for (int r = 0; r < design.n_runs; ++r) {
    plant::CycleRecord rec = press.run_cycle(decoded[static_cast<std::size_t>(r)], {},
                                             derive_seed(cfg.seed, "screen.cycle", r));
    rec.cycle_index = r;
    const metrology::ChronogramPlan plan = metrology::schedule(
        cfg.instruments.all(), rec.cycle_time, cfg.budget.ejection_offset);
    rec = metrology::measure_cycle(rec, plan, cfg.instruments,
                                   derive_seed(cfg.seed, "screen.measure", r), cfg.noise);
    responses[static_cast<std::size_t>(r)] = measured_feature(rec, cfg.design.response);
  }

  const doe::ScreeningReport screening =
      doe::fisher_screen(design, responses, cfg.design.alpha);

  add_artifact(report, doe::design_csv(design, cfg.design.factors, decoded, responses),
               artifact(cfg, "design.csv"));
  add_artifact(report, doe::report_csv(screening), artifact(cfg, "screening.csv"));

  json factors = json::array();
  std::set<std::string> flagged;
  for (const auto& f : screening.factors) {
    factors.push_back(json{{"name", f.name},
                           {"effect", f.effect},
                           {"sum_of_squares", f.sum_of_squares},
                           {"f_statistic", f.f_statistic},
                           {"p_value", f.p_value},
                           {"significant", f.significant}});
    if (f.significant) flagged.insert(f.name);
  }
  if (cfg.expectations.significant) {
    const std::set<std::string> expected(cfg.expectations.significant->begin(),
                                         cfg.expectations.significant->end());
    if (expected != flagged) report.expectations_met = false;
  }
  return json{{"n_runs", design.n_runs},
              {"response", cfg.design.response},
              {"alpha", screening.alpha},
              {"error_df", screening.error_df},
              {"error_mean_square", screening.error_mean_square},
              {"factors", factors}};
}

control::FitConfig fit_config_of(const ScenarioConfig& cfg) {
  control::FitConfig fit;
  fit.hidden = cfg.network.hidden;
  fit.activation = activation_of(cfg);
  fit.train = cfg.network.train;
  fit.train.seed = derive_seed(cfg.seed, "nnet");
  return fit;
}

json run_train_forward(const ScenarioConfig& cfg, RunReport& report) {
  const plant::Plant press = make_plant(cfg);
  const int n = cfg.n_cycles > 0 ? cfg.n_cycles : 162;
  const auto cycles = generate_training_cycles(cfg, press, n, derive_seed(cfg.seed, "data"));
  const control::ForwardModel model = control::fit_forward(cycles, fit_config_of(cfg));

  add_artifact(report, cycles_csv(cycles), artifact(cfg, "cycles.csv"));
  const std::string model_path = artifact(cfg, "forward_model.json");
  nnet::save_network(model.net, model_path);
  report.artifact_paths.push_back(model_path);

  json results{{"n_cycles", n},
               {"inputs", model.param_names},
               {"holdout_correlation",
                {{"mass", model.holdout_correlation[0]},
                 {"length", model.holdout_correlation[1]}}}};
  if (cfg.expectations.min_mass_correlation &&
      model.holdout_correlation[0] < *cfg.expectations.min_mass_correlation)
    report.expectations_met = false;
  if (cfg.expectations.min_length_correlation &&
      model.holdout_correlation[1] < *cfg.expectations.min_length_correlation)
    report.expectations_met = false;
  return results;
}

json run_train_inverse(const ScenarioConfig& cfg, RunReport& report) {
  const plant::Plant press = make_plant(cfg);
  const int n = cfg.n_cycles > 0 ? cfg.n_cycles : 162;
  const auto cycles = generate_training_cycles(cfg, press, n, derive_seed(cfg.seed, "data"));
  const control::InverseModel model = control::fit_inverse(cycles, fit_config_of(cfg));

  add_artifact(report, cycles_csv(cycles), artifact(cfg, "cycles.csv"));
  const std::string model_path = artifact(cfg, "inverse_model.json");
  nnet::save_network(model.net, model_path);
  report.artifact_paths.push_back(model_path);

  json corr = json::object();
  for (std::size_t i = 0; i < model.param_names.size(); ++i)
    corr[model.param_names[i]] = model.holdout_correlation[i];
  return json{{"n_cycles", n}, {"outputs", model.param_names}, {"holdout_correlation", corr}};
}

json run_tune_topology(const ScenarioConfig& cfg, RunReport& report) {
  const plant::Plant press = make_plant(cfg);
  const int n = cfg.n_cycles > 0 ? cfg.n_cycles : 162;
  const auto cycles = generate_training_cycles(cfg, press, n, derive_seed(cfg.seed, "data"));

  nnet::Dataset data;
  for (const auto& rec : cycles) {
    std::vector<double> in;
    for (const auto& f : cfg.design.factors)
      if (f.param) in.push_back(plant::get_param(rec.params, *f.param));
    const auto& q = rec.measured_quality ? *rec.measured_quality : rec.true_quality;
    data.add(std::move(in), {q.mass, q.length});
  }

  nnet::SearchConfig sc;
  sc.train = cfg.network.train;
  sc.train.seed = derive_seed(cfg.seed, "nnet");
  sc.activation = activation_of(cfg);
  sc.growth_patience = cfg.tune.growth_patience;
  sc.alpha = cfg.tune.alpha;
  auto [topology, search] = nnet::topology_search(data, cfg.tune.max_hidden, sc);

  Csv candidates({"hidden_units", "train_mse", "val_mse"});
  for (const auto& c : search.candidates)
    candidates.new_row().add(c.hidden_units).add(c.train_mse).add(c.val_mse);
  add_artifact(report, candidates, artifact(cfg, "candidates.csv"));

  Csv units({"unit", "f_statistic", "p_value", "significant"});
  for (const auto& u : search.unit_tests)
    units.new_row().add(u.unit).add(u.f_statistic).add(u.p_value).add(u.significant);
  add_artifact(report, units, artifact(cfg, "unit_tests.csv"));

  return json{{"grown_units", search.grown_units},
              {"pruned_units", search.pruned_units},
              {"joint_f", search.joint_f},
              {"joint_p", search.joint_p},
              {"joint_significant", search.joint_significant},
              {"selected_layers", topology.layer_sizes}};
}

json budget_json(const BudgetResult& budget) {
  double worst_infer = 0.0, worst_adjust = 0.0, worst_total = 0.0;
  for (const auto& c : budget.cycles) {
    worst_infer = std::max(worst_infer, c.infer_s);
    worst_adjust = std::max(worst_adjust, c.adjust_s);
    worst_total = std::max(worst_total, c.measure_plan_s + c.infer_s + c.adjust_s);
  }
  return json{{"pass", budget.pass},
              {"failures", budget.failures},
              {"idle_window_s", budget.idle_window_s},
              {"worst_infer_s", worst_infer},
              {"worst_adjust_s", worst_adjust},
              {"worst_total_s", worst_total},
              {"n_cycles", budget.cycles.size()}};
}

json run_closed_loop(const ScenarioConfig& cfg, RunReport& report) {
  const plant::Plant press = make_plant(cfg);
  const int n_train = 162;
  const auto cycles =
      generate_training_cycles(cfg, press, n_train, derive_seed(cfg.seed, "data"));
  const control::InverseModel inverse = control::fit_inverse(cycles, fit_config_of(cfg));

  plant::ProcessParams start = cfg.nominal;
  if (cfg.control.start.empty()) {
    // the declared perturbed start of the cycle-to-cycle study
    start.hold_pressure -= 40.0;
    start.melt_temp += 10.0;
  } else {
    for (const auto& [name, value] : cfg.control.start) plant::set_param(start, name, value);
  }
  plant::validate(start);

  const plant::PartQuality target = press.quality_noise_free(cfg.nominal, {});

  control::InverseLoopConfig loop;
  loop.max_iters = cfg.control.max_iters;
  loop.gain = cfg.control.gain;
  loop.rms_stop = cfg.control.rms_stop;
  loop.tolerance = tolerance_of(cfg);
  loop.catalog = cfg.instruments;
  loop.noise = cfg.noise;
  loop.ejection_offset = cfg.budget.ejection_offset;
  loop.disturbance = cfg.disturbance;

  std::vector<control::StepTiming> steps;
  const control::ControlLog log = control::run_inverse_loop(
      press, inverse, target, start, loop, derive_seed(cfg.seed, "loop"), nullptr, &steps);

  const metrology::ChronogramPlan plan = metrology::schedule(
      cfg.instruments.all(), press.cycle_time(cfg.nominal), cfg.budget.ejection_offset);
  std::vector<CycleTiming> timings;
  for (const auto& s : steps)
    timings.push_back({s.cycle_index, plan.total_duration(), s.infer_s, s.adjust_s});
  const BudgetResult budget =
      check_budget(timings, press.cycle_time(cfg.nominal), cfg.budget.ejection_offset);

  add_artifact(report, control::control_log_csv(log), artifact(cfg, "control_log.csv"));
  add_artifact(report, cycles_csv(cycles), artifact(cfg, "cycles.csv"));
  const std::string model_path = artifact(cfg, "inverse_model.json");
  nnet::save_network(inverse.net, model_path);
  report.artifact_paths.push_back(model_path);

  json rms_traj = json::array();
  for (const auto& e : log.entries) rms_traj.push_back(e.rms);
  if (cfg.expectations.max_rms && log.min_rms() > *cfg.expectations.max_rms)
    report.expectations_met = false;
  if (!budget.pass) report.expectations_met = false;

  return json{{"start",
               {{"hold_pressure", start.hold_pressure},
                {"melt_temp", start.melt_temp},
                {"inject_speed", start.inject_speed}}},
              {"target", quality_json(target)},
              {"rms_trajectory", rms_traj},
              {"min_rms", log.min_rms()},
              {"final_rms", log.final_rms()},
              {"iterations", log.entries.empty() ? 0 : log.entries.back().cycle_index},
              {"warnings", log.warnings},
              {"budget", budget_json(budget)}};
}

json run_regulate(const ScenarioConfig& cfg, RunReport& report) {
  plant::Plant press = make_plant(cfg);
  const int n = cfg.n_cycles > 0 ? cfg.n_cycles : 40;

  // reference profile from an accepted cycle: nominal settings, noise off
  plant::Plant clean = press;
  clean.set_noise(false);
  const plant::CycleRecord ref_cycle =
      clean.run_cycle(cfg.nominal, {}, derive_seed(cfg.seed, "regulate.ref"));
  const auto ref_p = metrology::average_trace(ref_cycle.trace.mold_pressure, cfg.control.window);
  const auto ref_t =
      metrology::average_trace(ref_cycle.trace.mold_temperature, cfg.control.window);

  // open loop under the same disturbance
  const auto open_records = press.run_sequence(cfg.nominal, n, cfg.disturbance, nullptr,
                                               derive_seed(cfg.seed, "regulate.open"));

  control::RegulateConfig rc;
  rc.window = cfg.control.window;
  rc.gains = cfg.control.gains;
  rc.tolerance = tolerance_of(cfg);
  rc.noise = cfg.noise;
  const control::ControlLog log =
      control::regulate_profile(ref_p, ref_t, press, n, cfg.disturbance, rc,
                                derive_seed(cfg.seed, "regulate.loop"));

  const double m0 = press.coefficients().nominal_mass;
  const double open_dev_pct =
      100.0 * (open_records.back().true_quality.mass - m0) / m0;
  const double reg_dev_pct = 100.0 * (log.entries.back().measured.mass - m0) / m0;
  const double rejection = std::fabs(reg_dev_pct) > 0.0
                               ? std::fabs(open_dev_pct) / std::fabs(reg_dev_pct)
                               : std::numeric_limits<double>::infinity();

  Csv open_csv({"cycle", "mass", "length", "melt_temp_offset"});
  for (const auto& rec : open_records)
    open_csv.new_row()
        .add(rec.cycle_index)
        .add(rec.true_quality.mass)
        .add(rec.true_quality.length)
        .add(rec.disturbance.melt_temp_offset);
  add_artifact(report, open_csv, artifact(cfg, "open_loop.csv"));
  add_artifact(report, control::control_log_csv(log), artifact(cfg, "regulated.csv"));

  if (cfg.expectations.max_mass_deviation_pct &&
      std::fabs(reg_dev_pct) > *cfg.expectations.max_mass_deviation_pct)
    report.expectations_met = false;
  if (cfg.expectations.min_rejection_ratio && rejection < *cfg.expectations.min_rejection_ratio)
    report.expectations_met = false;

  return json{{"n_cycles", n},
              {"open_loop_mass_deviation_pct", open_dev_pct},
              {"regulated_mass_deviation_pct", reg_dev_pct},
              {"rejection_ratio", rejection},
              {"final_set_points",
               {{"hold_pressure", log.entries.back().action.new_params.hold_pressure},
                {"melt_temp", log.entries.back().action.new_params.melt_temp}}}};
}

// Hidden-defect stream: intermittent check-ring leak episodes that leave the
// peak pressure untouched. Returns per-cycle leak magnitudes.
std::vector<double> leak_profile(int n, std::uint64_t seed) {
  std::vector<double> leak(static_cast<std::size_t>(n), 0.0);
  Rng rng(derive_seed(seed, "spc.episodes"));
  int pos = 0;
  while (pos < n) {
    pos += 80 + static_cast<int>(rng.below(80));  // clean gap
    const int len = 30 + static_cast<int>(rng.below(30));
    const double mag = 0.35 + 0.55 * rng.uniform();
    for (int k = 0; k < len && pos + k < n; ++k) {
      double ramp = 1.0;
      if (k < 5) ramp = (k + 1) / 5.0;
      if (len - 1 - k < 5) ramp = std::min(ramp, (len - k) / 5.0);
      leak[static_cast<std::size_t>(pos + k)] = mag * ramp;
    }
    pos += len;
  }
  return leak;
}

struct Stream {
  std::vector<plant::CycleRecord> records;
  std::vector<int> labels;  // 1 = defect
};

Stream make_defect_stream(const ScenarioConfig& cfg, const plant::Plant& press, int n,
                          std::uint64_t seed) {
  const auto leak = leak_profile(n, seed);
  const plant::PartQuality target = press.quality_noise_free(cfg.nominal, {});
  const control::QualityTolerance tol = tolerance_of(cfg);

  Stream stream;
  stream.records.resize(static_cast<std::size_t>(n));
  stream.labels.resize(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    plant::DisturbanceState state;
    state.checkring_leak = leak[static_cast<std::size_t>(i)];
    plant::CycleRecord rec =
        press.run_cycle(cfg.nominal, state, derive_seed(seed, "spc.cycle", i));
    rec.cycle_index = i;
    stream.labels[static_cast<std::size_t>(i)] =
        control::conforms(rec.true_quality, target, tol) ? 0 : 1;
    stream.records[static_cast<std::size_t>(i)] = std::move(rec);
  }
  return stream;
}

json confusion_json(const control::Confusion& c) {
  return json{{"true_positive", c.true_positive},
              {"false_positive", c.false_positive},
              {"true_negative", c.true_negative},
              {"false_negative", c.false_negative},
              {"detection_rate", c.detection_rate()},
              {"false_positive_rate", c.false_positive_rate()},
              {"accuracy", c.accuracy()},
              {"f1", c.f1()}};
}

json run_spc_compare(const ScenarioConfig& cfg, RunReport& report) {
  const plant::Plant press = make_plant(cfg);
  const int n = cfg.n_cycles > 0 ? cfg.n_cycles : 2000;

  // training stream -> averaged-profile classifier
  const Stream train_stream =
      make_defect_stream(cfg, press, n, derive_seed(cfg.seed, "spc.train"));
  nnet::Dataset data;
  for (std::size_t i = 0; i < train_stream.records.size(); ++i) {
    data.add(metrology::average_trace(train_stream.records[i].trace.mold_pressure,
                                      cfg.control.window),
             {static_cast<double>(train_stream.labels[i])});
  }
  const int n_in = static_cast<int>(data.inputs.front().size());
  nnet::Topology topo{{n_in, 16, 1}, activation_of(cfg), {}};
  nnet::TrainConfig tc = cfg.network.train;
  tc.seed = derive_seed(cfg.seed, "nnet");
  auto [classifier, hist] = nnet::train(nnet::init_network(topo, tc.seed), data, tc);

  // evaluation stream, fresh randomness
  const Stream eval_stream =
      make_defect_stream(cfg, press, n, derive_seed(cfg.seed, "spc.eval"));
  const control::ComparisonReport cmp =
      control::classify_parts(classifier, eval_stream.records, eval_stream.labels,
                              cfg.control.window, cfg.control.baseline_n, 0.8);

  Csv stream_csv({"cycle", "label", "leak", "peak_pressure", "nn_score"});
  for (std::size_t i = 0; i < eval_stream.records.size(); ++i) {
    const auto& rec = eval_stream.records[i];
    const auto avg = metrology::average_trace(rec.trace.mold_pressure, cfg.control.window);
    stream_csv.new_row()
        .add(rec.cycle_index)
        .add(eval_stream.labels[i])
        .add(rec.disturbance.checkring_leak)
        .add(*std::max_element(rec.trace.mold_pressure.begin(), rec.trace.mold_pressure.end()))
        .add(nnet::forward(classifier, avg)[0]);
  }
  add_artifact(report, stream_csv, artifact(cfg, "comparison.csv"));
  const std::string model_path = artifact(cfg, "classifier.json");
  nnet::save_network(classifier, model_path);
  report.artifact_paths.push_back(model_path);

  const double nn_fp = cmp.nn.false_positive_rate();
  const double spc_fp = cmp.spc.false_positive_rate();
  if (cfg.expectations.min_detection &&
      cmp.nn.detection_rate() < *cfg.expectations.min_detection)
    report.expectations_met = false;
  if (cfg.expectations.max_fp_ratio && nn_fp > *cfg.expectations.max_fp_ratio * spc_fp)
    report.expectations_met = false;

  return json{{"n_cycles", n},
              {"n_defects", cmp.n_defects},
              {"nn_threshold", cmp.nn_threshold},
              {"nn", confusion_json(cmp.nn)},
              {"spc", confusion_json(cmp.spc)},
              {"fp_ratio", spc_fp > 0.0 ? nn_fp / spc_fp
                                        : (nn_fp > 0.0 ? std::numeric_limits<double>::infinity()
                                                       : 0.0)}};
}

}  // namespace

BudgetResult check_budget(const std::vector<CycleTiming>& timings, double cycle_time,
                          double ejection_offset) {
  if (!(cycle_time > ejection_offset) || ejection_offset < 0.0)
    throw RangeError("check_budget: need cycle_time > ejection_offset >= 0");
  BudgetResult result;
  result.idle_window_s = cycle_time - ejection_offset;
  result.cycles = timings;
  for (const auto& t : timings) {
    if (t.measure_plan_s + t.infer_s + t.adjust_s > result.idle_window_s) ++result.failures;
  }
  result.pass = result.failures == 0;
  return result;
}

void RunReport::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  f << document.dump(2) << '\n';
}

RunReport run_scenario(const ScenarioConfig& config) {
  fs::create_directories(config.out_dir);
  RunReport report;
  const auto wall0 = std::chrono::steady_clock::now();

  json results;
  switch (config.kind) {
    case ScenarioKind::screen: results = run_screen(config, report); break;
    case ScenarioKind::train_forward: results = run_train_forward(config, report); break;
    case ScenarioKind::train_inverse: results = run_train_inverse(config, report); break;
    case ScenarioKind::tune_topology: results = run_tune_topology(config, report); break;
    case ScenarioKind::closed_loop: results = run_closed_loop(config, report); break;
    case ScenarioKind::regulate: results = run_regulate(config, report); break;
    case ScenarioKind::spc_compare: results = run_spc_compare(config, report); break;
  }

  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();

  report.document = json{{"schema_version", kReportSchemaVersion},
                         {"toolkit_version", kVersion},
                         {"scenario", scenario_name(config.kind)},
                         {"seed", config.seed},
                         {"config", config.echo()},
                         {"results", results},
                         {"artifacts", report.artifact_paths},
                         {"expectations_met", report.expectations_met},
                         {"wall_time_s", wall_s}};

  const std::string report_path = (fs::path(config.out_dir) / "report.json").string();
  report.save(report_path);
  report.artifact_paths.push_back(report_path);
  return report;
}

std::string render_report(const nlohmann::json& document) {
  std::ostringstream os;
  os << "scenario:   " << document.value("scenario", std::string("?")) << "\n";
  os << "seed:       " << document.value("seed", 0ULL) << "\n";
  os << "toolkit:    " << document.value("toolkit_version", std::string("?")) << "\n";
  if (document.contains("results")) os << "results:\n" << document["results"].dump(2) << "\n";
  if (document.contains("artifacts")) {
    os << "artifacts:\n";
    for (const auto& a : document["artifacts"]) os << "  " << a.get<std::string>() << "\n";
  }
  os << "expectations_met: " << (document.value("expectations_met", true) ? "yes" : "no") << "\n";
  return os.str();
}

}  // namespace moldloop::runtime
