#include "moldloop/config.hpp"

#include <fstream>
#include <sstream>

namespace moldloop::runtime {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw ConfigError(origin + ": " + what);
}

void line_column(const std::string& text, std::size_t byte, int& line, int& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

void require_keys(const json& obj, const std::string& origin, const std::string& section,
                  std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) { known = true; break; }
    if (!known)
      fail(origin, "unknown key '" + key + "' in " + section);
  }
}

double num(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return obj[key].get<double>();
}

int integer(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    throw ConfigError(std::string("'") + key + "' must be an integer");
  return obj[key].get<int>();
}

bool boolean(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) throw ConfigError(std::string("'") + key + "' must be a boolean");
  return obj[key].get<bool>();
}

std::string text(const json& obj, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
  return obj[key].get<std::string>();
}

void parse_coefficients(const json& obj, const std::string& origin, plant::PlantCoefficients& c) {
  struct Field { const char* name; double* slot; };
  const Field fields[] = {
      {"nominal_mass", &c.nominal_mass},
      {"nominal_length", &c.nominal_length},
      {"nominal_width_a", &c.nominal_width_a},
      {"nominal_width_b", &c.nominal_width_b},
      {"nominal_thickness", &c.nominal_thickness},
      {"nominal_shrinkage", &c.nominal_shrinkage},
      {"mass_pressure_gain", &c.mass_pressure_gain},
      {"mass_temp_slope", &c.mass_temp_slope},
      {"mass_interaction", &c.mass_interaction},
      {"mass_temp_curvature", &c.mass_temp_curvature},
      {"mass_viscosity_gain", &c.mass_viscosity_gain},
      {"mass_leak_gain", &c.mass_leak_gain},
      {"shrink_pressure_gain", &c.shrink_pressure_gain},
      {"shrink_temp_gain", &c.shrink_temp_gain},
      {"shrink_viscosity_gain", &c.shrink_viscosity_gain},
      {"shrink_leak_gain", &c.shrink_leak_gain},
      {"defect_temp_weight", &c.defect_temp_weight},
      {"defect_temp_margin", &c.defect_temp_margin},
      {"defect_speed_weight", &c.defect_speed_weight},
      {"defect_speed_floor", &c.defect_speed_floor},
      {"peak_pressure_gain", &c.peak_pressure_gain},
      {"peak_viscous_gain", &c.peak_viscous_gain},
      {"holding_decay_per_s", &c.holding_decay_per_s},
      {"leak_decay_per_s", &c.leak_decay_per_s},
      {"cooling_tau_s", &c.cooling_tau_s},
      {"trace_noise_sigma", &c.trace_noise_sigma},
      {"mold_temp_rise", &c.mold_temp_rise},
      {"mold_temp_tau_s", &c.mold_temp_tau_s},
      {"mass_jitter_sigma", &c.mass_jitter_sigma},
      {"length_jitter_sigma", &c.length_jitter_sigma},
      {"fill_volume_mm", &c.fill_volume_mm},
      {"mold_open_time_s", &c.mold_open_time_s},
      {"cycle_overhead_s", &c.cycle_overhead_s},
      {"post_shrink_total", &c.post_shrink_total},
      {"post_shrink_tau_s", &c.post_shrink_tau_s},
  };
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const auto& f : fields)
      if (key == f.name) {
        if (!value.is_number()) fail(origin, "plant.coefficients." + key + " must be a number");
        *f.slot = value.get<double>();
        known = true;
        break;
      }
    if (!known) fail(origin, "unknown key '" + key + "' in plant.coefficients");
  }
}

void parse_params(const json& obj, const std::string& origin, const std::string& section,
                  plant::ProcessParams& p) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* name : plant::kParamNames)
      if (key == name) { known = true; break; }
    if (!known) fail(origin, "unknown key '" + key + "' in " + section);
    if (!value.is_number()) fail(origin, section + "." + key + " must be a number");
    plant::set_param(p, key, value.get<double>());
  }
}

void parse_instrument(const json& obj, const std::string& origin, const std::string& section,
                      metrology::Instrument& inst) {
  require_keys(obj, origin, section, {"name", "resolution", "noise_sigma", "duration"});
  inst.name = text(obj, "name", inst.name);
  inst.resolution = num(obj, "resolution", inst.resolution);
  inst.noise_sigma = num(obj, "noise_sigma", inst.noise_sigma);
  inst.duration = num(obj, "duration", inst.duration);
}

doe::FactorBinding parse_factor(const json& obj, const std::string& origin, int index) {
  const std::string section = "design.factors[" + std::to_string(index) + "]";
  require_keys(obj, origin, section, {"name", "column", "low", "high", "param"});
  doe::FactorBinding b;
  b.name = text(obj, "name", "");
  if (b.name.empty()) fail(origin, section + " needs a name");
  b.column = integer(obj, "column", index);
  if (!obj.contains("low") || !obj.contains("high"))
    fail(origin, section + " needs low and high");
  b.low = num(obj, "low", 0.0);
  b.high = num(obj, "high", 0.0);
  if (obj.contains("param")) {
    const std::string p = text(obj, "param", "");
    bool known = false;
    for (const char* name : plant::kParamNames)
      if (p == name) { known = true; break; }
    if (!known) fail(origin, section + ".param: unknown machine parameter '" + p + "'");
    b.param = p;
  }
  return b;
}

plant::DisturbanceProfile parse_disturbance(const json& obj, const std::string& origin) {
  require_keys(obj, origin, "disturbance", {"kind", "target", "magnitude", "onset_cycle", "slope"});
  plant::DisturbanceProfile d;
  const std::string kind = text(obj, "kind", "none");
  if (kind == "none") d.kind = plant::DisturbanceKind::none;
  else if (kind == "step") d.kind = plant::DisturbanceKind::step;
  else if (kind == "ramp") d.kind = plant::DisturbanceKind::ramp;
  else if (kind == "batch-change") d.kind = plant::DisturbanceKind::batch_change;
  else fail(origin, "disturbance.kind: unknown kind '" + kind + "'");
  const std::string target = text(obj, "target", "melt_temp_offset");
  if (target == "melt_temp_offset") d.target = plant::DisturbanceTarget::melt_temp_offset;
  else if (target == "viscosity_factor") d.target = plant::DisturbanceTarget::viscosity_factor;
  else if (target == "checkring_leak") d.target = plant::DisturbanceTarget::checkring_leak;
  else fail(origin, "disturbance.target: unknown target '" + target + "'");
  d.magnitude = num(obj, "magnitude", 0.0);
  d.onset_cycle = integer(obj, "onset_cycle", 0);
  d.slope = num(obj, "slope", 0.0);
  return d;
}

}  // namespace

const char* scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::screen: return "screen";
    case ScenarioKind::train_forward: return "train-forward";
    case ScenarioKind::train_inverse: return "train-inverse";
    case ScenarioKind::tune_topology: return "tune-topology";
    case ScenarioKind::closed_loop: return "closed-loop";
    case ScenarioKind::regulate: return "regulate";
    case ScenarioKind::spc_compare: return "spc-compare";
  }
  return "closed-loop";
}

ScenarioKind scenario_from_name(const std::string& name) {
  for (ScenarioKind k :
       {ScenarioKind::screen, ScenarioKind::train_forward, ScenarioKind::train_inverse,
        ScenarioKind::tune_topology, ScenarioKind::closed_loop, ScenarioKind::regulate,
        ScenarioKind::spc_compare})
    if (name == scenario_name(k)) return k;
  throw ConfigError("unknown scenario kind '" + name + "'");
}

bool Expectations::any() const {
  return significant || max_rms || min_mass_correlation || min_length_correlation ||
         max_mass_deviation_pct || min_rejection_ratio || max_fp_ratio || min_detection;
}

ScenarioConfig config_from_json_text(const std::string& content, const std::string& origin) {
  json root;
  try {
    root = json::parse(content);
  } catch (const json::parse_error& e) {
    int line = 0, col = 0;
    line_column(content, e.byte > 0 ? e.byte - 1 : 0, line, col);
    throw ConfigError(origin + ": parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
  if (!root.is_object()) fail(origin, "top level must be an object");

  require_keys(root, origin, "top level",
               {"scenario", "seed", "n_cycles", "out_dir", "noise", "plant", "instruments",
                "design", "network", "tune", "disturbance", "control", "budget", "expectations"});

  ScenarioConfig cfg;
  if (!root.contains("scenario")) fail(origin, "missing 'scenario'");
  cfg.kind = scenario_from_name(root["scenario"].get<std::string>());

  if (!root.contains("seed"))
    fail(origin, "missing 'seed' (seeds are mandatory; there is no wall-clock default)");
  if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer())
    fail(origin, "'seed' must be an unsigned integer");
  cfg.seed = root["seed"].get<std::uint64_t>();

  cfg.n_cycles = integer(root, "n_cycles", 0);
  cfg.out_dir = text(root, "out_dir", "out");
  cfg.noise = boolean(root, "noise", true);

  if (root.contains("plant")) {
    require_keys(root["plant"], origin, "plant", {"coefficients", "nominal"});
    if (root["plant"].contains("coefficients"))
      parse_coefficients(root["plant"]["coefficients"], origin, cfg.coefficients);
    if (root["plant"].contains("nominal"))
      parse_params(root["plant"]["nominal"], origin, "plant.nominal", cfg.nominal);
  }

  if (root.contains("instruments")) {
    const auto& ji = root["instruments"];
    require_keys(ji, origin, "instruments", {"scale", "scanner", "thermal", "defect_noise_sigma"});
    if (ji.contains("scale")) parse_instrument(ji["scale"], origin, "instruments.scale", cfg.instruments.scale);
    if (ji.contains("scanner"))
      parse_instrument(ji["scanner"], origin, "instruments.scanner", cfg.instruments.scanner);
    if (ji.contains("thermal"))
      parse_instrument(ji["thermal"], origin, "instruments.thermal", cfg.instruments.thermal);
    cfg.instruments.defect_noise_sigma =
        num(ji, "defect_noise_sigma", cfg.instruments.defect_noise_sigma);
  }

  if (root.contains("design")) {
    const auto& jd = root["design"];
    require_keys(jd, origin, "design",
                 {"type", "n_factors", "levels", "alpha", "response", "factors"});
    cfg.design.type = text(jd, "type", cfg.design.type);
    if (cfg.design.type != "plackett-burman" && cfg.design.type != "factorial")
      fail(origin, "design.type must be 'plackett-burman' or 'factorial'");
    cfg.design.n_factors = integer(jd, "n_factors", cfg.design.n_factors);
    cfg.design.levels = integer(jd, "levels", cfg.design.levels);
    cfg.design.alpha = num(jd, "alpha", cfg.design.alpha);
    cfg.design.response = text(jd, "response", cfg.design.response);
    if (jd.contains("factors")) {
      if (!jd["factors"].is_array()) fail(origin, "design.factors must be an array");
      cfg.design.factors.clear();
      int i = 0;
      for (const auto& jf : jd["factors"]) cfg.design.factors.push_back(parse_factor(jf, origin, i++));
    }
  }
  if (cfg.design.factors.empty()) {
    // the three plant-active factors on the default screening ranges
    cfg.design.factors = {
        {"hold_pressure", 0, 360.0, 440.0, "hold_pressure"},
        {"melt_temp", 1, 210.0, 250.0, "melt_temp"},
        {"inject_speed", 2, 30.0, 70.0, "inject_speed"},
    };
  }

  if (root.contains("network")) {
    const auto& jn = root["network"];
    require_keys(jn, origin, "network", {"hidden", "activation", "train"});
    if (jn.contains("hidden")) {
      if (!jn["hidden"].is_array()) fail(origin, "network.hidden must be an array of sizes");
      cfg.network.hidden.clear();
      for (const auto& h : jn["hidden"]) cfg.network.hidden.push_back(h.get<int>());
    }
    cfg.network.activation = text(jn, "activation", cfg.network.activation);
    if (cfg.network.activation != "tanh" && cfg.network.activation != "logistic")
      fail(origin, "network.activation must be 'tanh' or 'logistic'");
    if (jn.contains("train")) {
      const auto& jt = jn["train"];
      require_keys(jt, origin, "network.train",
                   {"learning_rate", "momentum", "epochs", "batch_size", "validation_fraction",
                    "patience", "shuffle"});
      auto& t = cfg.network.train;
      t.learning_rate = num(jt, "learning_rate", t.learning_rate);
      t.momentum = num(jt, "momentum", t.momentum);
      t.epochs = integer(jt, "epochs", t.epochs);
      t.batch_size = integer(jt, "batch_size", t.batch_size);
      t.validation_fraction = num(jt, "validation_fraction", t.validation_fraction);
      t.patience = integer(jt, "patience", t.patience);
      t.shuffle = boolean(jt, "shuffle", t.shuffle);
    }
  }

  if (root.contains("tune")) {
    const auto& jt = root["tune"];
    require_keys(jt, origin, "tune", {"max_hidden", "growth_patience", "alpha"});
    cfg.tune.max_hidden = integer(jt, "max_hidden", cfg.tune.max_hidden);
    cfg.tune.growth_patience = integer(jt, "growth_patience", cfg.tune.growth_patience);
    cfg.tune.alpha = num(jt, "alpha", cfg.tune.alpha);
  }

  if (root.contains("disturbance")) cfg.disturbance = parse_disturbance(root["disturbance"], origin);

  if (root.contains("control")) {
    const auto& jc = root["control"];
    require_keys(jc, origin, "control",
                 {"gain", "max_iters", "rms_stop", "start", "window", "baseline_n", "gains",
                  "mass_tol_rel", "dim_tol_rel"});
    cfg.control.gain = num(jc, "gain", cfg.control.gain);
    cfg.control.max_iters = integer(jc, "max_iters", cfg.control.max_iters);
    cfg.control.rms_stop = num(jc, "rms_stop", cfg.control.rms_stop);
    cfg.control.window = integer(jc, "window", cfg.control.window);
    cfg.control.baseline_n = integer(jc, "baseline_n", cfg.control.baseline_n);
    cfg.control.mass_tol_rel = num(jc, "mass_tol_rel", cfg.control.mass_tol_rel);
    cfg.control.dim_tol_rel = num(jc, "dim_tol_rel", cfg.control.dim_tol_rel);
    if (jc.contains("start")) {
      if (!jc["start"].is_object()) fail(origin, "control.start must be an object");
      for (const auto& [key, value] : jc["start"].items()) {
        bool known = false;
        for (const char* name : plant::kParamNames)
          if (key == name) { known = true; break; }
        if (!known) fail(origin, "unknown key '" + key + "' in control.start");
        if (!value.is_number()) fail(origin, "control.start." + key + " must be a number");
        cfg.control.start[key] = value.get<double>();
      }
    }
    if (jc.contains("gains")) {
      const auto& jg = jc["gains"];
      require_keys(jg, origin, "control.gains",
                   {"pressure_gain", "pressure_split", "temp_from_pressure", "temp_gain"});
      cfg.control.gains.pressure_gain = num(jg, "pressure_gain", cfg.control.gains.pressure_gain);
      cfg.control.gains.pressure_split = num(jg, "pressure_split", cfg.control.gains.pressure_split);
      cfg.control.gains.temp_from_pressure =
          num(jg, "temp_from_pressure", cfg.control.gains.temp_from_pressure);
      cfg.control.gains.temp_gain = num(jg, "temp_gain", cfg.control.gains.temp_gain);
    }
  }

  if (root.contains("budget")) {
    require_keys(root["budget"], origin, "budget", {"ejection_offset"});
    cfg.budget.ejection_offset = num(root["budget"], "ejection_offset", cfg.budget.ejection_offset);
  }

  if (root.contains("expectations")) {
    const auto& je = root["expectations"];
    require_keys(je, origin, "expectations",
                 {"significant", "max_rms", "min_mass_correlation", "min_length_correlation",
                  "max_mass_deviation_pct", "min_rejection_ratio", "max_fp_ratio",
                  "min_detection"});
    if (je.contains("significant"))
      cfg.expectations.significant = je["significant"].get<std::vector<std::string>>();
    if (je.contains("max_rms")) cfg.expectations.max_rms = je["max_rms"].get<double>();
    if (je.contains("min_mass_correlation"))
      cfg.expectations.min_mass_correlation = je["min_mass_correlation"].get<double>();
    if (je.contains("min_length_correlation"))
      cfg.expectations.min_length_correlation = je["min_length_correlation"].get<double>();
    if (je.contains("max_mass_deviation_pct"))
      cfg.expectations.max_mass_deviation_pct = je["max_mass_deviation_pct"].get<double>();
    if (je.contains("min_rejection_ratio"))
      cfg.expectations.min_rejection_ratio = je["min_rejection_ratio"].get<double>();
    if (je.contains("max_fp_ratio")) cfg.expectations.max_fp_ratio = je["max_fp_ratio"].get<double>();
    if (je.contains("min_detection"))
      cfg.expectations.min_detection = je["min_detection"].get<double>();
  }

  plant::validate(cfg.nominal);
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return config_from_json_text(os.str(), path);
}

nlohmann::json ScenarioConfig::echo() const {
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& fb : design.factors) {
    nlohmann::json jf{{"name", fb.name}, {"column", fb.column}, {"low", fb.low}, {"high", fb.high}};
    if (fb.param) jf["param"] = *fb.param;
    factors.push_back(jf);
  }
  nlohmann::json start;
  for (const auto& [k, v] : control.start) start[k] = v;

  nlohmann::json j{
      {"scenario", scenario_name(kind)},
      {"seed", seed},
      {"n_cycles", n_cycles},
      {"out_dir", out_dir},
      {"noise", noise},
      {"plant",
       {{"coefficients",
         {{"nominal_mass", coefficients.nominal_mass},
          {"nominal_length", coefficients.nominal_length},
          {"nominal_shrinkage", coefficients.nominal_shrinkage},
          {"mass_pressure_gain", coefficients.mass_pressure_gain},
          {"mass_temp_slope", coefficients.mass_temp_slope},
          {"mass_interaction", coefficients.mass_interaction},
          {"mass_temp_curvature", coefficients.mass_temp_curvature},
          {"mass_viscosity_gain", coefficients.mass_viscosity_gain},
          {"mass_leak_gain", coefficients.mass_leak_gain},
          {"shrink_pressure_gain", coefficients.shrink_pressure_gain},
          {"shrink_temp_gain", coefficients.shrink_temp_gain},
          {"holding_decay_per_s", coefficients.holding_decay_per_s},
          {"leak_decay_per_s", coefficients.leak_decay_per_s},
          {"trace_noise_sigma", coefficients.trace_noise_sigma},
          {"mass_jitter_sigma", coefficients.mass_jitter_sigma},
          {"length_jitter_sigma", coefficients.length_jitter_sigma}}},
        {"nominal",
         {{"melt_temp", nominal.melt_temp},
          {"hold_pressure", nominal.hold_pressure},
          {"inject_speed", nominal.inject_speed},
          {"hold_time", nominal.hold_time},
          {"cool_time", nominal.cool_time},
          {"mold_temp", nominal.mold_temp}}}}},
      {"instruments",
       {{"scale",
         {{"resolution", instruments.scale.resolution},
          {"noise_sigma", instruments.scale.noise_sigma},
          {"duration", instruments.scale.duration}}},
        {"scanner",
         {{"resolution", instruments.scanner.resolution},
          {"noise_sigma", instruments.scanner.noise_sigma},
          {"duration", instruments.scanner.duration}}},
        {"thermal",
         {{"resolution", instruments.thermal.resolution},
          {"noise_sigma", instruments.thermal.noise_sigma},
          {"duration", instruments.thermal.duration}}},
        {"defect_noise_sigma", instruments.defect_noise_sigma}}},
      {"design",
       {{"type", design.type},
        {"n_factors", design.n_factors},
        {"levels", design.levels},
        {"alpha", design.alpha},
        {"response", design.response},
        {"factors", factors}}},
      {"network",
       {{"hidden", network.hidden},
        {"activation", network.activation},
        {"train",
         {{"learning_rate", network.train.learning_rate},
          {"momentum", network.train.momentum},
          {"epochs", network.train.epochs},
          {"batch_size", network.train.batch_size},
          {"validation_fraction", network.train.validation_fraction},
          {"patience", network.train.patience},
          {"shuffle", network.train.shuffle}}}}},
      {"tune",
       {{"max_hidden", tune.max_hidden},
        {"growth_patience", tune.growth_patience},
        {"alpha", tune.alpha}}},
      {"disturbance",
       {{"kind", disturbance.kind == plant::DisturbanceKind::none      ? "none"
                 : disturbance.kind == plant::DisturbanceKind::step    ? "step"
                 : disturbance.kind == plant::DisturbanceKind::ramp    ? "ramp"
                                                                       : "batch-change"},
        {"target", disturbance.target == plant::DisturbanceTarget::melt_temp_offset
                       ? "melt_temp_offset"
                       : disturbance.target == plant::DisturbanceTarget::viscosity_factor
                             ? "viscosity_factor"
                             : "checkring_leak"},
        {"magnitude", disturbance.magnitude},
        {"onset_cycle", disturbance.onset_cycle},
        {"slope", disturbance.slope}}},
      {"control",
       {{"gain", control.gain},
        {"max_iters", control.max_iters},
        {"rms_stop", control.rms_stop},
        {"start", start},
        {"window", control.window},
        {"baseline_n", control.baseline_n},
        {"gains",
         {{"pressure_gain", control.gains.pressure_gain},
          {"pressure_split", control.gains.pressure_split},
          {"temp_from_pressure", control.gains.temp_from_pressure},
          {"temp_gain", control.gains.temp_gain}}},
        {"mass_tol_rel", control.mass_tol_rel},
        {"dim_tol_rel", control.dim_tol_rel}}},
      {"budget", {{"ejection_offset", budget.ejection_offset}}},
  };
  return j;
}

}  // namespace moldloop::runtime
