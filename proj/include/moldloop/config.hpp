#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moldloop/control.hpp"
#include "moldloop/doe.hpp"
#include "moldloop/metrology.hpp"
#include "moldloop/plant.hpp"

namespace moldloop::runtime {

enum class ScenarioKind {
  screen,
  train_forward,
  train_inverse,
  tune_topology,
  closed_loop,
  regulate,
  spc_compare,
};

const char* scenario_name(ScenarioKind kind);
ScenarioKind scenario_from_name(const std::string& name);

struct DesignSpec {
  std::string type = "plackett-burman";  // or "factorial"
  int n_factors = 11;
  int levels = 2;
  double alpha = 0.05;
  std::string response = "peak_pressure";  // intermediate characteristic screened
  std::vector<doe::FactorBinding> factors;  // default: the 3 plant-active factors
};

struct NetworkSpec {
  std::vector<int> hidden = {21};
  std::string activation = "tanh";
  nnet::TrainConfig train;
};

struct TuneSpec {
  int max_hidden = 12;
  int growth_patience = 2;
  double alpha = 0.05;
};

struct ControlSpec {
  double gain = 0.7;
  int max_iters = 3;
  double rms_stop = 0.05;
  std::map<std::string, double> start;  // parameter overrides for the perturbed start
  int window = 20;
  int baseline_n = 50;
  control::RegulatorGains gains;
  double mass_tol_rel = 0.010;
  double dim_tol_rel = 0.005;
};

struct BudgetSpec {
  double ejection_offset = 18.0;  // idle window start within the cycle
};

// Optional self-test thresholds; any miss turns the run's exit code to 4.
struct Expectations {
  std::optional<std::vector<std::string>> significant;
  std::optional<double> max_rms;
  std::optional<double> min_mass_correlation;
  std::optional<double> min_length_correlation;
  std::optional<double> max_mass_deviation_pct;
  std::optional<double> min_rejection_ratio;
  std::optional<double> max_fp_ratio;
  std::optional<double> min_detection;
  bool any() const;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::closed_loop;
  std::uint64_t seed = 0;
  int n_cycles = 0;  // 0 = scenario default
  std::string out_dir = "out";
  bool noise = true;

  plant::PlantCoefficients coefficients;
  plant::ProcessParams nominal;
  metrology::InstrumentCatalog instruments;
  DesignSpec design;
  NetworkSpec network;
  TuneSpec tune;
  plant::DisturbanceProfile disturbance;
  ControlSpec control;
  BudgetSpec budget;
  Expectations expectations;

  // resolved configuration, echoed into every report
  nlohmann::json echo() const;
};

// Strict parse: unknown keys are rejected by name, parse errors carry
// line/column, and a missing seed is its own error.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig config_from_json_text(const std::string& text, const std::string& origin);

}  // namespace moldloop::runtime
