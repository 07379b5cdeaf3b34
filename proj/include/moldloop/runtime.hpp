#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moldloop/config.hpp"

namespace moldloop::runtime {

struct CycleTiming {
  int cycle_index = 0;
  double measure_plan_s = 0.0;  // simulated instrument occupancy
  double infer_s = 0.0;         // wall time
  double adjust_s = 0.0;        // wall time
};

struct BudgetResult {
  std::vector<CycleTiming> cycles;
  double idle_window_s = 0.0;
  int failures = 0;
  bool pass = true;
};

// Fail when plan duration + inference + adjustment exceed the idle window.
BudgetResult check_budget(const std::vector<CycleTiming>& timings, double cycle_time,
                          double ejection_offset);

struct RunReport {
  nlohmann::json document;
  std::vector<std::string> artifact_paths;
  bool expectations_met = true;

  void save(const std::string& path) const;
};

// Executes the configured scenario, writes every artifact under
// config.out_dir, and returns the report. Deterministic per seed.
RunReport run_scenario(const ScenarioConfig& config);

// Rendering of a saved report for the `report` subcommand.
std::string render_report(const nlohmann::json& document);

}  // namespace moldloop::runtime
