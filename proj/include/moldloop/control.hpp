#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "moldloop/csv.hpp"
#include "moldloop/metrology.hpp"
#include "moldloop/nnet.hpp"
#include "moldloop/plant.hpp"

namespace moldloop::control {

// ---------------------------------------------------------------------------
// Quality error normalization
// ---------------------------------------------------------------------------

// Tolerance bands the dimensionless RMS is measured against.
struct QualityTolerance {
  double mass_rel = 0.010;  // +-1 % of target mass
  double dim_rel = 0.005;   // +-0.5 % of target dimensions
  double defect_limit = 0.5;
};

// (measured - target) / tolerance_band per component:
// mass, length, width_a, width_b, thickness.
std::vector<double> normalized_error(const plant::PartQuality& measured,
                                     const plant::PartQuality& target,
                                     const QualityTolerance& tol);

double rms(const std::vector<double>& errors);

// Conformity ground truth: every component within its band and the defect
// score under the limit.
bool conforms(const plant::PartQuality& quality, const plant::PartQuality& target,
              const QualityTolerance& tol);

// ---------------------------------------------------------------------------
// Process models
// ---------------------------------------------------------------------------

// Forward predictor: varied machine parameters -> (mass, length).
struct ForwardModel {
  nnet::Network net;
  std::vector<std::string> param_names;  // network input order
  std::vector<double> holdout_correlation;  // per output: mass, length

  std::array<double, 2> predict(const plant::ProcessParams& params) const;
};

// Inverse model: measured quality -> the varied parameters that produced it.
struct InverseModel {
  nnet::Network net;
  std::vector<std::string> param_names;  // network output order
  std::vector<double> holdout_correlation;  // per parameter

  // Inferred parameters on top of `base`; out-of-support queries clamp to the
  // machine ranges and set the flag.
  plant::ProcessParams infer(const plant::PartQuality& quality, const plant::ProcessParams& base,
                             bool& clamped) const;
};

struct FitConfig {
  std::vector<int> hidden = {21};
  nnet::Activation activation = nnet::Activation::tanh_fn;
  nnet::TrainConfig train;
  int restarts = 3;  // seeded re-initializations, best validation MSE wins
};

// Trains the forward predictor on >= 30 cycles; the varied parameters
// (>= 2 distinct levels) become the inputs. Constant datasets are an error.
ForwardModel fit_forward(const std::vector<plant::CycleRecord>& cycles, const FitConfig& config);

// Trains the inverse model on the same data sufficiency terms.
InverseModel fit_inverse(const std::vector<plant::CycleRecord>& cycles, const FitConfig& config);

// ---------------------------------------------------------------------------
// Cycle-to-cycle adjustment
// ---------------------------------------------------------------------------

enum class ActionTag { inverse_step, regulation, hold };

const char* action_tag_name(ActionTag tag);

struct ControlAction {
  int cycle_index = 0;
  plant::ProcessParams old_params;
  plant::ProcessParams new_params;
  std::optional<plant::PartQuality> predicted;  // forward prediction at new params
  ActionTag tag = ActionTag::hold;
  bool clamped = false;
};

// One inverse-model correction: new = current - gain*(inverse(measured) -
// inverse(target)), clamped to the machine ranges.
ControlAction inverse_adjust(const InverseModel& inverse, const plant::PartQuality& measured,
                             const plant::PartQuality& target,
                             const plant::ProcessParams& current, double gain);

struct CycleLogEntry {
  int cycle_index = 0;
  plant::PartQuality measured;
  plant::PartQuality target;
  std::vector<double> error;  // tolerance-normalized components
  double rms = 0.0;
  ControlAction action;
  bool divergence_warning = false;
};

struct ControlLog {
  std::vector<CycleLogEntry> entries;
  std::vector<std::string> warnings;

  double final_rms() const { return entries.empty() ? 0.0 : entries.back().rms; }
  double min_rms() const;
};

Csv control_log_csv(const ControlLog& log);

struct InverseLoopConfig {
  int max_iters = 3;       // adjustment steps
  double gain = 0.7;
  double rms_stop = 0.05;  // early-exit threshold
  QualityTolerance tolerance;
  metrology::InstrumentCatalog catalog;
  bool noise = true;
  double ejection_offset = 18.0;          // measurement window start, s
  plant::DisturbanceProfile disturbance;  // none by default
};

// Wall-clock cost of the in-cycle compute, for the budget check.
struct StepTiming {
  int cycle_index = 0;
  double infer_s = 0.0;   // inverse-model queries
  double adjust_s = 0.0;  // correction arithmetic + optional forward check
};

// Measure -> inverse_adjust -> next cycle, at most max_iters adjustments.
// Two consecutive RMS increases log a divergence warning; the loop continues.
ControlLog run_inverse_loop(const plant::Plant& press, const InverseModel& inverse,
                            const plant::PartQuality& target,
                            const plant::ProcessParams& start_params,
                            const InverseLoopConfig& config, std::uint64_t seed,
                            const ForwardModel* forward = nullptr,
                            std::vector<StepTiming>* timings = nullptr);

// ---------------------------------------------------------------------------
// In-cycle profile regulation
// ---------------------------------------------------------------------------

struct RegulatorGains {
  double pressure_gain = 2.0;     // bar set-point per bar of mean profile error
  double pressure_split = 0.8;    // hold_pressure share of the pressure-error action
  double temp_from_pressure = 2.0;  // degC per bar, remaining split share
  double temp_gain = 10.0;        // degC per degC of mean temperature error
};

struct RegulateConfig {
  int window = 20;  // trace averaging window, samples
  RegulatorGains gains;
  QualityTolerance tolerance;
  bool noise = false;
  // optional trained regulator: inputs (mean pressure error, mean temperature
  // error), outputs (delta hold_pressure, delta melt_temp)
  const nnet::Network* regulator = nullptr;
};

// Cycle-to-cycle set-point regulation against a reference averaged pressure
// profile (the matching temperature profile of the accepted cycle anchors the
// melt-temperature channel). Proportional fallback law when no trained
// regulator is supplied.
ControlLog regulate_profile(const std::vector<double>& reference_pressure,
                            const std::vector<double>& reference_temperature,
                            const plant::Plant& press, int n_cycles,
                            const plant::DisturbanceProfile& disturbance,
                            const RegulateConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// SPC baseline and the accept/reject comparison
// ---------------------------------------------------------------------------

struct SpcChart {
  double center = 0.0;
  double sigma = 0.0;  // moving-range estimate, floored at 1e-12
  double ucl = 0.0;
  double lcl = 0.0;
  int baseline_n = 0;
  std::vector<std::uint8_t> out_of_control;  // per point
};

// Individuals chart: center = baseline mean, sigma = MRbar/1.128,
// limits at +-3 sigma.
SpcChart spc_chart(const std::vector<double>& feature_series, int baseline_n);

struct Confusion {
  int true_positive = 0;   // defect flagged
  int false_positive = 0;  // conforming flagged
  int true_negative = 0;
  int false_negative = 0;

  double detection_rate() const;
  double false_positive_rate() const;
  double accuracy() const;
  double f1() const;
};

struct ComparisonReport {
  Confusion nn;
  Confusion spc;
  double nn_threshold = 0.5;
  int n_cycles = 0;
  int n_defects = 0;
};

// Both detectors on the same labeled stream: the network consumes the full
// averaged pressure profile, SPC consumes peak pressure only. The network
// threshold is matched to reach the requested detection rate when possible.
ComparisonReport classify_parts(const nnet::Network& classifier,
                                const std::vector<plant::CycleRecord>& cycles,
                                const std::vector<int>& labels,  // 1 = defect
                                int window, int spc_baseline_n,
                                double matched_detection = 0.8);

}  // namespace moldloop::control
