#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "moldloop/errors.hpp"

namespace moldloop::plant {

// ---------------------------------------------------------------------------
// Settable machine parameters
// ---------------------------------------------------------------------------

struct ProcessParams {
  double melt_temp = 230.0;      // degC, barrel set-point
  double hold_pressure = 400.0;  // bar
  double inject_speed = 50.0;    // mm/s
  double hold_time = 5.0;        // s
  double cool_time = 15.0;       // s
  double mold_temp = 40.0;       // degC
};

struct MachineRanges {
  double melt_temp_lo = 200.0, melt_temp_hi = 280.0;
  double hold_pressure_lo = 200.0, hold_pressure_hi = 600.0;
  double inject_speed_lo = 10.0, inject_speed_hi = 120.0;
  double hold_time_lo = 1.0, hold_time_hi = 10.0;
  double cool_time_lo = 5.0, cool_time_hi = 25.0;
  double mold_temp_lo = 20.0, mold_temp_hi = 80.0;
};

inline constexpr const char* kParamNames[6] = {
    "melt_temp", "hold_pressure", "inject_speed",
    "hold_time", "cool_time",     "mold_temp"};

double get_param(const ProcessParams& p, const std::string& name);
void set_param(ProcessParams& p, const std::string& name, double value);
void param_bounds(const MachineRanges& r, const std::string& name, double& lo, double& hi);

// Throws RangeError unless every field is finite and inside its machine range.
void validate(const ProcessParams& p, const MachineRanges& r = {});

// Clamp to the machine ranges; sets `clamped` when any field moved.
ProcessParams clamp_to_ranges(const ProcessParams& p, const MachineRanges& r, bool& clamped);

// ---------------------------------------------------------------------------
// Disturbances
// ---------------------------------------------------------------------------

enum class DisturbanceKind { none, step, ramp, batch_change };
enum class DisturbanceTarget { melt_temp_offset, viscosity_factor, checkring_leak };

struct DisturbanceProfile {
  DisturbanceKind kind = DisturbanceKind::none;
  DisturbanceTarget target = DisturbanceTarget::melt_temp_offset;
  double magnitude = 0.0;  // target units (viscosity_factor: multiplier delta)
  int onset_cycle = 0;
  double slope = 0.0;  // units per cycle, ramp only

  void validate_profile() const;
};

// Concrete per-cycle disturbance values the profile resolves to.
struct DisturbanceState {
  double melt_temp_offset = 0.0;  // degC added to the set-point
  double viscosity_factor = 1.0;  // multiplies melt viscosity
  double checkring_leak = 0.0;    // leak fraction in [0,1]
};

DisturbanceState resolve(const DisturbanceProfile& profile, int cycle_index);

// ---------------------------------------------------------------------------
// Part quality and cycle records
// ---------------------------------------------------------------------------

struct PartQuality {
  double mass = 0.0;       // g
  double length = 0.0;     // mm
  double width_a = 0.0;    // mm
  double width_b = 0.0;    // mm
  double thickness = 0.0;  // mm
  double defect_score = 0.0;  // [0,1]
};

inline constexpr int kTraceRateHz = 100;

struct CycleTrace {
  double sample_rate = kTraceRateHz;
  std::vector<double> mold_pressure;     // bar
  std::vector<double> mold_temperature;  // degC
  std::vector<int> phase_marks;  // injection/holding/cooling/ejection starts
};

struct ChronoEvent {
  std::string name;
  double at_s = 0.0;
};

struct CycleRecord {
  int cycle_index = 0;
  ProcessParams params;
  DisturbanceState disturbance;
  CycleTrace trace;
  PartQuality true_quality;
  std::optional<PartQuality> measured_quality;  // filled by metrology
  std::vector<ChronoEvent> events;
  double cycle_time = 0.0;  // s
};

// ---------------------------------------------------------------------------
// Reference plant
// ---------------------------------------------------------------------------

// Every coefficient of the reference quality equations, overridable through
// the runtime config and echoed into reports.
struct PlantCoefficients {
  // nominal operating point and nominal part; mold dimensions are multiples
  // of 10 mm so the ejected part (1.5 % shrinkage) lands on the 0.050 mm
  // scanner grid, and large enough that a 0.5 % tolerance band spans at
  // least ten grid steps (the in-cycle gage stays capable)
  double nominal_mass = 5.0;        // g
  double nominal_length = 100.0;    // mm, mold dimension before shrinkage
  double nominal_width_a = 120.0;   // mm
  double nominal_width_b = 110.0;   // mm
  double nominal_thickness = 100.0; // mm
  double nominal_shrinkage = 0.015;

  // mass response
  double mass_pressure_gain = 0.05;        // tanh((hp-400)/200) weight
  double mass_temp_slope = -0.0127 / 20.0; // per degC, pins the +20 degC anchor
  double mass_interaction = 0.01;          // pressure x speed cross term
  double mass_temp_curvature = -0.008;     // on dT*(dT-20)/2500
  double mass_viscosity_gain = -0.025;     // per unit viscosity_factor excess
  double mass_leak_gain = -0.03;           // per unit checkring leak

  // shrinkage response
  double shrink_pressure_gain = -0.006;
  double shrink_temp_gain = 0.004;  // per 50 degC
  double shrink_viscosity_gain = 0.003;
  double shrink_leak_gain = 0.004;

  // defect score (logistic)
  double defect_temp_weight = 0.3;    // on |dT| - defect_temp_margin
  double defect_temp_margin = 18.0;   // degC
  double defect_speed_weight = 0.25;  // on max(0, defect_speed_floor - speed)
  double defect_speed_floor = 25.0;   // mm/s

  // trace synthesis
  double peak_pressure_gain = 0.9;   // of hold_pressure
  double peak_viscous_gain = 80.0;   // bar at nominal speed and viscosity
  double holding_decay_per_s = 0.02; // plateau loss rate
  double leak_decay_per_s = 0.05;    // extra plateau loss per unit leak
  double cooling_tau_s = 4.0;
  double trace_noise_sigma = 1.0;    // bar
  double mold_temp_rise = 20.0;      // degC contact heating scale
  double mold_temp_tau_s = 6.0;

  // process jitter (noise on)
  double mass_jitter_sigma = 0.002;    // g
  double length_jitter_sigma = 0.010;  // mm, scaled per dimension

  // cycle chronogram
  double fill_volume_mm = 60.0;     // fill stroke: t_fill = fill_volume_mm / inject_speed
  double mold_open_time_s = 0.8;    // cooling end -> ejection
  double cycle_overhead_s = 8.8;    // ejection, dosing, mold close; pads to 30 s nominal

  // post-molding aging
  double post_shrink_total = 0.004;  // asymptotic extra shrinkage
  double post_shrink_tau_s = 5400.0;
};

// Deterministic, seedable synthetic molding process. One instance per thread
// of control; all randomness flows from explicit seeds.
class Plant {
 public:
  Plant() = default;
  explicit Plant(PlantCoefficients coeffs, bool noise = false)
      : coeffs_(coeffs), noise_(noise) {}

  const PlantCoefficients& coefficients() const { return coeffs_; }
  const MachineRanges& ranges() const { return ranges_; }
  bool noise_enabled() const { return noise_; }
  void set_noise(bool on) { noise_ = on; }

  // One molding cycle. true_quality and trace filled; measured_quality empty.
  CycleRecord run_cycle(const ProcessParams& params, const DisturbanceState& state,
                        std::uint64_t rng_seed) const;

  // Invoked after each cycle's production with the history so far; may return
  // new parameters for the next cycle.
  using ControllerHook = std::function<std::optional<ProcessParams>(
      const std::vector<CycleRecord>& history)>;

  std::vector<CycleRecord> run_sequence(const ProcessParams& initial_params, int n_cycles,
                                        const DisturbanceProfile& disturbance,
                                        const ControllerHook& hook,
                                        std::uint64_t rng_seed) const;

  // Post-molding shrinkage relaxation; mass unchanged.
  PartQuality age_part(const PartQuality& quality, double elapsed_s) const;

  // Quality with noise off, exposed for oracle-style checks and decoding.
  PartQuality quality_noise_free(const ProcessParams& params,
                                 const DisturbanceState& state) const;

  double cycle_time(const ProcessParams& params) const;

 private:
  PlantCoefficients coeffs_;
  MachineRanges ranges_;
  bool noise_ = false;
};

}  // namespace moldloop::plant
