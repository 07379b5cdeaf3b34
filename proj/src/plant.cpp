#include "moldloop/plant.hpp"

#include <cmath>

#include "moldloop/rng.hpp"

namespace moldloop::plant {

namespace {

bool in_range(double v, double lo, double hi) {
  return std::isfinite(v) && v >= lo && v <= hi;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw NumericalFault(std::string("plant: non-finite ") + what);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double get_param(const ProcessParams& p, const std::string& name) {
  if (name == "melt_temp") return p.melt_temp;
  if (name == "hold_pressure") return p.hold_pressure;
  if (name == "inject_speed") return p.inject_speed;
  if (name == "hold_time") return p.hold_time;
  if (name == "cool_time") return p.cool_time;
  if (name == "mold_temp") return p.mold_temp;
  throw RangeError("unknown process parameter: " + name);
}

void set_param(ProcessParams& p, const std::string& name, double value) {
  if (name == "melt_temp") p.melt_temp = value;
  else if (name == "hold_pressure") p.hold_pressure = value;
  else if (name == "inject_speed") p.inject_speed = value;
  else if (name == "hold_time") p.hold_time = value;
  else if (name == "cool_time") p.cool_time = value;
  else if (name == "mold_temp") p.mold_temp = value;
  else throw RangeError("unknown process parameter: " + name);
}

void param_bounds(const MachineRanges& r, const std::string& name, double& lo, double& hi) {
  if (name == "melt_temp") { lo = r.melt_temp_lo; hi = r.melt_temp_hi; }
  else if (name == "hold_pressure") { lo = r.hold_pressure_lo; hi = r.hold_pressure_hi; }
  else if (name == "inject_speed") { lo = r.inject_speed_lo; hi = r.inject_speed_hi; }
  else if (name == "hold_time") { lo = r.hold_time_lo; hi = r.hold_time_hi; }
  else if (name == "cool_time") { lo = r.cool_time_lo; hi = r.cool_time_hi; }
  else if (name == "mold_temp") { lo = r.mold_temp_lo; hi = r.mold_temp_hi; }
  else throw RangeError("unknown process parameter: " + name);
}

void validate(const ProcessParams& p, const MachineRanges& r) {
  if (!in_range(p.melt_temp, r.melt_temp_lo, r.melt_temp_hi))
    throw RangeError("melt_temp out of range [" + std::to_string(r.melt_temp_lo) + "," +
                     std::to_string(r.melt_temp_hi) + "]: " + std::to_string(p.melt_temp));
  if (!in_range(p.hold_pressure, r.hold_pressure_lo, r.hold_pressure_hi))
    throw RangeError("hold_pressure out of range: " + std::to_string(p.hold_pressure));
  if (!in_range(p.inject_speed, r.inject_speed_lo, r.inject_speed_hi))
    throw RangeError("inject_speed out of range: " + std::to_string(p.inject_speed));
  if (!in_range(p.hold_time, r.hold_time_lo, r.hold_time_hi))
    throw RangeError("hold_time out of range: " + std::to_string(p.hold_time));
  if (!in_range(p.cool_time, r.cool_time_lo, r.cool_time_hi))
    throw RangeError("cool_time out of range: " + std::to_string(p.cool_time));
  if (!in_range(p.mold_temp, r.mold_temp_lo, r.mold_temp_hi))
    throw RangeError("mold_temp out of range: " + std::to_string(p.mold_temp));
}

ProcessParams clamp_to_ranges(const ProcessParams& p, const MachineRanges& r, bool& clamped) {
  ProcessParams q = p;
  clamped = false;
  auto clamp1 = [&clamped](double v, double lo, double hi) {
    if (v < lo) { clamped = true; return lo; }
    if (v > hi) { clamped = true; return hi; }
    return v;
  };
  q.melt_temp = clamp1(p.melt_temp, r.melt_temp_lo, r.melt_temp_hi);
  q.hold_pressure = clamp1(p.hold_pressure, r.hold_pressure_lo, r.hold_pressure_hi);
  q.inject_speed = clamp1(p.inject_speed, r.inject_speed_lo, r.inject_speed_hi);
  q.hold_time = clamp1(p.hold_time, r.hold_time_lo, r.hold_time_hi);
  q.cool_time = clamp1(p.cool_time, r.cool_time_lo, r.cool_time_hi);
  q.mold_temp = clamp1(p.mold_temp, r.mold_temp_lo, r.mold_temp_hi);
  return q;
}

void DisturbanceProfile::validate_profile() const {
  if (onset_cycle < 0) throw RangeError("disturbance onset_cycle must be >= 0");
  if (kind == DisturbanceKind::ramp && slope == 0.0)
    throw RangeError("ramp disturbance requires slope != 0");
  if (kind == DisturbanceKind::none && magnitude != 0.0)
    throw RangeError("disturbance kind none requires magnitude 0");
}

DisturbanceState resolve(const DisturbanceProfile& profile, int cycle_index) {
  profile.validate_profile();
  DisturbanceState s;
  double value = 0.0;
  if (cycle_index >= profile.onset_cycle) {
    switch (profile.kind) {
      case DisturbanceKind::none:
        break;
      case DisturbanceKind::step:
      case DisturbanceKind::batch_change:  // batch change = persistent step
        value = profile.magnitude;
        break;
      case DisturbanceKind::ramp:
        value = profile.magnitude +
                profile.slope * static_cast<double>(cycle_index - profile.onset_cycle);
        break;
    }
  }
  switch (profile.target) {
    case DisturbanceTarget::melt_temp_offset:
      s.melt_temp_offset = value;
      break;
    case DisturbanceTarget::viscosity_factor:
      s.viscosity_factor = 1.0 + value;
      break;
    case DisturbanceTarget::checkring_leak:
      s.checkring_leak = std::min(std::max(value, 0.0), 1.0);
      break;
  }
  return s;
}

double Plant::cycle_time(const ProcessParams& params) const {
  const double t_fill = coeffs_.fill_volume_mm / params.inject_speed;
  return t_fill + params.hold_time + params.cool_time + coeffs_.cycle_overhead_s;
}

PartQuality Plant::quality_noise_free(const ProcessParams& params,
                                      const DisturbanceState& state) const {
  validate(params, ranges_);
  const PlantCoefficients& c = coeffs_;

  // realized melt temperature = set-point + uncontrolled offset
  const double dT = params.melt_temp + state.melt_temp_offset - 230.0;
  const double dP = (params.hold_pressure - 400.0) / 200.0;
  const double dV = (params.inject_speed - 50.0) / 50.0;

  const double mass_base =
      1.0 + c.mass_pressure_gain * std::tanh(dP) + c.mass_temp_slope * dT +
      c.mass_interaction * dP * dV + c.mass_temp_curvature * dT * (dT - 20.0) / 2500.0;
  const double mass = c.nominal_mass * mass_base *
                      (1.0 + c.mass_viscosity_gain * (state.viscosity_factor - 1.0)) *
                      (1.0 + c.mass_leak_gain * state.checkring_leak);

  const double shrink = c.nominal_shrinkage + c.shrink_pressure_gain * std::tanh(dP) +
                        c.shrink_temp_gain * dT / 50.0 +
                        c.shrink_viscosity_gain * (state.viscosity_factor - 1.0) +
                        c.shrink_leak_gain * state.checkring_leak;

  PartQuality q;
  q.mass = mass;
  q.length = c.nominal_length * (1.0 - shrink);
  q.width_a = c.nominal_width_a * (1.0 - shrink);
  q.width_b = c.nominal_width_b * (1.0 - shrink);
  q.thickness = c.nominal_thickness * (1.0 - shrink);

  const double z = c.defect_temp_weight * (std::fabs(dT) - c.defect_temp_margin) +
                   c.defect_speed_weight *
                       std::max(0.0, c.defect_speed_floor - params.inject_speed);
  q.defect_score = logistic(z);

  check_finite(q.mass, "mass");
  check_finite(q.length, "length");
  check_finite(q.width_a, "width_a");
  check_finite(q.width_b, "width_b");
  check_finite(q.thickness, "thickness");
  check_finite(q.defect_score, "defect_score");
  if (q.mass <= 0.0 || q.length <= 0.0 || q.thickness <= 0.0)
    throw NumericalFault("plant: non-physical quality (coefficient overrides too extreme?)");
  return q;
}

CycleRecord Plant::run_cycle(const ProcessParams& params, const DisturbanceState& state,
                             std::uint64_t rng_seed) const {
  validate(params, ranges_);
  const PlantCoefficients& c = coeffs_;
  Rng rng(derive_seed(rng_seed, "plant.cycle"));

  CycleRecord rec;
  rec.params = params;
  rec.disturbance = state;
  rec.cycle_time = cycle_time(params);
  rec.true_quality = quality_noise_free(params, state);

  if (noise_) {
    // process jitter on mass and length only; the other dimensions vary
    // through the shrinkage response
    rec.true_quality.mass += rng.gaussian(0.0, c.mass_jitter_sigma);
    rec.true_quality.length += rng.gaussian(0.0, c.length_jitter_sigma);
  }

  // --- trace synthesis -----------------------------------------------------
  const double realized_melt = params.melt_temp + state.melt_temp_offset;
  const double viscosity =
      std::exp(-(realized_melt - 230.0) / 60.0) * state.viscosity_factor;
  check_finite(viscosity, "viscosity");

  const double t_fill = c.fill_volume_mm / params.inject_speed;
  const double t_hold_end = t_fill + params.hold_time;
  const double t_cool_end = t_hold_end + params.cool_time;
  const double t_eject = t_cool_end + c.mold_open_time_s;

  const double peak = c.peak_pressure_gain * params.hold_pressure +
                      c.peak_viscous_gain * viscosity * (params.inject_speed / 50.0);
  const double hold_decay = c.holding_decay_per_s + c.leak_decay_per_s * state.checkring_leak;

  const int n = static_cast<int>(std::ceil(rec.cycle_time * kTraceRateHz));
  rec.trace.mold_pressure.resize(n);
  rec.trace.mold_temperature.resize(n);

  const double contact_temp =
      params.mold_temp + c.mold_temp_rise * (realized_melt - params.mold_temp) / 190.0;
  double p_cool_start = peak * std::pow(1.0 - hold_decay, params.hold_time);

  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kTraceRateHz;
    double p, temp;
    if (t < t_fill) {
      p = peak * (t / t_fill);
      temp = params.mold_temp + (contact_temp - params.mold_temp) * (t / t_fill);
    } else if (t < t_hold_end) {
      p = peak * std::pow(1.0 - hold_decay, t - t_fill);
      temp = contact_temp;
    } else {
      p = p_cool_start * std::exp(-(t - t_hold_end) / c.cooling_tau_s);
      temp = params.mold_temp +
             (contact_temp - params.mold_temp) * std::exp(-(t - t_hold_end) / c.mold_temp_tau_s);
    }
    if (noise_) p += rng.gaussian(0.0, c.trace_noise_sigma);
    check_finite(p, "trace pressure");
    rec.trace.mold_pressure[i] = p;
    rec.trace.mold_temperature[i] = temp;
  }

  auto mark = [n](double t_s) {
    int idx = static_cast<int>(std::llround(t_s * kTraceRateHz));
    return std::min(idx, n - 1);
  };
  rec.trace.phase_marks = {0, mark(t_fill), mark(t_hold_end), mark(t_eject)};

  rec.events = {{"injection_start", 0.0},
                {"holding_start", t_fill},
                {"cooling_start", t_hold_end},
                {"ejection", t_eject},
                {"cycle_end", rec.cycle_time}};
  return rec;
}

std::vector<CycleRecord> Plant::run_sequence(const ProcessParams& initial_params,
                                             int n_cycles,
                                             const DisturbanceProfile& disturbance,
                                             const ControllerHook& hook,
                                             std::uint64_t rng_seed) const {
  if (n_cycles < 1) throw RangeError("run_sequence: n_cycles must be >= 1");
  validate(initial_params, ranges_);
  disturbance.validate_profile();

  std::vector<CycleRecord> records;
  records.reserve(static_cast<std::size_t>(n_cycles));

  if (!hook) {
    // Cycles are independent without a controller: each draws its own
    // counter-derived seed, so the loop parallelizes without changing output.
    records.resize(static_cast<std::size_t>(n_cycles));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_cycles; ++i) {
      const DisturbanceState state = resolve(disturbance, i);
      CycleRecord rec = run_cycle(initial_params, state, derive_seed(rng_seed, "cycle", i));
      rec.cycle_index = i;
      records[static_cast<std::size_t>(i)] = std::move(rec);
    }
    return records;
  }

  ProcessParams params = initial_params;
  for (int i = 0; i < n_cycles; ++i) {
    const DisturbanceState state = resolve(disturbance, i);
    CycleRecord rec = run_cycle(params, state, derive_seed(rng_seed, "cycle", i));
    rec.cycle_index = i;
    records.push_back(std::move(rec));
    if (auto next = hook(records)) {
      try {
        validate(*next, ranges_);
      } catch (const RangeError& e) {
        throw RangeError("controller hook returned out-of-range params after cycle " +
                         std::to_string(i) + ": " + e.what());
      }
      params = *next;
    }
  }
  return records;
}

PartQuality Plant::age_part(const PartQuality& quality, double elapsed_s) const {
  if (elapsed_s < 0.0 || !std::isfinite(elapsed_s))
    throw RangeError("age_part: elapsed must be >= 0");
  const double relax =
      1.0 - coeffs_.post_shrink_total *
                (1.0 - std::exp(-elapsed_s / coeffs_.post_shrink_tau_s));
  PartQuality aged = quality;
  aged.length *= relax;
  aged.width_a *= relax;
  aged.width_b *= relax;
  aged.thickness *= relax;
  return aged;
}

}  // namespace moldloop::plant
