#include "moldloop/metrology.hpp"

#include <algorithm>
#include <cmath>

#include "moldloop/rng.hpp"

namespace moldloop::metrology {

void Instrument::validate_instrument() const {
  if (!(resolution > 0.0)) throw RangeError("instrument '" + name + "': resolution must be > 0");
  if (noise_sigma < 0.0) throw RangeError("instrument '" + name + "': noise_sigma must be >= 0");
  if (!(duration > 0.0)) throw RangeError("instrument '" + name + "': duration must be > 0");
}

double ChronogramPlan::total_duration() const {
  double total = 0.0;
  for (const auto& t : tasks) total += t.instrument.duration;
  return total;
}

double quantize(double value, double resolution) {
  const double steps = std::floor(std::fabs(value) / resolution + 0.5);
  return std::copysign(steps * resolution, value);
}

double weigh(const Instrument& scale, double true_mass, std::uint64_t seed, bool noise) {
  scale.validate_instrument();
  if (!(true_mass > 0.0)) throw RangeError("weigh: mass must be > 0");
  double m = true_mass;
  if (noise && scale.noise_sigma > 0.0) {
    Rng rng(derive_seed(seed, "metrology.scale"));
    m += rng.gaussian(0.0, scale.noise_sigma);
  }
  return quantize(m, scale.resolution);
}

plant::PartQuality scan_dimensions(const Instrument& scanner,
                                   const plant::PartQuality& true_quality,
                                   std::uint64_t seed, bool noise) {
  scanner.validate_instrument();
  if (!(true_quality.length > 0.0) || !(true_quality.width_a > 0.0) ||
      !(true_quality.width_b > 0.0) || !(true_quality.thickness > 0.0))
    throw RangeError("scan_dimensions: dimensions must be > 0");
  Rng rng(derive_seed(seed, "metrology.scanner"));
  plant::PartQuality q = true_quality;
  auto read = [&](double v) {
    if (noise && scanner.noise_sigma > 0.0) v += rng.gaussian(0.0, scanner.noise_sigma);
    return quantize(v, scanner.resolution);
  };
  q.length = read(q.length);
  q.width_a = read(q.width_a);
  q.width_b = read(q.width_b);
  q.thickness = read(q.thickness);
  return q;
}

ThermalSnapshot thermal_snapshot(const Instrument& camera, const plant::CycleTrace& trace,
                                 std::uint64_t seed, bool noise) {
  camera.validate_instrument();
  if (trace.mold_temperature.empty()) throw ShapeError("thermal_snapshot: empty trace");
  double sum = 0.0, mx = trace.mold_temperature.front();
  for (double t : trace.mold_temperature) {
    sum += t;
    mx = std::max(mx, t);
  }
  ThermalSnapshot s;
  s.mean_surface = sum / static_cast<double>(trace.mold_temperature.size());
  s.max_surface = mx;
  if (noise && camera.noise_sigma > 0.0) {
    Rng rng(derive_seed(seed, "metrology.thermal"));
    s.mean_surface += rng.gaussian(0.0, camera.noise_sigma);
    s.max_surface += rng.gaussian(0.0, camera.noise_sigma);
  }
  s.mean_surface = quantize(s.mean_surface, camera.resolution);
  s.max_surface = quantize(s.max_surface, camera.resolution);
  return s;
}

plant::CycleTrace drift_trace(const plant::CycleTrace& trace, double drift_rate,
                              std::uint64_t seed) {
  if (std::fabs(drift_rate) > 1.0)
    throw RangeError("drift_trace: |drift_rate| above the 1 bar/s sensor bound");
  if (drift_rate == 0.0) return trace;
  Rng rng(derive_seed(seed, "metrology.drift"));
  plant::CycleTrace out = trace;
  const double dt = 1.0 / trace.sample_rate;
  double offset = 0.0;
  for (double& p : out.mold_pressure) {
    p += offset;
    offset += rng.uniform(-std::fabs(drift_rate) * dt, std::fabs(drift_rate) * dt);
  }
  return out;
}

std::vector<double> average_trace(const std::vector<double>& samples, int window) {
  if (window < 1) throw RangeError("average_trace: window must be >= 1");
  const std::size_t w = static_cast<std::size_t>(window);
  const std::size_t n_out = samples.size() / w;
  std::vector<double> out(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) s += samples[i * w + j];
    out[i] = s / static_cast<double>(w);
  }
  return out;
}

ChronogramPlan schedule(const std::vector<Instrument>& plan_tasks, double cycle_time,
                        double ejection_offset) {
  if (!(cycle_time > ejection_offset) || ejection_offset < 0.0)
    throw RangeError("schedule: need cycle_time > ejection_offset >= 0");
  for (const auto& inst : plan_tasks) inst.validate_instrument();

  double total = 0.0;
  for (const auto& inst : plan_tasks) total += inst.duration;
  const double window = cycle_time - ejection_offset;
  if (total > window) {
    const double overflow = total - window;
    throw InfeasibleError("measurement plan exceeds the idle window by " +
                              std::to_string(overflow) + " s",
                          overflow);
  }

  ChronogramPlan plan;
  plan.idle_start = ejection_offset;
  plan.idle_end = cycle_time;
  double cursor = ejection_offset;
  for (const auto& inst : plan_tasks) {
    plan.tasks.push_back({inst, cursor});
    cursor += inst.duration;
  }
  return plan;
}

plant::CycleRecord measure_cycle(const plant::CycleRecord& record, const ChronogramPlan& plan,
                                 const InstrumentCatalog& catalog, std::uint64_t seed,
                                 bool noise) {
  if (plan.idle_end > record.cycle_time + 1e-9)
    throw InfeasibleError("measurement plan window ends after this cycle",
                          plan.idle_end - record.cycle_time);

  plant::CycleRecord out = record;
  plant::PartQuality measured = record.true_quality;
  measured.mass = weigh(catalog.scale, record.true_quality.mass, seed, noise);
  const plant::PartQuality scanned =
      scan_dimensions(catalog.scanner, record.true_quality, seed, noise);
  measured.length = scanned.length;
  measured.width_a = scanned.width_a;
  measured.width_b = scanned.width_b;
  measured.thickness = scanned.thickness;

  double defect = record.true_quality.defect_score;
  if (noise && catalog.defect_noise_sigma > 0.0) {
    Rng rng(derive_seed(seed, "metrology.defect"));
    defect += rng.gaussian(0.0, catalog.defect_noise_sigma);
  }
  measured.defect_score = std::clamp(defect, 0.0, 1.0);

  out.measured_quality = measured;
  for (const auto& task : plan.tasks)
    out.events.push_back({"measure." + task.instrument.name, task.start_offset});
  return out;
}

}  // namespace moldloop::metrology
