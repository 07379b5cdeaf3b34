#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moldloop/plant.hpp"

namespace moldloop::metrology {

struct Instrument {
  std::string name;
  double resolution = 0.0;   // output quantization grid, instrument units
  double noise_sigma = 0.0;  // additive gaussian sigma
  double duration = 0.0;     // s occupied in the measurement window

  void validate_instrument() const;
};

// Default in-cycle station: milligram scale, 0.050 mm laser scanner,
// two-scalar thermal snapshot.
struct InstrumentCatalog {
  Instrument scale{"scale", 0.001, 0.0005, 2.0};
  Instrument scanner{"scanner", 0.050, 0.015, 6.0};
  Instrument thermal{"thermal", 0.1, 0.5, 3.0};
  double defect_noise_sigma = 0.02;

  std::vector<Instrument> all() const { return {scale, scanner, thermal}; }
};

struct ChronogramTask {
  Instrument instrument;
  double start_offset = 0.0;  // s from cycle start
};

struct ChronogramPlan {
  std::vector<ChronogramTask> tasks;
  double idle_start = 0.0;  // ejection of this part
  double idle_end = 0.0;    // next ejection = cycle end

  double total_duration() const;
};

// Round-half-away-from-zero onto the instrument grid.
double quantize(double value, double resolution);

// Mass measurement: additive noise then milligram quantization.
double weigh(const Instrument& scale, double true_mass, std::uint64_t seed,
             bool noise = true);

// Dimensional scan: every dimension gets additive noise then the scanner
// grid; mass and defect_score pass through untouched.
plant::PartQuality scan_dimensions(const Instrument& scanner,
                                   const plant::PartQuality& true_quality,
                                   std::uint64_t seed, bool noise = true);

// Two-scalar thermal snapshot derived from the trace's temperature channel.
struct ThermalSnapshot {
  double mean_surface = 0.0;  // degC
  double max_surface = 0.0;
};
ThermalSnapshot thermal_snapshot(const Instrument& camera, const plant::CycleTrace& trace,
                                 std::uint64_t seed, bool noise = true);

// Bounded random-walk sensor drift; per-second increment magnitude never
// exceeds drift_rate. drift_rate above 1 bar/s violates the sensor contract.
plant::CycleTrace drift_trace(const plant::CycleTrace& trace, double drift_rate,
                              std::uint64_t seed);

// Interval means; trailing partial window dropped.
std::vector<double> average_trace(const std::vector<double>& samples, int window);

// Greedy in-order packing of tasks into (ejection_offset, cycle_time].
ChronogramPlan schedule(const std::vector<Instrument>& plan_tasks, double cycle_time,
                        double ejection_offset);

// Applies the plan's instruments to a record: fills measured_quality and
// stamps one event per task at its plan offset.
plant::CycleRecord measure_cycle(const plant::CycleRecord& record, const ChronogramPlan& plan,
                                 const InstrumentCatalog& catalog, std::uint64_t seed,
                                 bool noise = true);

}  // namespace moldloop::metrology
