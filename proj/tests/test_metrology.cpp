#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "moldloop/metrology.hpp"
#include "moldloop/plant.hpp"
#include "moldloop/stats.hpp"

using namespace moldloop;
using namespace moldloop::metrology;

namespace {
const InstrumentCatalog kCatalog;
}

TEST_CASE("quantization is round-half-away-from-zero on the grid") {
  CHECK(quantize(5.000, 0.001) == doctest::Approx(5.000).epsilon(1e-15));
  CHECK(quantize(5.00049, 0.001) == doctest::Approx(5.000).epsilon(1e-15));
  CHECK(quantize(5.00051, 0.001) == doctest::Approx(5.001).epsilon(1e-15));
  CHECK(quantize(5.0005, 0.001) == doctest::Approx(5.001).epsilon(1e-15));
  CHECK(quantize(-5.0005, 0.001) == doctest::Approx(-5.001).epsilon(1e-15));
  CHECK(quantize(98.474, 0.050) == doctest::Approx(98.450).epsilon(1e-15));
  CHECK(quantize(98.500, 0.050) == doctest::Approx(98.500).epsilon(1e-15));
}

TEST_CASE("weigh quantizes and is honest about noise") {
  CHECK(weigh(kCatalog.scale, 5.0000, 1, false) == doctest::Approx(5.000).epsilon(1e-15));
  CHECK(weigh(kCatalog.scale, 5.00049, 1, false) == doctest::Approx(5.000).epsilon(1e-15));
  CHECK(weigh(kCatalog.scale, 5.00051, 1, false) == doctest::Approx(5.001).epsilon(1e-15));
  CHECK_THROWS_AS(weigh(kCatalog.scale, 0.0, 1), RangeError);

  // Monte Carlo: >= 99.7 % of draws within 3 sigma of the true mass
  int within = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double m = weigh(kCatalog.scale, 5.0, static_cast<std::uint64_t>(i), true);
    if (std::fabs(m - 5.0) <= 3.0 * 0.0005 + 0.0005) ++within;  // + half grid step
  }
  CHECK(within >= static_cast<int>(0.997 * n));

  // determinism per seed
  CHECK(weigh(kCatalog.scale, 5.0, 77, true) == weigh(kCatalog.scale, 5.0, 77, true));
}

TEST_CASE("scan quantizes dimensions on the 0.050 mm grid and passes mass through") {
  plant::PartQuality q;
  q.mass = 5.0;
  q.length = 98.474;
  q.width_a = 19.70;
  q.width_b = 9.85;
  q.thickness = 2.4625;
  q.defect_score = 0.125;
  const plant::PartQuality m = scan_dimensions(kCatalog.scanner, q, 1, false);
  CHECK(m.length == doctest::Approx(98.450).epsilon(1e-15));
  CHECK(m.width_a == doctest::Approx(19.70).epsilon(1e-12));
  CHECK(m.thickness == doctest::Approx(2.450).epsilon(1e-12));
  CHECK(m.mass == 5.0);
  CHECK(m.defect_score == 0.125);

  // a 1.5 % deviation on the nominal length spans ~29 grid steps
  const double deviation = 0.015 * 98.5;
  CHECK(std::floor(deviation / 0.050) == 29);
  plant::PartQuality shifted = q;
  shifted.length = 98.5 - deviation;
  const plant::PartQuality ms = scan_dimensions(kCatalog.scanner, shifted, 1, false);
  CHECK(std::fabs(ms.length - quantize(98.5, 0.05)) > 28 * 0.050);
}

TEST_CASE("quantization idempotence with noise off") {
  plant::PartQuality q;
  q.mass = 5.0;
  q.length = 98.450;
  q.width_a = 19.70;
  q.width_b = 9.85;
  q.thickness = 2.450;
  const plant::PartQuality once = scan_dimensions(kCatalog.scanner, q, 1, false);
  const plant::PartQuality twice = scan_dimensions(kCatalog.scanner, once, 2, false);
  CHECK(once.length == twice.length);
  CHECK(once.width_a == twice.width_a);
  CHECK(once.width_b == twice.width_b);
  CHECK(once.thickness == twice.thickness);
  CHECK(weigh(kCatalog.scale, 5.000, 1, false) ==
        weigh(kCatalog.scale, weigh(kCatalog.scale, 5.000, 1, false), 2, false));
}

TEST_CASE("drift stays inside the rate envelope and reproduces per seed") {
  plant::Plant p({}, false);
  const plant::CycleRecord rec = p.run_cycle({}, {}, 1);

  const plant::CycleTrace same = drift_trace(rec.trace, 0.0, 5);
  for (std::size_t i = 0; i < same.mold_pressure.size(); ++i)
    CHECK(same.mold_pressure[i] == rec.trace.mold_pressure[i]);

  for (double rate : {0.5, 1.0}) {
    const plant::CycleTrace drifted = drift_trace(rec.trace, rate, 5);
    for (std::size_t i = 0; i < drifted.mold_pressure.size(); ++i) {
      const double t = static_cast<double>(i) / rec.trace.sample_rate;
      const double offset = drifted.mold_pressure[i] - rec.trace.mold_pressure[i];
      CHECK(std::fabs(offset) <= rate * t + 1e-12);
    }
    const plant::CycleTrace again = drift_trace(rec.trace, rate, 5);
    CHECK(again.mold_pressure == drifted.mold_pressure);
  }
  CHECK_THROWS_AS(drift_trace(rec.trace, 1.5, 5), RangeError);
}

TEST_CASE("average_trace windows") {
  std::vector<double> xs{1, 2, 3, 4, 5, 6, 7};
  CHECK(average_trace(xs, 1) == xs);
  const auto w2 = average_trace(xs, 2);
  CHECK(w2 == std::vector<double>{1.5, 3.5, 5.5});  // trailing 7 dropped

  std::vector<double> flat(100, 3.25);
  for (double v : average_trace(flat, 7)) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));

  std::vector<double> long_trace(3000, 1.0);
  CHECK(average_trace(long_trace, 20).size() == 150);  // the 150-point profile

  CHECK_THROWS_AS(average_trace(xs, 0), RangeError);
}

TEST_CASE("schedule packs tasks greedily inside the idle window") {
  Instrument a{"a", 0.1, 0.0, 2.0};
  Instrument b{"b", 0.1, 0.0, 6.0};
  Instrument c{"c", 0.1, 0.0, 3.0};

  const ChronogramPlan plan = schedule({a, b, c}, 30.0, 18.0);
  REQUIRE(plan.tasks.size() == 3);
  CHECK(plan.tasks[0].start_offset == doctest::Approx(18.0));
  CHECK(plan.tasks[1].start_offset == doctest::Approx(20.0));
  CHECK(plan.tasks[2].start_offset == doctest::Approx(26.0));
  CHECK(plan.tasks.back().start_offset + plan.tasks.back().instrument.duration <= 30.0);

  // back-to-back from window start
  Instrument d{"d", 0.1, 0.0, 8.0};
  const ChronogramPlan small = schedule({d}, 10.0, 0.0);
  CHECK(small.tasks[0].start_offset == 0.0);

  // 35 s of tasks cannot fit a 30 s cycle
  Instrument e{"e", 0.1, 0.0, 35.0};
  try {
    schedule({e}, 30.0, 0.0);
    CHECK(false);
  } catch (const InfeasibleError& err) {
    CHECK(err.overflow_s >= 5.0);
  }

  CHECK_THROWS_AS(schedule({a}, 10.0, 10.0), RangeError);
}

TEST_CASE("measure_cycle fills measured quality and stamps task events") {
  plant::Plant p({}, false);
  plant::CycleRecord rec = p.run_cycle({}, {}, 1);
  const ChronogramPlan plan = schedule(kCatalog.all(), rec.cycle_time, 18.0);

  const plant::CycleRecord measured = measure_cycle(rec, plan, kCatalog, 9, false);
  REQUIRE(measured.measured_quality.has_value());
  CHECK(measured.measured_quality->mass == doctest::Approx(5.000).epsilon(1e-12));
  CHECK(measured.measured_quality->length == doctest::Approx(98.50).epsilon(1e-12));

  int stamped = 0;
  for (const auto& ev : measured.events)
    if (ev.name.rfind("measure.", 0) == 0) ++stamped;
  CHECK(stamped == 3);

  // determinism per seed
  const plant::CycleRecord m1 = measure_cycle(rec, plan, kCatalog, 9, true);
  const plant::CycleRecord m2 = measure_cycle(rec, plan, kCatalog, 9, true);
  CHECK(m1.measured_quality->mass == m2.measured_quality->mass);
  CHECK(m1.measured_quality->length == m2.measured_quality->length);
}

TEST_CASE("gage repeatability: 100 repeated measurements of one part") {
  plant::Plant p({}, false);
  plant::CycleRecord rec = p.run_cycle({}, {}, 1);
  const ChronogramPlan plan = schedule(kCatalog.all(), rec.cycle_time, 18.0);

  std::vector<double> masses;
  for (int i = 0; i < 100; ++i) {
    const auto m = measure_cycle(rec, plan, kCatalog, 1000 + static_cast<std::uint64_t>(i), true);
    masses.push_back(m.measured_quality->mass);
  }
  CHECK(stats::sample_stddev(masses) <= 0.0007);  // g
}

TEST_CASE("gage vs process separation: measured variance equals instrument variance") {
  // plant noise off, metrology noise on
  plant::Plant p({}, false);
  plant::CycleRecord rec = p.run_cycle({}, {}, 1);
  std::vector<double> masses;
  for (int i = 0; i < 20000; ++i)
    masses.push_back(weigh(kCatalog.scale, rec.true_quality.mass,
                           static_cast<std::uint64_t>(i), true));
  const double instrument_var =
      0.0005 * 0.0005 + 0.001 * 0.001 / 12.0;  // noise + quantization
  CHECK(stats::variance(masses) == doctest::Approx(instrument_var).epsilon(0.10));
}

TEST_CASE("thermal snapshot reduces the trace to two scalars") {
  plant::Plant p({}, false);
  const plant::CycleRecord rec = p.run_cycle({}, {}, 1);
  const ThermalSnapshot snap = thermal_snapshot(kCatalog.thermal, rec.trace, 3, false);
  CHECK(snap.max_surface > snap.mean_surface);
  CHECK(snap.mean_surface > 40.0);  // above mold temperature
  CHECK(snap.max_surface < 70.0);   // below contact temperature bound
}
