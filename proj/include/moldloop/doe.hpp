#pragma once

#include <optional>
#include <string>
#include <vector>

#include "moldloop/csv.hpp"
#include "moldloop/plant.hpp"

namespace moldloop::doe {

// Coded experimental design. Entries are -1/+1 (two-level) or -1/0/+1
// (three-level). Columns with an empty factor name are dummy columns: they
// carry no factor and pool the error estimate.
struct DesignMatrix {
  int n_runs = 0;
  int n_columns = 0;
  std::vector<double> runs;  // row-major n_runs x n_columns
  std::vector<std::string> factor_names;  // size n_columns; "" = dummy
  int levels = 2;

  double at(int run, int col) const {
    return runs[static_cast<std::size_t>(run) * n_columns + col];
  }
  std::vector<int> dummy_columns() const;
  std::vector<int> assigned_columns() const;
};

// Maps one assigned column to a decoded value range; bound to a machine
// parameter when `param` is set, otherwise an inert factor that decodes to a
// recorded value but drives nothing.
struct FactorBinding {
  std::string name;
  int column = 0;
  double low = 0.0;
  double high = 0.0;
  std::optional<std::string> param;  // plant parameter name
};

// Plackett-Burman screening design: smallest supported run count
// (8, 12, 16, 20, 24) with n_runs >= n_factors + 1. Cyclic construction from
// the published generator rows plus a final all-minus row; the 8-run design
// comes from the 2^3 factorial interaction columns.
DesignMatrix pb_design(int n_factors);

// Full factorial in coded levels, lexicographic run order, capped at
// 10000 runs.
DesignMatrix factorial_design(int n_factors, int levels);

// Re-labels the design's columns from the bindings; every unbound column
// becomes a dummy column.
void bind_factors(DesignMatrix& design, const std::vector<FactorBinding>& bindings);

// Decoded machine settings per run: -1 -> low, +1 -> high, 0 -> midpoint,
// applied on top of the nominal point. Unbound (inert/dummy) columns leave
// the parameters untouched. Ranges must sit inside the machine limits.
std::vector<plant::ProcessParams> decode(const DesignMatrix& design,
                                         const std::vector<FactorBinding>& bindings,
                                         const plant::ProcessParams& nominal = {},
                                         const plant::MachineRanges& ranges = {});

// Per-column main effects: mean(response | col=+1) - mean(response | col=-1),
// for assigned and dummy columns alike.
std::vector<double> effects(const DesignMatrix& design, const std::vector<double>& responses);

struct FactorResult {
  std::string name;
  int column = 0;
  double effect = 0.0;
  double sum_of_squares = 0.0;
  double f_statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

struct ScreeningReport {
  std::vector<FactorResult> factors;  // assigned columns only
  std::vector<double> dummy_effects;
  double error_mean_square = 0.0;
  int error_df = 0;
  double alpha = 0.05;
};

// Fisher screening of the assigned factors. Error mean square pooled from
// the dummy columns and, when given, from replicate response sets.
ScreeningReport fisher_screen(const DesignMatrix& design, const std::vector<double>& responses,
                              double alpha = 0.05,
                              const std::vector<std::vector<double>>& replicates = {});

// CSV exports: one run per row (coded columns, decoded parameters, response),
// and the screening report.
Csv design_csv(const DesignMatrix& design, const std::vector<FactorBinding>& bindings,
               const std::vector<plant::ProcessParams>& decoded,
               const std::vector<double>& responses);
Csv report_csv(const ScreeningReport& report);

}  // namespace moldloop::doe
