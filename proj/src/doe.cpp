#include "moldloop/doe.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "moldloop/stats.hpp"

namespace moldloop::doe {

namespace {

// First rows of the 1946 cyclic constructions.
const char* pb_generator(int n_runs) {
  switch (n_runs) {
    case 12: return "++-+++---+-";
    case 16: return "++++-+-++--+---";
    case 20: return "++--++++-+-+----++-";
    case 24: return "+++++-+-++--++--+-+----";
    default: return nullptr;
  }
}

DesignMatrix pb_from_generator(int n_runs) {
  const char* gen = pb_generator(n_runs);
  const int k = n_runs - 1;
  DesignMatrix d;
  d.n_runs = n_runs;
  d.n_columns = k;
  d.levels = 2;
  d.runs.resize(static_cast<std::size_t>(n_runs) * k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) {
      // row r is the generator rotated right r positions
      const int src = ((c - r) % k + k) % k;
      d.runs[static_cast<std::size_t>(r) * k + c] = gen[src] == '+' ? 1.0 : -1.0;
    }
  for (int c = 0; c < k; ++c)
    d.runs[static_cast<std::size_t>(k) * k + c] = -1.0;  // closing all-minus row
  return d;
}

DesignMatrix pb8() {
  // 2^3 factorial; columns A, B, AB, C, AC, BC, ABC
  DesignMatrix d;
  d.n_runs = 8;
  d.n_columns = 7;
  d.levels = 2;
  d.runs.resize(8 * 7);
  int row = 0;
  for (int a : {-1, 1})
    for (int b : {-1, 1})
      for (int c : {-1, 1}) {
        const double cols[7] = {double(a), double(b), double(a * b), double(c),
                                double(a * c), double(b * c), double(a * b * c)};
        for (int j = 0; j < 7; ++j) d.runs[static_cast<std::size_t>(row) * 7 + j] = cols[j];
        ++row;
      }
  return d;
}

}  // namespace

std::vector<int> DesignMatrix::dummy_columns() const {
  std::vector<int> out;
  for (int c = 0; c < n_columns; ++c)
    if (factor_names[static_cast<std::size_t>(c)].empty()) out.push_back(c);
  return out;
}

std::vector<int> DesignMatrix::assigned_columns() const {
  std::vector<int> out;
  for (int c = 0; c < n_columns; ++c)
    if (!factor_names[static_cast<std::size_t>(c)].empty()) out.push_back(c);
  return out;
}

DesignMatrix pb_design(int n_factors) {
  if (n_factors < 1 || n_factors > 23)
    throw RangeError("pb_design: n_factors must be in [1, 23]");
  static const int sizes[] = {8, 12, 16, 20, 24};
  int n_runs = 0;
  for (int s : sizes)
    if (s >= n_factors + 1) { n_runs = s; break; }

  DesignMatrix d = (n_runs == 8) ? pb8() : pb_from_generator(n_runs);
  d.factor_names.assign(static_cast<std::size_t>(d.n_columns), "");
  for (int c = 0; c < n_factors; ++c)
    d.factor_names[static_cast<std::size_t>(c)] = "F" + std::to_string(c + 1);
  return d;
}

DesignMatrix factorial_design(int n_factors, int levels) {
  if (levels != 2 && levels != 3) throw RangeError("factorial_design: levels must be 2 or 3");
  if (n_factors < 1) throw RangeError("factorial_design: n_factors must be >= 1");
  double runs_d = std::pow(static_cast<double>(levels), n_factors);
  if (runs_d > 10000.0)
    throw CapacityError("factorial_design: " + std::to_string(static_cast<long long>(runs_d)) +
                        " runs exceeds the 10000-run bound");
  const int n_runs = static_cast<int>(runs_d);

  DesignMatrix d;
  d.n_runs = n_runs;
  d.n_columns = n_factors;
  d.levels = levels;
  d.runs.resize(static_cast<std::size_t>(n_runs) * n_factors);
  d.factor_names.resize(static_cast<std::size_t>(n_factors));
  for (int c = 0; c < n_factors; ++c) d.factor_names[static_cast<std::size_t>(c)] = "F" + std::to_string(c + 1);

  for (int r = 0; r < n_runs; ++r) {
    int rem = r;
    // lexicographic: last factor varies fastest
    for (int c = n_factors - 1; c >= 0; --c) {
      const int level = rem % levels;
      rem /= levels;
      const double coded = (levels == 2) ? (level == 0 ? -1.0 : 1.0)
                                         : static_cast<double>(level - 1);
      d.runs[static_cast<std::size_t>(r) * n_factors + c] = coded;
    }
  }
  return d;
}

void bind_factors(DesignMatrix& design, const std::vector<FactorBinding>& bindings) {
  std::set<int> seen;
  for (const auto& b : bindings) {
    if (b.column < 0 || b.column >= design.n_columns)
      throw RangeError("bind_factors: column " + std::to_string(b.column) + " out of design");
    if (!seen.insert(b.column).second)
      throw RangeError("bind_factors: column " + std::to_string(b.column) + " bound twice");
    if (b.name.empty()) throw RangeError("bind_factors: factor name must not be empty");
  }
  if (static_cast<int>(bindings.size()) >= design.n_runs)
    throw RangeError("bind_factors: need n_runs > n_assigned_factors");
  design.factor_names.assign(static_cast<std::size_t>(design.n_columns), "");
  for (const auto& b : bindings) design.factor_names[static_cast<std::size_t>(b.column)] = b.name;
}

std::vector<plant::ProcessParams> decode(const DesignMatrix& design,
                                         const std::vector<FactorBinding>& bindings,
                                         const plant::ProcessParams& nominal,
                                         const plant::MachineRanges& ranges) {
  for (const auto& b : bindings) {
    if (!(b.low < b.high))
      throw RangeError("decode: factor '" + b.name + "' needs low < high");
    if (b.param) {
      double lo = 0.0, hi = 0.0;
      plant::param_bounds(ranges, *b.param, lo, hi);
      if (b.low < lo || b.high > hi)
        throw RangeError("decode: factor '" + b.name + "' range [" + std::to_string(b.low) +
                         "," + std::to_string(b.high) + "] outside machine limits of " + *b.param);
    }
  }
  std::vector<plant::ProcessParams> out;
  out.reserve(static_cast<std::size_t>(design.n_runs));
  for (int r = 0; r < design.n_runs; ++r) {
    plant::ProcessParams p = nominal;
    for (const auto& b : bindings) {
      if (!b.param) continue;
      const double coded = design.at(r, b.column);
      const double value = coded < 0.0 ? b.low
                          : coded > 0.0 ? b.high
                                        : 0.5 * (b.low + b.high);
      plant::set_param(p, *b.param, value);
    }
    out.push_back(p);
  }
  return out;
}

std::vector<double> effects(const DesignMatrix& design, const std::vector<double>& responses) {
  if (static_cast<int>(responses.size()) != design.n_runs)
    throw ShapeError("effects: responses length " + std::to_string(responses.size()) +
                     " != n_runs " + std::to_string(design.n_runs));
  std::vector<double> out(static_cast<std::size_t>(design.n_columns), 0.0);
  for (int c = 0; c < design.n_columns; ++c) {
    double plus = 0.0, minus = 0.0;
    int n_plus = 0, n_minus = 0;
    for (int r = 0; r < design.n_runs; ++r) {
      const double coded = design.at(r, c);
      if (coded > 0.0) { plus += responses[static_cast<std::size_t>(r)]; ++n_plus; }
      else if (coded < 0.0) { minus += responses[static_cast<std::size_t>(r)]; ++n_minus; }
    }
    if (n_plus == 0 || n_minus == 0)
      throw InferenceError("effects: column " + std::to_string(c) + " has only one level");
    out[static_cast<std::size_t>(c)] = plus / n_plus - minus / n_minus;
  }
  return out;
}

ScreeningReport fisher_screen(const DesignMatrix& design, const std::vector<double>& responses,
                              double alpha,
                              const std::vector<std::vector<double>>& replicates) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw RangeError("fisher_screen: alpha must be in (0,1)");

  // With replicates, effects come from the per-run means and the within-run
  // scatter joins the error pool.
  std::vector<double> mean_resp = responses;
  double error_ss = 0.0;
  int error_df = 0;
  if (!replicates.empty()) {
    for (const auto& rep : replicates)
      if (static_cast<int>(rep.size()) != design.n_runs)
        throw ShapeError("fisher_screen: replicate length != n_runs");
    const double k = static_cast<double>(replicates.size()) + 1.0;
    for (int r = 0; r < design.n_runs; ++r) {
      double s = responses[static_cast<std::size_t>(r)];
      for (const auto& rep : replicates) s += rep[static_cast<std::size_t>(r)];
      mean_resp[static_cast<std::size_t>(r)] = s / k;
    }
    for (int r = 0; r < design.n_runs; ++r) {
      const double m = mean_resp[static_cast<std::size_t>(r)];
      double d0 = responses[static_cast<std::size_t>(r)] - m;
      error_ss += d0 * d0;
      for (const auto& rep : replicates) {
        const double d = rep[static_cast<std::size_t>(r)] - m;
        error_ss += d * d;
      }
    }
    // per-run SS has k-1 df; factor SS below is per mean response, so scale
    // the within pool to the mean scale
    error_ss /= k;
    error_df += design.n_runs * (static_cast<int>(k) - 1);
  }

  const std::vector<double> eff = effects(design, mean_resp);
  const auto dummies = design.dummy_columns();
  const auto assigned = design.assigned_columns();

  ScreeningReport report;
  report.alpha = alpha;
  const double n = static_cast<double>(design.n_runs);

  for (int c : dummies) {
    const double e = eff[static_cast<std::size_t>(c)];
    report.dummy_effects.push_back(e);
    error_ss += n * e * e / 4.0;
    error_df += 1;
  }
  if (error_df == 0)
    throw InferenceError(
        "fisher_screen: no dummy columns and no replicates; add replicates to estimate error");

  report.error_df = error_df;
  report.error_mean_square = error_ss / static_cast<double>(error_df);

  for (int c : assigned) {
    FactorResult fr;
    fr.name = design.factor_names[static_cast<std::size_t>(c)];
    fr.column = c;
    fr.effect = eff[static_cast<std::size_t>(c)];
    fr.sum_of_squares = n * fr.effect * fr.effect / 4.0;
    if (report.error_mean_square > 0.0) {
      fr.f_statistic = fr.sum_of_squares / report.error_mean_square;
      fr.p_value = stats::f_tail(fr.f_statistic, 1.0, static_cast<double>(error_df));
    } else {
      // all-constant responses: no evidence against any factor
      fr.f_statistic = 0.0;
      fr.p_value = 1.0;
    }
    fr.significant = fr.p_value < alpha;
    report.factors.push_back(std::move(fr));
  }
  return report;
}

Csv design_csv(const DesignMatrix& design, const std::vector<FactorBinding>& bindings,
               const std::vector<plant::ProcessParams>& decoded,
               const std::vector<double>& responses) {
  std::vector<std::string> header{"run"};
  for (int c = 0; c < design.n_columns; ++c) {
    const std::string& nm = design.factor_names[static_cast<std::size_t>(c)];
    header.push_back("coded." + (nm.empty() ? "dummy" + std::to_string(c) : nm));
  }
  for (const char* p : plant::kParamNames) header.push_back(std::string("param.") + p);
  const bool with_resp = !responses.empty();
  if (with_resp) header.push_back("response");
  (void)bindings;

  Csv csv(header);
  for (int r = 0; r < design.n_runs; ++r) {
    auto& row = csv.new_row();
    row.add(r);
    for (int c = 0; c < design.n_columns; ++c) row.add(design.at(r, c));
    const plant::ProcessParams& p = decoded[static_cast<std::size_t>(r)];
    for (const char* name : plant::kParamNames) row.add(plant::get_param(p, name));
    if (with_resp) row.add(responses[static_cast<std::size_t>(r)]);
  }
  return csv;
}

Csv report_csv(const ScreeningReport& report) {
  Csv csv({"factor", "effect", "sum_of_squares", "f_statistic", "p_value", "significant"});
  for (const auto& f : report.factors) {
    auto& row = csv.new_row();
    row.add(f.name).add(f.effect).add(f.sum_of_squares).add(f.f_statistic).add(f.p_value)
        .add(f.significant);
  }
  return csv;
}

}  // namespace moldloop::doe
