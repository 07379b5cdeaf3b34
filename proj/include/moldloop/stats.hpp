#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace moldloop::stats {

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation (modified Lentz). Target accuracy 1e-10 over the F-test range.
double incomplete_beta(double a, double b, double x);

// Upper tail P(F > f) of the F distribution with (df1, df2) degrees of
// freedom, via I_x(df2/2, df1/2) at x = df2/(df2 + df1*f).
double f_tail(double f, double df1, double df2);

double mean(std::span<const double> xs);
double variance(std::span<const double> xs);  // population (1/n)
double sample_variance(std::span<const double> xs);  // 1/(n-1)
double stddev(std::span<const double> xs);
double sample_stddev(std::span<const double> xs);

// Pearson correlation coefficient; 0 when either side is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

// Kolmogorov-Smirnov statistic of a sample against Uniform(0,1).
double ks_uniform(std::vector<double> sample);

}  // namespace moldloop::stats
