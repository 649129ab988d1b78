#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <vector>

namespace cpredict::stats {

class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Sample Pearson correlation. Requires equal lengths >= 3 and non-constant inputs.
double pearson(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> a, std::span<const double> b);

/// Ranks 1..n with ties averaged.
std::vector<double> average_ranks(std::span<const double> x);

double mean(std::span<const double> x);
/// Sample variance (n-1 denominator).
double variance(std::span<const double> x);

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double prob);

/// Two-sided p-value of a t statistic on `df` degrees of freedom.
double t_two_sided_p(double t, double df);

/// Upper-tail p-value of an F statistic.
double f_upper_p(double f, double df1, double df2);

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace cpredict::stats
