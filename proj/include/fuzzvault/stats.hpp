#pragma once

#include <cstddef>
#include <span>

namespace fuzzvault {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double x) const { return lower <= x && x <= upper; }
};

/// Wilson score interval for `successes` out of `trials` at normal quantile z
/// (1.96 for 95%).
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96);

/// Area under the ROC curve for "higher score = genuine", ties counted half.
double roc_auc(std::span<const double> genuine, std::span<const double> impostor);

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
double chi_square_sf(double statistic, double dof);

}  // namespace fuzzvault
