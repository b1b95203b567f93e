#pragma once
#include <cstddef>
#include <span>
#include <vector>

namespace gffc {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

// Independent samples.
Estimate mean_se(std::span<const double> x);
// Correlated series: batch means with about sqrt(n) batches (at least 10).
Estimate batch_means(std::span<const double> x);
// Integrated autocorrelation time with Sokal's automatic window (c = 6).
double integrated_autocorr_time(std::span<const double> x);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
};
// Weighted least squares; empty weights means unit weights.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w = {});

}  // namespace gffc
