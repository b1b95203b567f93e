#include "gffc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gffc {

Estimate mean_se(std::span<const double> x) {
  Estimate e;
  e.count = x.size();
  if (x.empty()) return e;
  e.mean = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  if (x.size() < 2) return e;
  double s = 0.0;
  for (double v : x) s += (v - e.mean) * (v - e.mean);
  e.se = std::sqrt(s / double(x.size() - 1) / double(x.size()));
  return e;
}

Estimate batch_means(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 20) return mean_se(x);
  const std::size_t batches = std::max<std::size_t>(10, std::size_t(std::sqrt(double(n))));
  const std::size_t len = n / batches;
  std::vector<double> m(batches);
  for (std::size_t b = 0; b < batches; ++b)
    m[b] = std::accumulate(x.begin() + b * len, x.begin() + (b + 1) * len, 0.0) / double(len);
  Estimate e = mean_se(m);
  e.mean = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
  e.count = n;
  return e;
}

double integrated_autocorr_time(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return 1.0;
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
  double c0 = 0.0;
  for (double v : x) c0 += (v - mu) * (v - mu);
  c0 /= double(n);
  if (c0 <= 0.0) return 1.0;
  double tau = 1.0;
  for (std::size_t t = 1; t < n / 2; ++t) {
    double c = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) c += (x[i] - mu) * (x[i + t] - mu);
    tau += 2.0 * c / double(n) / c0;
    if (double(t) >= 6.0 * tau) break;
  }
  return std::max(tau, 1.0);
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  const std::size_t n = x.size();
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
    sxx += wi * x[i] * x[i];
    sxy += wi * x[i] * y[i];
  }
  LinearFit f;
  const double den = sw * sxx - sx * sx;
  if (den == 0.0) return f;
  f.slope = (sw * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / sw;
  if (!w.empty()) {
    f.slope_se = std::sqrt(sw / den);
  } else if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_se = std::sqrt(rss / double(n - 2) * sw / den);
  }
  return f;
}

}  // namespace gffc
