#pragma once
// Independent reference computations for tests. Nothing here calls into the
// library's solvers; dense linear algebra and quadrature only.

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

// Dense inverse of g(-Δ)+m2 on the cube {-h..h}^d with coordinate 0 fastest.
inline Eigen::MatrixXd dense_green(int d, int half, double g, double m2) {
  const int side = 2 * half + 1;
  int n = 1;
  for (int k = 0; k < d; ++k) n *= side;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    Q(i, i) = 2 * d * g + m2;
    int r = i, stride = 1;
    for (int k = 0; k < d; ++k) {
      const int c = r % side;
      r /= side;
      if (c > 0) Q(i, i - stride) = -g;
      if (c < side - 1) Q(i, i + stride) = -g;
      stride *= side;
    }
  }
  return Q.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
}

// Potential kernel of simple random walk on Z^2 at k*e1, from the one-dimensional
// reduction a(k e1) = (1/pi) ∫_{-pi}^{pi} (1-cos kθ)/sqrt((2-cos θ)^2-1) dθ.
inline double potential_kernel_axis(int k) {
  auto f = [k](double t) {
    const double c = std::cos(t);
    const double den = std::sqrt((2.0 - c) * (2.0 - c) - 1.0);
    if (den == 0.0) return 0.0;
    return (1.0 - std::cos(k * t)) / den;
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  return 2.0 / std::numbers::pi * ts.integrate(f, 0.0, std::numbers::pi, 1e-14);
}

// ∫ over {x ∉ (a,b)} of x^p exp(-kappa (x-mu)^2/2) dx / normaliser, by quadrature.
// a = -inf allowed. Returns the p-th raw moment of the truncated law.
inline double truncated_moment(double a, double b, double mu, double kappa, int p) {
  auto w = [&](double x) { return std::exp(-0.5 * kappa * (x - mu) * (x - mu)); };
  boost::math::quadrature::exp_sinh<double> es;
  double num = 0, den = 0;
  // Right piece [b, inf): substitute x = b + t.
  num += es.integrate([&](double t) { return std::pow(b + t, p) * w(b + t); }, 1e-14);
  den += es.integrate([&](double t) { return w(b + t); }, 1e-14);
  if (std::isfinite(a)) {
    num += es.integrate([&](double t) { return std::pow(a - t, p) * w(a - t); }, 1e-14);
    den += es.integrate([&](double t) { return w(a - t); }, 1e-14);
  }
  return num / den;
}

inline double truncated_variance(double a, double b, double mu, double kappa) {
  // Two passes: the mean, then the central second moment (no m2 - m1^2 cancellation).
  const double m1 = truncated_moment(a, b, mu, kappa, 1);
  auto w = [&](double x) { return std::exp(-0.5 * kappa * (x - mu) * (x - mu)); };
  boost::math::quadrature::exp_sinh<double> es;
  double num = es.integrate([&](double t) { return (b + t - m1) * (b + t - m1) * w(b + t); }, 1e-14);
  double den = es.integrate([&](double t) { return w(b + t); }, 1e-14);
  if (std::isfinite(a)) {
    num += es.integrate([&](double t) { return (a - t - m1) * (a - t - m1) * w(a - t); }, 1e-14);
    den += es.integrate([&](double t) { return w(a - t); }, 1e-14);
  }
  return num / den;
}

// log of the conformal radius of the unit square at its centre: the average of
// log|x - centre| under harmonic measure, with the centre Poisson kernel of one
// side given by the series sum_k odd sin(k pi/2) sin(k pi x) / cosh(k pi/2).
inline double square_log_conformal_radius() {
  auto kernel = [](double x) {
    double s = 0;
    for (int k = 1; k < 80; k += 2) s += std::sin(k * std::numbers::pi / 2) * std::sin(k * std::numbers::pi * x) /
                                          std::cosh(k * std::numbers::pi / 2);
    return s;
  };
  boost::math::quadrature::gauss_kronrod<double, 61> gk;
  const double one_side = gk.integrate([&](double x) { return kernel(x) * 0.5 * std::log((x - 0.5) * (x - 0.5) + 0.25); },
                                       0.0, 1.0, 15, 1e-14);
  return 4 * one_side;
}

struct Moments {
  double mean = 0, se = 0;
};

inline Moments mean_se(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= double(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  s /= double(v.size() - 1);
  return {m, std::sqrt(s / double(v.size()))};
}

}  // namespace oracle
