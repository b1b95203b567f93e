#include <algorithm>
#include <cmath>

#include "gffc/kernels.hpp"

namespace gffc::kernels::scalar {

void stencil_apply(Grid2 g, const double* x, double* y, double diag, double off) {
  const std::size_t s = g.stride();
  for (int j = 0; j < g.ny; ++j) {
    const std::size_t row = g.at(0, j);
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t k = row + i;
      const double nb = ((x[k - 1] + x[k + 1]) + x[k - s]) + x[k + s];
      y[k] = diag * x[k] - off * nb;
    }
  }
}

double psor_half_sweep(Grid2 g, double* f, const std::uint8_t* obs, int color, double omega,
                       double diag, double off, double lower) {
  const std::size_t s = g.stride();
  const double inv = off / diag;
  double maxup = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const std::size_t row = g.at(0, j);
    for (int i = (color + j) & 1; i < g.nx; i += 2) {
      const std::size_t k = row + i;
      const double nb = ((f[k - 1] + f[k + 1]) + f[k - s]) + f[k + s];
      const double gs = inv * nb;
      double v = f[k] + omega * (gs - f[k]);
      if (obs[k] && v < lower) v = lower;
      maxup = std::max(maxup, std::abs(v - f[k]));
      f[k] = v;
    }
  }
  return maxup;
}

double edge_energy(Grid2 g, const double* f) {
  const std::size_t s = g.stride();
  double e = 0.0;
  // Horizontal edges: (i-1,i) for i = 0..nx, vertical (j-1,j) for j = 0..ny.
  for (int j = 0; j < g.ny; ++j) {
    const std::size_t row = g.at(0, j);
    for (int i = 0; i <= g.nx; ++i) {
      const double d = f[row + i] - f[row + i - 1];
      e += d * d;
    }
  }
  for (int j = 0; j <= g.ny; ++j) {
    const std::size_t row = (std::size_t(j) + 1) * s + 1;
    for (int i = 0; i < g.nx; ++i) {
      const double d = f[row + i] - f[row + i - s];
      e += d * d;
    }
  }
  return e;
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace gffc::kernels::scalar
