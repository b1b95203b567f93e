#pragma once
// Data-parallel kernels on 2D grids stored row-major with a one-site zero halo:
// the array has (nx+2)*(ny+2) entries and interior site (i,j) lives at
// (j+1)*(nx+2)+(i+1). Each kernel has a scalar reference and an AVX2 variant;
// the public entry points dispatch at runtime.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace gffc::kernels {

enum class Isa { scalar, avx2 };

Isa detected_isa() noexcept;
Isa active_isa() noexcept;
// Test hook: force a variant (clamped to what the CPU supports).
void set_isa(Isa isa) noexcept;
std::string_view isa_name(Isa isa) noexcept;

struct Grid2 {
  int nx, ny;
  std::size_t stride() const { return std::size_t(nx) + 2; }
  std::size_t size() const { return stride() * (std::size_t(ny) + 2); }
  std::size_t at(int i, int j) const { return (std::size_t(j) + 1) * stride() + std::size_t(i) + 1; }
};

// y = diag*x - off*(sum of the four neighbours), interior only; halo of y untouched.
void stencil_apply(Grid2 g, std::span<const double> x, std::span<double> y, double diag, double off);

// Half sweep of projected SOR for diag*f - off*sum(nbrs) = 0 restricted to sites
// with (i+j)%2 == color; sites with obstacle != 0 are projected onto f >= lower.
// Returns the max absolute update.
double psor_half_sweep(Grid2 g, std::span<double> f, std::span<const std::uint8_t> obstacle,
                       int color, double omega, double diag, double off, double lower);

// Sum over all grid edges (including edges to the halo) of (f(x)-f(y))^2.
double edge_energy(Grid2 g, std::span<const double> f);

double dot(std::span<const double> a, std::span<const double> b);
// y += a*x
void axpy(double a, std::span<const double> x, std::span<double> y);

namespace scalar {
void stencil_apply(Grid2 g, const double* x, double* y, double diag, double off);
double psor_half_sweep(Grid2 g, double* f, const std::uint8_t* obs, int color, double omega,
                       double diag, double off, double lower);
double edge_energy(Grid2 g, const double* f);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
bool available() noexcept;
void stencil_apply(Grid2 g, const double* x, double* y, double diag, double off);
double psor_half_sweep(Grid2 g, double* f, const std::uint8_t* obs, int color, double omega,
                       double diag, double off, double lower);
double edge_energy(Grid2 g, const double* f);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
}  // namespace avx2

}  // namespace gffc::kernels
