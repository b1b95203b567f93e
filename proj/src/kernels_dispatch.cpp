#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "gffc/kernels.hpp"

namespace gffc::kernels {

namespace {
Isa initial_isa() {
  if (const char* e = std::getenv("GFFC_ISA"); e && std::string(e) == "scalar") return Isa::scalar;
  return detected_isa();
}
std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}
void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("kernel size mismatch: ") + what);
}
}  // namespace

Isa detected_isa() noexcept { return avx2::available() ? Isa::avx2 : Isa::scalar; }
Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }
void set_isa(Isa isa) noexcept {
  if (isa == Isa::avx2 && !avx2::available()) isa = Isa::scalar;
  current().store(isa);
}
std::string_view isa_name(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void stencil_apply(Grid2 g, std::span<const double> x, std::span<double> y, double diag, double off) {
  check(x.size() == g.size() && y.size() == g.size(), "stencil_apply");
  if (active_isa() == Isa::avx2) return avx2::stencil_apply(g, x.data(), y.data(), diag, off);
  scalar::stencil_apply(g, x.data(), y.data(), diag, off);
}

double psor_half_sweep(Grid2 g, std::span<double> f, std::span<const std::uint8_t> obstacle, int color,
                       double omega, double diag, double off, double lower) {
  // The AVX2 path reads four obstacle bytes at a time; the padded size covers that.
  check(f.size() == g.size() && obstacle.size() >= g.size(), "psor_half_sweep");
  if (active_isa() == Isa::avx2)
    return avx2::psor_half_sweep(g, f.data(), obstacle.data(), color, omega, diag, off, lower);
  return scalar::psor_half_sweep(g, f.data(), obstacle.data(), color, omega, diag, off, lower);
}

double edge_energy(Grid2 g, std::span<const double> f) {
  check(f.size() == g.size(), "edge_energy");
  if (active_isa() == Isa::avx2) return avx2::edge_energy(g, f.data());
  return scalar::edge_energy(g, f.data());
}

double dot(std::span<const double> a, std::span<const double> b) {
  check(a.size() == b.size(), "dot");
  if (active_isa() == Isa::avx2) return avx2::dot(a.data(), b.data(), a.size());
  return scalar::dot(a.data(), b.data(), a.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  check(x.size() == y.size(), "axpy");
  if (active_isa() == Isa::avx2) return avx2::axpy(a, x.data(), y.data(), x.size());
  scalar::axpy(a, x.data(), y.data(), x.size());
}

}  // namespace gffc::kernels
