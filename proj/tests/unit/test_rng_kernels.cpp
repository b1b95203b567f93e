#include <doctest.h>

#include <cmath>
#include <vector>

#include "gffc/kernels.hpp"
#include "gffc/rng.hpp"
#include "oracles.hpp"

using namespace gffc;

TEST_CASE("philox known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
  CounterRng a(7, 1, 2, 3), b(7, 1, 2, 3), c(7, 1, 2, 4);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
}

TEST_CASE("normal moments") {
  CounterRng r(11, 0);
  std::vector<double> v(200000), v2(200000);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = r.normal();
    v2[i] = v[i] * v[i];
  }
  const auto m = oracle::mean_se(v), s = oracle::mean_se(v2);
  CHECK(std::abs(m.mean) < 4 * m.se);
  CHECK(std::abs(s.mean - 1.0) < 4 * s.se);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK((u > 0.0 && u < 1.0));
  }
}

namespace {
std::vector<double> random_grid(kernels::Grid2 g, std::uint64_t seed) {
  std::vector<double> x(g.size(), 0.0);
  CounterRng r(seed, 0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) x[g.at(i, j)] = r.normal();
  return x;
}
}  // namespace

TEST_CASE("simd kernels agree with scalar reference") {
  if (!kernels::avx2::available()) return;
  for (auto [nx, ny] : {std::pair{1, 1}, {3, 5}, {7, 7}, {16, 9}, {33, 31}, {65, 64}}) {
    kernels::Grid2 g{nx, ny};
    const auto x = random_grid(g, nx * 100 + ny);
    std::vector<double> ys(g.size(), 0.0), yv(g.size(), 0.0);
    kernels::scalar::stencil_apply(g, x.data(), ys.data(), 4.2, 1.1);
    kernels::avx2::stencil_apply(g, x.data(), yv.data(), 4.2, 1.1);
    CHECK(ys == yv);

    std::vector<std::uint8_t> obs(g.size(), 0);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) obs[g.at(i, j)] = (i * 7 + j * 3) % 5 == 0;
    auto fs = x, fv = x;
    for (int sweep = 0; sweep < 5; ++sweep)
      for (int color = 0; color < 2; ++color) {
        const double ms = kernels::scalar::psor_half_sweep(g, fs.data(), obs.data(), color, 1.7, 4.0, 1.0, 0.3);
        const double mv = kernels::avx2::psor_half_sweep(g, fv.data(), obs.data(), color, 1.7, 4.0, 1.0, 0.3);
        CHECK(ms == mv);
      }
    CHECK(fs == fv);

    const double es = kernels::scalar::edge_energy(g, x.data());
    const double ev = kernels::avx2::edge_energy(g, x.data());
    CHECK(ev == doctest::Approx(es).epsilon(1e-13));
    const double ds = kernels::scalar::dot(x.data(), ys.data(), x.size());
    const double dv = kernels::avx2::dot(x.data(), ys.data(), x.size());
    CHECK(dv == doctest::Approx(ds).epsilon(1e-12));
    auto as = ys, av = ys;
    kernels::scalar::axpy(0.37, x.data(), as.data(), x.size());
    kernels::avx2::axpy(0.37, x.data(), av.data(), x.size());
    CHECK(as == av);
  }
}

TEST_CASE("edge energy equals quadratic form") {
  kernels::Grid2 g{9, 6};
  const auto x = random_grid(g, 5);
  std::vector<double> y(g.size(), 0.0);
  kernels::stencil_apply(g, x, y, 4.0, 1.0);
  CHECK(kernels::edge_energy(g, x) == doctest::Approx(kernels::dot(x, y)).epsilon(1e-12));
}

TEST_CASE("isa switch") {
  const auto before = kernels::active_isa();
  kernels::set_isa(kernels::Isa::scalar);
  CHECK(kernels::active_isa() == kernels::Isa::scalar);
  kernels::set_isa(before);
}
