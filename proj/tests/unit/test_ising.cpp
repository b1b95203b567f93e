#include <doctest.h>

#include <array>
#include <cmath>
#include <map>

#include "gffc/conditioner.hpp"
#include "gffc/errors.hpp"
#include "gffc/ising_bridge.hpp"
#include "gffc/rng.hpp"

using namespace gffc;

namespace {
std::shared_ptr<const ConditionedModel> clamp_model(int n, double R, BoundaryCondition bc) {
  const auto dom = make_box_domain(2, n);
  return std::make_shared<const ConditionedModel>(
      build_model(FieldParams::make(1, 1.0), dom, AvoidanceSpec::interval(-R, R), RegionKind::box, bc));
}
}  // namespace

TEST_CASE("constant field gives homogeneous couplings") {
  const auto dom = make_box_domain(2, 6);
  auto s = FieldState::zeros(FieldParams::make(1, 1.0), dom);
  for (auto& v : s.values) v = -3.0;
  const auto m = from_field(s, 3.0, 3.0);
  for (double J : m.J) CHECK(J == 9.0);
  for (auto sp : m.spins) CHECK(sp == -1);
  s.values[4] = 2.5;
  CHECK_THROWS_AS(from_field(s, 3.0, 3.0), ConstraintError);
}

TEST_CASE("couplings of conditioned draws") {
  const double R = 3.0;
  auto model = clamp_model(8, R, BoundaryCondition::parse("clamp:3"));
  std::vector<std::vector<double>> runs;
  for (int rep = 0; rep < 2; ++rep) {
    ConditionedChain c(model, 17);
    for (int t = 0; t < 50; ++t) c.sweep();
    const auto m = from_field(c.chain().state, R, R);
    CHECK(m.min_coupling() >= R * R);
    runs.push_back(m.J);
  }
  CHECK(runs[0] == runs[1]);

  auto ann = clamp_model(8, R, BoundaryCondition::parse("annulus:3"));
  ConditionedChain c(ann, 5);
  for (int t = 0; t < 50; ++t) c.sweep();
  const auto m = from_field(c.chain().state, Box::make(2, 8), R);
  CHECK(m.box.side == 9);
  CHECK(m.min_coupling() >= R * R);
}

TEST_CASE("independent spins at vanishing coupling") {
  auto m = IsingInstance::constant(Box::make(2, 8), 1e-6, IsingBoundary::free);
  const auto r = glauber_magnetization(m, {20000, 100, 3});
  CHECK(std::abs(r.m0.mean) < 4 * r.m0.se);
}

TEST_CASE("one free site among plus neighbours") {
  auto m = IsingInstance::constant(Box::make(2, 1), 0.5, IsingBoundary::plus);
  REQUIRE(m.box.size == 1);
  CHECK(heat_bath_plus(m, 0) == doctest::Approx((1 + std::tanh(2.0)) / 2));
  const auto r = glauber_magnetization(m, {200000, 10, 9});
  CHECK(std::abs(r.m0.mean - std::tanh(2.0)) < 4 * r.m0.se);
  CHECK(std::tanh(2.0) == doctest::Approx(0.9640).epsilon(1e-4));
}

TEST_CASE("deep ordered phase with plus boundary") {
  auto m = IsingInstance::constant(Box::make(2, 32), 9.0, IsingBoundary::plus);
  const auto r = glauber_magnetization(m, {2000, 200, 4, true});
  CHECK(r.m0.mean >= 0.99);
}

TEST_CASE("monotonicity in the couplings") {
  const Box box = Box::make(2, 16);
  const auto weak = IsingInstance::constant(box, 0.1, IsingBoundary::plus);
  const auto strong = IsingInstance::constant(box, 9.0, IsingBoundary::plus);
  const auto c = monotone_coupling_check(weak, strong, {20000, 500, 8});
  CHECK(c.holds);
  CHECK(c.upper.m0.mean - c.lower.m0.mean > 0.5);
  const auto same = monotone_coupling_check(weak, weak, {20000, 500, 8});
  CHECK(std::abs(same.z) < 4);
  CHECK_THROWS_AS(monotone_coupling_check(strong, weak, {100, 10, 1}), ConfigError);

  // homogeneous R² against couplings from a conditioned draw
  const double R = 3.0;
  auto model = clamp_model(16, R, BoundaryCondition::parse("clamp:3"));
  ConditionedChain ch(model, 21);
  for (int t = 0; t < 100; ++t) ch.sweep();
  auto field = from_field(ch.chain().state, R, R);
  auto homog = IsingInstance::constant(box, R * R, IsingBoundary::plus);
  homog.spins = field.spins;
  const auto d = monotone_coupling_check(homog, field, {3000, 300, 12});
  CHECK(d.holds);
}

TEST_CASE("plus boundary keeps the magnetisation nonnegative") {
  CounterRng rng(99, 0);
  for (int k = 0; k < 5; ++k) {
    auto m = IsingInstance::constant(Box::make(2, 6), 0.0, IsingBoundary::plus);
    const auto& nbr = m.nbr;
    for (std::size_t i = 0; i < m.box.size; ++i)
      for (int e = 0; e < 4; ++e) {
        const auto j = nbr[i * 4 + e];
        if (j < 0 || std::size_t(j) > i) {
          const double J = 0.6 * rng.uniform();
          m.J[i * 4 + e] = J;
          if (j >= 0) m.J[std::size_t(j) * 4 + (e ^ 1)] = J;
        }
      }
    for (auto& s : m.spins) s = rng.uniform() < 0.5 ? 1 : -1;
    const auto r = glauber_magnetization(m, {20000, 200, std::uint64_t(k)});
    CHECK(r.m0.mean >= -4 * r.m0.se);
  }
}

TEST_CASE("2x2 heat bath: exact detailed balance and empirical transitions") {
  auto m = IsingInstance::constant(Box::make_side(2, 2), 0.0, IsingBoundary::plus);
  CounterRng rng(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (int e = 0; e < 4; ++e) {
      const auto j = m.nbr[i * 4 + e];
      if (j < 0 || std::size_t(j) > i) {
        const double J = 0.2 + 0.6 * rng.uniform();
        m.J[i * 4 + e] = J;
        if (j >= 0) m.J[std::size_t(j) * 4 + (e ^ 1)] = J;
      }
    }
  m.validate();
  auto set = [&](IsingInstance& x, int code) {
    for (int i = 0; i < 4; ++i) x.spins[i] = (code >> i) & 1 ? 1 : -1;
  };
  auto code_of = [](const IsingInstance& x) {
    int c = 0;
    for (int i = 0; i < 4; ++i) c |= (x.spins[i] > 0) << i;
    return c;
  };
  // Boltzmann weights
  std::array<double, 16> pi{};
  double Z = 0;
  for (int c = 0; c < 16; ++c) {
    set(m, c);
    double e = 0;
    for (std::size_t i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) {
        const auto j = m.nbr[i * 4 + k];
        if (j < 0) e += m.J[i * 4 + k] * m.spins[i];
        else if (std::size_t(j) > i) e += m.J[i * 4 + k] * m.spins[i] * m.spins[std::size_t(j)];
      }
    pi[c] = std::exp(e);
    Z += pi[c];
  }
  for (auto& p : pi) p /= Z;
  // Colour-class kernels by enumeration
  using Mat = std::array<std::array<double, 16>, 16>;
  auto colour_kernel = [&](int color) {
    Mat P{};
    for (int c = 0; c < 16; ++c) {
      set(m, c);
      std::array<double, 4> plus{};
      for (std::size_t i = 0; i < 4; ++i) plus[i] = heat_bath_plus(m, i);
      for (int c2 = 0; c2 < 16; ++c2) {
        double p = 1;
        for (std::size_t i = 0; i < 4; ++i) {
          const bool up = (c2 >> i) & 1, was = (c >> i) & 1;
          if (m.box.checker_color(i) == color) p *= up ? plus[i] : 1 - plus[i];
          else p *= up == was ? 1.0 : 0.0;
        }
        P[c][c2] = p;
      }
    }
    return P;
  };
  const Mat A = colour_kernel(0), B = colour_kernel(1);
  Mat P{};
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      for (int k = 0; k < 16; ++k) P[i][j] += 0.5 * (A[i][k] * B[k][j] + B[i][k] * A[k][j]);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) CHECK(pi[i] * P[i][j] == doctest::Approx(pi[j] * P[j][i]).epsilon(1e-12));

  std::map<std::pair<int, int>, double> count;
  std::array<double, 16> visits{};
  int prev = code_of(m);
  for (std::uint64_t t = 0; t < 400000; ++t) {
    glauber_sweep(m, 77, t);
    const int cur = code_of(m);
    count[{prev, cur}] += 1;
    visits[prev] += 1;
    prev = cur;
  }
  double worst = 0;
  for (int i = 0; i < 16; ++i) {
    if (visits[i] < 100) continue;
    for (int j = 0; j < 16; ++j) {
      const double p = P[i][j];
      const double n = count.count({i, j}) ? count[{i, j}] : 0.0;
      if (p <= 0) {
        CHECK(n == 0);
        continue;
      }
      const double se = std::sqrt(visits[i] * p * (1 - p));
      worst = std::max(worst, std::abs(n - visits[i] * p) / std::max(se, 1e-12));
    }
  }
  CHECK(worst < 5.0);
}
