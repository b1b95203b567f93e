#include "gffc/ising_bridge.hpp"

#include <algorithm>
#include <cmath>

#include "gffc/errors.hpp"
#include "gffc/rng.hpp"

namespace gffc {

IsingInstance IsingInstance::constant(const Box& box, double J, IsingBoundary bc) {
  if (!(J >= 0)) throw ConfigError("couplings must be nonnegative");
  IsingInstance m;
  m.box = box;
  m.bc = bc;
  m.J.assign(box.size * 2 * box.d, J);
  m.spins.assign(box.size, 1);
  m.nbr = box.neighbor_table();
  return m;
}

void IsingInstance::validate() {
  const int deg = 2 * box.d;
  if (J.size() != box.size * deg || spins.size() != box.size) throw ConfigError("Ising instance has wrong sizes");
  if (nbr.size() != box.size * deg) nbr = box.neighbor_table();
  for (std::size_t i = 0; i < box.size; ++i)
    for (int e = 0; e < deg; ++e) {
      if (!(J[i * deg + e] >= 0)) throw ConfigError("negative coupling");
      const auto j = nbr[i * deg + e];
      if (j >= 0 && J[i * deg + e] != J[std::size_t(j) * deg + (e ^ 1)]) throw ConfigError("couplings not symmetric");
    }
  for (auto s : spins)
    if (s != 1 && s != -1) throw ConfigError("spins must be +-1");
}

bool IsingInstance::edgewise_leq(const IsingInstance& o) const {
  if (o.J.size() != J.size()) return false;
  for (std::size_t k = 0; k < J.size(); ++k)
    if (J[k] > o.J[k]) return false;
  return true;
}

double IsingInstance::min_coupling() const {
  return J.empty() ? 0.0 : *std::min_element(J.begin(), J.end());
}

namespace {

IsingInstance couple(const FieldState& s, const Box& inner, double R, auto&& outside_norm) {
  if (s.params.N != 1) throw ConfigError("Ising bridge needs a scalar field");
  const Box& big = s.domain->box;
  const int d = inner.d, deg = 2 * d;
  const double g = s.params.g;
  IsingInstance m;
  m.box = inner;
  m.bc = IsingBoundary::plus;
  m.J.assign(inner.size * deg, 0.0);
  m.spins.assign(inner.size, 1);
  m.nbr = inner.neighbor_table();
  const auto& nbr = m.nbr;
  auto psi = [&](std::size_t i) { return s.values[big.index(inner.coord(i))]; };
  for (std::size_t i = 0; i < inner.size; ++i) {
    const double v = psi(i);
    if (std::abs(v) < R) throw ConstraintError("field below the constraint level inside the box");
    m.spins[i] = v > 0 ? 1 : -1;
    for (int k = 0; k < d; ++k)
      for (int sgn = 0; sgn < 2; ++sgn) {
        const int e = 2 * k + sgn;
        const auto j = nbr[i * deg + e];
        double other;
        if (j >= 0) {
          other = std::abs(psi(std::size_t(j)));
        } else {
          Coord y = inner.coord(i);
          y[k] += sgn ? 1 : -1;
          other = outside_norm(y);
        }
        m.J[i * deg + e] = g * std::abs(v) * other;
      }
  }
  return m;
}

}  // namespace

IsingInstance from_field(const FieldState& s, double R, double boundary_norm) {
  if (!(boundary_norm >= 0)) throw ConfigError("boundary norm must be nonnegative");
  return couple(s, s.domain->box, R, [&](const Coord&) { return boundary_norm; });
}

IsingInstance from_field(const FieldState& s, const Box& inner, double R) {
  const Box& big = s.domain->box;
  if (big.d != inner.d || inner.lo <= big.lo || inner.hi >= big.hi) throw ConfigError("inner box must sit strictly inside");
  return couple(s, inner, R, [&](const Coord& y) {
    const double v = s.values[big.index(y)];
    if (!(v > 0)) throw ConstraintError("outer field is not positive next to the box");
    return v;
  });
}

double heat_bath_plus(const IsingInstance& m, std::size_t i) {
  const int deg = 2 * m.box.d;
  const auto& nbr = m.nbr;
  double h = 0.0;
  for (int e = 0; e < deg; ++e) {
    const auto j = nbr[i * deg + e];
    if (j >= 0) h += m.J[i * deg + e] * m.spins[std::size_t(j)];
    else if (m.bc == IsingBoundary::plus) h += m.J[i * deg + e];
  }
  // 1 / (1 + exp(-2h))
  return 0.5 * (1.0 + std::tanh(h));
}

void glauber_sweep(IsingInstance& m, std::uint64_t seed, std::uint64_t sweep) {
  const auto lo = std::uint32_t(sweep), hi = std::uint32_t(sweep >> 32);
  CounterRng order(seed, 0xFFFFFFFFu, lo, (hi << 2) | 1u);
  const int first = order.uniform() < 0.5 ? 0 : 1;
  for (int pass = 0; pass < 2; ++pass) {
    const int color = first ^ pass;
    for (std::size_t i = 0; i < m.box.size; ++i) {
      if (m.box.checker_color(i) != color) continue;
      CounterRng r(seed, std::uint32_t(i), lo, hi << 2);
      m.spins[i] = r.uniform() < heat_bath_plus(m, i) ? 1 : -1;
    }
  }
}

Magnetization glauber_magnetization(IsingInstance m, const GlauberOptions& opt) {
  m.validate();
  if (opt.sweeps <= opt.burn_in) throw ConfigError("sweeps must exceed burn-in");
  if (opt.start_all_plus) std::fill(m.spins.begin(), m.spins.end(), std::int8_t(1));
  const std::size_t o = m.box.origin();
  std::vector<double> trace;
  trace.reserve(opt.sweeps - opt.burn_in);
  for (std::uint64_t t = 0; t < opt.sweeps; ++t) {
    glauber_sweep(m, opt.seed, t);
    if (t >= opt.burn_in) trace.push_back(m.spins[o]);
  }
  Magnetization out;
  out.samples = trace.size();
  out.m0 = batch_means(trace);
  out.tau = integrated_autocorr_time(trace);
  return out;
}

MonotoneCheck monotone_coupling_check(IsingInstance weak, IsingInstance strong,
                                      const GlauberOptions& opt) {
  if (weak.bc != IsingBoundary::plus || strong.bc != IsingBoundary::plus)
    throw ConfigError("monotonicity in the couplings needs plus boundary");
  weak.validate();
  strong.validate();
  if (!weak.edgewise_leq(strong)) throw ConfigError("couplings are not ordered edgewise");
  MonotoneCheck c;
  c.lower = glauber_magnetization(weak, opt);
  GlauberOptions o2 = opt;
  o2.seed = derive_seed(opt.seed, 1);
  c.upper = glauber_magnetization(strong, o2);
  const double se = std::hypot(c.lower.m0.se, c.upper.m0.se);
  const double diff = c.lower.m0.mean - c.upper.m0.mean;
  c.z = se > 0 ? diff / se : (diff > 0 ? INFINITY : 0.0);
  c.holds = diff <= 4 * se;
  return c;
}

nlohmann::json to_json(const Magnetization& m) {
  return {{"mean", m.m0.mean}, {"se", m.m0.se}, {"tau", m.tau}, {"samples", m.samples}};
}

}  // namespace gffc
