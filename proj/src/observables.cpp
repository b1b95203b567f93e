#include "gffc/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "gffc/errors.hpp"

namespace gffc {

double log_n(int n) {
  if (n < 2) throw ConfigError("log n needs n >= 2");
  return std::log(double(n));
}

namespace {

Estimate estimate(std::span<const double> v, bool correlated) {
  return correlated && v.size() >= 20 ? batch_means(v) : mean_se(v);
}

double quantile(std::vector<double> v, double q) {
  const std::size_t k = std::min(v.size() - 1, std::size_t(q * double(v.size())));
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(k), v.end());
  return v[k];
}

void classify(const double* v, int N, SignCounts& c) {
  bool pos = true, neg = true, zero = false;
  for (int k = 0; k < N; ++k) {
    pos = pos && v[k] > 0;
    neg = neg && v[k] < 0;
    zero = zero || v[k] == 0.0;
  }
  if (zero) ++c.zero;
  else if (pos) ++c.positive;
  else if (neg) ++c.negative;
  else ++c.mixed;
}

double vnorm(const double* v, int N) {
  double s = 0;
  for (int k = 0; k < N; ++k) s += v[k] * v[k];
  return std::sqrt(s);
}

int scalar_sign(double v) { return (v > 0) - (v < 0); }

}  // namespace

NormProfile norm_profile(std::span<const FieldState> draws, std::span<const std::size_t> probes, double beta,
                         bool correlated) {
  if (draws.empty()) throw ConfigError("norm profile of an empty stream");
  const auto& dom = *draws.front().domain;
  NormProfile out;
  out.log_n = log_n(dom.n());
  out.beta = beta;
  out.draws = draws.size();
  for (std::size_t x : probes) {
    if (x >= dom.box.size || !dom.in_region(x)) throw ConfigError("probe site outside D_n");
    std::vector<double> v;
    v.reserve(draws.size());
    for (const auto& s : draws) v.push_back(s.norm(x) / out.log_n);
    ProfileEntry e;
    e.site = x;
    e.x = dom.box.coord(x);
    e.mean = estimate(v, correlated);
    e.q10 = quantile(v, 0.1);
    e.q50 = quantile(v, 0.5);
    e.q90 = quantile(v, 0.9);
    const double lo = e.mean.mean - 1.96 * e.mean.se, hi = e.mean.mean + 1.96 * e.mean.se;
    e.outside_window = hi <= 2 - beta || lo >= 2 + beta;
    out.sites.push_back(e);
  }
  return out;
}

bool hole_scan(const FieldState& s, std::span<const double> t, const Coord& center, double radius,
               const AvoidanceSpec& target) {
  const Box& box = s.domain->box;
  const int N = s.params.N;
  if (int(t.size()) != N) throw ConfigError("shift must have N coordinates");
  const int r = int(std::floor(radius));
  for (int k = 0; k < box.d; ++k)
    if (center[k] - r < box.lo || center[k] + r > box.hi) throw ConfigError("scan ball leaves Lambda_n");
  std::array<double, kMaxSpin> v{};
  Coord x{};
  std::array<int, kMaxDim> off{};
  for (int k = 0; k < box.d; ++k) off[k] = -r;
  while (true) {
    double r2 = 0;
    for (int k = 0; k < box.d; ++k) r2 += double(off[k]) * off[k];
    if (r2 <= radius * radius) {
      for (int k = 0; k < box.d; ++k) x[k] = center[k] + off[k];
      const std::size_t i = box.index(x);
      for (int c = 0; c < N; ++c) v[c] = s.at(i, c) + t[c];
      if (target.forbids(v.data(), N)) return false;
    }
    int k = 0;
    while (k < box.d && ++off[k] > r) off[k++] = -r;
    if (k == box.d) break;
  }
  return true;
}

GridAnalyzer::GridAnalyzer(DomainPtr dom, const FieldParams& p, MesoGrid grid)
    : dom_(std::move(dom)), p_(p), grid_(std::move(grid)), ext_(dom_, p_, grid_.skeleton_mask) {}

GridView GridAnalyzer::view(const FieldState& s) const {
  if (s.domain->box.size != dom_->box.size || s.params.N != p_.N) throw ConfigError("draw does not match the grid");
  GridView v;
  v.N = p_.N;
  v.log_n = log_n(dom_->n());
  auto h = ext_.extend(s);
  fill_center_values(h, grid_, v.N);
  v.h = std::move(h.center_values);
  v.field.resize(grid_.boxes.size() * v.N);
  for (std::size_t b = 0; b < grid_.boxes.size(); ++b)
    for (int c = 0; c < v.N; ++c) v.field[b * v.N + c] = s.at(grid_.boxes[b].center_index, c);
  v.remainder = s.values;
  for (std::size_t k = 0; k < v.remainder.size(); ++k) v.remainder[k] -= h.values[k];
  return v;
}

BoxCounters GridAnalyzer::counters(const FieldState& s, const CounterParams& c) const { return counters(view(s), c); }

BoxCounters GridAnalyzer::counters(const GridView& v, const CounterParams& c) const {
  const int N = v.N;
  const Box& box = dom_->box;
  if (!c.s.empty() && int(c.s.size()) != N) throw ConfigError("window centre must have N coordinates");
  const double low_level = (2 - c.beta) * v.log_n, high_level = c.eta * v.log_n;
  BoxCounters out;
  out.boxes = grid_.boxes.size();
  for (std::size_t b = 0; b < out.boxes; ++b) {
    const double* h = &v.h[b * N];
    const double* f = &v.field[b * N];
    if (vnorm(h, N) < low_level) ++out.low;
    if (vnorm(f, N) < low_level) ++out.field_low;
    classify(h, N, out.h_sign);
    classify(f, N, out.field_sign);
    bool in = true;
    for (int k = 0; k < N; ++k) {
      const double r = h[k] / v.log_n, s0 = c.s.empty() ? 0.0 : c.s[k];
      in = in && r > s0 - c.delta && r < s0 + c.delta;
    }
    out.window += in;
    const Coord& xc = grid_.boxes[b].center;
    for (const Coord& y : c.T) {
      Coord z = xc;
      for (int k = 0; k < box.d; ++k) z[k] += y[k];
      if (!box.contains(z)) throw ConfigError("offset set T leaves Lambda_n");
      if (vnorm(&v.remainder[box.index(z) * N], N) > high_level) {
        ++out.high;
        break;
      }
    }
  }
  return out;
}

BoxCounters box_counters(const FieldState& s, const MesoGrid& grid, const CounterParams& c) {
  return GridAnalyzer(s.domain, s.params, grid).counters(s, c);
}

PositiveBoxStats positive_box_fraction(std::span<const BoxCounters> counters) {
  if (counters.empty()) throw ConfigError("no draws");
  PositiveBoxStats out;
  out.draws = counters.size();
  std::vector<double> f;
  double m1 = 0, m2 = 0;
  for (const auto& c : counters) {
    if (c.boxes == 0) throw ConfigError("empty grid");
    f.push_back(double(c.h_sign.positive) / double(c.boxes));
    m1 += double(c.h_sign.positive);
    m2 += double(c.h_sign.positive) * double(c.h_sign.positive);
  }
  out.fraction = mean_se(f);
  m1 /= double(counters.size());
  m2 /= double(counters.size());
  out.second_moment_ratio = m1 > 0 ? m2 / (m1 * m1) : INFINITY;
  return out;
}

PositiveBoxStats positive_box_fraction(std::span<const FieldState> draws, const MesoGrid& grid) {
  if (draws.empty()) throw ConfigError("no draws");
  GridAnalyzer an(draws.front().domain, draws.front().params, grid);
  std::vector<BoxCounters> c;
  for (const auto& s : draws) c.push_back(an.counters(s, {}));
  return positive_box_fraction(c);
}

double orthant_probability(double rho) { return 0.25 + std::asin(rho) / (2 * std::numbers::pi); }

double center_correlation(const GreenOperator& G, const MesoGrid& grid, const FieldParams& p, std::size_t a,
                          std::size_t b) {
  const double gb = box_center_green(G.domain().d(), grid.box_side, p);
  const std::size_t xa = grid.boxes.at(a).center_index, xb = grid.boxes.at(b).center_index;
  if (a == b) return 1.0;
  const double va = G.value(xa, xa) - gb, vb = G.value(xb, xb) - gb;
  return G.value(xa, xb) / std::sqrt(va * vb);
}

SignReport grid_sign_and_interface(const GridView& v, const MesoGrid& grid, double beta) {
  if (v.N != 1) throw ConfigError("sign report needs N = 1");
  SignReport r;
  r.boxes = grid.boxes.size();
  for (std::size_t b = 0; b < r.boxes; ++b) {
    r.L_pos += v.field[b] > 0;
    r.L_neg += v.field[b] < 0;
    r.N_pos += v.h[b] > 0;
    r.N_neg += v.h[b] < 0;
  }
  r.sign = scalar_sign(double(r.L_pos) - double(r.L_neg));
  r.tie = r.sign == 0;
  for (std::size_t e = 0; e < grid.adjacency.size(); ++e) {
    const auto& a = grid.adjacency[e];
    if (scalar_sign(v.h[a.a]) * scalar_sign(v.h[a.b]) < 0) r.interface.push_back(e);
  }
  r.minority = r.sign > 0 ? r.N_neg : r.sign < 0 ? r.N_pos : std::min(r.N_pos, r.N_neg);
  r.minority_fraction = r.boxes ? double(r.minority) / double(r.boxes) : 0.0;
  const double level = (2 - beta) * v.log_n;
  for (std::size_t b = 0; b < r.boxes; ++b)
    if (r.sign != 0 && scalar_sign(v.field[b]) == r.sign && std::abs(v.field[b]) >= level) r.good_centers.push_back(b);
  return r;
}

SignReport grid_sign_and_interface(const FieldState& s, const MesoGrid& grid, double beta) {
  if (s.params.N != 1) throw ConfigError("sign report needs N = 1");
  return grid_sign_and_interface(GridAnalyzer(s.domain, s.params, grid).view(s), grid, beta);
}

std::vector<SpinCorrelation> spin_correlation(std::span<const FieldState> draws,
                                              std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                              bool correlated) {
  if (draws.empty()) throw ConfigError("spin correlation of an empty stream");
  const auto& dom = *draws.front().domain;
  const int N = draws.front().params.N;
  std::vector<SpinCorrelation> out;
  for (auto [x, y] : pairs) {
    if (!dom.in_region(x) || !dom.in_region(y)) throw ConfigError("pair outside D_n");
    SpinCorrelation sc{x, y, {}, 0};
    std::vector<double> v;
    for (const auto& s : draws) {
      const double nx = s.norm(x), ny = s.norm(y);
      if (nx == 0.0 || ny == 0.0) {
        ++sc.skipped;
        continue;
      }
      if (x == y) {
        v.push_back(1.0);
        continue;
      }
      double dot = 0;
      for (int c = 0; c < N; ++c) dot += s.at(x, c) * s.at(y, c);
      v.push_back(std::clamp(dot / (nx * ny), -1.0, 1.0));
    }
    if (!v.empty()) sc.value = estimate(v, correlated);
    out.push_back(sc);
  }
  return out;
}

void write_counters_csv(std::ostream& os, std::span<const BoxCounters> counters, int grid_id, bool header) {
  if (header) os << "draw,grid,counter,value\n";
  for (std::size_t i = 0; i < counters.size(); ++i) {
    const auto& c = counters[i];
    const std::pair<const char*, std::size_t> rows[] = {
        {"boxes", c.boxes},         {"N_low", c.low},
        {"M_high", c.high},         {"N_pos", c.h_sign.positive},
        {"N_neg", c.h_sign.negative}, {"N_zero", c.h_sign.zero},
        {"N_mixed", c.h_sign.mixed}, {"L_pos", c.field_sign.positive},
        {"L_neg", c.field_sign.negative}, {"L_low", c.field_low},
        {"N_window", c.window}};
    for (const auto& [name, value] : rows) os << i << ',' << grid_id << ',' << name << ',' << value << '\n';
  }
}

nlohmann::json to_json(const BoxCounters& c) {
  auto signs = [](const SignCounts& s) {
    return nlohmann::json{{"positive", s.positive}, {"negative", s.negative}, {"zero", s.zero}, {"mixed", s.mixed}};
  };
  return {{"boxes", c.boxes},           {"low", c.low},       {"high", c.high},
          {"h_sign", signs(c.h_sign)},  {"field_sign", signs(c.field_sign)},
          {"field_low", c.field_low},   {"window", c.window}};
}

nlohmann::json to_json(const NormProfile& p) {
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& e : p.sites)
    sites.push_back({{"site", e.site},
                     {"x", std::vector<int>(e.x.begin(), e.x.end())},
                     {"mean", e.mean.mean},
                     {"se", e.mean.se},
                     {"q10", e.q10},
                     {"q50", e.q50},
                     {"q90", e.q90},
                     {"outside_window", e.outside_window}});
  return {{"log_n", p.log_n}, {"beta", p.beta}, {"draws", p.draws}, {"sites", sites}};
}

nlohmann::json to_json(const SignReport& r) {
  return {{"sign", r.sign},         {"tie", r.tie},           {"boxes", r.boxes},
          {"L_pos", r.L_pos},       {"L_neg", r.L_neg},       {"N_pos", r.N_pos},
          {"N_neg", r.N_neg},       {"interface_edges", r.interface.size()},
          {"minority", r.minority}, {"minority_fraction", r.minority_fraction},
          {"good_centers", r.good_centers.size()}};
}

}  // namespace gffc
