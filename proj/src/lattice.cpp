#include "gffc/lattice.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "gffc/errors.hpp"

namespace gffc {

Box Box::make(int d, int n) {
  if (d < 1 || d > kMaxDim) throw ConfigError("dimension must be in 1.." + std::to_string(kMaxDim));
  if (n < 1) throw ConfigError("n must be >= 1");
  Box b;
  b.d = d;
  b.n = n;
  b.half = n / 2;
  b.side = 2 * b.half + 1;
  b.lo = -b.half;
  b.hi = b.half;
  b.size = 1;
  for (int k = 0; k < kMaxDim; ++k) {
    b.stride[k] = k < d ? b.size : 0;
    if (k < d) b.size *= std::size_t(b.side);
  }
  return b;
}

Box Box::make_side(int d, int side) {
  if (side < 1) throw ConfigError("side must be >= 1");
  Box b = make(d, side - 1);
  b.side = side;
  b.lo = -(side / 2);
  b.hi = b.lo + side - 1;
  b.half = b.hi;
  b.size = 1;
  for (int k = 0; k < kMaxDim; ++k) {
    b.stride[k] = k < d ? b.size : 0;
    if (k < d) b.size *= std::size_t(side);
  }
  return b;
}

std::size_t Box::index(const Coord& x) const {
  std::size_t i = 0;
  for (int k = 0; k < d; ++k) i += std::size_t(x[k] - lo) * stride[k];
  return i;
}

Coord Box::coord(std::size_t i) const {
  Coord x{};
  for (int k = 0; k < d; ++k) {
    x[k] = int(i % std::size_t(side)) + lo;
    i /= std::size_t(side);
  }
  return x;
}

bool Box::contains(const Coord& x) const {
  for (int k = 0; k < d; ++k)
    if (x[k] < lo || x[k] > hi) return false;
  for (int k = d; k < kMaxDim; ++k)
    if (x[k] != 0) return false;
  return true;
}

std::vector<std::int64_t> Box::neighbor_table() const {
  std::vector<std::int64_t> t(size * std::size_t(2 * d));
  for (std::size_t i = 0; i < size; ++i) {
    const Coord x = coord(i);
    for (int k = 0; k < d; ++k) {
      t[i * 2 * d + 2 * k] = x[k] > lo ? std::int64_t(i - stride[k]) : -1;
      t[i * 2 * d + 2 * k + 1] = x[k] < hi ? std::int64_t(i + stride[k]) : -1;
    }
  }
  return t;
}

bool Box::touches_outer_boundary(std::size_t i) const {
  const Coord x = coord(i);
  for (int k = 0; k < d; ++k)
    if (x[k] == lo || x[k] == hi) return true;
  return false;
}

int Box::checker_color(std::size_t i) const {
  const Coord x = coord(i);
  int s = 0;
  for (int k = 0; k < d; ++k) s += x[k] - lo;
  return s & 1;
}

namespace {
double parse_number(std::string_view s) {
  std::string tmp(s);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(tmp, &used);
  } catch (...) {
    throw ConfigError("bad number '" + tmp + "'");
  }
  if (used != tmp.size()) throw ConfigError("bad number '" + tmp + "'");
  return v;
}
}  // namespace

Shape Shape::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::string_view rest = colon == std::string_view::npos ? "" : text.substr(colon + 1);
  Shape s;
  if (name == "full" || name == "box") {
    s.kind = ShapeKind::full;
  } else if (name == "disc") {
    s.kind = ShapeKind::disc;
    s.a = parse_number(rest);
  } else if (name == "square") {
    s.kind = ShapeKind::square;
    s.a = parse_number(rest);
  } else if (name == "annulus") {
    s.kind = ShapeKind::annulus;
    const auto comma = rest.find(',');
    if (comma == std::string_view::npos) throw ConfigError("annulus needs 'annulus:r_in,r_out'");
    s.a = parse_number(rest.substr(0, comma));
    s.b = parse_number(rest.substr(comma + 1));
    if (s.a > s.b) throw ConfigError("annulus needs r_in <= r_out");
  } else {
    throw ConfigError("unknown shape '" + std::string(text) + "'");
  }
  if (s.a < 0 || s.b < 0) throw ConfigError("shape parameters must be nonnegative");
  return s;
}

std::string Shape::str() const {
  std::ostringstream o;
  o.precision(17);
  switch (kind) {
    case ShapeKind::full: return "full";
    case ShapeKind::disc: o << "disc:" << a; break;
    case ShapeKind::square: o << "square:" << a; break;
    case ShapeKind::annulus: o << "annulus:" << a << "," << b; break;
  }
  return o.str();
}

double Shape::iota() const {
  switch (kind) {
    case ShapeKind::full: return 0.0;
    case ShapeKind::disc: return 0.5 - a;
    case ShapeKind::square: return 0.5 * (1.0 - a);
    case ShapeKind::annulus: return 0.5 - b;
  }
  return 0.0;
}

bool Shape::contains(const Coord& x, int d, int n) const {
  constexpr double eps = 1e-9;
  double r2 = 0.0, mx = 0.0;
  for (int k = 0; k < d; ++k) {
    r2 += double(x[k]) * x[k];
    mx = std::max(mx, double(std::abs(x[k])));
  }
  switch (kind) {
    case ShapeKind::full: return true;
    case ShapeKind::disc: return r2 <= (a * n) * (a * n) + eps;
    case ShapeKind::square: return mx <= a * n / 2.0 + eps;
    case ShapeKind::annulus: return r2 + eps >= (a * n) * (a * n) && r2 <= (b * n) * (b * n) + eps;
  }
  return false;
}

namespace {
LatticeDomain fill(const Box& box, const Shape& shape) {
  LatticeDomain dom;
  dom.box = box;
  dom.shape = shape;
  dom.iota = shape.iota();
  dom.region_mask.assign(box.size, 0);
  for (std::size_t i = 0; i < box.size; ++i) {
    if (shape.contains(box.coord(i), box.d, box.n)) {
      dom.region_mask[i] = 1;
      dom.region.push_back(i);
    }
  }
  return dom;
}
}  // namespace

LatticeDomain build_domain(int d, int n, const Shape& shape) {
  if (n < 3) throw ConfigError("n must be >= 3");
  if (shape.kind == ShapeKind::full) throw ConfigError("shape 'full' has iota = 0; use box_domain");
  if (!(shape.iota() > 0.0))
    throw ConfigError("shape " + shape.str() + " touches the boundary of Lambda (iota <= 0)");
  LatticeDomain dom = fill(Box::make(d, n), shape);
  if (dom.region.empty()) throw ConfigError("D_n is empty for " + shape.str() + " at n=" + std::to_string(n));
  const int need = int(std::floor(dom.iota * n / 2.0));
  for (std::size_t i : dom.region) {
    const Coord x = dom.box.coord(i);
    int mx = 0;
    for (int k = 0; k < d; ++k) mx = std::max(mx, std::abs(x[k]));
    if (dom.box.half + 1 - mx < need) throw ConfigError("D_n too close to the outer boundary");
  }
  return dom;
}

LatticeDomain box_domain(int d, int n) { return fill(Box::make(d, n), Shape{}); }

DomainPtr make_side_domain(int d, int side) {
  return std::make_shared<const LatticeDomain>(fill(Box::make_side(d, side), Shape{}));
}

DomainPtr make_domain(int d, int n, const Shape& shape) {
  return std::make_shared<const LatticeDomain>(build_domain(d, n, shape));
}
DomainPtr make_box_domain(int d, int n) { return std::make_shared<const LatticeDomain>(box_domain(d, n)); }

int closest_even(double v) {
  const double lo = 2.0 * std::floor(v / 2.0);
  const double hi = lo + 2.0;
  return int(v - lo < hi - v ? lo : hi);
}

std::vector<std::size_t> box_sites(const Box& box, const Coord& c, int L) {
  const int h = L / 2;
  std::vector<std::size_t> out;
  Coord off{};
  for (int k = 0; k < box.d; ++k) off[k] = -h;
  while (true) {
    Coord x{};
    for (int k = 0; k < box.d; ++k) x[k] = c[k] + off[k];
    if (box.contains(x)) out.push_back(box.index(x));
    int k = 0;
    while (k < box.d && ++off[k] > h) off[k++] = -h;
    if (k == box.d) break;
  }
  return out;
}

MesoGrid build_mesogrid_side(const LatticeDomain& dom, int L, const Coord& x0) {
  if (L < 2 || L % 2 != 0) throw ConfigError("box side must be an even integer >= 2");
  const Box& box = dom.box;
  const int d = box.d;
  MesoGrid g;
  g.box_side = L;
  g.alpha = dom.n() > 1 ? std::log(double(L)) / std::log(double(dom.n())) : 0.0;
  for (int k = 0; k < d; ++k) g.x0[k] = ((x0[k] % L) + L) % L;
  g.skeleton_mask.assign(box.size, 0);
  const int h = L / 2;
  const std::size_t full = std::size_t(std::pow(double(L + 1), d) + 0.5);

  // First center coordinate >= -half + h congruent to x0 mod L.
  std::array<int, kMaxDim> first{}, count{};
  for (int k = 0; k < d; ++k) {
    const int lo = -box.half + h;
    int c = lo + (((g.x0[k] - lo) % L) + L) % L;
    first[k] = c;
    count[k] = c > box.half - h ? 0 : (box.half - h - c) / L + 1;
  }
  std::map<Coord, std::size_t> by_center;
  bool any = true;
  for (int k = 0; k < d; ++k) any = any && count[k] > 0;
  if (any) {
    std::array<int, kMaxDim> idx{};
    while (true) {
      Coord c{};
      for (int k = 0; k < d; ++k) c[k] = first[k] + idx[k] * L;
      const auto sites = box_sites(box, c, L);
      bool inside = sites.size() == full;
      for (std::size_t s : sites) inside = inside && dom.in_region(s);
      if (inside) {
        by_center[c] = g.boxes.size();
        g.boxes.push_back({c, box.index(c)});
        for (std::size_t s : sites) {
          const Coord x = box.coord(s);
          for (int k = 0; k < d; ++k)
            if (std::abs(x[k] - c[k]) == h) {
              g.skeleton_mask[s] = 1;
              break;
            }
        }
      }
      int k = 0;
      while (k < d && ++idx[k] >= count[k]) idx[k++] = 0;
      if (k == d) break;
    }
  }
  for (std::size_t i = 0; i < box.size; ++i)
    if (g.skeleton_mask[i]) g.skeleton.push_back(i);
  for (std::size_t a = 0; a < g.boxes.size(); ++a) {
    for (int k = 0; k < d; ++k) {
      Coord c = g.boxes[a].center;
      c[k] += L;
      if (auto it = by_center.find(c); it != by_center.end()) g.adjacency.push_back({a, it->second, k});
    }
  }
  g.empty = g.boxes.empty();
  return g;
}

MesoGrid build_mesogrid(const LatticeDomain& dom, double alpha, const Coord& x0) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  const int L = closest_even(std::pow(double(dom.n()), alpha));
  if (L < 2) throw ConfigError("box side n^alpha rounds below 2");
  MesoGrid g = build_mesogrid_side(dom, L, x0);
  g.alpha = alpha;
  return g;
}

nlohmann::json to_json(const LatticeDomain& dom) {
  return {{"d", dom.d()}, {"n", dom.n()}, {"side", dom.box.side}, {"shape", dom.shape.str()},
          {"iota", dom.iota}, {"region_size", dom.region.size()}};
}

nlohmann::json to_json(const MesoGrid& g, bool with_boxes) {
  nlohmann::json j = {{"alpha", g.alpha},
                      {"x0", std::vector<int>(g.x0.begin(), g.x0.end())},
                      {"box_side", g.box_side},
                      {"box_count", g.boxes.size()},
                      {"skeleton_size", g.skeleton.size()},
                      {"adjacent_pairs", g.adjacency.size()},
                      {"empty", g.empty}};
  if (with_boxes) {
    auto arr = nlohmann::json::array();
    for (const auto& b : g.boxes) arr.push_back(std::vector<int>(b.center.begin(), b.center.end()));
    j["centers"] = arr;
  }
  return j;
}

}  // namespace gffc
