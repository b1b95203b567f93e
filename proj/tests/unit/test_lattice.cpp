#include <doctest.h>

#include <cmath>
#include <numbers>
#include <queue>
#include <set>

#include "gffc/errors.hpp"
#include "gffc/lattice.hpp"

using namespace gffc;

TEST_CASE("small disc enumerates the unit ball") {
  const auto dom = build_domain(2, 4, Shape::parse("disc:0.25"));
  CHECK(dom.region.size() == 5);
  CHECK(dom.in_region(dom.box.origin()));
  CHECK(dom.box.side == 5);
}

TEST_CASE("shapes touching the boundary are rejected") {
  CHECK_THROWS_AS(build_domain(2, 8, Shape::parse("square:1.0")), ConfigError);
  CHECK_THROWS_AS(build_domain(2, 8, Shape::parse("disc:0.5")), ConfigError);
  CHECK_THROWS_AS(build_domain(2, 2, Shape::parse("disc:0.25")), ConfigError);
  CHECK_THROWS_AS(Shape::parse("blob:1"), ConfigError);
}

TEST_CASE("disc lattice point count") {
  const int n = 64;
  const auto dom = build_domain(2, n, Shape::parse("disc:0.3"));
  // Exhaustive count over a bounding square.
  const double r = 0.3 * n;
  long cnt = 0;
  for (int x = -40; x <= 40; ++x)
    for (int y = -40; y <= 40; ++y) cnt += x * x + y * y <= r * r + 1e-9;
  CHECK(long(dom.region.size()) == cnt);
  const double area = std::numbers::pi * r * r;
  CHECK(double(cnt) >= area - 4 * r);
  CHECK(double(cnt) <= area + 4 * r);
}

TEST_CASE("domain invariants") {
  for (const char* s : {"disc:0.25", "square:0.5", "annulus:0.1,0.3"}) {
    const auto dom = build_domain(2, 32, Shape::parse(s));
    const int need = int(std::floor(dom.iota * 32 / 2.0));
    for (auto i : dom.region) {
      const auto x = dom.box.coord(i);
      CHECK(dom.box.half + 1 - std::max(std::abs(x[0]), std::abs(x[1])) >= need);
    }
    if (dom.shape.kind != ShapeKind::annulus) CHECK(dom.in_region(dom.box.origin()));
  }
}

TEST_CASE("outer boundary classification") {
  const Box b = Box::make(2, 6);
  const auto t = b.neighbor_table();
  int touching = 0;
  for (std::size_t i = 0; i < b.size; ++i) {
    bool has_out = false;
    for (int k = 0; k < 4; ++k) has_out = has_out || t[i * 4 + k] < 0;
    CHECK(has_out == b.touches_outer_boundary(i));
    touching += has_out;
  }
  CHECK(touching == 4 * (b.side - 1));
}

TEST_CASE("closest even rounding") {
  CHECK(closest_even(8.0) == 8);
  CHECK(closest_even(8.9) == 8);
  CHECK(closest_even(9.0) == 10);
  CHECK(closest_even(9.1) == 10);
  CHECK(closest_even(3.0) == 4);
  CHECK(closest_even(2.99) == 2);
}

namespace {
std::size_t brute_box_count(const LatticeDomain& dom, int L, Coord x0) {
  std::size_t cnt = 0;
  const int h = L / 2;
  for (int cx = -dom.box.half; cx <= dom.box.half; ++cx)
    for (int cy = -dom.box.half; cy <= dom.box.half; ++cy) {
      if (((cx - x0[0]) % L + L) % L || ((cy - x0[1]) % L + L) % L) continue;
      bool ok = true;
      for (int dx = -h; dx <= h && ok; ++dx)
        for (int dy = -h; dy <= h && ok; ++dy) {
          const Coord x{cx + dx, cy + dy, 0};
          ok = dom.box.contains(x) && dom.in_region(dom.box.index(x));
        }
      cnt += ok;
    }
  return cnt;
}
}  // namespace

TEST_CASE("mesogrid matches brute force") {
  const auto dom = build_domain(2, 64, Shape::parse("disc:0.4"));
  for (Coord x0 : {Coord{0, 0, 0}, Coord{3, 5, 0}, Coord{-2, 7, 0}}) {
    const auto g = build_mesogrid_side(dom, 8, x0);
    CHECK(g.boxes.size() == brute_box_count(dom, 8, x0));
    for (const auto& a : g.adjacency) {
      int diff = 0, which = -1;
      for (int k = 0; k < 2; ++k)
        if (g.boxes[a.a].center[k] != g.boxes[a.b].center[k]) {
          ++diff;
          which = k;
          CHECK(std::abs(g.boxes[a.a].center[k] - g.boxes[a.b].center[k]) == 8);
        }
      CHECK(diff == 1);
      CHECK(which == a.axis);
    }
    // Skeleton equals union of inner boundaries; boxes inside D_n.
    std::vector<std::uint8_t> sk(dom.box.size, 0);
    for (const auto& b : g.boxes)
      for (auto s : box_sites(dom.box, b.center, 8)) {
        CHECK(dom.in_region(s));
        const auto x = dom.box.coord(s);
        if (std::abs(x[0] - b.center[0]) == 4 || std::abs(x[1] - b.center[1]) == 4) sk[s] = 1;
      }
    CHECK(sk == g.skeleton_mask);
  }
  const auto ga = build_mesogrid(dom, std::log(8.0) / std::log(64.0), Coord{});
  CHECK(ga.box_side == 8);
}

TEST_CASE("single small box") {
  const auto dom = build_domain(2, 8, Shape::parse("square:0.25"));
  CHECK(dom.region.size() == 9);
  const auto g = build_mesogrid_side(dom, 2, Coord{});
  REQUIRE(g.boxes.size() == 1);
  CHECK(g.boxes[0].center == Coord{0, 0, 0});
  const auto gb = build_mesogrid(dom, 0.3, Coord{});  // 8^0.3 = 1.87 -> 2
  CHECK(gb.box_side == 2);
  CHECK(gb.boxes.size() == 1);
}

TEST_CASE("translated grids differ only by boundary boxes") {
  const auto dom = build_domain(2, 96, Shape::parse("disc:0.4"));
  const auto a = build_mesogrid_side(dom, 8, Coord{1, 2, 0});
  const auto b = build_mesogrid_side(dom, 8, Coord{9, 2, 0});
  CHECK(a.boxes.size() == b.boxes.size());  // x0 canonicalised mod side
  const auto c = build_mesogrid_side(dom, 8, Coord{5, 2, 0});
  const double perimeter_boxes = 2 * std::numbers::pi * 0.4 * 96 / 8 + 4;
  CHECK(std::abs(double(a.boxes.size()) - double(c.boxes.size())) <= perimeter_boxes);
}

TEST_CASE("empty grid is flagged") {
  const auto dom = build_domain(2, 16, Shape::parse("disc:0.1"));
  const auto g = build_mesogrid_side(dom, 8, Coord{});
  CHECK(g.empty);
  CHECK(g.boxes.empty());
}

TEST_CASE("disjoint centres over offsets and coverage") {
  const int n = 64, L = 8;
  const auto dom = build_domain(2, n, Shape::parse("disc:0.35"));
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (int a = -L / 2 + 1; a < L / 2; ++a)
    for (int b = -L / 2 + 1; b < L / 2; ++b) {
      const auto g = build_mesogrid_side(dom, L, Coord{a, b, 0});
      for (const auto& bx : g.boxes) {
        seen.insert(bx.center_index);
        ++total;
      }
    }
  CHECK(seen.size() == total);
  std::size_t perimeter = 0;
  const auto nbr = dom.box.neighbor_table();
  for (auto i : dom.region)
    for (int k = 0; k < 4; ++k)
      if (nbr[i * 4 + k] < 0 || !dom.in_region(nbr[i * 4 + k])) {
        ++perimeter;
        break;
      }
  const double bound = double(dom.region.size()) * (1.0 - 2.0 / L) - double(perimeter) * L;
  CHECK(double(total) >= bound);
}

TEST_CASE("skeleton separates box interiors") {
  const auto dom = build_domain(2, 48, Shape::parse("disc:0.4"));
  const auto g = build_mesogrid_side(dom, 6, Coord{});
  REQUIRE(g.boxes.size() > 4);
  const auto nbr = dom.box.neighbor_table();
  std::vector<int> centre_of(dom.box.size, -1);
  for (std::size_t b = 0; b < g.boxes.size(); ++b) centre_of[g.boxes[b].center_index] = int(b);
  for (std::size_t b = 0; b < g.boxes.size(); ++b) {
    std::vector<std::uint8_t> vis(dom.box.size, 0);
    std::queue<std::size_t> q;
    q.push(g.boxes[b].center_index);
    vis[g.boxes[b].center_index] = 1;
    while (!q.empty()) {
      const auto i = q.front();
      q.pop();
      CHECK((centre_of[i] == -1 || centre_of[i] == int(b)));
      for (int k = 0; k < 4; ++k) {
        const auto j = nbr[i * 4 + k];
        if (j >= 0 && !vis[j] && !g.skeleton_mask[j]) {
          vis[j] = 1;
          q.push(std::size_t(j));
        }
      }
    }
  }
}

TEST_CASE("json description") {
  const auto dom = build_domain(2, 32, Shape::parse("disc:0.25"));
  const auto j = to_json(dom);
  CHECK(j["shape"] == "disc:0.25");
  CHECK(j["n"] == 32);
  const auto g = build_mesogrid_side(dom, 4, Coord{1, 1, 0});
  const auto jg = to_json(g);
  CHECK(jg["box_count"] == g.boxes.size());
  CHECK(jg["centers"].size() == g.boxes.size());
}
