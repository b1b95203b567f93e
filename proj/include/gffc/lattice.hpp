#pragma once
// Boxes Lambda_n = [-n/2, n/2]^d ∩ Z^d, scaled regions D_n, and mesoscopic grids.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gffc {

inline constexpr int kMaxDim = 3;
using Coord = std::array<int, kMaxDim>;

// Sites of Lambda_n. Side is 2*floor(n/2)+1 so the origin is always a site.
// make_side also allows even sides (coordinates lo..hi with lo = -side/2), used
// for tiny test lattices such as 2x2.
struct Box {
  int d = 2;
  int n = 0;
  int half = 0;
  int side = 1;
  int lo = 0;
  int hi = 0;
  std::size_t size = 1;
  std::array<std::size_t, kMaxDim> stride{};

  static Box make(int d, int n);
  static Box make_side(int d, int side);
  std::size_t index(const Coord& x) const;
  Coord coord(std::size_t i) const;
  bool contains(const Coord& x) const;
  std::size_t origin() const { return index(Coord{}); }
  int degree() const { return 2 * d; }
  // nbr[i*2d + 2k + s], s=0 for -e_k and s=1 for +e_k; -1 outside Lambda_n.
  std::vector<std::int64_t> neighbor_table() const;
  // Sites of Lambda_n with a neighbour on the outer boundary.
  bool touches_outer_boundary(std::size_t i) const;
  int checker_color(std::size_t i) const;
};

enum class ShapeKind { full, disc, square, annulus };

struct Shape {
  ShapeKind kind = ShapeKind::full;
  double a = 0.0;  // disc radius, square side, annulus inner radius
  double b = 0.0;  // annulus outer radius

  static Shape parse(std::string_view text);
  std::string str() const;
  // Continuum distance from D to the boundary of [-1/2,1/2]^d.
  double iota() const;
  bool contains(const Coord& x, int d, int n) const;
};

struct LatticeDomain {
  Box box;
  Shape shape;
  std::vector<std::uint8_t> region_mask;
  std::vector<std::size_t> region;
  double iota = 0.0;

  int d() const { return box.d; }
  int n() const { return box.n; }
  bool in_region(std::size_t i) const { return region_mask[i] != 0; }
};

using DomainPtr = std::shared_ptr<const LatticeDomain>;

// Validated domain: requires iota > 0 and nonempty D_n (shape 'full' is refused).
LatticeDomain build_domain(int d, int n, const Shape& shape);
// The bare box with D_n = Lambda_n; n >= 1, no iota requirement.
LatticeDomain box_domain(int d, int n);
DomainPtr make_side_domain(int d, int side);
DomainPtr make_domain(int d, int n, const Shape& shape);
DomainPtr make_box_domain(int d, int n);

int closest_even(double v);

struct MesoBox {
  Coord center{};
  std::size_t center_index = 0;
};

struct MesoAdjacency {
  std::size_t a, b;
  int axis;
};

struct MesoGrid {
  double alpha = 0.0;
  Coord x0{};
  int box_side = 2;
  std::vector<MesoBox> boxes;
  std::vector<std::uint8_t> skeleton_mask;
  std::vector<std::size_t> skeleton;
  std::vector<MesoAdjacency> adjacency;
  bool empty = true;
};

MesoGrid build_mesogrid(const LatticeDomain& dom, double alpha, const Coord& x0);
// Same with an explicit even box side; alpha is recorded as log(side)/log(n).
MesoGrid build_mesogrid_side(const LatticeDomain& dom, int box_side, const Coord& x0);

// Sites of the box of side L centred at c (L+1 sites per axis).
std::vector<std::size_t> box_sites(const Box& box, const Coord& c, int L);

nlohmann::json to_json(const LatticeDomain& dom);
nlohmann::json to_json(const MesoGrid& grid, bool with_boxes = true);

}  // namespace gffc
