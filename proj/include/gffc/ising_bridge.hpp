#pragma once
// Nearest-neighbour Ising model on Lambda_n with edge couplings J >= 0, used as
// the sign law of a conditioned scalar field given its absolute values.

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "gffc/gaussian_core.hpp"
#include "gffc/stats.hpp"

namespace gffc {

enum class IsingBoundary { plus, free };

struct IsingInstance {
  Box box;
  // J[i*2d + 2k + s]: coupling between site i and its neighbour in direction (k, s),
  // s=0 for -e_k. Entries pointing outside Lambda_n couple to the boundary spin.
  std::vector<double> J;
  IsingBoundary bc = IsingBoundary::plus;
  std::vector<std::int8_t> spins;
  std::vector<std::int64_t> nbr;  // box.neighbor_table(), filled by the builders and validate()

  static IsingInstance constant(const Box& box, double J, IsingBoundary bc);
  // Checks sizes, symmetry and signs; fills nbr if missing.
  void validate();
  // Every coupling of *this is <= the matching coupling of other.
  bool edgewise_leq(const IsingInstance& other) const;
  double min_coupling() const;
};

// Couplings g|ψ(x)||ψ(y)|; neighbours outside Lambda_n carry |ψ| = boundary_norm and a
// plus spin. Spins start at the signs of ψ. Throws ConstraintError if |ψ(x)| < R.
IsingInstance from_field(const FieldState& s, double R, double boundary_norm);
// Same with the boundary taken from a larger field (annulus mode): 'inner' must be a
// centred sub-box of s.domain->box, and the field must be positive just outside it.
IsingInstance from_field(const FieldState& s, const Box& inner, double R);

// Heat-bath probability of +1 at site i given the rest.
double heat_bath_plus(const IsingInstance& m, std::size_t i);
// One sweep: the two checkerboard classes in a random order (reversible).
void glauber_sweep(IsingInstance& m, std::uint64_t seed, std::uint64_t sweep);

struct GlauberOptions {
  std::uint64_t sweeps = 10000;
  std::uint64_t burn_in = 1000;
  std::uint64_t seed = 0;
  bool start_all_plus = false;  // otherwise start from the instance spins
};

struct Magnetization {
  Estimate m0;  // E[σ(0)]
  double tau = 1.0;
  std::uint64_t samples = 0;
};
Magnetization glauber_magnetization(IsingInstance m, const GlauberOptions& opt);

struct MonotoneCheck {
  Magnetization lower, upper;
  double z = 0.0;      // (E1 - E2) / combined SE
  bool holds = true;   // E1 <= E2 within 4 combined SE
};
MonotoneCheck monotone_coupling_check(IsingInstance weak, IsingInstance strong,
                                      const GlauberOptions& opt);

nlohmann::json to_json(const Magnetization& m);

}  // namespace gffc
