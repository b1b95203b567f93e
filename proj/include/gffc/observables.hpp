#pragma once
// Statistics of field draws: norm profiles, hole scans, mesoscopic box counters,
// popular-vote signs with interfaces, and spin two-point functions.

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gffc/conditioner.hpp"
#include "gffc/stats.hpp"

namespace gffc {

// Natural log of the integer n.
double log_n(int n);

struct ProfileEntry {
  std::size_t site = 0;
  Coord x{};
  Estimate mean;  // of |φ(x)| / log n
  double q10 = 0, q50 = 0, q90 = 0;
  bool outside_window = false;  // 95% interval misses (2-β, 2+β)
};

struct NormProfile {
  double log_n = 0.0;
  double beta = 0.0;
  std::size_t draws = 0;
  std::vector<ProfileEntry> sites;
};

// correlated=true treats the draws as a Markov chain (batch means).
NormProfile norm_profile(std::span<const FieldState> draws, std::span<const std::size_t> probes, double beta = 0.5,
                         bool correlated = true);

// True iff φ(x)+t avoids I for every x with |x-center| <= radius.
bool hole_scan(const FieldState& s, std::span<const double> t, const Coord& center, double radius,
               const AvoidanceSpec& target);

struct CounterParams {
  double beta = 0.5;
  double eta = 0.25;
  std::vector<Coord> T{Coord{}};  // offsets from the centre for the fluctuation counter
  std::vector<double> s;          // window centre (N entries, empty means 0)
  double delta = 0.25;
};

// Signs: positive means every coordinate > 0, negative every coordinate < 0.
// zero counts vectors with an exactly vanishing coordinate; mixed the rest (N >= 2 only).
struct SignCounts {
  std::size_t positive = 0, negative = 0, zero = 0, mixed = 0;
};

struct BoxCounters {
  std::size_t boxes = 0;
  std::size_t low = 0;     // |h_B| < (2-β) log n
  std::size_t high = 0;    // sup_T |φ^B(x_B+y)| > η log n
  SignCounts h_sign;       // signs of h_B
  SignCounts field_sign;   // signs of φ(x_B)
  std::size_t field_low = 0;  // |φ(x_B)| < (2-β) log n
  std::size_t window = 0;     // s-δ < h_B/log n < s+δ coordinatewise
};

// Harmonic data of one draw on a grid.
struct GridView {
  std::vector<double> h;          // h_B, N per box
  std::vector<double> field;      // φ(x_B), N per box
  std::vector<double> remainder;  // φ-h on all sites (N per site)
  int N = 1;
  double log_n = 1.0;
};

// One factorisation per (domain, grid), reused across draws.
class GridAnalyzer {
 public:
  GridAnalyzer(DomainPtr dom, const FieldParams& p, MesoGrid grid);
  const MesoGrid& grid() const { return grid_; }
  const LatticeDomain& domain() const { return *dom_; }
  GridView view(const FieldState& s) const;
  BoxCounters counters(const FieldState& s, const CounterParams& c) const;
  BoxCounters counters(const GridView& v, const CounterParams& c) const;

 private:
  DomainPtr dom_;
  FieldParams p_;
  MesoGrid grid_;
  HarmonicExtender ext_;
};

BoxCounters box_counters(const FieldState& s, const MesoGrid& grid, const CounterParams& c);

struct PositiveBoxStats {
  std::size_t draws = 0;
  Estimate fraction;            // N_+ / box count
  double second_moment_ratio = 0.0;  // E[N_+^2] / E[N_+]^2
};
PositiveBoxStats positive_box_fraction(std::span<const BoxCounters> counters);
PositiveBoxStats positive_box_fraction(std::span<const FieldState> draws, const MesoGrid& grid);

// P[X>0, Y>0] for a centred normal pair with correlation rho.
double orthant_probability(double rho);
// Correlation of the first coordinates of h_B and h_B' for the unconditioned field.
double center_correlation(const GreenOperator& G, const MesoGrid& grid, const FieldParams& p, std::size_t a,
                          std::size_t b);

struct SignReport {
  int sign = 0;  // popular vote over φ(x_B); 0 on a tie
  bool tie = false;
  std::size_t boxes = 0;
  std::size_t L_pos = 0, L_neg = 0, N_pos = 0, N_neg = 0;
  std::vector<std::size_t> interface;  // indices into grid.adjacency
  std::size_t minority = 0;            // boxes whose h_B sign opposes the vote
  double minority_fraction = 0.0;
  std::vector<std::size_t> good_centers;  // sign agrees and |φ(x_B)| >= (2-β) log n
};
SignReport grid_sign_and_interface(const GridView& v, const MesoGrid& grid, double beta = 0.5);
SignReport grid_sign_and_interface(const FieldState& s, const MesoGrid& grid, double beta = 0.5);

struct SpinCorrelation {
  std::size_t x = 0, y = 0;
  Estimate value;
  std::size_t skipped = 0;  // draws with φ = 0 at x or y
};
std::vector<SpinCorrelation> spin_correlation(std::span<const FieldState> draws,
                                              std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                              bool correlated = true);

// CSV rows "draw,grid,counter,value" for a sequence of draws on one grid.
void write_counters_csv(std::ostream& os, std::span<const BoxCounters> counters, int grid_id, bool header = true);
nlohmann::json to_json(const BoxCounters& c);
nlohmann::json to_json(const NormProfile& p);
nlohmann::json to_json(const SignReport& r);

}  // namespace gffc
