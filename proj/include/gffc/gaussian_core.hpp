#pragma once
// Unconditioned field: precision g(-Δ)+m2 with zero boundary, exact sampling,
// Green values, harmonic extension and the domain Markov split.

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gffc/lattice.hpp"
#include "gffc/rng.hpp"

namespace gffc {

struct FieldParams {
  int N = 1;
  double m2 = 0.0;
  double g = 0.15915494309189535;  // 1/(2*pi)

  // Default coupling: 1/(2*pi) when massless, 1 when massive.
  static FieldParams make(int N, double m2);
  static FieldParams make(int N, double m2, double g);
  double diag(int d) const { return 2.0 * d * g + m2; }
  void validate() const;
  bool operator==(const FieldParams&) const = default;
};

struct FieldState {
  FieldParams params;
  DomainPtr domain;
  std::vector<double> values;  // values[site*N + c]

  static FieldState zeros(const FieldParams& p, DomainPtr dom);
  std::size_t sites() const { return domain->box.size; }
  double& at(std::size_t site, int c) { return values[site * params.N + c]; }
  double at(std::size_t site, int c) const { return values[site * params.N + c]; }
  double norm(std::size_t site) const;
};

// Full-box solver in the product sine basis (diagonalises the Dirichlet Laplacian).
class SpectralBox {
 public:
  SpectralBox(int d, int side, double g, double m2);
  ~SpectralBox();
  SpectralBox(const SpectralBox&) = delete;
  SpectralBox& operator=(const SpectralBox&) = delete;

  int d() const { return d_; }
  int side() const { return side_; }
  std::size_t size() const { return size_; }
  // out = G b, in place allowed.
  void apply_green(std::span<const double> b, std::span<double> out) const;
  // out ~ N(0, G) using normals from rng.
  void sample(CounterRng& rng, std::span<double> out) const;
  double eigenvalue(std::size_t mode) const { return eig_[mode]; }

 private:
  void transform(double* buf) const;  // orthonormal DST-I, an involution
  int d_, side_;
  std::size_t size_;
  double scale_;
  std::vector<double> eig_;
  void* plan_ = nullptr;
};

// Sparse Cholesky of the precision restricted to free sites (complement of K).
class DirichletSolver {
 public:
  DirichletSolver(const Box& box, const FieldParams& p, std::vector<std::uint8_t> pinned);

  const Box& box() const { return box_; }
  const FieldParams& params() const { return p_; }
  bool pinned(std::size_t site) const { return pinned_[site] != 0; }
  std::size_t free_count() const { return free_.size(); }
  // x = Q_UU^{-1} b, both given on all sites (pinned entries of b ignored, of x set to 0).
  std::vector<double> solve(std::span<const double> b) const;
  std::vector<double> green_column(std::size_t y) const;
  // Draw of the zero-boundary field on the free sites (0 on K), one scalar coordinate.
  void sample(CounterRng& rng, std::span<double> out) const;
  // Harmonic extension of one coordinate: h = data on K, harmonic on U.
  std::vector<double> extend(std::span<const double> data_on_all_sites) const;

 private:
  Box box_;
  FieldParams p_;
  std::vector<std::uint8_t> pinned_;
  std::vector<std::int64_t> slot_;
  std::vector<std::size_t> free_;
  std::vector<std::int64_t> nbr_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

class GreenOperator {
 public:
  GreenOperator(DomainPtr dom, const FieldParams& p, std::vector<std::uint8_t> pinned = {});
  double value(std::size_t x, std::size_t y) const;
  const std::vector<double>& column(std::size_t y) const;
  const DirichletSolver& solver() const { return solver_; }
  const LatticeDomain& domain() const { return *dom_; }

 private:
  DomainPtr dom_;
  DirichletSolver solver_;
  mutable std::mutex mu_;
  mutable std::map<std::size_t, std::unique_ptr<std::vector<double>>> cache_;
};

// Massive Green function on Z^d at displacement dx, via padded boxes; the padding
// is grown until successive values agree to tol and checked against exp decay.
struct InfiniteGreen {
  double value;
  int padding;
  double decay_rate;
};
InfiniteGreen green_value_infinite(const FieldParams& p, int d, const Coord& dx, double tol = 1e-12);

// Scalar precision apply with zero boundary (generic d).
void apply_precision(const Box& box, const FieldParams& p, std::span<const double> x, std::span<double> y);

class FieldSampler {
 public:
  FieldSampler(const FieldParams& p, DomainPtr dom);
  FieldState draw(std::uint64_t seed, std::uint64_t index) const;

 private:
  FieldParams p_;
  DomainPtr dom_;
  std::unique_ptr<SpectralBox> spec_;
};

FieldState sample_field(const FieldParams& p, DomainPtr dom, std::uint64_t seed, std::uint64_t index = 0);

struct HarmonicExtension {
  std::vector<std::uint8_t> source;  // mask of K
  std::vector<double> values;        // h^K, same layout as FieldState::values
  std::vector<double> center_values; // h at box centres (filled by the grid overload), N per box
  double residual = 0.0;             // max |(g(-Δ)+m2) h| on the complement of K
  bool empty_source = false;
};

// Reusable extension onto a fixed K (one factorisation).
class HarmonicExtender {
 public:
  HarmonicExtender(DomainPtr dom, const FieldParams& p, std::vector<std::uint8_t> source);
  HarmonicExtension extend(const FieldState& s) const;
  const DirichletSolver& solver() const { return solver_; }

 private:
  DomainPtr dom_;
  FieldParams p_;
  std::vector<std::uint8_t> source_;
  DirichletSolver solver_;
};

HarmonicExtension harmonic_extend(const FieldState& s, const std::vector<std::uint8_t>& source);
HarmonicExtension harmonic_extend(const FieldState& s, const MesoGrid& grid);
void fill_center_values(HarmonicExtension& h, const MesoGrid& grid, int N);

struct MarkovSplit {
  HarmonicExtension harmonic;
  FieldState remainder;
};
MarkovSplit markov_decompose(const FieldState& s, const std::vector<std::uint8_t>& source);

// Deterministic pieces of Var φ(x) = Var h^K(x) + G_{Λ\K}(x,x).
struct VarianceSplit {
  double var_field;
  double var_harmonic;
  double var_remainder;
};
VarianceSplit variance_split(DomainPtr dom, const FieldParams& p, const std::vector<std::uint8_t>& source,
                             std::size_t x);

struct GradientCovariance {
  struct Entry {
    std::size_t box, neighbour;
    int axis;
  };
  std::vector<Entry> index;
  Eigen::MatrixXd sigma;
  double diag_max = 0.0;
  double lambda_max = 0.0;
  int power_iterations = 0;
  bool degenerate = false;
};
GradientCovariance gradient_process_cov(DomainPtr dom, const MesoGrid& grid, const FieldParams& p);

// Green value at the centre of one box interior (side L-1), shared by every box.
double box_center_green(int d, int box_side, const FieldParams& p);

}  // namespace gffc
