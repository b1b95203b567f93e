#pragma once
// Relative capacity of a scaled shape D in the unit square, at resolution n:
// the obstacle problem (projected SOR), the Green quadratic ratio, and the
// equilibrium form. Unit coupling and the ½‖∇f‖² convention throughout.

#include <span>
#include <vector>

#include "gffc/lattice.hpp"

namespace gffc {

struct CapacityOptions {
  double tol = 1e-10;      // max update per sweep
  double omega = 0.0;      // relaxation; 0 picks 2/(1+sin(π/(side+1)))
  int max_sweeps = 200000;
  int log_every = 100;
};

struct ObstacleSolution {
  int n = 0;
  double h = 0.0;               // mesh width 1/n
  DomainPtr domain;
  std::vector<double> f;        // on Lambda_n sites (box index order)
  double energy = 0.0;          // ½ Σ_edges (f(x)-f(y))², edges to the boundary included
  int sweeps = 0;
  double omega = 0.0;
  double last_update = 0.0;
  double max_free_residual = 0.0;   // max |(-Δf)(x)| off D
  double min_contact_density = 0.0; // min (-Δf)(x) on D (>= -tol at a solution)
  bool converged = false;
  std::vector<std::pair<int, double>> log;  // (sweep, max update)
};

// Throws ConfigError if iota <= 0 and NumericError without convergence.
ObstacleSolution primal_capacity(const Shape& D, int n, const CapacityOptions& opt = {});

// (-Δf) restricted to D: the discrete equilibrium measure of the minimiser.
std::vector<double> contact_density(const ObstacleSolution& s);

struct DualRatio {
  double sigma2 = 0.0;  // Σ_{x,y∈D} f(x) G(x,y) f(y)
  double ratio = 0.0;   // (Σ_D f)² / (2 sigma2)
};
// f on Lambda_n sites; only its values on D enter.
DualRatio dual_ratio(std::span<const double> f, const Shape& D, int n);

struct EquilibriumResult {
  double value = 0.0;          // ½ 1ᵀw with G|_{D×D} w = 1
  std::vector<double> w;       // on Lambda_n sites, zero off D
  int iterations = 0;
  double relative_residual = 0.0;
  double condition_estimate = 0.0;
  bool ill_conditioned = false;
};
EquilibriumResult equilibrium_capacity(const Shape& D, int n, double tol = 1e-12, int max_iterations = 20000);

// π / log(R/r): the ½‖∇f‖² capacity of a disc of radius r inside a disc of radius R.
double annulus_capacity(double r, double R);

}  // namespace gffc
