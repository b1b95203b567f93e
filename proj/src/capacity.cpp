#include "gffc/capacity.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "gffc/errors.hpp"
#include "gffc/gaussian_core.hpp"
#include "gffc/kernels.hpp"

namespace gffc {

namespace {

DomainPtr capacity_domain(const Shape& D, int n) {
  if (D.kind == ShapeKind::full) throw ConfigError("capacity of the whole square is undefined (iota = 0)");
  auto dom = make_domain(2, n, D);
  return dom;
}

kernels::Grid2 grid_of(const Box& b) { return {b.side, b.side}; }

// Box index order (coordinate 0 fastest) matches the grid row order, so the
// interior of the haloed grid is a straight copy.
void to_grid(const Box& b, std::span<const double> v, std::vector<double>& g) {
  const auto G = grid_of(b);
  g.assign(G.size(), 0.0);
  for (int j = 0; j < b.side; ++j)
    for (int i = 0; i < b.side; ++i) g[G.at(i, j)] = v[std::size_t(j) * b.side + i];
}

void from_grid(const Box& b, const std::vector<double>& g, std::span<double> v) {
  const auto G = grid_of(b);
  for (int j = 0; j < b.side; ++j)
    for (int i = 0; i < b.side; ++i) v[std::size_t(j) * b.side + i] = g[G.at(i, j)];
}

}  // namespace

double annulus_capacity(double r, double R) {
  if (!(r > 0 && R > r)) throw ConfigError("annulus needs 0 < r < R");
  return std::numbers::pi / std::log(R / r);
}

ObstacleSolution primal_capacity(const Shape& D, int n, const CapacityOptions& opt) {
  const auto dom = capacity_domain(D, n);
  const Box& box = dom->box;
  const auto G = grid_of(box);
  ObstacleSolution s;
  s.n = n;
  s.h = 1.0 / n;
  s.domain = dom;
  s.omega = opt.omega > 0 ? opt.omega : 2.0 / (1.0 + std::sin(std::numbers::pi / (box.side + 1)));
  if (!(s.omega > 0 && s.omega < 2)) throw ConfigError("relaxation factor must lie in (0,2)");

  std::vector<double> f(G.size(), 0.0);
  std::vector<std::uint8_t> obs(G.size(), 0);
  for (std::size_t i : dom->region) {
    const Coord x = box.coord(i);
    const auto k = G.at(x[0] - box.lo, x[1] - box.lo);
    obs[k] = 1;
    f[k] = 1.0;
  }
  for (s.sweeps = 1; s.sweeps <= opt.max_sweeps; ++s.sweeps) {
    const double u0 = kernels::psor_half_sweep(G, f, obs, 0, s.omega, 4.0, 1.0, 1.0);
    const double u1 = kernels::psor_half_sweep(G, f, obs, 1, s.omega, 4.0, 1.0, 1.0);
    s.last_update = std::max(u0, u1);
    if (opt.log_every > 0 && s.sweeps % opt.log_every == 0) s.log.emplace_back(s.sweeps, s.last_update);
    if (s.last_update < opt.tol) {
      s.converged = true;
      break;
    }
  }
  if (!s.converged)
    throw NumericError("obstacle solver did not converge in " + std::to_string(opt.max_sweeps) + " sweeps");
  s.log.emplace_back(s.sweeps, s.last_update);
  s.energy = 0.5 * kernels::edge_energy(G, f);

  std::vector<double> lap(G.size(), 0.0);
  kernels::stencil_apply(G, f, lap, 4.0, 1.0);
  s.min_contact_density = INFINITY;
  for (int j = 0; j < box.side; ++j)
    for (int i = 0; i < box.side; ++i) {
      const auto k = G.at(i, j);
      if (obs[k]) s.min_contact_density = std::min(s.min_contact_density, lap[k]);
      else s.max_free_residual = std::max(s.max_free_residual, std::abs(lap[k]));
    }
  s.f.resize(box.size);
  from_grid(box, f, s.f);
  return s;
}

std::vector<double> contact_density(const ObstacleSolution& s) {
  const Box& box = s.domain->box;
  const auto G = grid_of(box);
  std::vector<double> f, lap(G.size(), 0.0), out(box.size, 0.0);
  to_grid(box, s.f, f);
  kernels::stencil_apply(G, f, lap, 4.0, 1.0);
  from_grid(box, lap, out);
  for (std::size_t i = 0; i < box.size; ++i)
    if (!s.domain->in_region(i)) out[i] = 0.0;
  return out;
}

DualRatio dual_ratio(std::span<const double> f, const Shape& D, int n) {
  const auto dom = capacity_domain(D, n);
  const Box& box = dom->box;
  if (f.size() != box.size) throw ConfigError("test function has the wrong size");
  std::vector<double> fd(box.size, 0.0);
  double mass = 0.0;
  bool any = false;
  for (std::size_t i : dom->region) {
    fd[i] = f[i];
    mass += f[i];
    any = any || f[i] != 0.0;
  }
  if (!any) throw ConfigError("test function vanishes on D");
  SpectralBox sb(2, box.side, 1.0, 0.0);
  std::vector<double> gf(box.size);
  sb.apply_green(fd, gf);
  DualRatio r;
  for (std::size_t i : dom->region) r.sigma2 += fd[i] * gf[i];
  if (!(r.sigma2 > 0)) throw NumericError("Green quadratic form is not positive");
  r.ratio = mass * mass / (2 * r.sigma2);
  return r;
}

EquilibriumResult equilibrium_capacity(const Shape& D, int n, double tol, int max_iterations) {
  const auto dom = capacity_domain(D, n);
  const Box& box = dom->box;
  const auto& reg = dom->region;
  const std::size_t m = reg.size();
  SpectralBox sb(2, box.side, 1.0, 0.0);
  std::vector<double> full(box.size);
  auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    std::fill(full.begin(), full.end(), 0.0);
    for (std::size_t k = 0; k < m; ++k) full[reg[k]] = x[k];
    sb.apply_green(full, full);
    for (std::size_t k = 0; k < m; ++k) y[k] = full[reg[k]];
  };

  // Conjugate gradients; alpha/beta feed a Lanczos tridiagonal for the condition estimate.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m), r = Eigen::VectorXd::Ones(m), p = r, q(m);
  const double bnorm = r.norm();
  double rr = r.squaredNorm();
  std::vector<double> alphas, betas;
  EquilibriumResult out;
  for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
    if (std::sqrt(rr) <= tol * bnorm) break;
    apply(p, q);
    const double alpha = rr / p.dot(q);
    w += alpha * p;
    r -= alpha * q;
    const double rr_new = r.squaredNorm();
    const double beta = rr_new / rr;
    alphas.push_back(alpha);
    betas.push_back(beta);
    p = r + beta * p;
    rr = rr_new;
  }
  // true residual
  apply(w, q);
  out.relative_residual = (Eigen::VectorXd::Ones(m) - q).norm() / bnorm;
  if (out.relative_residual > std::max(10 * tol, 1e-10))
    throw NumericError("equilibrium solve stalled at relative residual " + std::to_string(out.relative_residual));

  const std::size_t k = alphas.size();
  if (k > 0) {
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(Eigen::Index(k), Eigen::Index(k));
    for (std::size_t j = 0; j < k; ++j) {
      T(j, j) = 1.0 / alphas[j] + (j > 0 ? betas[j - 1] / alphas[j - 1] : 0.0);
      if (j + 1 < k) T(j, j + 1) = T(j + 1, j) = std::sqrt(betas[j]) / alphas[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    out.condition_estimate = es.info() == Eigen::Success && ev[0] > 0 ? ev[k - 1] / ev[0] : INFINITY;
  } else {
    out.condition_estimate = 1.0;
  }
  out.ill_conditioned = !(out.condition_estimate < 1e12);
  out.w.assign(box.size, 0.0);
  for (std::size_t j = 0; j < m; ++j) out.w[reg[j]] = w[j];
  out.value = 0.5 * w.sum();
  return out;
}

}  // namespace gffc
