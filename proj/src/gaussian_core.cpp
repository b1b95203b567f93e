#include "gffc/gaussian_core.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gffc/errors.hpp"

namespace gffc {

FieldParams FieldParams::make(int N, double m2) {
  return make(N, m2, m2 > 0.0 ? 1.0 : 1.0 / (2.0 * std::numbers::pi));
}

FieldParams FieldParams::make(int N, double m2, double g) {
  FieldParams p;
  p.N = N;
  p.m2 = m2;
  p.g = g;
  p.validate();
  return p;
}

void FieldParams::validate() const {
  if (N < 1) throw ConfigError("spin dimension N must be >= 1");
  if (!(m2 >= 0.0) || !std::isfinite(m2)) throw ConfigError("mass2 must be finite and >= 0");
  if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("coupling g must be > 0");
}

FieldState FieldState::zeros(const FieldParams& p, DomainPtr dom) {
  FieldState s;
  s.params = p;
  s.values.assign(dom->box.size * std::size_t(p.N), 0.0);
  s.domain = std::move(dom);
  return s;
}

double FieldState::norm(std::size_t site) const {
  double r = 0.0;
  for (int c = 0; c < params.N; ++c) r += at(site, c) * at(site, c);
  return std::sqrt(r);
}

// ---------------------------------------------------------------------------

namespace {
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuf {
  explicit FftwBuf(std::size_t n) : p(fftw_alloc_real(n)) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwBuf() { fftw_free(p); }
  FftwBuf(const FftwBuf&) = delete;
  double* p;
};
}  // namespace

SpectralBox::SpectralBox(int d, int side, double g, double m2) : d_(d), side_(side) {
  if (d < 1 || d > kMaxDim || side < 1) throw ConfigError("bad spectral box");
  size_ = 1;
  for (int k = 0; k < d; ++k) size_ *= std::size_t(side);
  scale_ = std::pow(1.0 / std::sqrt(2.0 * (side + 1)), d);
  std::vector<double> lam1(side);
  for (int j = 0; j < side; ++j) lam1[j] = 2.0 - 2.0 * std::cos(std::numbers::pi * (j + 1) / (side + 1));
  eig_.resize(size_);
  for (std::size_t i = 0; i < size_; ++i) {
    std::size_t r = i;
    double s = 0.0;
    for (int k = 0; k < d; ++k) {
      s += lam1[r % side];
      r /= side;
    }
    eig_[i] = g * s + m2;
  }
  std::vector<int> dims(d, side);
  std::vector<fftw_r2r_kind> kinds(d, FFTW_RODFT00);
  FftwBuf tmp(size_);
  std::lock_guard lk(fftw_mutex());
  plan_ = fftw_plan_r2r(d, dims.data(), tmp.p, tmp.p, kinds.data(), FFTW_ESTIMATE);
  if (!plan_) throw NumericError("fftw planning failed");
}

SpectralBox::~SpectralBox() {
  std::lock_guard lk(fftw_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void SpectralBox::transform(double* buf) const {
  fftw_execute_r2r(static_cast<fftw_plan>(plan_), buf, buf);
  for (std::size_t i = 0; i < size_; ++i) buf[i] *= scale_;
}

void SpectralBox::apply_green(std::span<const double> b, std::span<double> out) const {
  if (b.size() != size_ || out.size() != size_) throw ConfigError("spectral size mismatch");
  FftwBuf buf(size_);
  std::copy(b.begin(), b.end(), buf.p);
  transform(buf.p);
  for (std::size_t i = 0; i < size_; ++i) buf.p[i] /= eig_[i];
  transform(buf.p);
  std::copy(buf.p, buf.p + size_, out.begin());
}

void SpectralBox::sample(CounterRng& rng, std::span<double> out) const {
  if (out.size() != size_) throw ConfigError("spectral size mismatch");
  FftwBuf buf(size_);
  for (std::size_t i = 0; i < size_; ++i) buf.p[i] = rng.normal() / std::sqrt(eig_[i]);
  transform(buf.p);
  std::copy(buf.p, buf.p + size_, out.begin());
}

// ---------------------------------------------------------------------------

void apply_precision(const Box& box, const FieldParams& p, std::span<const double> x, std::span<double> y) {
  const double dg = p.diag(box.d);
  const auto nbr = box.neighbor_table();
  const int deg = box.degree();
  for (std::size_t i = 0; i < box.size; ++i) {
    double s = 0.0;
    for (int k = 0; k < deg; ++k)
      if (const auto j = nbr[i * deg + k]; j >= 0) s += x[j];
    y[i] = dg * x[i] - p.g * s;
  }
}

DirichletSolver::DirichletSolver(const Box& box, const FieldParams& p, std::vector<std::uint8_t> pinned)
    : box_(box), p_(p), pinned_(std::move(pinned)) {
  if (pinned_.empty()) pinned_.assign(box.size, 0);
  if (pinned_.size() != box.size) throw ConfigError("pinned mask size mismatch");
  nbr_ = box.neighbor_table();
  slot_.assign(box.size, -1);
  for (std::size_t i = 0; i < box.size; ++i)
    if (!pinned_[i]) {
      slot_[i] = std::int64_t(free_.size());
      free_.push_back(i);
    }
  if (free_.empty()) return;
  const int deg = box.degree();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(free_.size() * (deg + 1));
  for (std::size_t a = 0; a < free_.size(); ++a) {
    const std::size_t i = free_[a];
    t.emplace_back(a, a, p.diag(box.d));
    for (int k = 0; k < deg; ++k) {
      const auto j = nbr_[i * deg + k];
      if (j >= 0 && slot_[j] >= 0) t.emplace_back(a, slot_[j], -p.g);
    }
  }
  Eigen::SparseMatrix<double> Q(free_.size(), free_.size());
  Q.setFromTriplets(t.begin(), t.end());
  llt_.compute(Q);
  if (llt_.info() != Eigen::Success) throw NumericError("precision factorisation failed");
}

std::vector<double> DirichletSolver::solve(std::span<const double> b) const {
  std::vector<double> x(box_.size, 0.0);
  if (free_.empty()) return x;
  Eigen::VectorXd rhs(free_.size());
  for (std::size_t a = 0; a < free_.size(); ++a) rhs[a] = b[free_[a]];
  const Eigen::VectorXd sol = llt_.solve(rhs);
  for (std::size_t a = 0; a < free_.size(); ++a) x[free_[a]] = sol[a];
  return x;
}

std::vector<double> DirichletSolver::green_column(std::size_t y) const {
  std::vector<double> e(box_.size, 0.0);
  if (pinned_[y]) return e;
  e[y] = 1.0;
  return solve(e);
}

void DirichletSolver::sample(CounterRng& rng, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (free_.empty()) return;
  Eigen::VectorXd z(free_.size());
  for (auto& v : z) v = rng.normal();
  const Eigen::VectorXd y = llt_.matrixU().solve(z);
  const Eigen::VectorXd x = llt_.permutationPinv() * y;
  for (std::size_t a = 0; a < free_.size(); ++a) out[free_[a]] = x[a];
}

std::vector<double> DirichletSolver::extend(std::span<const double> data) const {
  const int deg = box_.degree();
  std::vector<double> b(box_.size, 0.0);
  for (std::size_t i : free_) {
    double s = 0.0;
    for (int k = 0; k < deg; ++k) {
      const auto j = nbr_[i * deg + k];
      if (j >= 0 && pinned_[j]) s += data[j];
    }
    b[i] = p_.g * s;
  }
  std::vector<double> h = solve(b);
  for (std::size_t i = 0; i < box_.size; ++i)
    if (pinned_[i]) h[i] = data[i];
  return h;
}

// ---------------------------------------------------------------------------

GreenOperator::GreenOperator(DomainPtr dom, const FieldParams& p, std::vector<std::uint8_t> pinned)
    : dom_(std::move(dom)), solver_(dom_->box, p, std::move(pinned)) {}

const std::vector<double>& GreenOperator::column(std::size_t y) const {
  std::lock_guard lk(mu_);
  auto& slot = cache_[y];
  if (!slot) slot = std::make_unique<std::vector<double>>(solver_.green_column(y));
  return *slot;
}

double GreenOperator::value(std::size_t x, std::size_t y) const { return column(y)[x]; }

InfiniteGreen green_value_infinite(const FieldParams& p, int d, const Coord& dx, double tol) {
  if (!(p.m2 > 0.0)) throw ConfigError("infinite-volume Green function needs m2 > 0");
  // Axis decay rate: 2(cosh mu - 1) = m2/g.
  const double mu = std::acosh(1.0 + p.m2 / (2.0 * p.g));
  int reach = 0;
  for (int k = 0; k < d; ++k) reach = std::max(reach, std::abs(dx[k]));
  int pad = std::max(4, int(std::ceil(std::log(1.0 / tol) / mu)) + 2);
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int attempt = 0; attempt < 8; ++attempt) {
    const int half = reach + pad;
    const Box box = Box::make(d, 2 * half);
    DirichletSolver solver(box, p, {});
    const auto col = solver.green_column(box.origin());
    const double v = col[box.index(dx)];
    Coord far{};
    far[0] = half;
    const double envelope = col[box.origin()] * std::exp(-0.5 * mu * half);
    if (col[box.index(far)] > envelope) throw NumericError("massive Green column fails the decay check");
    if (std::isfinite(prev) && std::abs(v - prev) <= tol * std::max(1.0, std::abs(v))) return {v, pad, mu};
    prev = v;
    pad *= 2;
  }
  throw NumericError("padded massive Green value did not stabilise");
}

// ---------------------------------------------------------------------------

FieldSampler::FieldSampler(const FieldParams& p, DomainPtr dom) : p_(p), dom_(std::move(dom)) {
  p_.validate();
  spec_ = std::make_unique<SpectralBox>(dom_->d(), dom_->box.side, p_.g, p_.m2);
}

FieldState FieldSampler::draw(std::uint64_t seed, std::uint64_t index) const {
  FieldState s = FieldState::zeros(p_, dom_);
  const std::size_t n = dom_->box.size;
  std::vector<double> buf(n);
  for (int c = 0; c < p_.N; ++c) {
    CounterRng rng(seed, std::uint32_t(index), std::uint32_t(index >> 32), 0x5A000000u + std::uint32_t(c));
    spec_->sample(rng, buf);
    for (std::size_t i = 0; i < n; ++i) s.at(i, c) = buf[i];
  }
  return s;
}

FieldState sample_field(const FieldParams& p, DomainPtr dom, std::uint64_t seed, std::uint64_t index) {
  return FieldSampler(p, std::move(dom)).draw(seed, index);
}

// ---------------------------------------------------------------------------

HarmonicExtender::HarmonicExtender(DomainPtr dom, const FieldParams& p, std::vector<std::uint8_t> source)
    : dom_(std::move(dom)), p_(p), source_(std::move(source)), solver_(dom_->box, p_, source_) {}

HarmonicExtension HarmonicExtender::extend(const FieldState& s) const {
  const Box& box = dom_->box;
  const std::size_t n = box.size;
  const int N = p_.N;
  HarmonicExtension h;
  h.source = source_;
  h.values.assign(n * N, 0.0);
  h.empty_source = std::none_of(source_.begin(), source_.end(), [](auto v) { return v != 0; });
  if (h.empty_source) return h;
  double scale = 0.0;
  std::vector<double> data(n), r(n);
  for (int c = 0; c < N; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      data[i] = source_[i] ? s.at(i, c) : 0.0;
      scale = std::max(scale, std::abs(data[i]));
    }
    const auto hc = solver_.extend(data);
    apply_precision(box, p_, hc, r);
    for (std::size_t i = 0; i < n; ++i) {
      h.values[i * N + c] = hc[i];
      if (!source_[i]) h.residual = std::max(h.residual, std::abs(r[i]));
    }
  }
  if (h.residual > 1e-10 * std::max(scale, 1e-300) && scale > 0)
    throw NumericError("harmonic extension residual " + std::to_string(h.residual) + " too large");
  return h;
}

HarmonicExtension harmonic_extend(const FieldState& s, const std::vector<std::uint8_t>& source) {
  return HarmonicExtender(s.domain, s.params, source).extend(s);
}

void fill_center_values(HarmonicExtension& h, const MesoGrid& grid, int N) {
  h.center_values.resize(grid.boxes.size() * N);
  for (std::size_t b = 0; b < grid.boxes.size(); ++b)
    for (int c = 0; c < N; ++c) h.center_values[b * N + c] = h.values[grid.boxes[b].center_index * N + c];
}

HarmonicExtension harmonic_extend(const FieldState& s, const MesoGrid& grid) {
  auto h = harmonic_extend(s, grid.skeleton_mask);
  fill_center_values(h, grid, s.params.N);
  return h;
}

MarkovSplit markov_decompose(const FieldState& s, const std::vector<std::uint8_t>& source) {
  MarkovSplit out{harmonic_extend(s, source), s};
  for (std::size_t k = 0; k < s.values.size(); ++k) out.remainder.values[k] -= out.harmonic.values[k];
  return out;
}

VarianceSplit variance_split(DomainPtr dom, const FieldParams& p, const std::vector<std::uint8_t>& source,
                             std::size_t x) {
  const Box& box = dom->box;
  DirichletSolver full(box, p, {});
  DirichletSolver inner(box, p, source);
  VarianceSplit v{};
  v.var_field = full.green_column(x)[x];
  if (source[x]) {
    v.var_harmonic = v.var_field;
    v.var_remainder = 0.0;
    return v;
  }
  // h(x) = sum_k H(x,k) φ(k), H(x,k) = g * sum_{u~k, u free} G_U(x,u).
  const auto colx = inner.green_column(x);
  const auto nbr = box.neighbor_table();
  const int deg = box.degree();
  std::vector<double> H(box.size, 0.0);
  for (std::size_t k = 0; k < box.size; ++k) {
    if (!source[k]) continue;
    double s = 0.0;
    for (int j = 0; j < deg; ++j)
      if (const auto u = nbr[k * deg + j]; u >= 0 && !source[u]) s += colx[u];
    H[k] = p.g * s;
  }
  const auto GH = full.solve(H);
  double q = 0.0;
  for (std::size_t k = 0; k < box.size; ++k)
    if (source[k]) q += H[k] * GH[k];
  v.var_harmonic = q;
  v.var_remainder = colx[x];
  return v;
}

double box_center_green(int d, int box_side, const FieldParams& p) {
  const int inner = box_side - 1;
  const Box b = Box::make(d, inner - 1);  // side 2*floor((L-2)/2)+1 = L-1
  if (b.side != inner) throw NumericError("box interior size mismatch");
  DirichletSolver s(b, p, {});
  return s.green_column(b.origin())[b.origin()];
}

GradientCovariance gradient_process_cov(DomainPtr dom, const MesoGrid& grid, const FieldParams& p) {
  if (dom->d() != 2) throw ConfigError("gradient covariance is defined for d=2");
  GradientCovariance out;
  for (const auto& a : grid.adjacency) out.index.push_back({a.a, a.b, a.axis});
  if (grid.boxes.size() < 2 || out.index.empty()) {
    out.degenerate = true;
    return out;
  }
  DirichletSolver full(dom->box, p, {});
  const std::size_t nb = grid.boxes.size();
  Eigen::MatrixXd C(nb, nb);
  for (std::size_t j = 0; j < nb; ++j) {
    const auto col = full.green_column(grid.boxes[j].center_index);
    for (std::size_t i = 0; i < nb; ++i) C(i, j) = col[grid.boxes[i].center_index];
  }
  C = 0.5 * (C + C.transpose()).eval();
  const double gB = box_center_green(2, grid.box_side, p);
  for (std::size_t i = 0; i < nb; ++i) C(i, i) -= gB;
  const std::size_t m = out.index.size();
  out.sigma.resize(m, m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < m; ++c) {
      const auto& e = out.index[r];
      const auto& f = out.index[c];
      out.sigma(r, c) = C(e.neighbour, f.neighbour) - C(e.neighbour, f.box) - C(e.box, f.neighbour) + C(e.box, f.box);
    }
  out.diag_max = out.sigma.diagonal().maxCoeff();
  // Random start: the all-ones vector is symmetric and can miss the top mode.
  CounterRng rng(0x9C0FFEEull, std::uint32_t(m));
  Eigen::VectorXd v(m);
  for (auto& x : v) x = rng.normal();
  v.normalize();
  double lam = 0.0;
  int stable = 0;
  for (int it = 0; it < 200000 && stable < 20; ++it) {
    const Eigen::VectorXd w = out.sigma * v;
    const double nl = v.dot(w);
    const double nw = w.norm();
    if (nw == 0.0) break;
    v = w / nw;
    out.power_iterations = it + 1;
    stable = std::abs(nl - lam) <= 1e-13 * std::abs(nl) ? stable + 1 : 0;
    lam = nl;
  }
  out.lambda_max = lam;
  return out;
}

}  // namespace gffc
