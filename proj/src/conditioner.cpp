#include "gffc/conditioner.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "gffc/errors.hpp"
#include "gffc/parallel.hpp"
#include "gffc/stats.hpp"

namespace gffc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = std::numbers::sqrt2;

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (...) {
    throw ConfigError("bad number '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("bad number '" + s + "'");
  return v;
}

// log Φ(x), accurate far into the left tail.
double log_ndtr(double x) {
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / kSqrt2));
  if (x > -35.0) return std::log(0.5 * std::erfc(-x / kSqrt2));
  const double x2 = x * x;
  const double s = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(s);
}

// Z ~ N(0,1) conditioned on Z >= c.
double sample_right_tail(double c, CounterRng& rng, KernelStats& st) {
  if (c > 6.0) {
    ++st.tail;
    const double lam = 0.5 * (c + std::sqrt(c * c + 4.0));
    while (true) {
      const double z = c + rng.exponential() / lam;
      const double r = z - lam;
      if (std::log(rng.uniform()) <= -0.5 * r * r) return z;
    }
  }
  ++st.inverse_cdf;
  const double qc = 0.5 * std::erfc(c / kSqrt2);
  const double q = rng.uniform() * qc;
  const double z = kSqrt2 * boost::math::erfc_inv(2.0 * q);
  return std::max(z, c);
}

// Gamma(k,1) restricted to [T, inf).
double sample_gamma_tail(double k, double T, CounterRng& rng) {
  const double Q = boost::math::gamma_q(k, T);
  if (Q > 1e-280) {
    const double u = rng.uniform() * Q;
    return std::max(T, boost::math::gamma_q_inv(k, u));
  }
  const double beta = k > 1.0 ? 1.0 - (k - 1.0) / T : 1.0;
  while (true) {
    const double x = T + rng.exponential() / beta;
    const double loga = (k - 1.0) * std::log(x / T) - (1.0 - beta) * (x - T);
    if (std::log(rng.uniform()) <= loga) return x;
  }
}
}  // namespace

// ---------------------------------------------------------------------------

AvoidanceSpec AvoidanceSpec::ball(double R) { return {Kind::ball, -R, R}; }
AvoidanceSpec AvoidanceSpec::interval(double a, double b) { return {Kind::interval, a, b}; }
AvoidanceSpec AvoidanceSpec::halfline(double b) { return {Kind::halfline, -kInf, b}; }

AvoidanceSpec AvoidanceSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (name == "none") return none();
  if (name == "ball") return ball(parse_double(rest));
  if (name == "halfline") return halfline(parse_double(rest));
  if (name == "interval") {
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw ConfigError("interval needs 'interval:a,b'");
    return interval(parse_double(rest.substr(0, comma)), parse_double(rest.substr(comma + 1)));
  }
  throw ConfigError("unknown avoidance spec '" + text + "'");
}

std::string AvoidanceSpec::str() const {
  std::ostringstream o;
  o.precision(17);
  switch (kind) {
    case Kind::none: return "none";
    case Kind::ball: o << "ball:" << b; break;
    case Kind::interval: o << "interval:" << a << "," << b; break;
    case Kind::halfline: o << "halfline:" << b; break;
  }
  return o.str();
}

void AvoidanceSpec::validate(int N) const {
  if (N < 1 || N > kMaxSpin) throw ConfigError("spin dimension must be in 1.." + std::to_string(kMaxSpin));
  switch (kind) {
    case Kind::none: break;
    case Kind::ball:
      if (!(b > 0.0)) throw ConfigError("ball radius must be > 0");
      break;
    case Kind::interval:
      if (N != 1) throw ConfigError("interval constraints need N = 1");
      if (!(a < b)) throw ConfigError("interval needs a < b");
      break;
    case Kind::halfline:
      if (N != 1) throw ConfigError("half-line constraints need N = 1");
      if (!std::isfinite(b)) throw ConfigError("half-line end must be finite");
      break;
  }
}

bool AvoidanceSpec::trivial() const { return kind == Kind::none || !(b - a >= 1e-14); }

bool AvoidanceSpec::forbids(const double* v, int N) const {
  if (trivial()) return false;
  if (kind == Kind::ball && N > 1) {
    double r2 = 0.0;
    for (int c = 0; c < N; ++c) r2 += v[c] * v[c];
    return r2 < b * b;
  }
  return v[0] > a && v[0] < b;
}

bool AvoidanceSpec::symmetric() const {
  return trivial() || kind == Kind::ball || (kind == Kind::interval && a == -b);
}

BoundaryCondition BoundaryCondition::parse(const std::string& text) {
  if (text == "zero") return {};
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("unknown boundary condition '" + text + "'");
  const std::string name = text.substr(0, colon);
  const double R = parse_double(text.substr(colon + 1));
  if (name == "annulus") return {Mode::clamp_annulus, R};
  if (name == "clamp") return {Mode::clamp_exact, R};
  throw ConfigError("unknown boundary condition '" + text + "'");
}

std::string BoundaryCondition::str() const {
  std::ostringstream o;
  o.precision(17);
  switch (mode) {
    case Mode::dirichlet_zero: return "zero";
    case Mode::clamp_annulus: o << "annulus:" << level; break;
    case Mode::clamp_exact: o << "clamp:" << level; break;
  }
  return o.str();
}

KernelStats& KernelStats::operator+=(const KernelStats& o) {
  gaussian += o.gaussian;
  inverse_cdf += o.inverse_cdf;
  tail += o.tail;
  rejection += o.rejection;
  mh_steps += o.mh_steps;
  mh_accepts += o.mh_accepts;
  global_moves += o.global_moves;
  return *this;
}

// ---------------------------------------------------------------------------

SiteLaw site_conditional(const FieldParams& p, int d, std::span<const double> s, const AvoidanceSpec& spec) {
  SiteLaw law;
  law.N = p.N;
  law.kappa = p.diag(d);
  law.sd = 1.0 / std::sqrt(law.kappa);
  for (int c = 0; c < p.N; ++c) law.mean[c] = p.g * s[c] / law.kappa;
  law.spec = spec;
  return law;
}

void sample_site(const SiteLaw& law, CounterRng& rng, const double* current, double* out, KernelStats& st) {
  const int N = law.N;
  const double sd = law.sd;
  const AvoidanceSpec& spec = law.spec;
  if (spec.trivial()) {
    for (int c = 0; c < N; ++c) out[c] = law.mean[c] + sd * rng.normal();
    ++st.gaussian;
    return;
  }
  if (N == 1) {
    const double mu = law.mean[0];
    const double a = spec.a, b = spec.b;
    // One unconstrained try; the fallback below is itself an exact draw, so the
    // mixture is exact.
    const double x = mu + sd * rng.normal();
    if (!(x > a && x < b)) {
      out[0] = x;
      ++st.gaussian;
      return;
    }
    const double as = (a - mu) / sd, bs = (b - mu) / sd;
    const double logL = std::isfinite(a) ? log_ndtr(as) : -kInf;
    const double logR = log_ndtr(-bs);
    if (logL == -kInf && logR == -kInf) throw NumericError("site constraint leaves no admissible value");
    const double pL = logL == -kInf ? 0.0 : (logR == -kInf ? 1.0 : 1.0 / (1.0 + std::exp(logR - logL)));
    if (rng.uniform() < pL) {
      const double z = -sample_right_tail(-as, rng, st);
      out[0] = std::min(mu + sd * z, a);
    } else {
      const double z = sample_right_tail(bs, rng, st);
      out[0] = std::max(mu + sd * z, b);
    }
    return;
  }
  // N >= 2, centred ball.
  const double R2 = spec.b * spec.b;
  for (int attempt = 0; attempt < 32; ++attempt) {
    double r2 = 0.0;
    for (int c = 0; c < N; ++c) {
      out[c] = law.mean[c] + sd * rng.normal();
      r2 += out[c] * out[c];
    }
    if (r2 >= R2) {
      ++(attempt == 0 ? st.gaussian : st.rejection);
      return;
    }
  }
  // Independence Metropolis: proposal ∝ exp(-|γ|²/(2 sd²)) on |γ| >= R.
  ++st.mh_steps;
  const double T = 0.5 * R2 / (sd * sd);
  const double t = 2.0 * sample_gamma_tail(0.5 * N, T, rng);
  const double r = std::max(sd * std::sqrt(t), spec.b);
  std::array<double, kMaxSpin> dir{};
  double nn = 0.0;
  while (nn == 0.0) {
    nn = 0.0;
    for (int c = 0; c < N; ++c) {
      dir[c] = rng.normal();
      nn += dir[c] * dir[c];
    }
  }
  nn = std::sqrt(nn);
  double dot_new = 0.0, dot_old = 0.0, cur_r2 = 0.0;
  for (int c = 0; c < N; ++c) {
    dir[c] = r * dir[c] / nn;
    dot_new += law.mean[c] * dir[c];
    dot_old += law.mean[c] * current[c];
    cur_r2 += current[c] * current[c];
  }
  const double loga = (dot_new - dot_old) / (sd * sd);
  if (cur_r2 < R2 || std::log(rng.uniform()) < loga) {
    ++st.mh_accepts;
    for (int c = 0; c < N; ++c) out[c] = dir[c];
  } else {
    for (int c = 0; c < N; ++c) out[c] = current[c];
  }
}

// ---------------------------------------------------------------------------

struct ChainGeometry {
  std::vector<std::int64_t> nbr;
  std::array<std::vector<std::size_t>, 2> colour;
};

namespace {
ChainGeometry geometry(const Box& box) {
  ChainGeometry g;
  g.nbr = box.neighbor_table();
  for (std::size_t i = 0; i < box.size; ++i) g.colour[box.checker_color(i)].push_back(i);
  return g;
}

double initial_level(const ConditionedModel& m) {
  double v = 1.0;
  for (const auto& s : m.specs) {
    switch (s.kind) {
      case AvoidanceSpec::Kind::none: break;
      case AvoidanceSpec::Kind::ball: v = std::max(v, s.b + 1.0); break;
      case AvoidanceSpec::Kind::interval: v = std::max({v, std::abs(s.a) + 1.0, std::abs(s.b) + 1.0}); break;
      case AvoidanceSpec::Kind::halfline: v = std::max(v, std::abs(s.b) + 1.0); break;
    }
  }
  return v;
}
}  // namespace

bool ConditionedModel::symmetric() const {
  if (boundary_value != 0.0) return false;
  return std::all_of(specs.begin(), specs.end(), [](const AvoidanceSpec& s) { return s.symmetric(); });
}

ConditionedModel ConditionedModel::with_spec(const AvoidanceSpec& s) const {
  s.validate(params.N);
  ConditionedModel m = *this;
  m.spec = s;
  m.specs[0] = s;
  return m;
}

ConditionedModel build_model(const FieldParams& p, DomainPtr dom, const AvoidanceSpec& spec, RegionKind region,
                             const BoundaryCondition& bc) {
  p.validate();
  spec.validate(p.N);
  if (bc.mode != BoundaryCondition::Mode::dirichlet_zero && p.N != 1)
    throw ConfigError("clamp boundary modes need N = 1");
  ConditionedModel m;
  m.params = p;
  m.observed = dom;
  m.spec = spec;
  m.bc = bc;
  m.region = region;
  m.specs = {spec};
  const Box& inner = dom->box;
  auto in_v = [&](std::size_t i) {
    switch (region) {
      case RegionKind::domain: return dom->in_region(i);
      case RegionKind::box: return true;
      case RegionKind::none: return false;
    }
    return false;
  };
  if (bc.mode == BoundaryCondition::Mode::clamp_annulus) {
    m.domain = make_box_domain(inner.d, 2 * inner.n);
    const Box& outer = m.domain->box;
    m.specs.push_back(AvoidanceSpec::halfline(bc.level));
    m.constraint.assign(outer.size, 1);
    m.observed_to_sim.resize(inner.size);
    for (std::size_t i = 0; i < inner.size; ++i) {
      const std::size_t j = outer.index(inner.coord(i));
      m.observed_to_sim[i] = j;
      m.constraint[j] = in_v(i) ? 0 : -1;
    }
  } else {
    m.domain = dom;
    m.constraint.assign(inner.size, -1);
    for (std::size_t i = 0; i < inner.size; ++i)
      if (in_v(i)) m.constraint[i] = 0;
    if (bc.mode == BoundaryCondition::Mode::clamp_exact) m.boundary_value = bc.level;
  }
  return m;
}

// ---------------------------------------------------------------------------

namespace {
// Geometry cache keyed by box size; models are immutable so sharing is safe.
std::shared_ptr<const ChainGeometry> cached_geometry(const Box& box) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::weak_ptr<const ChainGeometry>> cache;
  std::lock_guard lk(mu);
  auto& w = cache[{box.d, box.side}];
  if (auto sp = w.lock()) return sp;
  auto sp = std::make_shared<const ChainGeometry>(geometry(box));
  w = sp;
  return sp;
}
}  // namespace

ConditionedChain::ConditionedChain(std::shared_ptr<const ConditionedModel> model, std::uint64_t seed)
    : model_(std::move(model)) {
  chain_.seed = seed;
  chain_.state = FieldState::zeros(model_->params, model_->domain);
  const double v = initial_level(*model_);
  for (std::size_t i = 0; i < chain_.state.sites(); ++i) chain_.state.at(i, 0) = v;
  set_model(model_);
  check_constraint();
}

ConditionedChain::ConditionedChain(std::shared_ptr<const ConditionedModel> model, ChainState start)
    : model_(std::move(model)), chain_(std::move(start)) {
  set_model(model_);
}

void ConditionedChain::set_model(std::shared_ptr<const ConditionedModel> m) {
  model_ = std::move(m);
  geo_ = cached_geometry(model_->domain->box);
}

void ConditionedChain::update_site(std::size_t i, std::uint32_t stream_hi) {
  const auto& m = *model_;
  const int N = m.params.N;
  const int deg = 2 * m.domain->d();
  std::array<double, kMaxSpin> s{};
  double* v = chain_.state.values.data();
  for (int k = 0; k < deg; ++k) {
    const auto j = geo_->nbr[i * deg + k];
    if (j >= 0) {
      for (int c = 0; c < N; ++c) s[c] += v[j * N + c];
    } else {
      s[0] += m.boundary_value;
    }
  }
  const std::int16_t ci = m.constraint[i];
  const AvoidanceSpec& spec = ci >= 0 ? m.specs[ci] : AvoidanceSpec{};
  const SiteLaw law = site_conditional(m.params, m.domain->d(), std::span<const double>(s.data(), N), spec);
  CounterRng rng(chain_.seed, std::uint32_t(i), std::uint32_t(chain_.sweep), stream_hi);
  std::array<double, kMaxSpin> out{};
  sample_site(law, rng, v + i * N, out.data(), chain_.stats);
  for (int c = 0; c < N; ++c) v[i * N + c] = out[c];
}

void ConditionedChain::sweep() {
  const auto hi = std::uint32_t(chain_.sweep >> 32) << 2;
  CounterRng order(chain_.seed, 0xFFFFFFFFu, std::uint32_t(chain_.sweep), hi | 1u);
  const int first = order.uniform() < 0.5 ? 0 : 1;
  for (int pass = 0; pass < 2; ++pass)
    for (std::size_t i : geo_->colour[first ^ pass]) update_site(i, hi);
  const auto& m = *model_;
  if (m.global_moves && m.symmetric()) {
    const int N = m.params.N;
    auto& v = chain_.state.values;
    if (N == 1) {
      if (order.uniform() < 0.5)
        for (auto& x : v) x = -x;
    } else {
      std::array<double, kMaxSpin> u{};
      double nn = 0.0;
      while (nn == 0.0) {
        nn = 0.0;
        for (int c = 0; c < N; ++c) {
          u[c] = order.normal();
          nn += u[c] * u[c];
        }
      }
      nn = std::sqrt(nn);
      for (int c = 0; c < N; ++c) u[c] /= nn;
      for (std::size_t i = 0; i < chain_.state.sites(); ++i) {
        double dt = 0.0;
        for (int c = 0; c < N; ++c) dt += u[c] * v[i * N + c];
        for (int c = 0; c < N; ++c) v[i * N + c] -= 2.0 * dt * u[c];
      }
    }
    ++chain_.stats.global_moves;
  }
  ++chain_.sweep;
  check_constraint();
}

bool ConditionedChain::feasible() const {
  const auto& m = *model_;
  const int N = m.params.N;
  for (std::size_t i = 0; i < chain_.state.sites(); ++i) {
    const auto ci = m.constraint[i];
    if (ci >= 0 && m.specs[ci].forbids(chain_.state.values.data() + i * N, N)) return false;
    for (int c = 0; c < N; ++c)
      if (!std::isfinite(chain_.state.values[i * N + c])) return false;
  }
  return true;
}

void ConditionedChain::check_constraint() const {
  if (!feasible())
    throw ConstraintError("conditioned chain left the admissible set at sweep " + std::to_string(chain_.sweep));
}

FieldState ConditionedChain::observed_state() const {
  const auto& m = *model_;
  if (m.observed_to_sim.empty()) return chain_.state;
  FieldState s = FieldState::zeros(m.params, m.observed);
  const int N = m.params.N;
  for (std::size_t i = 0; i < m.observed_to_sim.size(); ++i)
    for (int c = 0; c < N; ++c) s.values[i * N + c] = chain_.state.values[m.observed_to_sim[i] * N + c];
  return s;
}

ChainState gibbs_sweep(ChainState chain, std::shared_ptr<const ConditionedModel> model) {
  ConditionedChain c(std::move(model), std::move(chain));
  c.check_constraint();
  c.sweep();
  return std::move(c.chain());
}

RunSummary run_conditioned(std::shared_ptr<const ConditionedModel> model, const RunOptions& opt,
                           const StateSink& sink) {
  if (opt.sweeps <= opt.burn_in) throw ConfigError("sweeps must exceed burn-in");
  if (opt.thin == 0) throw ConfigError("thin must be >= 1");
  ConditionedChain chain(model, opt.seed);
  RunSummary out;
  std::vector<double> origin;
  const std::size_t o = model->domain->box.origin();
  const int N = model->params.N;
  for (std::uint64_t s = 1; s <= opt.sweeps; ++s) {
    chain.sweep();
    if (s <= opt.burn_in) continue;
    origin.push_back(chain.chain().state.values[o * N]);
    if ((s - opt.burn_in) % opt.thin == 0) {
      sink(chain.observed_state(), s);
      ++out.emitted;
    }
  }
  out.stats = chain.chain().stats;
  out.tau_origin = integrated_autocorr_time(origin);
  out.mixing_flag = out.stats.mh_steps > 0 && out.stats.mh_rate() < 0.1;
  return out;
}

std::vector<FieldState> run_conditioned(std::shared_ptr<const ConditionedModel> model, const RunOptions& opt,
                                        RunSummary* summary) {
  std::vector<FieldState> v;
  const auto s = run_conditioned(model, opt, [&](const FieldState& st, std::uint64_t) { v.push_back(st); });
  if (summary) *summary = s;
  return v;
}

// ---------------------------------------------------------------------------

namespace {
// Scalar statistic per particle whose comparison with a threshold decides the
// constraint at every level of the family.
struct LevelFamily {
  AvoidanceSpec target;
  double centre = 0.0;  // interval centre
  double lo = 0.0;      // threshold at level 0
  double hi = 0.0;      // threshold at the target

  double statistic(const FieldState& s, const std::vector<std::size_t>& V) const {
    const int N = s.params.N;
    double m = kInf;
    for (std::size_t i : V) {
      double v;
      switch (target.kind) {
        case AvoidanceSpec::Kind::ball: v = s.norm(i); break;
        case AvoidanceSpec::Kind::interval: v = std::abs(s.values[i * N] - centre); break;
        default: v = s.values[i * N]; break;
      }
      m = std::min(m, v);
    }
    return m;
  }
  AvoidanceSpec spec_at(double thr) const {
    switch (target.kind) {
      case AvoidanceSpec::Kind::ball: return AvoidanceSpec::ball(thr);
      case AvoidanceSpec::Kind::interval: return AvoidanceSpec::interval(centre - thr, centre + thr);
      default: return AvoidanceSpec::halfline(thr);
    }
  }
};
}  // namespace

AvoidEstimate estimate_log_avoid_probability(const FieldParams& p, DomainPtr dom, const AvoidanceSpec& spec,
                                             const AvoidEstimateOptions& opt) {
  spec.validate(p.N);
  if (spec.kind == AvoidanceSpec::Kind::none) throw ConfigError("nothing to estimate for an empty constraint");
  if (p.N != 1 && spec.kind != AvoidanceSpec::Kind::ball) throw ConfigError("estimate needs N = 1 or a ball");
  const int M = opt.particles;
  if (M < 10) throw ConfigError("need at least 10 particles");
  const std::vector<std::size_t>& V = dom->region;

  LevelFamily fam;
  fam.target = spec;
  switch (spec.kind) {
    case AvoidanceSpec::Kind::ball:
      fam.lo = 0.0;
      fam.hi = spec.b;
      break;
    case AvoidanceSpec::Kind::interval:
      fam.centre = 0.5 * (spec.a + spec.b);
      fam.lo = 0.0;
      fam.hi = 0.5 * (spec.b - spec.a);
      break;
    default: {
      GreenOperator G(dom, p);
      double gmax = 0.0;
      for (std::size_t i : V) gmax = std::max(gmax, G.value(i, i));
      fam.hi = spec.b;
      fam.lo = spec.b - opt.shift_sds * std::sqrt(gmax);
      break;
    }
  }
  auto schedule = opt.schedule;
  if (schedule == AvoidEstimateOptions::Schedule::automatic)
    schedule = spec.kind == AvoidanceSpec::Kind::halfline ? AvoidEstimateOptions::Schedule::adaptive
                                                           : AvoidEstimateOptions::Schedule::geometric;
  std::vector<double> fixed;
  if (schedule == AvoidEstimateOptions::Schedule::geometric) {
    const int K = std::max(1, opt.bridges);
    for (int k = 1; k <= K; ++k) {
      const double t = K == 1 ? 1.0 : std::pow(opt.t_min, double(K - k) / double(K - 1));
      fixed.push_back(fam.lo + t * (fam.hi - fam.lo));
    }
  }

  // Level 0: exact unconstrained draws.
  auto base = std::make_shared<const ConditionedModel>(
      build_model(p, dom, AvoidanceSpec::none(), RegionKind::domain, BoundaryCondition{}));
  FieldSampler sampler(p, dom);
  std::vector<ChainState> parts(M);
  std::vector<double> stat(M);
  parallel_for(std::size_t(M), [&](std::size_t i) {
    parts[i].state = sampler.draw(derive_seed(opt.seed, 0xA15), i);
    stat[i] = fam.statistic(parts[i].state, V);
  });

  AvoidEstimate est;
  est.min_ess = double(M);
  double var = 0.0;
  double thr = -kInf;
  // For a half-line the level-0 family member is the shifted constraint; include it.
  for (int level = 0; level < opt.max_levels; ++level) {
    double next;
    if (schedule == AvoidEstimateOptions::Schedule::geometric) {
      if (level >= int(fixed.size())) break;
      next = fixed[level];
    } else {
      if (thr >= fam.hi) break;
      std::vector<double> sorted = stat;
      std::sort(sorted.begin(), sorted.end());
      const double med = sorted[M / 2];
      next = level == 0 && spec.kind == AvoidanceSpec::Kind::halfline ? std::min(fam.lo, med) : med;
      // Jump to the target once at least half the particles already satisfy it.
      const auto ok_final = std::count_if(stat.begin(), stat.end(), [&](double s) { return s >= fam.hi; });
      if (2 * ok_final >= M || next >= fam.hi) next = fam.hi;
      if (next <= thr) next = std::min(fam.hi, thr + 1e-3 * (fam.hi - fam.lo));
    }
    std::vector<std::size_t> alive;
    for (int i = 0; i < M; ++i)
      if (stat[i] >= next) alive.push_back(std::size_t(i));
    const double frac = double(alive.size()) / M;
    est.level_params.push_back(next);
    est.level_fractions.push_back(frac);
    est.min_ess = std::min(est.min_ess, double(alive.size()));
    if (alive.size() < 10) {
      est.levels = level;
      est.se = std::sqrt(var);
      throw UnreliableEstimate("effective sample size " + std::to_string(alive.size()) + " < 10 at level " +
                                   std::to_string(level),
                               est);
    }
    est.log_p += std::log(frac);
    var += (1.0 - frac) / (double(M) * frac);
    thr = next;
    est.levels = level + 1;

    // Systematic resampling among survivors, then fresh streams for each copy.
    CounterRng rr(opt.seed, 0xFFFFFFF0u, std::uint32_t(level), 7);
    const double u0 = rr.uniform();
    std::vector<ChainState> fresh(M);
    for (int i = 0; i < M; ++i) {
      const std::size_t pick = alive[std::min(alive.size() - 1, std::size_t((i + u0) * alive.size() / M))];
      fresh[i] = parts[pick];
      fresh[i].seed = derive_seed(opt.seed, (std::uint64_t(level + 1) << 24) | std::uint64_t(i));
      fresh[i].sweep = 0;
    }
    parts = std::move(fresh);
    auto model = std::make_shared<const ConditionedModel>(base->with_spec(fam.spec_at(thr)));
    parallel_for(std::size_t(M), [&](std::size_t i) {
      ConditionedChain c(model, std::move(parts[i]));
      c.check_constraint();
      for (int s = 0; s < opt.sweeps_per_bridge; ++s) c.sweep();
      parts[i] = std::move(c.chain());
      stat[i] = fam.statistic(parts[i].state, V);
    });
  }
  if (thr < fam.hi) throw UnreliableEstimate("level schedule did not reach the target", est);
  est.se = std::sqrt(var);
  return est;
}

}  // namespace gffc
