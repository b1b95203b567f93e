#include "gffc/uniqueness.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <numbers>

#include "gffc/errors.hpp"

namespace gffc {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
const double kLogSqrt2Pi = 0.5 * std::log(2 * std::numbers::pi);

// s = 2/(z + 3/(z + 4/(z + ...))), evaluated backwards. Good for z >= 4.
double mills_tail(double z) {
  double s = 0.0;
  for (int k = 400; k >= 2; --k) s = k / (z + s);
  return s;
}

struct Tail {
  double log_weight;  // log Q(z)
  double mean;        // E[Z | Z >= z]
  double var;         // Var[Z | Z >= z]
};

// Standard normal restricted to [z, inf).
Tail upper_tail(double z) {
  Tail t{};
  if (z >= 4.0) {
    const double s = mills_tail(z);
    const double delta = 1.0 / (z + s);  // λ - z
    t.mean = z + delta;
    t.var = (s * (z + s) - 1.0) / ((z + s) * (z + s));
    // Q = φ(z) / λ
    t.log_weight = -0.5 * z * z - kLogSqrt2Pi - std::log(t.mean);
  } else {
    const double q = 0.5 * boost::math::erfc(z / kSqrt2);
    const double phi = std::exp(-0.5 * z * z - kLogSqrt2Pi);
    const double lam = phi / q;
    t.mean = lam;
    t.var = 1.0 + z * lam - lam * lam;
    t.log_weight = std::log(q);
  }
  return t;
}

struct Mixture {
  double mean, var;
};

// Standard normal on (-inf, alpha] ∪ [beta, inf).
Mixture standard_mixture(double alpha, double beta) {
  const Tail r = upper_tail(beta);
  if (!std::isfinite(alpha)) return {r.mean, r.var};
  Tail l = upper_tail(-alpha);
  l.mean = -l.mean;
  const double lmax = std::max(l.log_weight, r.log_weight);
  const double wl = std::exp(l.log_weight - lmax), wr = std::exp(r.log_weight - lmax);
  const double W = wl + wr, pl = wl / W, pr = wr / W;
  const double mean = pl * l.mean + pr * r.mean;
  const double gap = r.mean - l.mean;
  return {mean, pl * l.var + pr * r.var + pl * pr * gap * gap};
}

}  // namespace

TruncatedGaussianSpec TruncatedGaussianSpec::make(int d, double m2, double a, double b, double u_tilde) {
  TruncatedGaussianSpec s{a, b, u_tilde, 2.0 * d + m2};
  s.validate();
  return s;
}

void TruncatedGaussianSpec::validate() const {
  if (!(kappa > 0) || !std::isfinite(kappa)) throw ConfigError("precision must be positive");
  if (std::isnan(a) || !std::isfinite(b) || !std::isfinite(u_tilde)) throw ConfigError("cuts must be numbers");
  if (a > b) throw ConfigError("lower cut above upper cut");
}

double TruncatedGaussianSpec::normaliser() const {
  const double sk = std::sqrt(kappa);
  const double beta = sk * (b - u_tilde);
  double q = 0.5 * boost::math::erfc(beta / kSqrt2);
  if (std::isfinite(a)) q += 0.5 * boost::math::erfc(-sk * (a - u_tilde) / kSqrt2);
  return q * std::sqrt(2 * std::numbers::pi / kappa);
}

double TruncatedGaussianSpec::M(double q) const { return std::exp(-0.5 * kappa * q * q) / normaliser(); }

double truncated_mean(const TruncatedGaussianSpec& s) {
  s.validate();
  if (s.a == s.b) return s.u_tilde;
  const double sk = std::sqrt(s.kappa);
  return s.u_tilde + standard_mixture(sk * (s.a - s.u_tilde), sk * (s.b - s.u_tilde)).mean / sk;
}

double truncated_variance(const TruncatedGaussianSpec& s) {
  s.validate();
  if (s.a == s.b) return 1.0 / s.kappa;
  const double sk = std::sqrt(s.kappa);
  return standard_mixture(sk * (s.a - s.u_tilde), sk * (s.b - s.u_tilde)).var / s.kappa;
}

DobrushinReport dobrushin_K(int d, double m2, double a, double b, int grid_points) {
  if (d < 1) throw ConfigError("dimension must be positive");
  if (!(m2 >= 0)) throw ConfigError("mass must be nonnegative");
  if (!(m2 > 0) && !std::isfinite(a)) throw ConfigError("half-line constraint needs m2 > 0");
  if (grid_points < 3) throw ConfigError("need at least three grid points");
  DobrushinReport r;
  r.d = d;
  r.m2 = m2;
  r.a = a;
  r.b = b;
  const double kappa = 2.0 * d + m2;
  const double half = std::isfinite(a) ? 0.5 * (b - a) : 0.0;
  r.search_center = std::isfinite(a) ? 0.5 * (a + b) : b;
  r.search_halfwidth = 10 * std::max(half, std::isfinite(a) ? 0.0 : std::abs(b)) + 10 / std::sqrt(kappa);
  r.grid_points = grid_points;
  auto var = [&](double u) { return truncated_variance({a, b, u, kappa}); };

  std::vector<double> us(grid_points), vs(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    us[i] = r.search_center - r.search_halfwidth + 2 * r.search_halfwidth * i / (grid_points - 1);
    vs[i] = var(us[i]);
  }
  const int best = int(std::max_element(vs.begin(), vs.end()) - vs.begin());
  double sup = vs[best], arg = us[best];
  const double step = us[1] - us[0];
  // For a bounded interval the two tail masses balance at the midpoint, where the
  // variance can spike on a scale far below the grid spacing.
  if (std::isfinite(a)) {
    const double vc = var(r.search_center);
    if (vc > sup) sup = vc, arg = r.search_center;
  }

  // Golden-section refinement within one grid cell of the best candidate.
  if (arg > us.front() && arg < us.back()) {
    double lo = arg - step, hi = arg + step;
    const double phi = 0.5 * (std::sqrt(5.0) - 1);
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = var(x1), f2 = var(x2);
    while (hi - lo > 1e-10 * std::max(1.0, std::abs(arg)) && r.refinement_steps < 200) {
      ++r.refinement_steps;
      if (f1 > f2) {
        hi = x2, x2 = x1, f2 = f1;
        x1 = hi - phi * (hi - lo), f1 = var(x1);
      } else {
        lo = x1, x1 = x2, f1 = f2;
        x2 = lo + phi * (hi - lo), f2 = var(x2);
      }
    }
    const double xm = 0.5 * (lo + hi), fm = var(xm);
    if (fm > sup) sup = fm, arg = xm;
  }
  for (int i = 0; i < grid_points; ++i) {
    const bool left = i == 0 || vs[i] >= vs[i - 1];
    const bool right = i == grid_points - 1 || vs[i] >= vs[i + 1];
    if (left && right && vs[i] >= sup - 1e-6 * sup) ++r.local_maxima;
  }
  r.multimodal = r.local_maxima > 1;
  r.sup_var = sup;
  r.argmax_u = arg;
  r.K = 2.0 * d * sup;
  r.verdict = r.K < 1.0;
  return r;
}

double sufficient_variance_bound(int d, double m2, double R) {
  if (!(R > 0)) throw ConfigError("radius must be positive");
  const double kappa = 2.0 * d + m2;
  const double z = 2 * 0.5 * boost::math::erfc(std::sqrt(kappa) * R / kSqrt2) * std::sqrt(2 * std::numbers::pi / kappa);
  return (1.0 + 2.0 * R / z) / kappa;
}

R0Result find_R0(int d, double m2, double tol) {
  if (d < 2) throw ConfigError("find_R0 needs d >= 2");
  if (!(m2 >= 0)) throw ConfigError("mass must be nonnegative");
  const double target = 1.0 / (2.0 * d);
  auto exact_ok = [&](double R) { return dobrushin_K(d, m2, -R, R).sup_var < target; };
  auto suff_ok = [&](double R) { return sufficient_variance_bound(d, m2, R) < target; };
  R0Result out;
  auto bisect = [&](auto ok, int& iters) {
    double lo = 1e-6, hi = 10.0;
    if (!ok(lo)) {
      out.bracket_ok = false;
      return lo;
    }
    if (ok(hi)) {
      out.bracket_ok = false;
      return hi;
    }
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? lo : hi) = mid;
      ++iters;
    }
    return lo;
  };
  out.R0 = bisect(exact_ok, out.iterations);
  int dummy = 0;
  out.R0_sufficient = bisect(suff_ok, dummy);
  out.bound_at_R0 = sufficient_variance_bound(d, m2, out.R0);
  out.sup_var_at_R0 = dobrushin_K(d, m2, -out.R0, out.R0).sup_var;
  return out;
}

VectorBound vector_variance_bound(int N, double R, double m2, int d) {
  if (N < 2) throw ConfigError("vector bound needs N >= 2");
  if (!(R >= 0) || !(m2 >= 0) || d < 1) throw ConfigError("invalid arguments");
  const double kappa = 2.0 * d + m2;
  const double t = std::pow(R * R * std::numbers::e * kappa / N, N / 2.0) / std::sqrt(std::numbers::pi * N);
  VectorBound v;
  v.mass_condition = m2 > 2.0 * d * (N - 1);
  v.valid = 1.0 - t > 0;
  v.V = v.valid ? N / kappa / (1.0 - t) : INFINITY;
  v.criterion = v.valid && v.V < 1.0 / (2.0 * d);
  return v;
}

nlohmann::json to_json(const DobrushinReport& r) {
  return {{"d", r.d},
          {"mass2", r.m2},
          {"a", std::isfinite(r.a) ? nlohmann::json(r.a) : nlohmann::json("-inf")},
          {"b", r.b},
          {"supVar", r.sup_var},
          {"argmax_u", r.argmax_u},
          {"K", r.K},
          {"verdict", r.verdict},
          {"grid_points", r.grid_points},
          {"search_center", r.search_center},
          {"search_halfwidth", r.search_halfwidth},
          {"local_maxima", r.local_maxima},
          {"multimodal", r.multimodal},
          {"refinement_steps", r.refinement_steps}};
}

nlohmann::json to_json(const R0Result& r) {
  return {{"R0", r.R0},
          {"R0_sufficient", r.R0_sufficient},
          {"bound_at_R0", r.bound_at_R0},
          {"supVar_at_R0", r.sup_var_at_R0},
          {"iterations", r.iterations},
          {"bracket_ok", r.bracket_ok}};
}

nlohmann::json to_json(const VectorBound& v) {
  return {{"V", std::isfinite(v.V) ? nlohmann::json(v.V) : nlohmann::json(nullptr)},
          {"valid", v.valid},
          {"criterion", v.criterion},
          {"mass_condition", v.mass_condition}};
}

}  // namespace gffc
