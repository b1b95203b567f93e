#pragma once
// Dobrushin-type uniqueness check for the massive conditioned field with unit
// coupling: the single-site law is N(ũ, 1/κ) restricted to the complement of I,
// κ = 2d + m2, and K = 2d · sup_ũ Var.

#include <cmath>
#include <vector>

#include <json.hpp>

namespace gffc {

struct TruncatedGaussianSpec {
  double a = -INFINITY;  // lower cut; -inf for a half-line
  double b = 0.0;        // upper cut
  double u_tilde = 0.0;  // unconstrained mean
  double kappa = 1.0;    // precision

  static TruncatedGaussianSpec make(int d, double m2, double a, double b, double u_tilde);
  void validate() const;
  // ∫ over (I^c - ũ) of exp(-κη²/2)
  double normaliser() const;
  // exp(-κq²/2) / normaliser
  double M(double q) const;
};

double truncated_mean(const TruncatedGaussianSpec& s);
double truncated_variance(const TruncatedGaussianSpec& s);

struct DobrushinReport {
  int d = 2;
  double m2 = 0.0;
  double a = 0.0, b = 0.0;
  double sup_var = 0.0;
  double argmax_u = 0.0;
  double K = 0.0;
  bool verdict = false;
  int grid_points = 0;
  double search_center = 0.0, search_halfwidth = 0.0;
  int local_maxima = 0;      // grid local maxima within 1e-6 of the sup
  bool multimodal = false;
  int refinement_steps = 0;
};

// I = (a, b), a may be -inf. Requires m2 > 0 or a finite a.
DobrushinReport dobrushin_K(int d, double m2, double a, double b, int grid_points = 1000);
inline DobrushinReport dobrushin_K_ball(int d, double m2, double R) { return dobrushin_K(d, m2, -R, R); }

// Variance bound 1/κ (1 + 2R / ∫_{|η|>=R} exp(-κη²/2)) valid for every ũ when I = (-R,R).
double sufficient_variance_bound(int d, double m2, double R);

struct R0Result {
  double R0 = 0.0;              // largest R (to tol) with K(R) < 1
  double R0_sufficient = 0.0;   // same for the closed-form bound
  double bound_at_R0 = 0.0;     // sufficient_variance_bound at R0
  double sup_var_at_R0 = 0.0;
  int iterations = 0;
  bool bracket_ok = true;       // false when the condition does not change sign on [1e-6, 10]
};
R0Result find_R0(int d, double m2, double tol = 1e-4);

struct VectorBound {
  double V = 0.0;
  bool valid = false;           // parenthesis positive
  bool criterion = false;       // valid and V < 1/(2d)
  bool mass_condition = false;  // m2 > 2d(N-1)
};
VectorBound vector_variance_bound(int N, double R, double m2, int d);

nlohmann::json to_json(const DobrushinReport& r);
nlohmann::json to_json(const R0Result& r);
nlohmann::json to_json(const VectorBound& v);

}  // namespace gffc
