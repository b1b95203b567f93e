#pragma once
// Field conditioned on {φ(x) ∉ I for x in V}: exact single-site conditionals,
// checkerboard Gibbs chains, and a sequential Monte Carlo estimate of log P.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gffc/gaussian_core.hpp"

namespace gffc {

inline constexpr int kMaxSpin = 16;

struct ChainGeometry;

struct AvoidanceSpec {
  enum class Kind { none, ball, interval, halfline };
  Kind kind = Kind::none;
  double a = 0.0;  // interval lower end; -R for a ball
  double b = 0.0;  // interval upper end, half-line end, or R for a ball

  static AvoidanceSpec none() { return {}; }
  static AvoidanceSpec ball(double R);
  static AvoidanceSpec interval(double a, double b);
  static AvoidanceSpec halfline(double b);
  static AvoidanceSpec parse(const std::string& text);
  std::string str() const;
  void validate(int N) const;
  double radius() const { return b; }
  // Degenerate intervals (width < 1e-14) and 'none' impose nothing.
  bool trivial() const;
  bool forbids(const double* v, int N) const;
  // Invariant under v -> Ov for every orthogonal O (and under v -> -v when N = 1).
  bool symmetric() const;
  bool operator==(const AvoidanceSpec&) const = default;
};

struct BoundaryCondition {
  enum class Mode { dirichlet_zero, clamp_annulus, clamp_exact };
  Mode mode = Mode::dirichlet_zero;
  double level = 0.0;

  static BoundaryCondition parse(const std::string& text);
  std::string str() const;
};

// Law ∝ exp(-kappa |γ|²/2 + g γ·s) 1{γ ∉ I}.
struct SiteLaw {
  int N = 1;
  double kappa = 1.0;
  double sd = 1.0;
  std::array<double, kMaxSpin> mean{};
  AvoidanceSpec spec;
};

SiteLaw site_conditional(const FieldParams& p, int d, std::span<const double> neighbour_sum, const AvoidanceSpec& spec);

struct KernelStats {
  std::uint64_t gaussian = 0;   // unconstrained or first-try draws
  std::uint64_t inverse_cdf = 0;
  std::uint64_t tail = 0;       // exponential-proposal tail draws
  std::uint64_t rejection = 0;  // N >= 2 rejection successes after the first try
  std::uint64_t mh_steps = 0;
  std::uint64_t mh_accepts = 0;
  std::uint64_t global_moves = 0;
  double mh_rate() const { return mh_steps ? double(mh_accepts) / double(mh_steps) : 1.0; }
  KernelStats& operator+=(const KernelStats& o);
};

// Draws from the site law. For N >= 2, 'current' is the present value (used only
// by the Metropolis fallback). Writes N values to out.
void sample_site(const SiteLaw& law, CounterRng& rng, const double* current, double* out, KernelStats& stats);

enum class RegionKind { domain, box, none };

struct ConditionedModel {
  FieldParams params;
  DomainPtr domain;          // simulation domain
  DomainPtr observed;        // Lambda_n with D_n (equal to domain unless annulus mode)
  std::vector<std::size_t> observed_to_sim;  // site map, empty when identical
  std::vector<std::int16_t> constraint;      // per simulation site: -1 or index into specs
  std::vector<AvoidanceSpec> specs;
  double boundary_value = 0.0;               // value on the outer boundary (N=1)
  AvoidanceSpec spec;                        // the constraint on V
  BoundaryCondition bc;
  RegionKind region = RegionKind::domain;
  bool global_moves = true;

  bool symmetric() const;
  // Copy with the V constraint replaced (annulus constraints kept).
  ConditionedModel with_spec(const AvoidanceSpec& s) const;
};

ConditionedModel build_model(const FieldParams& p, DomainPtr dom, const AvoidanceSpec& spec, RegionKind region,
                             const BoundaryCondition& bc);

struct ChainState {
  FieldState state;
  std::uint64_t sweep = 0;
  std::uint64_t seed = 0;
  KernelStats stats;
};

class ConditionedChain {
 public:
  ConditionedChain(std::shared_ptr<const ConditionedModel> model, std::uint64_t seed);
  ConditionedChain(std::shared_ptr<const ConditionedModel> model, ChainState start);

  // One sweep: both colour classes in a random order, then the global reflection
  // when the target is symmetric and global moves are enabled.
  void sweep();
  const ChainState& chain() const { return chain_; }
  ChainState& chain() { return chain_; }
  const ConditionedModel& model() const { return *model_; }
  void set_model(std::shared_ptr<const ConditionedModel> m);
  // Throws ConstraintError if any constrained site violates its spec.
  void check_constraint() const;
  bool feasible() const;
  // State restricted to Lambda_n (annulus mode drops the outer ring).
  FieldState observed_state() const;

 private:
  void update_site(std::size_t i, std::uint32_t stream_hi);
  std::shared_ptr<const ConditionedModel> model_;
  ChainState chain_;
  std::shared_ptr<const struct ChainGeometry> geo_;
};

// Functional form of one sweep.
ChainState gibbs_sweep(ChainState chain, std::shared_ptr<const ConditionedModel> model);

struct RunOptions {
  std::uint64_t sweeps = 1000;
  std::uint64_t burn_in = 100;
  std::uint64_t thin = 10;
  std::uint64_t seed = 0;
};

struct RunSummary {
  std::uint64_t emitted = 0;
  KernelStats stats;
  double tau_origin = 1.0;  // integrated autocorrelation time of φ(0)_1 after burn-in
  bool mixing_flag = false; // Metropolis acceptance below 0.1
};

using StateSink = std::function<void(const FieldState&, std::uint64_t sweep)>;

RunSummary run_conditioned(std::shared_ptr<const ConditionedModel> model, const RunOptions& opt, const StateSink& sink);
std::vector<FieldState> run_conditioned(std::shared_ptr<const ConditionedModel> model, const RunOptions& opt,
                                        RunSummary* summary = nullptr);

struct AvoidEstimateOptions {
  enum class Schedule { automatic, geometric, adaptive };
  Schedule schedule = Schedule::automatic;  // geometric for ball/interval, adaptive for half-lines
  int bridges = 32;
  double t_min = 1e-3;
  int particles = 64;
  int sweeps_per_bridge = 10;
  double shift_sds = 6.0;  // half-line start: b - shift_sds * sqrt(max G)
  int max_levels = 400;
  std::uint64_t seed = 0;
};

struct AvoidEstimate {
  double log_p = 0.0;
  double se = 0.0;
  double min_ess = 0.0;
  int levels = 0;
  std::vector<double> level_params;
  std::vector<double> level_fractions;
};

struct UnreliableEstimate : std::runtime_error {
  UnreliableEstimate(const std::string& msg, AvoidEstimate partial)
      : std::runtime_error(msg), partial(std::move(partial)) {}
  AvoidEstimate partial;
};

AvoidEstimate estimate_log_avoid_probability(const FieldParams& p, DomainPtr dom, const AvoidanceSpec& spec,
                                             const AvoidEstimateOptions& opt);

}  // namespace gffc
