#include "gffc/app/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "gffc/app/plotdata.hpp"
#include "gffc/capacity.hpp"
#include "gffc/conditioner.hpp"
#include "gffc/errors.hpp"
#include "gffc/field_io.hpp"
#include "gffc/ising_bridge.hpp"
#include "gffc/observables.hpp"
#include "gffc/parallel.hpp"
#include "gffc/stats.hpp"
#include "gffc/uniqueness.hpp"

namespace gffc::app {

namespace fs = std::filesystem;
using nlohmann::json;

DomainPtr domain_for(int d, int n, const std::string& shape) {
  if (shape == "full") return make_box_domain(d, n);
  return make_domain(d, n, Shape::parse(shape));
}

FieldParams field_params(int N, double m2, const std::string& coupling) {
  if (coupling == "auto") return FieldParams::make(N, m2);
  double g = 0.0;
  try {
    std::size_t pos = 0;
    g = std::stod(coupling, &pos);
    if (pos != coupling.size()) throw std::invalid_argument(coupling);
  } catch (const std::exception&) {
    throw ConfigError("coupling must be 'auto' or a number, got '" + coupling + "'");
  }
  return FieldParams::make(N, m2, g);
}

std::uint64_t stream_seed(std::uint64_t root, int stage, int n, std::uint64_t index) {
  const std::uint64_t tag = (std::uint64_t(stage) << 56) ^ (std::uint64_t(n) << 32) ^ index;
  return derive_seed(root, tag);
}

// ---------------------------------------------------------------- run context

RunContext::RunContext(std::string dir, RunManifest manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {
  fs::create_directories(dir_);
  manifest_.status = "running";
  save();
}

std::string RunContext::path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

void RunContext::save() { manifest_.save(path("manifest.json")); }

void RunContext::record(const std::string& name) {
  OutputRecord rec{name, sha256_file(path(name)), std::uint64_t(fs::file_size(path(name)))};
  bool found = false;
  for (auto& o : manifest_.outputs)
    if (o.path == name) o = rec, found = true;
  if (!found) manifest_.outputs.push_back(rec);
  save();
}

void RunContext::write_text(const std::string& name, const std::string& content) {
  {
    std::ofstream os(path(name), std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path(name));
    os << content;
  }
  record(name);
}

void RunContext::write_json(const std::string& name, const json& j) { write_text(name, j.dump(2) + "\n"); }

void RunContext::finish(double wall_time) {
  manifest_.status = "complete";
  manifest_.wall_time = wall_time;
  save();
}

void RunContext::fail(const std::string& what, double wall_time) {
  manifest_.status = "failed";
  manifest_.error = what;
  manifest_.wall_time = wall_time;
  save();
}

// ---------------------------------------------------------------- helpers

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::string header) : text_(std::move(header) + "\n") {}
  template <class... T>
  void row(const T&... xs) {
    std::string line;
    ((line += (line.empty() ? "" : ",") + cell(xs)), ...);
    text_ += line + "\n";
  }
  const std::string& str() const { return text_; }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double x) { return fmt(x); }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I x) { return std::to_string(x); }
  std::string text_;
};

void say(std::ostream* log, const std::string& experiment, const std::string& msg) {
  if (log) *log << "[" << experiment << "] " << msg << std::endl;
}

Estimate pool(const std::vector<Estimate>& xs) {
  Estimate out;
  double v = 0.0;
  for (const auto& e : xs) {
    out.mean += e.mean;
    v += e.se * e.se;
    out.count += e.count;
  }
  out.mean /= double(xs.size());
  out.se = std::sqrt(v) / double(xs.size());
  return out;
}

std::string n_tag(int n) { return "n" + std::to_string(n); }

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

struct Common {
  int d;
  std::vector<int> ns;
  std::string shape;
  FieldParams p;
  std::uint64_t seed;
  bool streams;
};

Common common(const Config& c) {
  Common k;
  k.d = int(c.integer("lattice.d"));
  k.ns = c.has("lattice.n") ? c.int_list("lattice.n") : std::vector<int>{};
  k.shape = c.has("lattice.shape") ? c.text("lattice.shape") : "full";
  k.p = field_params(int(c.integer("field.spin")), c.real("field.mass2"), c.text("field.coupling"));
  k.seed = c.seed("experiment.seed");
  k.streams = c.boolean("experiment.streams");
  return k;
}

RegionKind parse_region(const std::string& s) {
  if (s == "domain") return RegionKind::domain;
  if (s == "box") return RegionKind::box;
  if (s == "none") return RegionKind::none;
  throw ConfigError("condition.region must be domain, box or none");
}

RunOptions chain_options(const Config& c) {
  RunOptions o;
  o.sweeps = std::uint64_t(c.integer("chain.sweeps"));
  o.burn_in = std::uint64_t(c.integer("chain.burn_in"));
  o.thin = std::uint64_t(c.integer("chain.thin"));
  if (o.sweeps <= o.burn_in || o.thin == 0) throw ConfigError("chain: need sweeps > burn_in and thin >= 1");
  return o;
}

// ---------------------------------------------------------------- repulsion and massive flatness

json norm_scaling(const Config& c, RunContext& ctx, std::ostream* log) {
  const auto k = common(c);
  const std::string name = c.text("experiment.name");
  const auto spec = AvoidanceSpec::parse(c.text("condition.avoid"));
  const auto region = parse_region(c.text("condition.region"));
  const auto bc = BoundaryCondition::parse(c.text("condition.bc"));
  const RunOptions base = chain_options(c);
  const int chains = int(c.integer("chain.chains"));
  const std::uint64_t stream_thin = std::uint64_t(std::max<long long>(1, c.integer("chain.stream_thin")));
  if (chains < 1) throw ConfigError("chain.chains must be >= 1");

  Csv table("n,samples,mean_norm,se,ratio,ratio_se,tau,mh_rate,mixing_flag");
  DataTable plot{name + ": conditioned norm at the origin against n",
                 {{"n", "box size", {}},
                  {"ratio", "mean |phi(0)| / log n", {}},
                  {"se", "standard error of the ratio", {}},
                  {"mean_norm", "mean |phi(0)|", {}}}};
  json summary = {{"experiment", name}, {"avoid", spec.str()}, {"mass2", k.p.m2}, {"shape", k.shape}};
  std::vector<double> ratio, ratio_se, mean_norm, se_norm, logn;

  for (int n : k.ns) {
    auto dom = domain_for(k.d, n, k.shape);
    auto model = std::make_shared<const ConditionedModel>(build_model(k.p, dom, spec, region, bc));
    const Box& box = dom->box;
    std::vector<std::size_t> probes;
    for (int x = 0; x <= box.hi; ++x) {
      const std::size_t i = box.index(Coord{x, 0, 0});
      if (dom->in_region(i)) probes.push_back(i);
    }
    const double L = log_n(n);

    struct ChainOut {
      Estimate origin;
      std::vector<Estimate> profile;
      RunSummary summary;
    };
    std::vector<ChainOut> outs(chains);
    parallel_for(std::size_t(chains), [&](std::size_t ci) {
      RunOptions o = base;
      o.seed = stream_seed(k.seed, 1, n, ci);
      std::vector<double> origin;
      std::vector<std::vector<double>> prof(probes.size());
      std::unique_ptr<StreamWriter> writer;
      const std::string stream_name = "stream_" + n_tag(n) + "_c" + std::to_string(ci) + ".gffs";
      if (k.streams) writer = std::make_unique<StreamWriter>(ctx.path(stream_name));
      std::uint64_t emitted = 0;
      outs[ci].summary = run_conditioned(model, o, [&](const FieldState& s, std::uint64_t sweep) {
        origin.push_back(s.norm(s.domain->box.origin()));
        for (std::size_t j = 0; j < probes.size(); ++j) prof[j].push_back(s.norm(probes[j]) / L);
        if (writer && emitted % stream_thin == 0) writer->append(s, sweep);
        ++emitted;
      });
      if (writer) writer->close();
      outs[ci].origin = batch_means(origin);
      for (auto& series : prof) outs[ci].profile.push_back(batch_means(series));
    });
    if (k.streams)
      for (int ci = 0; ci < chains; ++ci) {
        const std::string stem = "stream_" + n_tag(n) + "_c" + std::to_string(ci) + ".gffs";
        for (const std::string& f : {stem, stem + ".idx", stem + ".json"})
          if (fs::exists(ctx.path(f))) ctx.record(f);
      }

    std::vector<Estimate> per_chain;
    double tau = 0.0, mh = 0.0;
    bool flag = false;
    KernelStats stats;
    for (const auto& o : outs) {
      per_chain.push_back(o.origin);
      tau += o.summary.tau_origin / chains;
      stats += o.summary.stats;
      flag = flag || o.summary.mixing_flag;
    }
    mh = stats.mh_rate();
    const Estimate e = pool(per_chain);
    table.row(n, std::uint64_t(e.count), e.mean, e.se, e.mean / L, e.se / L, tau, mh, int(flag));
    ctx.write_text("scaling.csv", table.str());
    ratio.push_back(e.mean / L);
    ratio_se.push_back(e.se / L);
    mean_norm.push_back(e.mean);
    se_norm.push_back(e.se);
    logn.push_back(L);
    plot.columns[0].values.push_back(n);
    plot.columns[1].values.push_back(e.mean / L);
    plot.columns[2].values.push_back(e.se / L);
    plot.columns[3].values.push_back(e.mean);

    DataTable prof{name + ": norm profile along the first axis, n=" + std::to_string(n),
                   {{"x", "first coordinate of the site", {}},
                    {"ratio", "mean |phi(x)| / log n", {}},
                    {"se", "standard error", {}}}};
    for (std::size_t j = 0; j < probes.size(); ++j) {
      std::vector<Estimate> parts;
      for (const auto& o : outs) parts.push_back(o.profile[j]);
      const Estimate pe = pool(parts);
      prof.columns[0].values.push_back(box.coord(probes[j])[0]);
      prof.columns[1].values.push_back(pe.mean);
      prof.columns[2].values.push_back(pe.se);
    }
    ctx.write_text("profile_" + n_tag(n) + ".dat", format_plotdata(prof, PlotKind::profile));
    say(log, name, "n=" + std::to_string(n) + " E|phi(0)|=" + fmt(e.mean) + " +- " + fmt(e.se) +
                       " ratio=" + fmt(e.mean / L));
  }
  ctx.write_text("scaling.dat", format_plotdata(plot, PlotKind::scaling));

  std::vector<double> w;
  for (double s : ratio_se) w.push_back(s > 0 ? 1.0 / (s * s) : 1.0);
  const LinearFit fit = k.ns.size() >= 2 ? linear_fit(logn, ratio, w) : LinearFit{};
  double lo = *std::min_element(mean_norm.begin(), mean_norm.end());
  double hi = *std::max_element(mean_norm.begin(), mean_norm.end());
  summary["n"] = k.ns;
  summary["mean_norm"] = mean_norm;
  summary["mean_norm_se"] = se_norm;
  summary["ratio"] = ratio;
  summary["ratio_se"] = ratio_se;
  summary["ratio_strictly_increasing"] = strictly_increasing(ratio);
  summary["mean_norm_strictly_increasing"] = strictly_increasing(mean_norm);
  summary["fit_slope"] = fit.slope;
  summary["fit_slope_se"] = fit.slope_se;
  summary["relative_spread"] = (hi - lo) / lo;
  return summary;
}

// ---------------------------------------------------------------- no hole

json no_hole(const Config& c, RunContext& ctx, std::ostream* log) {
  const auto k = common(c);
  const auto spec = AvoidanceSpec::parse(c.text("condition.avoid"));
  spec.validate(k.p.N);
  const int draws = int(c.integer("observe.draws"));
  const double rfrac = c.real("observe.radius_fraction");
  const double sfrac = c.real("observe.shift_fraction");
  const int dirs = int(c.integer("observe.directions"));
  if (draws < 1 || dirs < 1 || !(rfrac > 0) || !(sfrac >= 0)) throw ConfigError("no-hole: bad observe parameters");

  Csv table("n,direction,angle,t_over_log_n,radius,holes,draws,frequency");
  DataTable plot{"no-hole: frequency of a hole at shift t, worst direction",
                 {{"n", "box size", {}},
                  {"t_over_log_n", "|t| / log n", {}},
                  {"frequency", "fraction of draws where phi+t avoids I on the ball", {}}}};
  std::vector<double> sup_freq;
  json per_n = json::array();
  for (int n : k.ns) {
    auto dom = domain_for(k.d, n, k.shape);
    FieldSampler sampler(k.p, dom);
    const double L = log_n(n);
    const double tn = sfrac * 2.0 * L;
    const double radius = rfrac * n;
    std::vector<std::vector<double>> shifts(dirs, std::vector<double>(k.p.N, 0.0));
    std::vector<double> angles(dirs);
    for (int j = 0; j < dirs; ++j) {
      angles[j] = 2.0 * std::numbers::pi * j / dirs;
      if (k.p.N == 1) {
        shifts[j][0] = (j % 2 ? -tn : tn);
        angles[j] = j % 2 ? std::numbers::pi : 0.0;
      } else {
        shifts[j][0] = tn * std::cos(angles[j]);
        shifts[j][1] = tn * std::sin(angles[j]);
      }
    }
    const std::uint64_t seed = stream_seed(k.seed, 1, n, 0);
    std::vector<std::uint8_t> hole(std::size_t(draws) * dirs, 0);
    parallel_for(std::size_t(draws), [&](std::size_t i) {
      const FieldState s = sampler.draw(seed, i);
      for (int j = 0; j < dirs; ++j) hole[i * dirs + j] = hole_scan(s, shifts[j], Coord{}, radius, spec);
    });
    if (k.streams) {
      const std::string name = "stream_" + n_tag(n) + ".gffs";
      StreamWriter w(ctx.path(name));
      for (int i = 0; i < draws; ++i) w.append(sampler.draw(seed, i), std::uint64_t(i));
      w.close();
      for (const std::string& f : {name, name + ".idx", name + ".json"}) ctx.record(f);
    }
    double worst = 0.0;
    json freqs = json::array();
    for (int j = 0; j < dirs; ++j) {
      int count = 0;
      for (int i = 0; i < draws; ++i) count += hole[std::size_t(i) * dirs + j];
      const double f = double(count) / draws;
      worst = std::max(worst, f);
      freqs.push_back(f);
      table.row(n, j, angles[j], tn / L, radius, count, draws, f);
    }
    ctx.write_text("holes.csv", table.str());
    sup_freq.push_back(worst);
    plot.columns[0].values.push_back(n);
    plot.columns[1].values.push_back(tn / L);
    plot.columns[2].values.push_back(worst);
    per_n.push_back({{"n", n}, {"frequency", freqs}, {"sup_frequency", worst}, {"radius", radius}, {"t", tn}});
    say(log, "no-hole", "n=" + std::to_string(n) + " sup frequency " + fmt(worst));
  }
  ctx.write_text("holes.dat", format_plotdata(plot, PlotKind::scaling));
  return {{"experiment", "no-hole"},
          {"avoid", spec.str()},
          {"draws", draws},
          {"per_n", per_n},
          {"n", k.ns},
          {"sup_frequency", sup_freq},
          {"strictly_decreasing", strictly_decreasing(sup_freq)}};
}

// ---------------------------------------------------------------- freezing

json freezing(const Config& c, RunContext& ctx, std::ostream* log) {
  const auto k = common(c);
  const auto spec = AvoidanceSpec::parse(c.text("condition.avoid"));
  const auto region = parse_region(c.text("condition.region"));
  const auto bc = BoundaryCondition::parse(c.text("condition.bc"));
  RunOptions opt = chain_options(c);
  const auto seps = c.int_list("observe.separations");
  const bool minority = c.boolean("observe.minority");
  const int box_side = int(c.integer("observe.box_side"));
  const double beta = c.real("observe.beta");
  const double threshold = c.real("observe.minority_threshold");

  Csv spin_csv("n,separation,value,se,skipped");
  Csv min_csv("n,draw,sign,boxes,minority,minority_fraction");
  json per_n = json::array();
  for (int n : k.ns) {
    auto dom = domain_for(k.d, n, k.shape);
    auto model = std::make_shared<const ConditionedModel>(build_model(k.p, dom, spec, region, bc));
    opt.seed = stream_seed(k.seed, 1, n, 0);
    RunSummary rs;
    const auto draws = run_conditioned(model, opt, &rs);
    if (k.streams) {
      const std::string name = "stream_" + n_tag(n) + ".gffs";
      StreamWriter w(ctx.path(name));
      for (std::size_t i = 0; i < draws.size(); ++i) w.append(draws[i], opt.burn_in + (i + 1) * opt.thin);
      w.close();
      for (const std::string& f : {name, name + ".idx", name + ".json"}) ctx.record(f);
    }
    const Box& box = dom->box;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<int> used;
    for (int s : seps) {
      const Coord x{-s / 2, 0, 0}, y{s - s / 2, 0, 0};
      if (!box.contains(x) || !box.contains(y)) continue;
      const std::size_t a = box.index(x), b = box.index(y);
      if (region != RegionKind::none && (!dom->in_region(a) || !dom->in_region(b))) continue;
      pairs.push_back({a, b});
      used.push_back(s);
    }
    if (pairs.empty()) throw ConfigError("freezing: no separation fits inside D_n");
    const auto corr = spin_correlation(draws, pairs, true);
    DataTable plot{"freezing: spin correlation against separation, n=" + std::to_string(n),
                   {{"separation", "|x-y| along the first axis", {}},
                    {"correlation", "E[spin(x).spin(y)] under the conditioning", {}},
                    {"se", "standard error", {}}}};
    json values = json::array(), ses = json::array();
    for (std::size_t i = 0; i < corr.size(); ++i) {
      spin_csv.row(n, used[i], corr[i].value.mean, corr[i].value.se, std::uint64_t(corr[i].skipped));
      plot.columns[0].values.push_back(used[i]);
      plot.columns[1].values.push_back(corr[i].value.mean);
      plot.columns[2].values.push_back(corr[i].value.se);
      values.push_back(corr[i].value.mean);
      ses.push_back(corr[i].value.se);
    }
    ctx.write_text("spin.csv", spin_csv.str());
    ctx.write_text("freezing_" + n_tag(n) + ".dat", format_plotdata(plot, PlotKind::scaling));
    // separation closest to sqrt(n)
    std::size_t at = 0;
    for (std::size_t i = 1; i < used.size(); ++i)
      if (std::abs(used[i] - std::sqrt(double(n))) < std::abs(used[at] - std::sqrt(double(n)))) at = i;
    json entry = {{"n", n},
                  {"separations", used},
                  {"correlation", values},
                  {"se", ses},
                  {"draws", draws.size()},
                  {"mh_rate", rs.stats.mh_rate()},
                  {"mixing_flag", rs.mixing_flag},
                  {"sqrt_n_separation", used[at]},
                  {"correlation_at_sqrt_n", corr[at].value.mean},
                  {"se_at_sqrt_n", corr[at].value.se}};
    say(log, "freezing", "n=" + std::to_string(n) + " correlation at separation " + std::to_string(used[at]) + ": " +
                             fmt(corr[at].value.mean));

    if (minority) {
      // scalar field avoiding the interval of the same radius
      const FieldParams p1 = field_params(1, k.p.m2, c.text("field.coupling"));
      const AvoidanceSpec s1 =
          spec.kind == AvoidanceSpec::Kind::ball ? AvoidanceSpec::interval(-spec.b, spec.b) : spec;
      auto m1 = std::make_shared<const ConditionedModel>(build_model(p1, dom, s1, region, bc));
      RunOptions o1 = opt;
      o1.seed = stream_seed(k.seed, 2, n, 0);
      const auto draws1 = run_conditioned(m1, o1);
      GridAnalyzer ga(dom, p1, build_mesogrid_side(*dom, box_side, Coord{}));
      std::vector<double> fractions;
      for (std::size_t i = 0; i < draws1.size(); ++i) {
        const auto r = grid_sign_and_interface(ga.view(draws1[i]), ga.grid(), beta);
        min_csv.row(n, std::uint64_t(i), r.sign, std::uint64_t(r.boxes), std::uint64_t(r.minority),
                    r.minority_fraction);
        fractions.push_back(r.minority_fraction);
      }
      ctx.write_text("minority.csv", min_csv.str());
      ctx.write_text("minority_" + n_tag(n) + ".dat",
                     format_plotdata(histogram_table("freezing: minority-box fraction per draw, n=" + std::to_string(n),
                                                     "number of draws", fractions, 0.0, 0.5, 10),
                                     PlotKind::histogram));
      std::size_t small = 0;
      for (double f : fractions) small += f <= threshold;
      const double share = fractions.empty() ? 0.0 : double(small) / double(fractions.size());
      entry["minority"] = {{"draws", fractions.size()},
                           {"boxes", ga.grid().boxes.size()},
                           {"box_side", box_side},
                           {"threshold", threshold},
                           {"share_below_threshold", share},
                           {"max_fraction", fractions.empty() ? 0.0 : *std::max_element(fractions.begin(), fractions.end())}};
      say(log, "freezing", "n=" + std::to_string(n) + " draws with minority <= " + fmt(threshold) + ": " + fmt(share));
    }
    per_n.push_back(entry);
  }
  return {{"experiment", "freezing"}, {"avoid", spec.str()}, {"per_n", per_n}};
}

// ---------------------------------------------------------------- phase transition

json phase_transition(const Config& c, RunContext& ctx, std::ostream* log) {
  auto k = common(c);
  if (k.p.N != 1) throw ConfigError("phase-transition: field.spin must be 1");
  const double R = c.real("ising.R");
  const int draws = int(c.integer("ising.draws"));
  const int spacing = int(c.integer("ising.spacing"));
  GlauberOptions go;
  go.sweeps = std::uint64_t(c.integer("ising.sweeps"));
  go.burn_in = std::uint64_t(c.integer("ising.burn_in"));
  RunOptions zero_opt = chain_options(c);
  if (draws < 2 || spacing < 1) throw ConfigError("phase-transition: need ising.draws >= 2 and ising.spacing >= 1");
  const auto spec = AvoidanceSpec::interval(-R, R);

  Csv table("n,clamped_magnetization,clamped_se,zero_bc_sign_mean,zero_bc_se");
  Csv draws_csv("n,draw,magnetization,magnetization_se");
  json per_n = json::array();
  for (int n : k.ns) {
    auto dom = domain_for(k.d, n, k.shape);
    // plus side: avoid (-R,R) on Lambda_n, field >= R on the annulus Lambda_2n \ Lambda_n
    auto ann = std::make_shared<const ConditionedModel>(
        build_model(k.p, dom, spec, RegionKind::domain, BoundaryCondition::parse("annulus:" + fmt(R))));
    ConditionedChain chain(ann, stream_seed(k.seed, 1, n, 0));
    for (std::uint64_t i = 0; i < zero_opt.burn_in; ++i) chain.sweep();
    std::vector<double> q;
    for (int j = 0; j < draws; ++j) {
      for (int i = 0; i < spacing; ++i) chain.sweep();
      chain.check_constraint();
      IsingInstance inst = from_field(chain.chain().state, ann->observed->box, R);
      GlauberOptions o = go;
      o.seed = stream_seed(k.seed, 2, n, std::uint64_t(j));
      const Magnetization m = glauber_magnetization(std::move(inst), o);
      q.push_back(m.m0.mean);
      draws_csv.row(n, j, m.m0.mean, m.m0.se);
    }
    ctx.write_text("ising_draws.csv", draws_csv.str());
    const Estimate Q = batch_means(q);

    auto zero = std::make_shared<const ConditionedModel>(
        build_model(k.p, dom, spec, RegionKind::domain, BoundaryCondition{}));
    RunOptions zo = zero_opt;
    zo.seed = stream_seed(k.seed, 3, n, 0);
    std::vector<double> sgn;
    run_conditioned(zero, zo, [&](const FieldState& s, std::uint64_t) {
      const double v = s.at(s.domain->box.origin(), 0);
      sgn.push_back(v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
    });
    const Estimate Z = batch_means(sgn);
    table.row(n, Q.mean, Q.se, Z.mean, Z.se);
    ctx.write_text("phase_transition.csv", table.str());
    per_n.push_back({{"n", n},
                     {"clamped_magnetization", Q.mean},
                     {"clamped_se", Q.se},
                     {"zero_bc_sign_mean", Z.mean},
                     {"zero_bc_se", Z.se},
                     {"zero_bc_z", Z.se > 0 ? std::abs(Z.mean) / Z.se : 0.0}});
    say(log, "phase-transition",
        "n=" + std::to_string(n) + " clamped " + fmt(Q.mean) + " +- " + fmt(Q.se) + ", zero bc " + fmt(Z.mean) +
            " +- " + fmt(Z.se));
  }
  return {{"experiment", "phase-transition"}, {"R", R}, {"mass2", k.p.m2}, {"per_n", per_n}};
}

// ---------------------------------------------------------------- capacity

json capacity(const Config& c, RunContext& ctx, std::ostream* log) {
  const auto k = common(c);
  if (k.d != 2) throw ConfigError("capacity: only d=2 is supported");
  const Shape D = Shape::parse(k.shape);
  std::vector<std::string> methods;
  {
    std::stringstream ss(c.text("capacity.methods"));
    std::string m;
    while (std::getline(ss, m, ',')) {
      m.erase(0, m.find_first_not_of(' '));
      m.erase(m.find_last_not_of(' ') + 1);
      if (m != "primal" && m != "dual" && m != "equilibrium")
        throw ConfigError("capacity.methods: unknown method '" + m + "'");
      methods.push_back(m);
    }
  }
  CapacityOptions copt;
  copt.tol = c.real("capacity.tol");

  Csv table("n,method,value,two_value,residual");
  DataTable plot{"capacity: discrete relative capacity of D against n", {{"n", "box size", {}}}};
  for (const auto& m : methods) plot.columns.push_back({m, m + " capacity (half Dirichlet energy)", {}});
  json rows = json::array();
  std::vector<int> ns = k.ns;
  ObstacleSolution last;
  for (int n : ns) {
    std::optional<ObstacleSolution> sol;
    auto need_primal = [&]() -> const ObstacleSolution& {
      if (!sol) sol = primal_capacity(D, n, copt);
      return *sol;
    };
    json row = {{"n", n}};
    std::size_t col = 1;
    for (const auto& m : methods) {
      double value = 0.0, residual = 0.0;
      if (m == "primal") {
        value = need_primal().energy;
        residual = need_primal().max_free_residual;
        row["primal_sweeps"] = need_primal().sweeps;
      } else if (m == "dual") {
        const auto& s = need_primal();
        value = dual_ratio(contact_density(s), D, n).ratio;
        residual = std::abs(value - s.energy) / s.energy;
      } else {
        const auto e = equilibrium_capacity(D, n, std::min(copt.tol, 1e-12));
        value = e.value;
        residual = e.relative_residual;
        row["condition_estimate"] = e.condition_estimate;
        row["ill_conditioned"] = e.ill_conditioned;
      }
      table.row(n, m, value, 2.0 * value, residual);
      row[m] = value;
      plot.columns[col++].values.push_back(value);
    }
    plot.columns[0].values.push_back(n);
    ctx.write_text("capacity.csv", table.str());
    rows.push_back(row);
    if (sol) last = *sol;
    say(log, "capacity", "n=" + std::to_string(n) + " " + row.dump());
  }
  ctx.write_text("capacity.dat", format_plotdata(plot, PlotKind::scaling));
  if (!last.f.empty()) {
    // contact density along the first axis of the largest primal solve
    const Box& box = last.domain->box;
    const auto rho = contact_density(last);
    DataTable prof{"capacity: equilibrium density on D along the first axis, n=" + std::to_string(last.n),
                   {{"x_over_n", "first coordinate / n", {}}, {"density", "(-Laplacian f) on D", {}}}};
    for (int x = box.lo; x <= box.hi; ++x) {
      const std::size_t i = box.index(Coord{x, 0, 0});
      if (!last.domain->in_region(i)) continue;
      prof.columns[0].values.push_back(double(x) / last.n);
      prof.columns[1].values.push_back(rho[i]);
    }
    if (!prof.columns[0].values.empty())
      ctx.write_text("contact_density.dat", format_plotdata(prof, PlotKind::profile));
  }

  json summary = {{"experiment", "capacity"}, {"shape", k.shape}, {"rows", rows}};
  if (D.kind == ShapeKind::disc) {
    // Λ lies between the discs of radius 1/2 and sqrt(2)/2
    summary["bracket"] = {annulus_capacity(D.a, std::sqrt(0.5)), annulus_capacity(D.a, 0.5)};
  }

  if (c.boolean("smc.enabled")) {
    AvoidEstimateOptions so;
    so.particles = int(c.integer("smc.particles"));
    so.bridges = int(c.integer("smc.bridges"));
    so.sweeps_per_bridge = int(c.integer("smc.sweeps_per_bridge"));
    const auto spec = AvoidanceSpec::parse(c.text("smc.avoid"));
    const int reps = int(c.integer("smc.replicates"));
    if (reps < 1) throw ConfigError("smc.replicates must be at least 1");
    Csv smc("n,log_p,se,delta_se,replicates,levels,min_ess,rate,capacity,predicted_rate,ratio");
    DataTable splot{"capacity: -log P / log^2 n against n",
                    {{"n", "box size", {}},
                     {"rate", "-log P(avoid on D_n) / log^2 n", {}},
                     {"se", "standard error", {}},
                     {"predicted", "(2/pi) times the discrete capacity at n", {}}}};
    json srows = json::array();
    for (int n : c.int_list("smc.n")) {
      const auto dom = make_domain(2, n, D);
      // delta-method se ignores resampling correlation; replicates give an honest one
      std::vector<double> lp;
      AvoidEstimate e;
      double delta_var = 0.0;
      for (int r = 0; r < reps; ++r) {
        so.seed = stream_seed(k.seed, 4, n, std::uint64_t(r));
        const auto one = estimate_log_avoid_probability(k.p, dom, spec, so);
        lp.push_back(one.log_p);
        delta_var += one.se * one.se;
        if (r == 0 || one.min_ess < e.min_ess) e = one;
      }
      e.log_p = mean_se(lp).mean;
      const double delta_se = std::sqrt(delta_var) / reps;
      e.se = reps > 1 ? mean_se(lp).se : delta_se;
      const double L2 = log_n(n) * log_n(n);
      const double cap = equilibrium_capacity(D, n).value;
      const double rate = -e.log_p / L2, predicted = 2.0 / std::numbers::pi * cap;
      smc.row(n, e.log_p, e.se, delta_se, reps, e.levels, e.min_ess, rate, cap, predicted, rate / predicted);
      ctx.write_text("smc.csv", smc.str());
      splot.columns[0].values.push_back(n);
      splot.columns[1].values.push_back(rate);
      splot.columns[2].values.push_back(e.se / L2);
      splot.columns[3].values.push_back(predicted);
      srows.push_back({{"n", n}, {"log_p", e.log_p}, {"se", e.se}, {"delta_se", delta_se}, {"replicates", reps}, {"rate", rate}, {"predicted", predicted},
                       {"ratio", rate / predicted}});
      say(log, "capacity", "n=" + std::to_string(n) + " log P=" + fmt(e.log_p) + " rate/predicted=" +
                               fmt(rate / predicted));
    }
    ctx.write_text("smc.dat", format_plotdata(splot, PlotKind::scaling));
    summary["smc"] = srows;
  }
  return summary;
}

// ---------------------------------------------------------------- dobrushin

json dobrushin(const Config& c, RunContext&, std::ostream* log) {
  const int d = int(c.integer("lattice.d"));
  const double m2 = c.real("field.mass2");
  const double R = c.real("dobrushin.R");
  const int grid = int(c.integer("dobrushin.grid"));
  const auto rep = dobrushin_K(d, m2, -R, R, grid);
  json out = {{"experiment", "dobrushin"}, {"d", d},           {"mass2", m2},
              {"R", R},                    {"supVar", rep.sup_var}, {"K", rep.K},
              {"verdict", rep.verdict},    {"argmax_u", rep.argmax_u}, {"report", to_json(rep)}};
  if (c.boolean("dobrushin.find_r0")) {
    const auto r0 = find_R0(d, m2);
    out["R0"] = r0.R0;
    out["R0_sufficient"] = r0.R0_sufficient;
    out["R0_report"] = to_json(r0);
  } else {
    out["R0"] = nullptr;
  }
  const int N = int(c.integer("field.spin"));
  if (N >= 2) out["vector_bound"] = to_json(vector_variance_bound(N, R, m2, d));
  say(log, "dobrushin", "K=" + fmt(rep.K) + " verdict=" + (rep.verdict ? "true" : "false"));
  return out;
}

template <class E>
[[noreturn]] void rethrow_with(const std::string& context, const E& e) {
  throw E(context + ": " + e.what());
}

}  // namespace

// ---------------------------------------------------------------- entry points

RunManifest run_experiment(const Config& config, const std::string& out_dir, std::ostream* log) {
  const Config c = config.resolved();
  const std::string name = c.text("experiment.name");
  RunManifest m;
  m.experiment = name;
  m.params = c.to_json();
  m.seed = c.seed("experiment.seed");
  m.version = code_version();
  RunContext ctx(out_dir, m);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  try {
    json summary;
    if (name == "repulsion" || name == "massive-flatness") summary = norm_scaling(c, ctx, log);
    else if (name == "no-hole") summary = no_hole(c, ctx, log);
    else if (name == "freezing") summary = freezing(c, ctx, log);
    else if (name == "phase-transition") summary = phase_transition(c, ctx, log);
    else if (name == "capacity") summary = capacity(c, ctx, log);
    else summary = dobrushin(c, ctx, log);
    ctx.write_json(name == "dobrushin" ? "verdict.json" : "summary.json", summary);
  } catch (const ConfigError& e) {
    ctx.fail(e.what(), elapsed());
    rethrow_with(name, e);
  } catch (const ConstraintError& e) {
    ctx.fail(e.what(), elapsed());
    rethrow_with(name, e);
  } catch (const NumericError& e) {
    ctx.fail(e.what(), elapsed());
    rethrow_with(name, e);
  } catch (const std::exception& e) {
    ctx.fail(e.what(), elapsed());
    throw NumericError(name + ": " + e.what());
  }
  ctx.finish(elapsed());
  return ctx.manifest();
}

RunManifest rerun_manifest(const RunManifest& m, const std::string& out_dir, std::ostream* log) {
  Config c = Config::from_json(m.params);
  c.set("experiment.seed", std::to_string(m.seed));
  return run_experiment(c, out_dir, log);
}

json load_summary(const std::string& run_dir) {
  for (const char* name : {"summary.json", "verdict.json"}) {
    const fs::path p = fs::path(run_dir) / name;
    if (fs::exists(p)) {
      std::ifstream is(p);
      return json::parse(is);
    }
  }
  throw ConfigError("no summary in " + run_dir);
}

}  // namespace gffc::app
