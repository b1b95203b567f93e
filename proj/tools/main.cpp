// gffc: command-line front end.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "gffc/app/config.hpp"
#include "gffc/app/experiments.hpp"
#include "gffc/app/manifest.hpp"
#include "gffc/app/plotdata.hpp"
#include "gffc/capacity.hpp"
#include "gffc/conditioner.hpp"
#include "gffc/errors.hpp"
#include "gffc/field_io.hpp"
#include "gffc/ising_bridge.hpp"
#include "gffc/observables.hpp"
#include "gffc/parallel.hpp"
#include "gffc/uniqueness.hpp"

using namespace gffc;
using namespace gffc::app;
using nlohmann::json;

namespace {

struct FieldOpts {
  int d = 2;
  int n = 16;
  int spin = 1;
  double mass2 = 0.0;
  std::string coupling = "auto";
  std::string shape = "full";
};

void add_field_opts(CLI::App* sub, FieldOpts& f, const std::string& default_shape) {
  f.shape = default_shape;
  sub->add_option("--d", f.d, "dimension")->capture_default_str();
  sub->add_option("--n", f.n, "box size")->required();
  sub->add_option("--spin", f.spin, "components N")->capture_default_str();
  sub->add_option("--mass2", f.mass2, "mass squared")->capture_default_str();
  sub->add_option("--coupling", f.coupling, "auto or a number")->capture_default_str();
  sub->add_option("--shape", f.shape, "full | disc:r | square:s | annulus:r,R")->capture_default_str();
}

// Output stream: a file, or stdout for "-" or empty.
struct Out {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Out(const std::string& path) {
    if (!path.empty() && path != "-") {
      file.open(path);
      if (!file) throw ConfigError("cannot write " + path);
      os = &file;
    }
  }
};

std::vector<int> parse_ints(const std::string& s) {
  Config c;
  c.set("lattice.n", s);
  return c.int_list("lattice.n");
}

std::vector<double> parse_reals(const std::string& s) {
  Config c;
  c.set("observe.separations", s);
  return c.real_list("observe.separations");
}

void emit_stream_summary(const std::string& path, std::size_t records, std::ostream& os) {
  os << json{{"stream", path}, {"records", records}, {"sha256", sha256_file(path)}}.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vector-valued lattice free field under avoidance constraints"};
  app.set_version_flag("--version", code_version());
  app.require_subcommand(1);
  app.footer("Worker threads: set GFFC_WORKERS (default: hardware concurrency).");

  // sample
  FieldOpts sf;
  std::uint64_t s_seed = 0;
  int s_draws = 1;
  std::string s_out;
  auto* sample = app.add_subcommand("sample", "exact draws of the unconditioned field");
  add_field_opts(sample, sf, "full");
  sample->add_option("--draws", s_draws, "number of draws")->capture_default_str();
  sample->add_option("--seed", s_seed, "root seed")->required();
  sample->add_option("--out", s_out, "stream path")->required();

  // condition
  FieldOpts cf;
  std::string c_avoid, c_region = "domain", c_bc = "zero", c_out;
  RunOptions c_run;
  auto* condition = app.add_subcommand("condition", "Gibbs chain for the field avoiding I on V");
  add_field_opts(condition, cf, "disc:0.25");
  condition->add_option("--avoid", c_avoid, "ball:R | interval:a,b | halfline:b")->required();
  condition->add_option("--region", c_region, "domain | box | none")->capture_default_str();
  condition->add_option("--bc", c_bc, "zero | annulus:R | clamp:R")->capture_default_str();
  condition->add_option("--sweeps", c_run.sweeps)->capture_default_str();
  condition->add_option("--burnin", c_run.burn_in)->capture_default_str();
  condition->add_option("--thin", c_run.thin)->capture_default_str();
  condition->add_option("--seed", c_run.seed, "root seed")->required();
  condition->add_option("--out", c_out, "stream path")->required();

  // observe
  std::string o_in, o_what, o_out, o_plot, o_seps = "1,2,4,8", o_shift, o_avoid = "ball:0.5";
  double o_beta = 0.5, o_eta = 0.25, o_radius = 4.0;
  int o_side = 8;
  bool o_independent = false;
  auto* observe = app.add_subcommand("observe", "statistics of a stored sample stream");
  observe->add_option("--in", o_in, "stream path")->required();
  observe->add_option("--what", o_what, "profile | counters | sign | spin | hole")
      ->required()
      ->check(CLI::IsMember({"profile", "counters", "sign", "spin", "hole"}));
  observe->add_option("--out", o_out, "output file (stdout by default)");
  observe->add_option("--plot", o_plot, "also write plot data (profile, spin)");
  observe->add_option("--beta", o_beta)->capture_default_str();
  observe->add_option("--eta", o_eta)->capture_default_str();
  observe->add_option("--box-side", o_side)->capture_default_str();
  observe->add_option("--separations", o_seps)->capture_default_str();
  observe->add_option("--radius", o_radius, "hole scan radius")->capture_default_str();
  observe->add_option("--shift", o_shift, "hole shift t as comma list (default: log n e1)");
  observe->add_option("--avoid", o_avoid, "target set for the hole scan")->capture_default_str();
  observe->add_flag("--independent", o_independent, "draws are independent (no batch means)");

  // capacity
  std::string k_shape = "disc:0.25", k_ns, k_method = "all", k_out;
  double k_tol = 1e-10;
  auto* cap = app.add_subcommand("capacity", "discrete relative capacity of D");
  cap->add_option("--shape", k_shape)->capture_default_str();
  cap->add_option("--n", k_ns, "comma list of sizes")->required();
  cap->add_option("--method", k_method, "all | primal | dual | equilibrium")
      ->capture_default_str()
      ->check(CLI::IsMember({"all", "primal", "dual", "equilibrium"}));
  cap->add_option("--tol", k_tol)->capture_default_str();
  cap->add_option("--out", k_out, "CSV path (stdout by default)");

  // dobrushin
  int u_d = 2, u_grid = 1000, u_spin = 1;
  double u_m2 = 1.0, u_R = 0.01;
  std::string u_avoid, u_out;
  bool u_r0 = false;
  auto* dob = app.add_subcommand("dobrushin", "single-site uniqueness criterion");
  dob->add_option("--d", u_d)->capture_default_str();
  dob->add_option("--mass2", u_m2)->capture_default_str();
  dob->add_option("--R", u_R, "ball radius")->capture_default_str();
  dob->add_option("--avoid", u_avoid, "interval:a,b or halfline:b instead of a ball");
  dob->add_option("--grid", u_grid)->capture_default_str();
  dob->add_option("--spin", u_spin, "N >= 2 adds the vector bound")->capture_default_str();
  dob->add_flag("--r0", u_r0, "also locate the threshold radius");
  dob->add_option("--out", u_out, "JSON path (stdout by default)");

  // ising
  int i_d = 2, i_n = 32;
  std::string i_coupling, i_bc = "plus", i_out;
  double i_R = 3.0, i_bnorm = -1.0;
  GlauberOptions i_opt;
  auto* ising = app.add_subcommand("ising", "heat-bath magnetisation at the origin");
  ising->add_option("--d", i_d)->capture_default_str();
  ising->add_option("--n", i_n)->capture_default_str();
  ising->add_option("--coupling", i_coupling, "const:J | from-field:path")->required();
  ising->add_option("--bc", i_bc)->capture_default_str()->check(CLI::IsMember({"plus", "free"}));
  ising->add_option("--R", i_R, "avoided radius for from-field couplings")->capture_default_str();
  ising->add_option("--boundary-norm", i_bnorm, "boundary |psi| for from-field (default R)");
  ising->add_option("--sweeps", i_opt.sweeps)->capture_default_str();
  ising->add_option("--burnin", i_opt.burn_in)->capture_default_str();
  ising->add_option("--seed", i_opt.seed, "root seed")->required();
  ising->add_option("--out", i_out, "JSON path (stdout by default)");

  // experiment
  std::string e_config, e_manifest, e_out;
  std::vector<std::string> e_set;
  std::uint64_t e_seed = 0;
  bool e_print = false, e_verify = false, e_quiet = false;
  auto* exp = app.add_subcommand("experiment", "run a named experiment from a config or a manifest");
  auto* opt_config = exp->add_option("--config", e_config, "INI or JSON config");
  auto* opt_manifest = exp->add_option("--manifest", e_manifest, "repeat the run of a manifest");
  opt_config->excludes(opt_manifest);
  exp->add_option("--out", e_out, "run directory");
  auto* opt_seed = exp->add_option("--seed", e_seed, "overrides experiment.seed");
  exp->add_option("--set", e_set, "section.key=value override (repeatable)");
  exp->add_flag("--print-config", e_print, "print the resolved config as INI and JSON, then exit");
  exp->add_flag("--verify", e_verify, "with --manifest: fail unless every digest matches");
  exp->add_flag("--quiet", e_quiet, "no progress lines");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sample) {
      const auto p = field_params(sf.spin, sf.mass2, sf.coupling);
      const auto dom = domain_for(sf.d, sf.n, sf.shape);
      FieldSampler sampler(p, dom);
      StreamWriter w(s_out);
      for (int i = 0; i < s_draws; ++i) w.append(sampler.draw(s_seed, std::uint64_t(i)), std::uint64_t(i));
      w.close();
      emit_stream_summary(s_out, std::size_t(s_draws), std::cout);
    } else if (*condition) {
      const auto p = field_params(cf.spin, cf.mass2, cf.coupling);
      const auto dom = domain_for(cf.d, cf.n, cf.shape);
      RegionKind region = c_region == "domain" ? RegionKind::domain
                          : c_region == "box"  ? RegionKind::box
                          : c_region == "none" ? RegionKind::none
                                               : throw ConfigError("--region must be domain, box or none");
      auto model = std::make_shared<const ConditionedModel>(
          build_model(p, dom, AvoidanceSpec::parse(c_avoid), region, BoundaryCondition::parse(c_bc)));
      if (c_run.sweeps <= c_run.burn_in) throw ConfigError("--sweeps must exceed --burnin");
      StreamWriter w(c_out);
      const RunSummary s =
          run_conditioned(model, c_run, [&](const FieldState& st, std::uint64_t sweep) { w.append(st, sweep); });
      w.close();
      std::cout << json{{"stream", c_out},
                        {"records", s.emitted},
                        {"sha256", sha256_file(c_out)},
                        {"tau_origin", s.tau_origin},
                        {"mh_rate", s.stats.mh_rate()},
                        {"mixing_flag", s.mixing_flag}}
                       .dump(2)
                << "\n";
    } else if (*observe) {
      const auto entries = read_stream(o_in);
      if (entries.empty()) throw ConfigError("stream " + o_in + " is empty");
      std::vector<FieldState> draws;
      for (const auto& e : entries) draws.push_back(e.state);
      const auto dom = draws.front().domain;
      const Box& box = dom->box;
      const bool correlated = !o_independent;
      Out out(o_out);
      if (o_what == "profile") {
        std::vector<std::size_t> probes;
        for (int x = 0; x <= box.hi; ++x)
          if (dom->in_region(box.index(Coord{x, 0, 0}))) probes.push_back(box.index(Coord{x, 0, 0}));
        const auto prof = norm_profile(draws, probes, o_beta, correlated);
        *out.os << to_json(prof).dump(2) << "\n";
        if (!o_plot.empty()) {
          DataTable t{"norm profile along the first axis",
                      {{"x", "first coordinate", {}}, {"ratio", "mean |phi(x)| / log n", {}}, {"se", "standard error", {}}}};
          for (const auto& e : prof.sites) {
            t.columns[0].values.push_back(e.x[0]);
            t.columns[1].values.push_back(e.mean.mean);
            t.columns[2].values.push_back(e.mean.se);
          }
          emit_plotdata(o_plot, t, PlotKind::profile);
        }
      } else if (o_what == "counters" || o_what == "sign") {
        GridAnalyzer ga(dom, draws.front().params, build_mesogrid_side(*dom, o_side, Coord{}));
        if (o_what == "counters") {
          CounterParams cp;
          cp.beta = o_beta;
          cp.eta = o_eta;
          std::vector<BoxCounters> cs;
          for (const auto& s : draws) cs.push_back(ga.counters(s, cp));
          write_counters_csv(*out.os, cs, 0, true);
        } else {
          *out.os << "draw,sign,tie,boxes,minority,minority_fraction,interface_edges\n";
          for (std::size_t i = 0; i < draws.size(); ++i) {
            const auto r = grid_sign_and_interface(ga.view(draws[i]), ga.grid(), o_beta);
            *out.os << i << ',' << r.sign << ',' << int(r.tie) << ',' << r.boxes << ',' << r.minority << ','
                    << r.minority_fraction << ',' << r.interface.size() << "\n";
          }
        }
      } else if (o_what == "spin") {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        std::vector<int> seps;
        for (int s : parse_ints(o_seps)) {
          const Coord x{-s / 2, 0, 0}, y{s - s / 2, 0, 0};
          if (!box.contains(x) || !box.contains(y)) continue;
          pairs.push_back({box.index(x), box.index(y)});
          seps.push_back(s);
        }
        if (pairs.empty()) throw ConfigError("no separation fits in the box");
        const auto corr = spin_correlation(draws, pairs, correlated);
        DataTable t{"spin correlation against separation",
                    {{"separation", "|x-y|", {}}, {"correlation", "E[spin(x).spin(y)]", {}}, {"se", "standard error", {}}}};
        *out.os << "separation,value,se,skipped\n";
        for (std::size_t i = 0; i < corr.size(); ++i) {
          *out.os << seps[i] << ',' << corr[i].value.mean << ',' << corr[i].value.se << ',' << corr[i].skipped << "\n";
          t.columns[0].values.push_back(seps[i]);
          t.columns[1].values.push_back(corr[i].value.mean);
          t.columns[2].values.push_back(corr[i].value.se);
        }
        if (!o_plot.empty()) emit_plotdata(o_plot, t, PlotKind::scaling);
      } else {
        const int N = draws.front().params.N;
        std::vector<double> t = o_shift.empty() ? std::vector<double>(N, 0.0) : parse_reals(o_shift);
        if (o_shift.empty()) t[0] = log_n(box.n);
        if (int(t.size()) != N) throw ConfigError("--shift needs " + std::to_string(N) + " components");
        const auto spec = AvoidanceSpec::parse(o_avoid);
        std::size_t holes = 0;
        *out.os << "draw,hole\n";
        for (std::size_t i = 0; i < draws.size(); ++i) {
          const bool h = hole_scan(draws[i], t, Coord{}, o_radius, spec);
          holes += h;
          *out.os << i << ',' << int(h) << "\n";
        }
        std::cerr << "hole frequency " << double(holes) / double(draws.size()) << "\n";
      }
    } else if (*cap) {
      Config c = Config::defaults("capacity");
      c.set("experiment.seed", "0");
      c.set("lattice.shape", k_shape);
      const Shape D = Shape::parse(k_shape);
      Out out(k_out);
      *out.os << "n,method,value,two_value,residual\n";
      CapacityOptions copt;
      copt.tol = k_tol;
      for (int n : parse_ints(k_ns)) {
        std::optional<ObstacleSolution> sol;
        auto primal = [&]() -> const ObstacleSolution& {
          if (!sol) sol = primal_capacity(D, n, copt);
          return *sol;
        };
        auto row = [&](const char* m, double v, double r) {
          *out.os << n << ',' << m << ',' << std::setprecision(12) << v << ',' << 2 * v << ',' << r << "\n";
        };
        if (k_method == "all" || k_method == "primal") row("primal", primal().energy, primal().max_free_residual);
        if (k_method == "all" || k_method == "dual") {
          const double v = dual_ratio(contact_density(primal()), D, n).ratio;
          row("dual", v, std::abs(v - primal().energy) / primal().energy);
        }
        if (k_method == "all" || k_method == "equilibrium") {
          const auto e = equilibrium_capacity(D, n, std::min(k_tol, 1e-12));
          row("equilibrium", e.value, e.relative_residual);
        }
      }
    } else if (*dob) {
      double a = -u_R, b = u_R;
      if (!u_avoid.empty()) {
        const auto s = AvoidanceSpec::parse(u_avoid);
        if (s.kind == AvoidanceSpec::Kind::halfline) a = -INFINITY, b = s.b;
        else a = s.a, b = s.b;
      }
      const auto rep = dobrushin_K(u_d, u_m2, a, b, u_grid);
      json j = {{"supVar", rep.sup_var}, {"K", rep.K}, {"verdict", rep.verdict}, {"report", to_json(rep)}};
      if (u_r0) {
        const auto r0 = find_R0(u_d, u_m2);
        j["R0"] = r0.R0;
        j["R0_report"] = to_json(r0);
      } else {
        j["R0"] = nullptr;
      }
      if (u_spin >= 2) j["vector_bound"] = to_json(vector_variance_bound(u_spin, b, u_m2, u_d));
      Out out(u_out);
      *out.os << j.dump(2) << "\n";
    } else if (*ising) {
      const IsingBoundary bc = i_bc == "plus" ? IsingBoundary::plus : IsingBoundary::free;
      IsingInstance inst;
      if (i_coupling.rfind("const:", 0) == 0) {
        inst = IsingInstance::constant(Box::make(i_d, i_n), std::stod(i_coupling.substr(6)), bc);
      } else if (i_coupling.rfind("from-field:", 0) == 0) {
        const FieldState s = read_field(i_coupling.substr(11));
        inst = from_field(s, i_R, i_bnorm >= 0 ? i_bnorm : i_R);
        inst.bc = bc;
      } else {
        throw ConfigError("--coupling must be const:J or from-field:path");
      }
      inst.validate();
      const auto m = glauber_magnetization(inst, i_opt);
      Out out(i_out);
      *out.os << to_json(m).dump(2) << "\n";
    } else if (*exp) {
      std::ostream* log = e_quiet ? nullptr : &std::cerr;
      if (!e_manifest.empty()) {
        const RunManifest old = RunManifest::load(e_manifest);
        if (e_print) {
          std::cout << Config::from_json(old.params).to_ini();
          return 0;
        }
        if (e_out.empty()) throw ConfigError("--out is required");
        const RunManifest fresh = rerun_manifest(old, e_out, log);
        if (e_verify) {
          int bad = 0;
          for (const auto& o : old.outputs) {
            auto it = std::find_if(fresh.outputs.begin(), fresh.outputs.end(),
                                   [&](const OutputRecord& r) { return r.path == o.path; });
            if (it == fresh.outputs.end() || it->sha256 != o.sha256) {
              std::cerr << "digest mismatch: " << o.path << "\n";
              ++bad;
            }
          }
          if (bad) return 5;
          std::cerr << "all " << old.outputs.size() << " digests match\n";
        }
        return 0;
      }
      if (e_config.empty()) throw ConfigError("one of --config or --manifest is required");
      Config c = Config::load(e_config);
      for (const auto& s : e_set) c.set_assignment(s);
      if (*opt_seed) c.set("experiment.seed", std::to_string(e_seed));
      if (e_print) {
        const Config r = c.resolved();
        std::cout << r.to_ini() << "\n" << r.to_json().dump(2) << "\n";
        return 0;
      }
      if (e_out.empty()) throw ConfigError("--out is required");
      const RunManifest m = run_experiment(c, e_out, log);
      std::cout << m.serialize();
    }
  } catch (const ConfigError& e) {
    std::cerr << "gffc: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "gffc: numeric error: " << e.what() << "\n";
    return 3;
  } catch (const ConstraintError& e) {
    std::cerr << "gffc: constraint error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "gffc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
