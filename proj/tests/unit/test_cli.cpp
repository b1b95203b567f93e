#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gffc/app/config.hpp"
#include "gffc/app/experiments.hpp"
#include "gffc/app/manifest.hpp"
#include "gffc/app/plotdata.hpp"
#include "gffc/errors.hpp"

using namespace gffc;
using namespace gffc::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gffc_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Config small_repulsion(std::uint64_t seed) {
  Config c = Config::parse_ini_text(
      "[experiment]\nname = repulsion\nstreams = true\n"
      "[lattice]\nn = 8,10\n"
      "[chain]\nsweeps = 300\nburn_in = 50\nstream_thin = 25\nchains = 3\n");
  c.set("experiment.seed", std::to_string(seed));
  return c;
}

}  // namespace

TEST_CASE("ini sections map one-to-one onto JSON and back") {
  const Config c = Config::parse_ini_text(
      "[experiment]\nname = capacity\nseed = 12\n\n[lattice]\nn = 64, 128\nshape = disc:0.25\n");
  CHECK(c.text("lattice.shape") == "disc:0.25");
  CHECK(c.int_list("lattice.n") == std::vector<int>{64, 128});
  CHECK(c.seed("experiment.seed") == 12);
  const auto j = c.to_json();
  CHECK(j["lattice"]["shape"] == "disc:0.25");
  CHECK(j["experiment"]["seed"] == "12");
  CHECK(Config::from_json(j) == c);
  CHECK(Config::parse_ini_text(c.to_ini()) == c);
  // numbers in JSON input are accepted and kept as their text
  const Config k = Config::from_json({{"experiment", {{"name", "dobrushin"}, {"seed", 3}}}});
  CHECK(k.seed("experiment.seed") == 3);
}

TEST_CASE("schema rejects unknown keys and names every one") {
  const Config c = Config::parse_ini_text(
      "[experiment]\nname = capacity\nseed = 1\ncolour = red\n[lattice]\nm = 4\n[chain]\nsweeps = many\n");
  try {
    c.validate();
    FAIL("expected a schema error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("experiment.colour") != std::string::npos);
    CHECK(msg.find("lattice.m") != std::string::npos);
    CHECK(msg.find("chain.sweeps") != std::string::npos);
  }
  CHECK_THROWS_AS(Config::parse_ini_text("[experiment]\nname = nope\nseed = 1\n").validate(), ConfigError);
  CHECK_THROWS_AS(Config::parse_ini_text("[experiment]\nname = capacity\n").resolved(), ConfigError);
  CHECK_THROWS_AS(Config::parse_ini_text("[experiment\nname = capacity\n"), ConfigError);
  // a run that fails validation leaves no directory behind
  const fs::path dir = scratch("rejected");
  CHECK_THROWS_AS(run_experiment(c, dir.string()), ConfigError);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("resolved config overlays the experiment defaults") {
  Config c = Config::parse_ini_text("[experiment]\nname = freezing\nseed = 2\n[lattice]\nn = 32\n");
  const Config r = c.resolved();
  CHECK(r.int_list("lattice.n") == std::vector<int>{32});
  CHECK(r.text("condition.avoid") == "ball:1");
  CHECK(r.integer("field.spin") == 2);
  for (const auto& name : experiment_names()) {
    Config d = Config::defaults(name);
    d.set("experiment.seed", "0");
    CHECK_NOTHROW(d.validate());
  }
  c.set_assignment("field.mass2 = 1.5");
  CHECK(c.real("field.mass2") == 1.5);
  CHECK_THROWS_AS(c.set_assignment("no equals sign"), ConfigError);
}

TEST_CASE("sha256 matches the standard test vectors") {
  CHECK(sha256_bytes("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_bytes("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const fs::path dir = scratch("sha");
  fs::create_directories(dir);
  std::ofstream(dir / "x.txt", std::ios::binary) << "abc";
  CHECK(sha256_file((dir / "x.txt").string()) == sha256_bytes("abc"));
}

TEST_CASE("manifest round trip is exact") {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int t = 0; t < 200; ++t) {
    RunManifest m;
    m.experiment = "repulsion";
    m.params = Config::defaults("repulsion").to_json();
    m.params["extra"] = {{"x", u(gen)}};
    m.seed = gen();
    m.version = "0.1.0";
    m.wall_time = std::abs(u(gen)) * 1e-7;
    m.status = t % 2 ? "complete" : "failed";
    m.error = t % 2 ? "" : "numeric: \"quoted\"\nline";
    for (int k = 0; k < t % 5; ++k) m.outputs.push_back({"f" + std::to_string(k) + ".csv", sha256_bytes(std::to_string(k)), gen() >> 20});
    CHECK(RunManifest::parse(m.serialize()) == m);
  }
  CHECK_THROWS_AS(RunManifest::parse("{\"experiment\": 3}"), ConfigError);
  CHECK_THROWS_AS(RunManifest::parse("not json"), ConfigError);
}

TEST_CASE("plot data carries header comments and rejects bad tables") {
  DataTable t{"demo", {{"n", "box size", {16, 32}}, {"ratio", "mean |phi(0)| / log n", {1.5, 1.6}}, {"se", "error", {0.1, 0.1}}}};
  const std::string s = format_plotdata(t, PlotKind::scaling);
  CHECK(s.find("# column 2: ratio = mean |phi(0)| / log n") != std::string::npos);
  CHECK(s.find("\n32 1.6 0.1\n") != std::string::npos);
  DataTable one{"lonely", {{"n", "box size", {1}}}};
  CHECK_THROWS_AS(format_plotdata(one, PlotKind::profile), ConfigError);
  CHECK_THROWS_AS(format_plotdata(t, PlotKind::histogram), ConfigError);
  t.columns[2].values.pop_back();
  CHECK_THROWS_AS(format_plotdata(t, PlotKind::scaling), ConfigError);
  DataTable empty{"empty", {{"n", "", {}}, {"v", "", {}}}};
  CHECK_THROWS_AS(format_plotdata(empty, PlotKind::scaling), ConfigError);
  const auto h = histogram_table("h", "draws", {0.0, 0.05, 0.12, 0.49, 0.7, -1.0}, 0.0, 0.5, 5);
  CHECK(h.find("count")->values == std::vector<double>{3, 1, 0, 0, 2});
  CHECK_NOTHROW(format_plotdata(h, PlotKind::histogram));
  CHECK(parse_plot_kind("profile") == PlotKind::profile);
  CHECK_THROWS_AS(parse_plot_kind("pie"), ConfigError);
}

TEST_CASE("capacity experiment writes the method triple") {
  Config c = Config::parse_ini_text("[experiment]\nname = capacity\nseed = 1\n[lattice]\nn = 256\nshape = disc:0.25\n");
  const fs::path dir = scratch("capacity");
  const RunManifest m = run_experiment(c, dir.string());
  CHECK(m.status == "complete");
  const std::string csv = slurp(dir / "capacity.csv");
  CHECK(csv.rfind("n,method,value,two_value,residual\n", 0) == 0);
  for (const char* method : {"256,primal,", "256,dual,", "256,equilibrium,"}) CHECK(csv.find(method) != std::string::npos);
  const auto s = load_summary(dir.string());
  const auto& row = s["rows"][0];
  CHECK(row["primal"].get<double>() == doctest::Approx(row["equilibrium"].get<double>()).epsilon(1e-6));
  CHECK(RunManifest::load((dir / "manifest.json").string()) == m);
  for (const auto& o : m.outputs) CHECK(sha256_file((dir / o.path).string()) == o.sha256);
}

TEST_CASE("dobrushin experiment at small radius gives a true verdict") {
  Config c = Config::parse_ini_text(
      "[experiment]\nname = dobrushin\nseed = 0\n[lattice]\nd = 2\n[field]\nmass2 = 1\n[dobrushin]\nR = 0.01\n");
  const fs::path dir = scratch("dobrushin");
  run_experiment(c, dir.string());
  const auto v = load_summary(dir.string());
  CHECK(v["verdict"].get<bool>());
  CHECK(v["K"].get<double>() < 1.0);
  CHECK(v.contains("supVar"));
  CHECK(v["R0"].get<double>() > 0.01);
}

TEST_CASE("same config and seed give identical digests, independent of workers") {
  const fs::path a = scratch("det_a"), b = scratch("det_b"), r = scratch("det_rerun"), other = scratch("det_other");
  ::setenv("GFFC_WORKERS", "1", 1);
  const RunManifest ma = run_experiment(small_repulsion(5), a.string());
  ::setenv("GFFC_WORKERS", "3", 1);
  const RunManifest mb = run_experiment(small_repulsion(5), b.string());
  ::unsetenv("GFFC_WORKERS");
  REQUIRE(ma.outputs.size() >= 8);  // tables, plots and three streams per size
  CHECK(ma.outputs == mb.outputs);
  const RunManifest mr = rerun_manifest(RunManifest::load((a / "manifest.json").string()), r.string());
  CHECK(mr.outputs == ma.outputs);
  CHECK(mr.params == ma.params);
  const RunManifest mo = run_experiment(small_repulsion(6), other.string());
  CHECK(mo.outputs != ma.outputs);
}

TEST_CASE("downstream failures carry the experiment name and mark the manifest") {
  // a disc touching the box boundary is refused by the capacity solver
  Config c = Config::parse_ini_text("[experiment]\nname = capacity\nseed = 1\n[lattice]\nn = 32\nshape = disc:0.6\n");
  const fs::path dir = scratch("failed");
  try {
    run_experiment(c, dir.string());
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("capacity: ", 0) == 0);
  }
  const RunManifest m = RunManifest::load((dir / "manifest.json").string());
  CHECK(m.status == "failed");
  CHECK_FALSE(m.error.empty());
}
