#include "gffc/app/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "gffc/errors.hpp"

namespace gffc::app {

namespace {

using VT = ValueType;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = b + t.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

bool parse_bool(const std::string& s, bool& out) {
  const std::string t = trim(s);
  if (t == "true" || t == "yes" || t == "1" || t == "on") return out = true, true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return out = false, true;
  return false;
}

bool well_typed(const std::string& v, VT t) {
  switch (t) {
    case VT::text: return true;
    case VT::integer: { long long x; return parse_number(v, x); }
    case VT::real: { double x; return parse_number(v, x); }
    case VT::boolean: { bool x; return parse_bool(v, x); }
    case VT::seed: { std::uint64_t x; return parse_number(v, x); }
    case VT::int_list:
      for (const auto& s : split(v, ',')) { int x; if (!parse_number(s, x)) return false; }
      return !trim(v).empty();
    case VT::real_list:
      for (const auto& s : split(v, ',')) { double x; if (!parse_number(s, x)) return false; }
      return !trim(v).empty();
  }
  return false;
}

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : schema())
    if (k.key == key) return &k;
  return nullptr;
}

}  // namespace

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"experiment.name", VT::text, "pipeline to run"},
      {"experiment.seed", VT::seed, "root seed; every stream is derived from it"},
      {"experiment.streams", VT::boolean, "also write binary sample streams"},
      {"lattice.d", VT::integer, "dimension"},
      {"lattice.n", VT::int_list, "box sizes"},
      {"lattice.shape", VT::text, "region D: full | disc:r | square:s | annulus:r,R"},
      {"field.spin", VT::integer, "components N"},
      {"field.mass2", VT::real, "mass squared"},
      {"field.coupling", VT::text, "auto or a positive number"},
      {"condition.avoid", VT::text, "ball:R | interval:a,b | halfline:b | none"},
      {"condition.region", VT::text, "domain | box | none"},
      {"condition.bc", VT::text, "zero | annulus:R | clamp:R"},
      {"chain.sweeps", VT::integer, "sweeps per chain"},
      {"chain.burn_in", VT::integer, "discarded sweeps"},
      {"chain.thin", VT::integer, "keep every thin-th sweep"},
      {"chain.chains", VT::integer, "independent chains per size"},
      {"chain.stream_thin", VT::integer, "extra thinning for written streams"},
      {"observe.draws", VT::integer, "independent draws"},
      {"observe.beta", VT::real, "window half-width"},
      {"observe.box_side", VT::integer, "mesoscopic box side"},
      {"observe.separations", VT::int_list, "pair separations for spin correlations"},
      {"observe.radius_fraction", VT::real, "scan radius / n"},
      {"observe.shift_fraction", VT::real, "|t| / (2 log n)"},
      {"observe.directions", VT::integer, "shift directions scanned"},
      {"observe.minority", VT::boolean, "also run the scalar sign/minority analysis"},
      {"observe.minority_threshold", VT::real, "minority fraction counted as small"},
      {"smc.enabled", VT::boolean, "estimate log P of the halfline event"},
      {"smc.n", VT::int_list, "sizes for the estimate"},
      {"smc.avoid", VT::text, "event for the estimate"},
      {"smc.particles", VT::integer, "particles"},
      {"smc.bridges", VT::integer, "geometric bridges"},
      {"smc.sweeps_per_bridge", VT::integer, "sweeps per level"},
      {"smc.replicates", VT::integer, "independent runs per size; above 1 the se is their spread"},
      {"capacity.methods", VT::text, "comma list of primal, dual, equilibrium"},
      {"capacity.tol", VT::real, "solver tolerance"},
      {"dobrushin.R", VT::real, "ball radius"},
      {"dobrushin.grid", VT::integer, "grid points in the variance search"},
      {"dobrushin.find_r0", VT::boolean, "also locate the threshold radius"},
      {"ising.R", VT::real, "avoided ball radius and clamp level"},
      {"ising.draws", VT::integer, "conditioned draws feeding the spin model"},
      {"ising.spacing", VT::integer, "field sweeps between draws"},
      {"ising.sweeps", VT::integer, "spin sweeps per draw"},
      {"ising.burn_in", VT::integer, "spin burn-in per draw"},
  };
  return keys;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"repulsion", "massive-flatness", "no-hole",  "freezing",
                                                 "phase-transition", "capacity", "dobrushin"};
  return names;
}

Config Config::parse_ini(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  Config c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      c.values_[section] = trim(body.data());  // top-level key, rejected by validate
      continue;
    }
    for (const auto& [key, v] : body) c.values_[section + "." + key] = trim(v.data());
  }
  return c;
}

Config Config::parse_ini_text(const std::string& text) {
  std::istringstream is(text);
  return parse_ini(is);
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config: " + std::string(e.what()));
    }
    return from_json(j);
  }
  return parse_ini(is);
}

Config Config::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: JSON root must be an object of sections");
  Config c;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw ConfigError("config: section '" + section + "' is not an object");
    for (const auto& [key, v] : body.items())
      c.values_[section + "." + key] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  return c;
}

nlohmann::json Config::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) j[""][k] = v;
    else j[k.substr(0, dot)][k.substr(dot + 1)] = v;
  }
  return j;
}

std::string Config::to_ini() const {
  std::ostringstream os;
  std::string current;
  for (const auto& [k, v] : values_) {
    const auto dot = k.find('.');
    const std::string section = dot == std::string::npos ? "" : k.substr(0, dot);
    if (section != current || os.tellp() == 0) {
      if (os.tellp() != 0) os << '\n';
      os << '[' << section << "]\n";
      current = section;
    }
    os << k.substr(dot + 1) << " = " << v << '\n';
  }
  return os.str();
}

void Config::validate() const {
  std::vector<std::string> unknown, bad;
  for (const auto& [k, v] : values_) {
    const KeySpec* spec = find_key(k);
    if (!spec) unknown.push_back(k);
    else if (!well_typed(v, spec->type)) bad.push_back(k + "='" + v + "'");
  }
  std::string msg;
  auto join = [](const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (!unknown.empty()) msg += "unknown keys: " + join(unknown);
  if (!bad.empty()) msg += std::string(msg.empty() ? "" : "; ") + "badly typed values: " + join(bad);
  if (has("experiment.name")) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), raw("experiment.name")) == names.end())
      msg += std::string(msg.empty() ? "" : "; ") + "unknown experiment '" + raw("experiment.name") + "'";
  }
  if (!msg.empty()) throw ConfigError("config: " + msg);
}

Config Config::resolved() const {
  validate();
  if (!has("experiment.name")) throw ConfigError("config: missing experiment.name");
  if (!has("experiment.seed")) throw ConfigError("config: missing experiment.seed");
  Config c = defaults(raw("experiment.name"));
  for (const auto& [k, v] : values_) c.values_[k] = v;
  c.validate();
  return c;
}

void Config::set_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("config: expected section.key=value, got '" + text + "'");
  set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
}

const std::string& Config::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: missing key " + key);
  return it->second;
}

std::string Config::text(const std::string& key) const { return raw(key); }

long long Config::integer(const std::string& key) const {
  long long x;
  if (!parse_number(raw(key), x)) throw ConfigError("config: " + key + " is not an integer");
  return x;
}

double Config::real(const std::string& key) const {
  double x;
  if (!parse_number(raw(key), x)) throw ConfigError("config: " + key + " is not a number");
  return x;
}

bool Config::boolean(const std::string& key) const {
  bool x;
  if (!parse_bool(raw(key), x)) throw ConfigError("config: " + key + " is not a boolean");
  return x;
}

std::uint64_t Config::seed(const std::string& key) const {
  std::uint64_t x;
  if (!parse_number(raw(key), x)) throw ConfigError("config: " + key + " is not an unsigned integer");
  return x;
}

std::vector<int> Config::int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& s : split(raw(key), ',')) {
    int x;
    if (!parse_number(s, x)) throw ConfigError("config: " + key + " is not an integer list");
    out.push_back(x);
  }
  return out;
}

std::vector<double> Config::real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split(raw(key), ',')) {
    double x;
    if (!parse_number(s, x)) throw ConfigError("config: " + key + " is not a number list");
    out.push_back(x);
  }
  return out;
}

Config Config::defaults(const std::string& experiment) {
  Config c;
  auto& v = c.values_;
  v["experiment.name"] = experiment;
  v["experiment.streams"] = "false";
  v["lattice.d"] = "2";
  v["field.spin"] = "1";
  v["field.mass2"] = "0";
  v["field.coupling"] = "auto";
  v["condition.region"] = "domain";
  v["condition.bc"] = "zero";
  v["chain.chains"] = "1";
  v["chain.thin"] = "1";
  v["chain.stream_thin"] = "100";

  if (experiment == "repulsion" || experiment == "massive-flatness") {
    const bool massive = experiment == "massive-flatness";
    v["lattice.n"] = "16,32,64";
    v["lattice.shape"] = "disc:0.1";
    v["field.mass2"] = massive ? "1" : "0";
    v["condition.avoid"] = "interval:-1,1";
    v["chain.sweeps"] = massive ? "20000" : "40000";
    v["chain.burn_in"] = massive ? "2000" : "4000";
  } else if (experiment == "no-hole") {
    v["lattice.n"] = "64,128";
    v["lattice.shape"] = "full";
    v["field.spin"] = "2";
    v["condition.avoid"] = "ball:0.5";
    v["observe.draws"] = "200";
    v["observe.radius_fraction"] = "0.25";
    v["observe.shift_fraction"] = "0.5";
    v["observe.directions"] = "4";
  } else if (experiment == "freezing") {
    v["lattice.n"] = "64";
    v["lattice.shape"] = "disc:0.25";
    v["field.spin"] = "2";
    v["condition.avoid"] = "ball:1";
    v["chain.sweeps"] = "5000";
    v["chain.burn_in"] = "500";
    v["chain.thin"] = "10";
    v["observe.separations"] = "1,2,4,8,16";
    v["observe.minority"] = "true";
    v["observe.box_side"] = "4";
    v["observe.beta"] = "0.5";
    v["observe.minority_threshold"] = "0.1";
  } else if (experiment == "phase-transition") {
    v["lattice.n"] = "16,32";
    v["lattice.shape"] = "full";
    v["field.mass2"] = "1";
    v["chain.sweeps"] = "20000";
    v["chain.burn_in"] = "1000";
    v["ising.R"] = "3";
    v["ising.draws"] = "50";
    v["ising.spacing"] = "20";
    v["ising.sweeps"] = "400";
    v["ising.burn_in"] = "50";
  } else if (experiment == "capacity") {
    v["lattice.n"] = "64,128,256";
    v["lattice.shape"] = "disc:0.25";
    v["capacity.methods"] = "primal,dual,equilibrium";
    v["capacity.tol"] = "1e-10";
    v["smc.enabled"] = "false";
    v["smc.n"] = "32,64,128";
    v["smc.avoid"] = "halfline:0";
    v["smc.particles"] = "64";
    v["smc.bridges"] = "32";
    v["smc.sweeps_per_bridge"] = "10";
    v["smc.replicates"] = "1";
  } else if (experiment == "dobrushin") {
    v["field.mass2"] = "1";
    v["dobrushin.R"] = "0.01";
    v["dobrushin.grid"] = "1000";
    v["dobrushin.find_r0"] = "true";
  } else {
    throw ConfigError("config: unknown experiment '" + experiment + "'");
  }
  return c;
}

}  // namespace gffc::app
