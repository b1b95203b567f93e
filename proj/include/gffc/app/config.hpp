#pragma once
// Experiment configuration: flat "key = value" lines grouped in [sections],
// mirrored one-to-one into JSON as {section: {key: value}} with string values.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace gffc::app {

enum class ValueType { text, integer, real, boolean, seed, int_list, real_list };

struct KeySpec {
  std::string key;  // "section.key"
  ValueType type;
  std::string help;
};

// Every accepted key. Unknown keys are a schema error.
const std::vector<KeySpec>& schema();
const std::vector<std::string>& experiment_names();

class Config {
 public:
  static Config parse_ini(std::istream& is);
  static Config parse_ini_text(const std::string& text);
  static Config load(const std::string& path);
  static Config from_json(const nlohmann::json& j);
  // Built-in defaults for a named experiment.
  static Config defaults(const std::string& experiment);

  nlohmann::json to_json() const;
  std::string to_ini() const;

  // Throws ConfigError naming every unknown key and every badly typed value.
  void validate() const;
  // Defaults of the named experiment overlaid with these values, validated.
  Config resolved() const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  // "section.key=value"
  void set_assignment(const std::string& text);
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string text(const std::string& key) const;
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::uint64_t seed(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;
  std::vector<double> real_list(const std::string& key) const;

  bool operator==(const Config&) const = default;

 private:
  const std::string& raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

}  // namespace gffc::app
