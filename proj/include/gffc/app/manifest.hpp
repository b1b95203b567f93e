#pragma once
// Run manifest: everything needed to repeat an experiment and check its outputs.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace gffc::app {

struct OutputRecord {
  std::string path;    // relative to the run directory
  std::string sha256;  // lowercase hex
  std::uint64_t bytes = 0;
  bool operator==(const OutputRecord&) const = default;
};

struct RunManifest {
  std::string experiment;
  nlohmann::json params;  // full resolved configuration
  std::uint64_t seed = 0;
  std::string version;
  double wall_time = 0.0;  // seconds
  std::string status;      // running | complete | failed
  std::string error;
  std::vector<OutputRecord> outputs;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  std::string serialize() const;
  static RunManifest parse(const std::string& text);
  static RunManifest load(const std::string& path);
  void save(const std::string& path) const;
  bool operator==(const RunManifest&) const = default;
};

std::string sha256_file(const std::string& path);
std::string sha256_bytes(const std::string& data);
std::string code_version();

}  // namespace gffc::app
