#pragma once
// Named experiment pipelines. Each run writes into one directory: the manifest
// first, then CSV tables, plot data, JSON summaries and optional binary streams.

#include <cstdint>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "gffc/app/config.hpp"
#include "gffc/app/manifest.hpp"
#include "gffc/gaussian_core.hpp"

namespace gffc::app {

// "full" gives the bare box; other shapes go through the validated builder.
DomainPtr domain_for(int d, int n, const std::string& shape);
// coupling "auto" picks the default normalisation for the mass.
FieldParams field_params(int N, double m2, const std::string& coupling);

// Seed for one stream of a run: stage, size and index packed into the tag.
std::uint64_t stream_seed(std::uint64_t root, int stage, int n, std::uint64_t index);

class RunContext {
 public:
  // Creates the directory and writes the manifest with status "running".
  RunContext(std::string dir, RunManifest manifest);
  std::string path(const std::string& name) const;
  void write_text(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const nlohmann::json& j);
  // Digest an existing file under the run directory and save the manifest.
  void record(const std::string& name);
  void finish(double wall_time);
  void fail(const std::string& what, double wall_time);
  const RunManifest& manifest() const { return manifest_; }

 private:
  void save();
  std::string dir_;
  RunManifest manifest_;
};

// Runs the pipeline named by experiment.name. Throws ConfigError on schema
// problems; numeric and constraint failures are rethrown with the experiment
// name prefixed, after the manifest is marked failed.
RunManifest run_experiment(const Config& config, const std::string& out_dir, std::ostream* log = nullptr);
// Repeats the run described by a manifest into another directory.
RunManifest rerun_manifest(const RunManifest& m, const std::string& out_dir, std::ostream* log = nullptr);

nlohmann::json load_summary(const std::string& run_dir);

}  // namespace gffc::app
