#include "gffc/app/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "gffc/errors.hpp"

#ifndef GFFC_VERSION
#define GFFC_VERSION "unknown"
#endif

namespace gffc::app {

namespace {

struct Digest {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
  Digest() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw NumericError("sha256 init failed");
  }
  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx.get(), p, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    std::string out;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof buf, "%02x", md[i]);
      out += buf;
    }
    return out;
  }
};

}  // namespace

std::string sha256_bytes(const std::string& data) {
  Digest d;
  d.update(data.data(), data.size());
  return d.hex();
}

std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  Digest d;
  std::array<char, 1 << 16> buf;
  while (is) {
    is.read(buf.data(), buf.size());
    d.update(buf.data(), std::size_t(is.gcount()));
  }
  return d.hex();
}

std::string code_version() { return GFFC_VERSION; }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : outputs) outs.push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  return {{"experiment", experiment}, {"params", params},   {"seed", seed},   {"version", version},
          {"wall_time", wall_time},   {"status", status},   {"error", error}, {"outputs", outs}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.experiment = j.at("experiment").get<std::string>();
    m.params = j.at("params");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    m.wall_time = j.at("wall_time").get<double>();
    m.status = j.at("status").get<std::string>();
    m.error = j.value("error", "");
    for (const auto& o : j.at("outputs"))
      m.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>(),
                           o.at("bytes").get<std::uint64_t>()});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest: " + std::string(e.what()));
  }
}

// Doubles are printed in shortest round-trip form, so parse(serialize(m)) == m.
std::string RunManifest::serialize() const { return to_json().dump(2) + "\n"; }

RunManifest RunManifest::parse(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest: " + std::string(e.what()));
  }
  return from_json(j);
}

RunManifest RunManifest::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("manifest: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

void RunManifest::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw ConfigError("manifest: cannot write " + path);
    os << serialize();
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace gffc::app
