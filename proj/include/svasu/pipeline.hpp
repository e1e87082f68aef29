#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "svasu/core.hpp"

namespace svasu {

inline constexpr const char* kToolVersion = "svasu 0.1.0";

/// FNV-1a 64 over the canonical manifest serialization; names the run dir.
inline std::string config_hash(const nlohmann::json& manifest) {
  const std::string s = manifest.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 12);
}

/// Run directory: an explicit --out wins; otherwise runs/<config-hash>.
inline std::filesystem::path resolve_run_dir(const std::string& out_flag,
                                             const nlohmann::json& manifest) {
  std::filesystem::path dir =
      out_flag.empty() ? std::filesystem::path("runs") / config_hash(manifest)
                       : std::filesystem::path(out_flag);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("write_json: cannot write " + path.string());
  f << j.dump(2) << "\n";
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("read_json: cannot open " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("read_json: malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace svasu
