#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace vfest::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

struct RunManifest {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> config;  // resolved, defaults included
  std::uint64_t seed = 1;
  std::string version;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::string timestamp;                                    // UTC, ISO 8601
  nlohmann::ordered_json summary;                           // optional, subcommand specific

  nlohmann::ordered_json to_json() const;
};

std::string sha256_file(const std::string& path);
std::string library_version();

// Runs one subcommand. Results go to `out` (or --out), diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vfest::cli
