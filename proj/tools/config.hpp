#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace opnn::cli {

inline constexpr int kSchemaVersion = 1;

/// Anything wrong with the configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigFile {
  nlohmann::json params = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
};

/// Reads {"schema_version", "command", "seed", "params"}. The command, when
/// present, must equal `command`.
ConfigFile load_config(const std::filesystem::path& path, const std::string& command);

/// Throws ConfigError for any key of `given` that `defaults` lacks, at any
/// depth of nested objects.
void reject_unknown(const nlohmann::json& given, const nlohmann::json& defaults,
                    const std::string& where);

/// Overlays `given` on the defaults of P and validates the key set.
template <class P>
P parse_params(const nlohmann::json& given) {
  const nlohmann::json defaults = P{};
  reject_unknown(given, defaults, "params");
  try {
    nlohmann::json merged = defaults;
    merged.merge_patch(given);
    return merged.get<P>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
}

nlohmann::json effective_config(const std::string& command, std::uint64_t seed,
                                const nlohmann::json& params);

/// Writes `text` to dir/name, creating dir. Binary mode keeps bytes stable.
void write_text(const std::filesystem::path& dir, const std::string& name,
                const std::string& text);
void write_json(const std::filesystem::path& dir, const std::string& name,
                const nlohmann::json& doc);

}  // namespace opnn::cli
