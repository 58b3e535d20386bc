#include "config.hpp"

#include <fstream>
#include <sstream>

namespace opnn::cli {

ConfigFile load_config(const std::filesystem::path& path, const std::string& command) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items())
    if (key != "schema_version" && key != "command" && key != "seed" && key != "params")
      throw ConfigError("config: unknown top-level key '" + key + "'");

  if (!doc.contains("schema_version")) throw ConfigError("config: schema_version is required");
  const nlohmann::json& version = doc["schema_version"];
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion)
    throw ConfigError("config: unsupported schema_version (expected " +
                      std::to_string(kSchemaVersion) + ")");
  if (doc.contains("command")) {
    if (!doc["command"].is_string() || doc["command"].get<std::string>() != command)
      throw ConfigError("config: written for a different command");
  }

  ConfigFile out;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ConfigError("config: seed must be an unsigned integer");
    out.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) throw ConfigError("config: params must be an object");
    out.params = doc["params"];
  }
  return out;
}

void reject_unknown(const nlohmann::json& given, const nlohmann::json& defaults,
                    const std::string& where) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    if (!defaults.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    if (value.is_object() && defaults[key].is_object())
      reject_unknown(value, defaults[key], where + "." + key);
  }
}

nlohmann::json effective_config(const std::string& command, std::uint64_t seed,
                                const nlohmann::json& params) {
  return {{"schema_version", kSchemaVersion},
          {"command", command},
          {"seed", seed},
          {"params", params}};
}

void write_text(const std::filesystem::path& dir, const std::string& name,
                const std::string& text) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  out << text;
}

void write_json(const std::filesystem::path& dir, const std::string& name,
                const nlohmann::json& doc) {
  write_text(dir, name, doc.dump(2) + "\n");
}

}  // namespace opnn::cli
