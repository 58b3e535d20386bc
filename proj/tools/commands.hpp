#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"

namespace opnn::cli {

struct RunContext {
  std::uint64_t seed = 1;
  std::filesystem::path out = ".";
};

/// Every command parses its params, writes config.json plus its outputs to
/// ctx.out and returns the process exit code (0 pass, 1 failed check).
using Command = int (*)(const nlohmann::json& params, const RunContext& ctx);

struct CommandInfo {
  std::string name;
  std::string help;
  Command run;
};

const std::vector<CommandInfo>& commands();

}  // namespace opnn::cli
