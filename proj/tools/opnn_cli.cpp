#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace opnn::cli;
  CLI::App app{"Over-parametrized sigmoid networks trained by gradient descent"};
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out = ".";
  app.add_option("--config", config_path, "JSON config with schema_version")
      ->check(CLI::ExistingFile);
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--out", out, "Output directory");
  app.require_subcommand(1);

  std::string chosen;
  Command run = nullptr;
  for (const CommandInfo& info : commands()) {
    CLI::App* sub = app.add_subcommand(info.name, info.help);
    sub->fallthrough();
    sub->callback([&chosen, &run, &info] {
      chosen = info.name;
      run = info.run;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ConfigFile cfg;
    if (!config_path.empty()) cfg = load_config(config_path, chosen);
    RunContext ctx;
    if (*seed_opt)
      ctx.seed = seed;
    else if (cfg.seed)
      ctx.seed = *cfg.seed;
    ctx.out = out;
    return run(cfg.params, ctx);
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
