#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "chaoslab/cli/config.hpp"
#include "chaoslab/cli/runner.hpp"

using namespace chaoslab::cli;

int main(int argc, char** argv) {
  CLI::App app{"chaoslab: interacting particles, JKO flows and their mean-field limits"};
  app.require_subcommand(1);

  std::string config_path, output;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  app.add_option("-c,--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--output", output, "output directory (overrides run.output)");
  app.add_option("-s,--seed", seed, "master seed (overrides run.seed)");
  app.add_option("-j,--workers", workers, "worker threads (overrides run.workers)");

  const std::pair<const char*, Command> commands[] = {
      {"simulate", Command::simulate}, {"jko", Command::jko},     {"oracle", Command::oracle},
      {"compare", Command::compare},   {"sweep", Command::sweep}, {"validate", Command::validate},
  };
  const char* help[] = {"run one particle system",
                        "run a minimizing-movement flow",
                        "evaluate a reference solution",
                        "particle run against a reference",
                        "propagation-of-chaos sweep over N and seeds",
                        "check a config and print its effective form"};
  for (std::size_t i = 0; i < 6; ++i) app.add_subcommand(commands[i].first, help[i])->fallthrough();

  CLI11_PARSE(app, argc, argv);

  Command cmd = Command::validate;
  for (const auto& [name, c] : commands)
    if (app.got_subcommand(name)) cmd = c;

  ParseResult parsed = parse_config(config_path);
  ExperimentConfig& cfg = parsed.config;
  // validate checks the config against the command it names
  if (cmd != Command::validate) cfg.command = cmd;
  if (!output.empty()) cfg.output = output;
  if (seed) cfg.seed = *seed;
  if (workers) cfg.workers = *workers;
  // re-validate: the subcommand can change which constraints apply
  parsed.errors.resize(parsed.syntax_errors);
  for (auto& e : validate(cfg)) parsed.errors.push_back(std::move(e));
  if (!parsed.ok()) {
    std::cerr << config_path << ": " << parsed.errors.size() << " problem(s)\n";
    for (const auto& e : parsed.errors) std::cerr << "  " << e << '\n';
    return 2;
  }
  if (cmd == Command::validate) {
    std::cout << emit_config(cfg);
    return 0;
  }
  const RunResult r = run(cfg, std::cout);
  std::cout << (r.exit_code == 0 ? "ok" : "FAILED") << ": " << r.manifest.size() << " artifacts in " << cfg.output
            << '\n';
  return r.exit_code;
}
