#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "teamshock/teamshock.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kStageFailure = 2;

struct Stage {
  const char* name;
  const char* help;
};

constexpr Stage kCommands[] = {
    {"synth", "generate a synthetic corpus with a known shock"},
    {"ingest", "parse the event log, profiles and languages"},
    {"aggregate", "monthly platform series"},
    {"forecast", "seasonal forecasts of the platform series past the shock"},
    {"select", "reference and target team selection"},
    {"features", "team features and monthly outcomes"},
    {"train", "tune, fit and evaluate counterfactual models"},
    {"predict", "counterfactual outcomes of the target teams"},
    {"effects", "treatment effects, conformal bounds and exchangeability"},
    {"regress", "collinearity filter and bootstrap regression of effects"},
    {"report", "tables and summary"},
    {"run", "every stage in order"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Team-level shock analysis of software collaboration event logs", "teamshock"};
  app.set_version_flag("--version", teamshock::kVersion);
  app.require_subcommand(1);

  std::optional<std::string> config_file;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  app.add_option("--config", config_file, "key = value settings file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_flag("-q,--quiet", quiet, "no progress messages");

  std::map<std::string, std::optional<std::string>> overrides;
  for (const auto& k : teamshock::kConfigKeys) {
    if (k.name == "seed") continue;
    const std::string name(k.name);
    std::string help(k.help);
    if (!k.default_value.empty()) help += " [" + std::string(k.default_value) + "]";
    app.add_option("--" + name, overrides[name], help)->group("Settings");
  }

  std::map<std::string, CLI::App*> subs;
  for (const auto& c : kCommands) {
    auto* s = app.add_subcommand(c.name, c.help);
    s->fallthrough();
    subs[c.name] = s;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  teamshock::PipelineConfig cfg;
  try {
    teamshock::Config raw;
    if (config_file) raw.load_file(*config_file);
    for (const auto& [key, value] : overrides)
      if (value) raw.set(key, *value);
    if (seed) raw.set("seed", std::to_string(*seed));
    cfg = teamshock::parse_config(raw);
  } catch (const teamshock::ConfigError& e) {
    std::cerr << "teamshock: invalid configuration: " << e.what() << '\n';
    return kValidation;
  }

  std::string command;
  for (const auto& [name, s] : subs)
    if (s->parsed()) command = name;

  std::ostream* log = quiet ? nullptr : &std::cerr;
  try {
    if (command == "synth") {
      const auto corpus = teamshock::generate_synthetic(cfg.synthetic, cfg.seed);
      const auto paths = teamshock::write_synthetic(cfg.synthetic_output, corpus);
      if (log)
        *log << "[synth] " << corpus.corpus.size() << " events, " << corpus.stable_repos.size() << " stable teams\n";
      std::cout << "events = " << paths.events.generic_string() << '\n'
                << "profiles = " << paths.profiles.generic_string() << '\n'
                << "languages = " << paths.languages.generic_string() << '\n';
      return kOk;
    }
    teamshock::Pipeline pipeline(cfg, log);
    if (command == "run") pipeline.run_all();
    else pipeline.run_stage(command);
  } catch (const teamshock::ConfigError& e) {
    std::cerr << "teamshock: invalid configuration: " << e.what() << '\n';
    return kValidation;
  } catch (const teamshock::StageError& e) {
    std::cerr << "teamshock: stage failed: " << e.what() << '\n';
    return kStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "teamshock: " << command << ": " << e.what() << '\n';
    return kStageFailure;
  }
  return kOk;
}
