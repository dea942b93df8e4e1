// paultrap: run presets, replay run records, validate configurations.
//
// Exit codes: 0 success, 1 invalid input (parse, validation, digest
// mismatch), 2 simulation failure or replay mismatch.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "paultrap/config.hpp"
#include "paultrap/errors.hpp"
#include "paultrap/scenario.hpp"

namespace fs = std::filesystem;
using namespace paultrap;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invalid = 1;
constexpr int exit_failed = 2;

std::string preset_list() {
  std::string s;
  for (const auto p : harness::all_presets())
    s += (s.empty() ? "" : ", ") + std::string(harness::preset_name(p));
  return s;
}

int run(const fs::path &config_path, const std::string &preset_text,
        std::optional<std::uint64_t> seed, std::optional<fs::path> out) {
  auto config = harness::load_config(config_path);
  const auto preset = harness::parse_preset(preset_text);
  if (seed)
    config.master_seed = *seed;
  const fs::path dir = out ? *out : config.output_directory;
  const auto record = harness::run_scenario(config, preset, dir);
  for (const auto &o : record.outputs)
    std::printf("%s  %s\n", o.sha256.c_str(), (dir / o.name).c_str());
  std::printf("record: %s\n", (dir / harness::record_file_name(preset)).c_str());
  return exit_ok;
}

int replay(const fs::path &record_path, std::optional<fs::path> config_path) {
  const auto report = harness::replay(record_path, config_path);
  for (const auto &f : report.files) {
    if (f.pass)
      std::printf("PASS %s\n", f.name.c_str());
    else
      std::printf("FAIL %s: %s\n", f.name.c_str(), f.detail.c_str());
  }
  return report.passed() ? exit_ok : exit_failed;
}

int validate(const fs::path &config_path) {
  const auto config = harness::load_config(config_path);
  std::printf("%s", harness::canonical_text(config).c_str());
  std::printf("# digest %s\n", harness::config_digest(config).c_str());
  return exit_ok;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Linear Paul trap simulation harness"};
  app.set_version_flag("--version", harness::tool_version());
  app.require_subcommand(1);

  fs::path config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  auto *run_cmd = app.add_subcommand("run", "Run a preset and write its CSV files and run record");
  run_cmd->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--preset", preset, "One of: " + preset_list())->required();
  run_cmd->add_option("--seed", seed, "Override run.master_seed");
  run_cmd->add_option("--out", out, "Output directory (default: run.output_directory)");

  fs::path record_path;
  std::optional<fs::path> replay_config;
  auto *replay_cmd = app.add_subcommand("replay", "Re-run a recorded preset and compare outputs");
  replay_cmd->add_option("--record", record_path, "Run record JSON")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--config", replay_config, "Configuration file (default: recorded path)");

  auto *validate_cmd = app.add_subcommand("validate", "Parse a configuration and print it in canonical SI form");
  validate_cmd->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_invalid;
  }

  try {
    if (*run_cmd)
      return run(config_path, preset, seed, out);
    if (*replay_cmd)
      return replay(record_path, replay_config);
    return validate(config_path);
  } catch (const ValidationError &e) {
    std::fprintf(stderr, "paultrap: %s\n", e.what());
    return exit_invalid;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "paultrap: %s\n", e.what());
    return exit_failed;
  }
}
