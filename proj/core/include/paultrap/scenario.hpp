#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paultrap/config.hpp"
#include "paultrap/ion_dynamics.hpp"

/// Scenario orchestration: named presets that write plot-ready CSV, the run
/// record manifest, and replay verification.
namespace paultrap::harness {

enum class Preset {
  stability,
  secular,
  volume,
  ratescan,
  loadcurve,
  massspec,
  fig4,
  fig5,
  fig6a,
  fig6b,
};

/// Throws ValidationError for an unknown name.
Preset parse_preset(std::string_view name);
std::string_view preset_name(Preset preset);
std::vector<Preset> all_presets();

std::string tool_version();

struct OutputFile {
  std::string name; // relative to the record's directory
  std::string sha256;
};

struct RunRecord {
  std::string tool = "paultrap";
  std::string version;
  std::string preset;
  std::string config_path; // absolute
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string started; // ISO 8601, UTC
  std::string finished;
  std::vector<OutputFile> outputs;
};

std::string record_to_json(const RunRecord &record);
RunRecord record_from_json(std::string_view json);
RunRecord read_record(const std::filesystem::path &path);
/// File name of the manifest a preset writes next to its outputs.
std::string record_file_name(Preset preset);

/// Exclusive advisory lock on `<dir>/.paultrap.lock`, released on
/// destruction. Throws ValidationError when another process holds it.
class DirectoryLock {
public:
  explicit DirectoryLock(const std::filesystem::path &directory);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock &) = delete;
  DirectoryLock &operator=(const DirectoryLock &) = delete;

private:
  int fd_ = -1;
  std::filesystem::path path_;
};

/// Executes the preset, writing its CSV files and the run record into
/// out_dir (created when missing). Numeric output depends only on the
/// configuration digest and master seed.
RunRecord run_scenario(const ScenarioConfig &config, Preset preset,
                       const std::filesystem::path &out_dir);

struct FileVerdict {
  std::string name;
  bool pass = false;
  std::string detail; // first differing cell on failure
};

struct ReplayReport {
  std::vector<FileVerdict> files;
  bool passed() const;
};

/// Re-runs the recorded preset with the recorded seed in a scratch
/// directory and compares every listed output. Throws DigestMismatch before
/// simulating anything when the configuration no longer matches the record.
ReplayReport replay(const std::filesystem::path &record_path,
                    const std::optional<std::filesystem::path> &config_path = std::nullopt);

/// Electron-bombardment cloud of `ions`: the primary keeps its share
/// 1 - impurity_fraction, impurities that cannot be trapped at this drive are
/// dropped and the impurity weights renormalized over the rest. Counts use
/// largest-remainder rounding.
dynamics::CloudRecipe eb_mixture_recipe(const loading::EBSource &source,
                                        const trap::IonSpecies &primary, std::size_t ions,
                                        double initial_temperature,
                                        const trap::TrapGeometry &geometry,
                                        const trap::DriveSettings &drive);

} // namespace paultrap::harness
