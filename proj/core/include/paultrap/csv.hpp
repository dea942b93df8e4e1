#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace paultrap::harness {

struct Provenance {
  std::string digest;
  std::uint64_t seed = 0;
  std::string version;
  std::string preset;
};

/// Plot-ready CSV: a `#` provenance block, one header row, then data rows.
/// Doubles use %.17g so values round-trip exactly.
class CsvWriter {
public:
  using Cell = std::variant<double, std::int64_t, std::uint64_t, std::string>;

  CsvWriter(const std::filesystem::path &path, const Provenance &provenance,
            const std::vector<std::string> &columns);

  void row(const std::vector<Cell> &cells);
  /// Flushes and closes; throws on I/O failure.
  void close();

private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t columns_;
};

std::string format_cell(const CsvWriter::Cell &cell);

/// Position of the first difference between two CSV files, ignoring `#`
/// comment lines. Empty when the numeric content is identical.
std::string first_difference(const std::filesystem::path &expected,
                             const std::filesystem::path &actual);

} // namespace paultrap::harness
