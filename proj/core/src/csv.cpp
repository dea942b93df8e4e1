#include "paultrap/csv.hpp"

#include <cstdio>

#include "paultrap/errors.hpp"

namespace paultrap::harness {

std::string format_cell(const CsvWriter::Cell &cell) {
  return std::visit(
      [](const auto &v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          char buf[40];
          std::snprintf(buf, sizeof buf, "%.17g", v);
          return buf;
        } else if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else {
          return std::to_string(v);
        }
      },
      cell);
}

CsvWriter::CsvWriter(const std::filesystem::path &path, const Provenance &p,
                     const std::vector<std::string> &columns)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), columns_(columns.size()) {
  if (!out_)
    throw SimulationError("cannot open '" + path.string() + "' for writing");
  out_ << "# paultrap " << p.version << "\n# preset: " << p.preset << "\n# config_digest: "
       << p.digest << "\n# seed: " << p.seed << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i)
    out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<Cell> &cells) {
  if (cells.size() != columns_)
    throw Error("csv row has " + std::to_string(cells.size()) + " cells, header has " +
                std::to_string(columns_));
  for (std::size_t i = 0; i < cells.size(); ++i)
    out_ << (i ? "," : "") << format_cell(cells[i]);
  out_ << '\n';
}

void CsvWriter::close() {
  out_.flush();
  if (!out_)
    throw SimulationError("write to '" + path_.string() + "' failed");
  out_.close();
}

namespace {

std::vector<std::string> data_lines(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot read '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (line.empty() || line[0] != '#')
      lines.push_back(line);
  return lines;
}

std::vector<std::string> cells(const std::string &line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos)
      return out;
    start = comma + 1;
  }
}

} // namespace

std::string first_difference(const std::filesystem::path &expected,
                             const std::filesystem::path &actual) {
  const auto a = data_lines(expected);
  const auto b = data_lines(actual);
  const std::size_t rows = std::min(a.size(), b.size());
  for (std::size_t r = 0; r < rows; ++r) {
    if (a[r] == b[r])
      continue;
    const auto ca = cells(a[r]);
    const auto cb = cells(b[r]);
    const auto names = cells(a[0]);
    for (std::size_t c = 0; c < std::max(ca.size(), cb.size()); ++c) {
      const std::string va = c < ca.size() ? ca[c] : "<missing>";
      const std::string vb = c < cb.size() ? cb[c] : "<missing>";
      if (va != vb)
        return "row " + std::to_string(r) + ", column " + std::to_string(c + 1) +
               (c < names.size() ? " (" + names[c] + ")" : "") + ": expected " + va +
               ", got " + vb;
    }
  }
  if (a.size() != b.size())
    return "row count differs: expected " + std::to_string(a.size()) + ", got " +
           std::to_string(b.size());
  return {};
}

} // namespace paultrap::harness
