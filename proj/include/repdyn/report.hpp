#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace repdyn {

inline constexpr const char* kToolName = "repdyn";
inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest round-trip decimal, independent of the C locale.
std::string format_number(double value);

struct Provenance {
  std::string command;
  std::uint64_t seed = 0;
  std::string metric;
  std::size_t n = 0;
  std::vector<std::pair<std::string, std::string>> extra;
};

/// CSV with '#'-prefixed provenance lines, ',' separators, '\n' line endings.
class CsvWriter {
 public:
  CsvWriter(const Provenance& provenance, std::vector<std::string> columns);

  void add_row(std::vector<std::string> cells);
  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::string text_;
  std::size_t n_columns_;
};

/// Writes text verbatim in binary mode.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace repdyn
