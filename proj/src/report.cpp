#include "repdyn/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "repdyn/error.hpp"

namespace repdyn {

std::string format_number(double value) {
  if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::string escape_cell(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

CsvWriter::CsvWriter(const Provenance& p, std::vector<std::string> columns) : n_columns_(columns.size()) {
  text_ += std::string("# tool=") + kToolName + " version=" + kToolVersion + " command=" + p.command + "\n";
  text_ += "# seed=" + std::to_string(p.seed) + " metric=" + p.metric + " n=" + std::to_string(p.n) + "\n";
  for (const auto& [k, v] : p.extra) text_ += "# " + k + "=" + v + "\n";
  add_row(std::move(columns));
}

void CsvWriter::add_row(std::vector<std::string> cells) {
  if (cells.size() != n_columns_) throw std::logic_error("CSV row has the wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_.push_back(',');
    text_ += escape_cell(cells[i]);
  }
  text_.push_back('\n');
}

std::string CsvWriter::str() const { return text_; }

void CsvWriter::save(const std::filesystem::path& path) const { write_text(path, text_); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

}  // namespace repdyn
