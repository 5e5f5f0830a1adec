#include "matrix_import.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "repdyn/error.hpp"

namespace repdyn::cli {

namespace {

EmbeddingMatrix import_npy(const std::filesystem::path& path, const LayerRef& layer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 10 || std::memcmp(bytes.data(), "\x93NUMPY", 6) != 0)
    throw DataError(path.string() + ": not a .npy file");
  const unsigned major = bytes[6];
  std::size_t header_len = 0, offset = 0;
  if (major == 1) {
    header_len = bytes[8] | (bytes[9] << 8);
    offset = 10;
  } else {
    if (bytes.size() < 12) throw DataError(path.string() + ": truncated .npy header");
    header_len = bytes[8] | (bytes[9] << 8) | (bytes[10] << 16) | (static_cast<std::size_t>(bytes[11]) << 24);
    offset = 12;
  }
  if (bytes.size() < offset + header_len) throw DataError(path.string() + ": truncated .npy header");
  const std::string header(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                           bytes.begin() + static_cast<std::ptrdiff_t>(offset + header_len));

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']+)')")))
    throw DataError(path.string() + ": .npy header lacks descr");
  const std::string descr = m[1];
  if (descr != "<f4" && descr != "<f8") throw DataError(path.string() + ": unsupported dtype " + descr);
  if (std::regex_search(header, std::regex(R"('fortran_order'\s*:\s*True)")))
    throw DataError(path.string() + ": Fortran-ordered arrays are not supported");
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(\s*(\d+)\s*,\s*(\d+)\s*,?\s*\))")))
    throw DataError(path.string() + ": expected a 2-D array");
  const std::size_t n = std::stoull(m[1]), d = std::stoull(m[2]);

  const std::size_t width = descr == "<f4" ? 4 : 8;
  const std::size_t payload = offset + header_len;
  if (bytes.size() - payload != n * d * width) throw DataError(path.string() + ": payload length mismatch");
  std::vector<float> values(n * d);
  for (std::size_t i = 0; i < n * d; ++i) {
    const unsigned char* p = bytes.data() + payload + i * width;
    if (width == 4) {
      std::uint32_t u = 0;
      for (int b = 3; b >= 0; --b) u = (u << 8) | p[b];
      values[i] = std::bit_cast<float>(u);
    } else {
      std::uint64_t u = 0;
      for (int b = 7; b >= 0; --b) u = (u << 8) | p[b];
      values[i] = static_cast<float>(std::bit_cast<double>(u));
    }
  }
  return EmbeddingMatrix(n, d, std::move(values), layer);
}

EmbeddingMatrix import_csv(const std::filesystem::path& path, const LayerRef& layer) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<float> values;
  std::size_t rows = 0, dim = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc{})
        throw DataError(path.string() + ": bad number on data row " + std::to_string(rows + 1));
      values.push_back(static_cast<float>(v));
      ++count;
      p = res.ptr;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p < end) {
        if (*p != ',') throw DataError(path.string() + ": expected ',' on data row " + std::to_string(rows + 1));
        ++p;
      }
    }
    if (rows == 0) dim = count;
    if (count != dim) throw DataError(path.string() + ": ragged row " + std::to_string(rows + 1));
    ++rows;
  }
  return EmbeddingMatrix(rows, dim, std::move(values), layer);
}

}  // namespace

EmbeddingMatrix import_matrix(const std::filesystem::path& path, const LayerRef& layer) {
  if (path.extension() == ".npy") return import_npy(path, layer);
  return import_csv(path, layer);
}

}  // namespace repdyn::cli
