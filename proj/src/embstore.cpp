#include "repdyn/embstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "json.hpp"
#include "repdyn/error.hpp"

namespace repdyn {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::size_t kMaxHeaderBytes = 1 << 16;

void check_finite(std::span<const float> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw DataError("non-finite embedding value at flat index " + std::to_string(i));
  }
}

std::uint32_t load_le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

template <typename T>
T require_field(const json& j, const char* key, const fs::path& where) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(where.string() + ": missing \"" + key + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw DataError(where.string() + ": bad \"" + key + "\": " + e.what());
  }
}

struct RawHeader {
  EmbeddingHeader header;
  std::uintmax_t file_size = 0;
};

RawHeader read_header(std::ifstream& in, const fs::path& path) {
  std::string line;
  char c;
  while (in.get(c)) {
    if (c == '\n') break;
    line.push_back(c);
    if (line.size() > kMaxHeaderBytes) throw DataError(path.string() + ": header line too long");
  }
  if (!in) throw DataError(path.string() + ": missing header terminator");

  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  }
  if (!j.is_object()) throw DataError(path.string() + ": header is not a JSON object");
  if (require_field<std::string>(j, "format", path) != "EMB1")
    throw DataError(path.string() + ": unsupported format tag");
  if (require_field<std::string>(j, "dtype", path) != "f32le")
    throw DataError(path.string() + ": unsupported dtype");

  RawHeader raw;
  auto& h = raw.header;
  h.n_points = require_field<std::size_t>(j, "n", path);
  h.dim = require_field<std::size_t>(j, "d", path);
  h.layer.model_name = require_field<std::string>(j, "model", path);
  h.layer.layer_index = require_field<std::size_t>(j, "layer", path);
  h.layer.layer_count = j.contains("layer_count") ? require_field<std::size_t>(j, "layer_count", path)
                                                  : h.layer.layer_index + 1;
  h.payload_offset = line.size() + 1;
  raw.file_size = fs::file_size(path);

  if (h.n_points < 2) throw DataError(path.string() + ": n must be at least 2");
  if (h.dim < 1) throw DataError(path.string() + ": d must be at least 1");
  try {
    h.layer.validate();
  } catch (const UsageError& e) {
    throw DataError(path.string() + ": " + e.what());
  }

  const std::uintmax_t expected = h.payload_offset + std::uintmax_t{h.n_points} * h.dim * 4;
  if (raw.file_size < expected)
    throw DataError(path.string() + ": truncated payload (" +
                    std::to_string(raw.file_size - h.payload_offset) + " bytes, expected " +
                    std::to_string(expected - h.payload_offset) + ")");
  if (raw.file_size > expected) throw DataError(path.string() + ": trailing bytes after payload");
  return raw;
}

}  // namespace

double LayerRef::depth_fraction() const {
  if (layer_count <= 1) return 0.0;
  return static_cast<double>(layer_index) / static_cast<double>(layer_count - 1);
}

void LayerRef::validate() const {
  if (layer_count == 0 || layer_index >= layer_count)
    throw UsageError("layer index " + std::to_string(layer_index) + " out of range for " +
                     std::to_string(layer_count) + " layers");
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t n_points, std::size_t dim, std::vector<float> values,
                                 LayerRef layer)
    : n_points_(n_points), dim_(dim), values_(std::move(values)), layer_(std::move(layer)) {
  if (n_points_ < 2) throw UsageError("embedding matrix needs at least 2 points");
  if (dim_ < 1) throw UsageError("embedding matrix needs at least 1 dimension");
  if (values_.size() != n_points_ * dim_)
    throw UsageError("embedding matrix has " + std::to_string(values_.size()) +
                     " values, expected " + std::to_string(n_points_ * dim_));
  check_finite(values_);
  layer_.validate();
}

void EmbeddingMatrix::set_layer(LayerRef layer) {
  layer.validate();
  layer_ = std::move(layer);
}

EmbeddingMatrix EmbeddingMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<float> out;
  out.reserve(rows.size() * dim_);
  for (std::size_t r : rows) {
    if (r >= n_points_) throw UsageError("row index out of range");
    auto src = row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  return EmbeddingMatrix(rows.size(), dim_, std::move(out), layer_);
}

void write_embeddings(const EmbeddingMatrix& matrix, const fs::path& path) {
  // Rejected before the file is opened, so bad data never leaves a partial file.
  check_finite(matrix.values());

  ordered_json header;
  header["format"] = "EMB1";
  header["n"] = matrix.n_points();
  header["d"] = matrix.dim();
  header["dtype"] = "f32le";
  header["model"] = matrix.layer().model_name;
  header["layer"] = matrix.layer().layer_index;
  header["layer_count"] = matrix.layer().layer_count;

  std::string bytes = header.dump();
  bytes.push_back('\n');
  const std::size_t offset = bytes.size();
  bytes.resize(offset + matrix.values().size() * 4);
  auto* out = reinterpret_cast<unsigned char*>(bytes.data() + offset);
  for (float v : matrix.values()) {
    const auto u = std::bit_cast<std::uint32_t>(v);
    *out++ = static_cast<unsigned char>(u);
    *out++ = static_cast<unsigned char>(u >> 8);
    *out++ = static_cast<unsigned char>(u >> 16);
    *out++ = static_cast<unsigned char>(u >> 24);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

EmbeddingHeader probe_embeddings(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_header(in, path).header;
}

EmbeddingMatrix read_embeddings(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const RawHeader raw = read_header(in, path);
  const auto& h = raw.header;

  std::vector<unsigned char> payload(h.n_points * h.dim * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size())
    throw DataError(path.string() + ": truncated payload");

  std::vector<float> values(h.n_points * h.dim);
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = std::bit_cast<float>(load_le32(payload.data() + 4 * i));
  try {
    check_finite(values);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return EmbeddingMatrix(h.n_points, h.dim, std::move(values), h.layer);
}

std::vector<const ManifestLayer*> Manifest::layers_of(const std::string& model) const {
  std::vector<const ManifestLayer*> out;
  for (const auto& l : layers)
    if (l.layer.model_name == model) out.push_back(&l);
  return out;
}

std::vector<std::string> Manifest::model_names() const {
  std::vector<std::string> names;
  for (const auto& l : layers) {
    if (std::find(names.begin(), names.end(), l.layer.model_name) == names.end())
      names.push_back(l.layer.model_name);
  }
  return names;
}

bool Manifest::has_model(const std::string& model) const {
  for (const auto& l : layers)
    if (l.layer.model_name == model) return true;
  return false;
}

std::optional<std::size_t> Manifest::index_of(const std::string& image_id) const {
  for (std::size_t i = 0; i < image_ids.size(); ++i)
    if (image_ids[i] == image_id) return i;
  return std::nullopt;
}

EmbeddingMatrix Manifest::load(const ManifestLayer& layer) const {
  EmbeddingMatrix m = read_embeddings(layer.path);
  if (m.n_points() != image_ids.size())
    throw DataError(layer.path.string() + ": n=" + std::to_string(m.n_points()) + " but manifest has " +
                    std::to_string(image_ids.size()) + " image ids");
  m.set_layer(layer.layer);
  return m;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw DataError(path.string() + ": manifest must be a JSON object");

  Manifest m;
  const fs::path base = path.parent_path();
  m.image_ids = require_field<std::vector<std::string>>(j, "image_ids", path);
  m.pooling = j.value("pooling", std::string{});

  std::unordered_set<std::string> seen;
  for (const auto& id : m.image_ids)
    if (!seen.insert(id).second) throw DataError(path.string() + ": duplicate image id \"" + id + "\"");

  if (j.contains("models")) {
    for (const auto& jm : j.at("models")) {
      ModelInfo info;
      info.name = require_field<std::string>(jm, "name", path);
      info.architecture = jm.value("architecture", std::string{});
      info.objective = jm.value("objective", std::string{});
      info.parameter_count_millions = jm.value("parameter_count_millions", 0.0);
      m.models.push_back(std::move(info));
    }
  }

  for (const auto& jl : require_field<json>(j, "layers", path)) {
    ManifestLayer layer;
    layer.layer.model_name = require_field<std::string>(jl, "model", path);
    layer.layer.layer_index = require_field<std::size_t>(jl, "layer_index", path);
    layer.layer.layer_count = require_field<std::size_t>(jl, "layer_count", path);
    if (layer.layer.model_name.empty()) throw DataError(path.string() + ": layer entry with an empty model name");
    try {
      layer.layer.validate();
    } catch (const UsageError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    fs::path p = require_field<std::string>(jl, "path", path);
    layer.path = p.is_absolute() ? p : base / p;
    if (!fs::exists(layer.path)) throw DataError("missing layer file " + layer.path.string());
    const EmbeddingHeader h = probe_embeddings(layer.path);
    if (h.n_points != m.image_ids.size())
      throw DataError(layer.path.string() + ": n=" + std::to_string(h.n_points) + " but manifest lists " +
                      std::to_string(m.image_ids.size()) + " image ids");
    m.layers.push_back(std::move(layer));
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  ordered_json j;
  j["image_ids"] = manifest.image_ids;
  if (!manifest.pooling.empty()) j["pooling"] = manifest.pooling;
  j["models"] = ordered_json::array();
  for (const auto& m : manifest.models) {
    j["models"].push_back({{"name", m.name},
                           {"architecture", m.architecture},
                           {"objective", m.objective},
                           {"parameter_count_millions", m.parameter_count_millions}});
  }
  j["layers"] = ordered_json::array();
  for (const auto& l : manifest.layers) {
    j["layers"].push_back({{"model", l.layer.model_name},
                           {"layer_index", l.layer.layer_index},
                           {"layer_count", l.layer.layer_count},
                           {"path", fs::relative(fs::absolute(l.path), base).generic_string()}});
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
}

LabelFile load_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw DataError(path.string() + ": label file must be a JSON object");
  LabelFile labels;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::set<std::string> set;
    try {
      for (const auto& v : it.value()) set.insert(v.get<std::string>());
    } catch (const json::exception&) {
      throw DataError(path.string() + ": labels for \"" + it.key() + "\" must be an array of strings");
    }
    if (set.empty()) throw DataError(path.string() + ": empty label set for \"" + it.key() + "\"");
    labels.emplace(it.key(), std::move(set));
  }
  return labels;
}

void write_labels(const LabelFile& labels, const fs::path& path) {
  ordered_json j = ordered_json::object();
  for (const auto& [id, set] : labels) j[id] = std::vector<std::string>(set.begin(), set.end());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
}

}  // namespace repdyn
