#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace repdyn {

/// Identifies one layer of one model.
struct LayerRef {
  std::string model_name;
  std::size_t layer_index = 0;
  std::size_t layer_count = 1;

  /// layer_index / (layer_count - 1); 0 for single-layer models.
  double depth_fraction() const;
  void validate() const;

  bool operator==(const LayerRef&) const = default;
};

/// N x D row-major float32 activations of one layer for a fixed image set.
/// Construction validates shape, finiteness and N >= 2.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(std::size_t n_points, std::size_t dim, std::vector<float> values,
                  LayerRef layer = {});

  std::size_t n_points() const { return n_points_; }
  std::size_t dim() const { return dim_; }
  const LayerRef& layer() const { return layer_; }
  void set_layer(LayerRef layer);

  std::span<const float> values() const { return values_; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values_).subspan(i * dim_, dim_);
  }

  /// Copy of the given rows, in the given order.
  EmbeddingMatrix select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t n_points_;
  std::size_t dim_;
  std::vector<float> values_;
  LayerRef layer_;
};

struct EmbeddingHeader {
  std::size_t n_points = 0;
  std::size_t dim = 0;
  LayerRef layer;
  std::size_t payload_offset = 0;
};

// EMB1 container: one UTF-8 JSON header line
//   {"format":"EMB1","n":N,"d":D,"dtype":"f32le","model":M,"layer":L,"layer_count":C}
// terminated by '\n', then N*D little-endian IEEE-754 binary32 values, row-major.
void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

/// Parses and checks the header against the file size without reading the payload.
EmbeddingHeader probe_embeddings(const std::filesystem::path& path);

struct ModelInfo {
  std::string name;
  std::string architecture;
  std::string objective;
  double parameter_count_millions = 0.0;
};

struct ManifestLayer {
  LayerRef layer;
  std::filesystem::path path;  // resolved against the manifest directory
};

class Manifest {
 public:
  std::vector<ModelInfo> models;
  std::vector<ManifestLayer> layers;
  std::vector<std::string> image_ids;
  std::string pooling;

  /// Layers of one model, in manifest order. Empty when the model is absent.
  std::vector<const ManifestLayer*> layers_of(const std::string& model) const;
  /// Model names in order of first appearance among the layers.
  std::vector<std::string> model_names() const;
  bool has_model(const std::string& model) const;
  /// Position of an image id in image_ids.
  std::optional<std::size_t> index_of(const std::string& image_id) const;

  EmbeddingMatrix load(const ManifestLayer& layer) const;
};

// Manifest JSON:
// {
//   "image_ids": ["img0", ...],
//   "pooling": "cls",                                   (optional)
//   "models": [{"name": ..., "architecture": ..., "objective": ...,
//               "parameter_count_millions": ...}],      (optional)
//   "layers": [{"model": ..., "layer_index": 0, "layer_count": 12,
//               "path": "relative/to/manifest.emb"}]
// }
Manifest load_manifest(const std::filesystem::path& path);

/// Writes `manifest` with layer paths made relative to the manifest directory.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// image_id -> non-empty set of label strings.
using LabelFile = std::map<std::string, std::set<std::string>>;

LabelFile load_labels(const std::filesystem::path& path);
void write_labels(const LabelFile& labels, const std::filesystem::path& path);

}  // namespace repdyn
