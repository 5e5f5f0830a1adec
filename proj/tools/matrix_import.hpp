#pragma once

#include <filesystem>

#include "repdyn/embstore.hpp"

namespace repdyn::cli {

/// Reads a 2-D matrix from a NumPy .npy file (little-endian <f4 or <f8,
/// C order) or from a headerless comma-separated text file.
EmbeddingMatrix import_matrix(const std::filesystem::path& path, const LayerRef& layer);

}  // namespace repdyn::cli
