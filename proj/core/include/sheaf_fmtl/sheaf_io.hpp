#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "sheaf_fmtl/sheaf.hpp"

namespace sheaf_fmtl {

/// A sheaf description as stored on disk. Maps are optional so that a bare
/// topology-with-dimensions can be exchanged before any maps exist.
struct SheafDocument {
  SheafGraph sheaf;
  std::optional<RestrictionMaps> maps;
};

/// JSON document with keys: vertices, stalk_dims, edges ([lo, hi] pairs), edge_dims
/// and, when maps are given, "maps": one entry per incidence holding
/// {edge: [lo, hi], vertex, rows, cols, data (row-major)}.
std::string write_sheaf_json(const SheafGraph& sheaf, const RestrictionMaps* maps = nullptr);
SheafDocument read_sheaf_json(std::string_view text);

void save_sheaf(const std::filesystem::path& path, const SheafGraph& sheaf,
                const RestrictionMaps* maps = nullptr);
SheafDocument load_sheaf(const std::filesystem::path& path);

}  // namespace sheaf_fmtl
