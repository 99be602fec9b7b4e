#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pimc {

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split parse_split(const std::string& name);

struct ManifestEntry {
  std::string region_id;
  std::filesystem::path cube;                   // resolved against the manifest directory
  Split split = Split::Train;
  std::optional<std::filesystem::path> labels;  // pixel-label raster, optional
};

/// JSON document:
///   { "format_version": 1,
///     "regions": [ { "region_id": "r000", "cube": "cubes/r000.pimc",
///                    "split": "train", "labels": "labels/r000.pimc" } ] }
/// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
  int format_version = 1;
  std::vector<ManifestEntry> regions;

  std::vector<const ManifestEntry*> in_split(Split s) const;
};

/// Parses and validates: known version, unique region ids (so splits are
/// disjoint), every referenced file exists with a valid container header.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes paths relative to the manifest directory when possible.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace pimc
