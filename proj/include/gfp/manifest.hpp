#pragma once

#include <string>
#include <vector>

namespace gfp {

enum class Split { kTrain, kTest };

std::string to_string(Split s);
Split split_from_string(const std::string& tok);  // throws on unknown token

struct ManifestEntry {
  std::string sample_id;
  std::string class_label;
  std::string source_path;
  std::string template_path;
  std::string label_path;  // empty when absent
  Split split = Split::kTrain;
};

/// Tab-separated dataset index, one entry per line. sample_ids are unique.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

/// check_paths verifies that referenced files exist (manifest invariant);
/// tests that synthesize manifests in memory can disable it.
DatasetManifest load_manifest(const std::string& path, bool check_paths = true);
void save_manifest(const DatasetManifest& m, const std::string& path);

}  // namespace gfp
