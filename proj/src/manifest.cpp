#include "gfp/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace gfp {

std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split split_from_string(const std::string& tok) {
  if (tok == "train") return Split::kTrain;
  if (tok == "test") return Split::kTest;
  throw std::runtime_error("unknown split token " + tok);
}

DatasetManifest load_manifest(const std::string& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);

  DatasetManifest m;
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 6)
      throw std::runtime_error("manifest line " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected 6");

    ManifestEntry e;
    e.sample_id = fields[0];
    e.class_label = fields[1];
    e.source_path = fields[2];
    e.template_path = fields[3];
    e.label_path = fields[4] == "-" ? "" : fields[4];
    e.split = split_from_string(fields[5]);

    if (!seen.insert(e.sample_id).second)
      throw std::runtime_error("duplicate sample_id " + e.sample_id);
    if (check_paths) {
      for (const std::string& p : {e.source_path, e.template_path, e.label_path}) {
        if (!p.empty() && !std::filesystem::exists(p))
          throw std::runtime_error("manifest references missing file: " + p);
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::unordered_set<std::string> seen;
  for (const ManifestEntry& e : m.entries)
    if (!seen.insert(e.sample_id).second)
      throw std::runtime_error("duplicate sample_id " + e.sample_id);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  for (const ManifestEntry& e : m.entries) {
    out << e.sample_id << '\t' << e.class_label << '\t' << e.source_path << '\t'
        << e.template_path << '\t' << (e.label_path.empty() ? "-" : e.label_path) << '\t'
        << to_string(e.split) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace gfp
