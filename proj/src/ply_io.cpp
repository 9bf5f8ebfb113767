#include "gfp/ply_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace gfp {

namespace {

[[noreturn]] void header_error(int line, const std::string& what) {
  throw std::runtime_error("ply header error at line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::string format_coord(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);

  std::string line;
  int line_no = 0;

  auto next_line = [&](bool required) -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      return true;
    }
    if (required) header_error(line_no, "unexpected end of file");
    return false;
  };

  next_line(true);
  if (line != "ply") header_error(line_no, "missing 'ply' magic");

  long vertex_count = -1;
  bool in_vertex_element = false;
  bool seen_format = false;
  std::vector<std::string> vertex_props;
  // Elements after vertex whose rows we skip: (name, count).
  std::vector<std::pair<std::string, long>> trailing_elements;
  bool past_vertex = false;

  for (;;) {
    next_line(true);
    const auto toks = split_ws(line);
    if (toks.empty()) header_error(line_no, "blank line in header");
    if (toks[0] == "comment") continue;
    if (toks[0] == "format") {
      if (toks.size() < 2) header_error(line_no, "malformed format line");
      if (toks[1] != "ascii") throw std::runtime_error("unsupported encoding: " + toks[1]);
      seen_format = true;
      continue;
    }
    if (toks[0] == "element") {
      if (toks.size() != 3) header_error(line_no, "malformed element line");
      long count = 0;
      try {
        count = std::stol(toks[2]);
      } catch (...) {
        header_error(line_no, "bad element count '" + toks[2] + "'");
      }
      if (toks[1] == "vertex") {
        if (vertex_count >= 0) header_error(line_no, "duplicate vertex element");
        vertex_count = count;
        in_vertex_element = true;
      } else {
        in_vertex_element = false;
        if (vertex_count >= 0) past_vertex = true;
        trailing_elements.emplace_back(toks[1], count);
      }
      continue;
    }
    if (toks[0] == "property") {
      if (in_vertex_element) {
        if (toks.size() < 3) header_error(line_no, "malformed property line");
        if (toks[1] == "list") header_error(line_no, "list property on vertex element");
        vertex_props.push_back(toks.back());
      }
      continue;
    }
    if (toks[0] == "end_header") break;
    header_error(line_no, "unknown header keyword '" + toks[0] + "'");
  }

  if (!seen_format) header_error(line_no, "missing format line");
  if (vertex_count < 0) header_error(line_no, "missing vertex element");
  if (past_vertex) header_error(line_no, "vertex element must come first");

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (int i = 0; i < static_cast<int>(vertex_props.size()); ++i) {
    const std::string& p = vertex_props[i];
    if (p == "x") ix = i;
    else if (p == "y") iy = i;
    else if (p == "z") iz = i;
    else if (p == "nx") inx = i;
    else if (p == "ny") iny = i;
    else if (p == "nz") inz = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) header_error(line_no, "vertex element lacks x,y,z properties");
  const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(vertex_count));
  if (with_normals) cloud.normals.reserve(static_cast<std::size_t>(vertex_count));

  for (long v = 0; v < vertex_count; ++v) {
    if (!next_line(false)) throw std::runtime_error("vertex count mismatch");
    const auto toks = split_ws(line);
    if (toks.empty()) throw std::runtime_error("vertex count mismatch");
    if (toks.size() < vertex_props.size())
      throw std::runtime_error("ply vertex line " + std::to_string(line_no) + " has " +
                               std::to_string(toks.size()) + " values, expected " +
                               std::to_string(vertex_props.size()));
    auto value = [&](int col) {
      try {
        return std::stod(toks[static_cast<std::size_t>(col)]);
      } catch (...) {
        throw std::runtime_error("ply vertex line " + std::to_string(line_no) +
                                 ": bad number '" + toks[static_cast<std::size_t>(col)] + "'");
      }
    };
    cloud.points.emplace_back(value(ix), value(iy), value(iz));
    if (with_normals) cloud.normals.emplace_back(value(inx), value(iny), value(inz));
  }

  require_finite(cloud);
  return cloud;
}

void write_ply(const PointCloud& cloud, const std::string& path) {
  if (cloud.empty()) throw std::invalid_argument("empty cloud");
  if (cloud.has_normals() && cloud.normals.size() != cloud.points.size())
    throw std::invalid_argument("normal count does not match point count");
  require_finite(cloud);

  std::ofstream out(path, std::ios::binary);  // binary mode: no newline translation
  if (!out) throw std::runtime_error("cannot write file: " + path);

  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_normals()) out << "property float nx\nproperty float ny\nproperty float nz\n";
  out << "end_header\n";

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << format_coord(p.x()) << ' ' << format_coord(p.y()) << ' ' << format_coord(p.z());
    if (cloud.has_normals()) {
      const Vec3& n = cloud.normals[i];
      out << ' ' << format_coord(n.x()) << ' ' << format_coord(n.y()) << ' '
          << format_coord(n.z());
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace gfp
