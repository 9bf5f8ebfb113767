#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "gfp/manifest.hpp"
#include "gfp/ply_io.hpp"
#include "gfp/rng.hpp"

using namespace gfp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gfp_test_" + std::to_string(Rng(std::random_device{}()).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("minimal one-vertex ply reads back") {
  TempDir tmp;
  const std::string p = tmp.file("one.ply");
  std::ofstream(p) << "ply\nformat ascii 1.0\nelement vertex 1\n"
                      "property float x\nproperty float y\nproperty float z\n"
                      "end_header\n0 0 0\n";
  const PointCloud c = read_ply(p);
  REQUIRE(c.size() == 1);
  CHECK(c.points[0] == Vec3(0, 0, 0));
  CHECK(!c.has_normals());
}

TEST_CASE("write then read round-trips through 9 significant digits") {
  TempDir tmp;
  Rng rng(33);
  PointCloud c;
  for (int i = 0; i < 1000; ++i)
    c.points.emplace_back(rng.uniform(-10, 10), rng.uniform(-1e-3, 1e-3),
                          rng.uniform(100, 2000));
  const std::string p = tmp.file("round.ply");
  write_ply(c, p);
  const PointCloud back = read_ply(p);
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (int axis = 0; axis < 3; ++axis) {
      // exactly the value the 9-significant-digit rendering denotes
      const double expected = std::stod(format_coord(c.points[i][axis]));
      CHECK(back.points[i][axis] == expected);
    }
  }
}

TEST_CASE("identical clouds produce byte-identical files") {
  TempDir tmp;
  Rng rng(34);
  PointCloud c;
  for (int i = 0; i < 100; ++i)
    c.points.emplace_back(rng.normal(), rng.normal(), rng.normal());
  write_ply(c, tmp.file("a.ply"));
  write_ply(c, tmp.file("b.ply"));
  CHECK(slurp(tmp.file("a.ply")) == slurp(tmp.file("b.ply")));
}

TEST_CASE("normals add three more header properties") {
  TempDir tmp;
  PointCloud c;
  c.points.emplace_back(1, 2, 3);
  c.normals.emplace_back(0, 0, 1);
  const std::string p = tmp.file("n.ply");
  write_ply(c, p);
  const std::string text = slurp(p);
  int props = 0;
  for (std::size_t pos = 0; (pos = text.find("property", pos)) != std::string::npos; ++pos)
    ++props;
  CHECK(props == 6);
  const PointCloud back = read_ply(p);
  REQUIRE(back.has_normals());
  CHECK((back.normals[0] - Vec3(0, 0, 1)).norm() == 0.0);
}

TEST_CASE("empty cloud cannot be written") {
  TempDir tmp;
  PointCloud empty;
  CHECK_THROWS_WITH_AS(write_ply(empty, tmp.file("e.ply")), "empty cloud",
                       std::invalid_argument);
}

TEST_CASE("vertex count mismatch is reported") {
  TempDir tmp;
  const std::string p = tmp.file("short.ply");
  std::ofstream(p) << "ply\nformat ascii 1.0\nelement vertex 5\n"
                      "property float x\nproperty float y\nproperty float z\n"
                      "end_header\n0 0 0\n1 1 1\n2 2 2\n3 3 3\n";
  CHECK_THROWS_WITH_AS(read_ply(p), "vertex count mismatch", std::runtime_error);
}

TEST_CASE("binary ply is rejected as unsupported encoding") {
  TempDir tmp;
  const std::string p = tmp.file("bin.ply");
  std::ofstream(p) << "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
                      "property float x\nproperty float y\nproperty float z\nend_header\n";
  CHECK_THROWS_WITH_AS(read_ply(p), "unsupported encoding: binary_little_endian",
                       std::runtime_error);
}

TEST_CASE("malformed header errors carry the line number") {
  TempDir tmp;
  const std::string p = tmp.file("bad.ply");
  std::ofstream(p) << "ply\nformat ascii 1.0\nelement vertex notanumber\nend_header\n";
  try {
    read_ply(p);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("manifest: empty file loads as empty manifest") {
  TempDir tmp;
  const std::string p = tmp.file("m.tsv");
  std::ofstream(p) << "";
  CHECK(load_manifest(p).entries.empty());
}

TEST_CASE("manifest round-trips exactly") {
  TempDir tmp;
  // referenced files must exist at load time
  for (const char* n : {"a_s.ply", "a_t.ply", "a_l.ply", "b_s.ply", "b_t.ply", "c_o.ply",
                        "c_gt.ply"}) {
    PointCloud c;
    c.points.emplace_back(0, 0, 0);
    write_ply(c, tmp.file(n));
  }
  DatasetManifest m;
  m.entries.push_back({"a", "car", tmp.file("a_s.ply"), tmp.file("a_t.ply"), tmp.file("a_l.ply"),
                       Split::kTrain});
  m.entries.push_back({"b", "car", tmp.file("b_s.ply"), tmp.file("b_t.ply"), "", Split::kTrain});
  m.entries.push_back({"c", "cup", tmp.file("c_o.ply"), tmp.file("c_gt.ply"), "", Split::kTest});
  const std::string p = tmp.file("m.tsv");
  save_manifest(m, p);
  const DatasetManifest back = load_manifest(p);
  REQUIRE(back.entries.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.entries[i].sample_id == m.entries[i].sample_id);
    CHECK(back.entries[i].class_label == m.entries[i].class_label);
    CHECK(back.entries[i].source_path == m.entries[i].source_path);
    CHECK(back.entries[i].template_path == m.entries[i].template_path);
    CHECK(back.entries[i].label_path == m.entries[i].label_path);
    CHECK(back.entries[i].split == m.entries[i].split);
  }
  save_manifest(back, tmp.file("m2.tsv"));
  CHECK(slurp(p) == slurp(tmp.file("m2.tsv")));
}

TEST_CASE("manifest rejects duplicate sample ids and unknown splits") {
  TempDir tmp;
  PointCloud c;
  c.points.emplace_back(0, 0, 0);
  write_ply(c, tmp.file("x.ply"));
  const std::string line = "car_001\tcar\t" + tmp.file("x.ply") + "\t" + tmp.file("x.ply") +
                           "\t-\ttrain\n";
  {
    std::ofstream out(tmp.file("dup.tsv"));
    out << line << line;
  }
  CHECK_THROWS_WITH_AS(load_manifest(tmp.file("dup.tsv")), "duplicate sample_id car_001",
                       std::runtime_error);
  {
    std::ofstream out(tmp.file("split.tsv"));
    out << "a\tcar\t" << tmp.file("x.ply") << "\t" << tmp.file("x.ply") << "\t-\tvalidation\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(tmp.file("split.tsv")), "unknown split token validation",
                       std::runtime_error);
  {
    std::ofstream out(tmp.file("missing.tsv"));
    out << "a\tcar\t" << tmp.file("nope.ply") << "\t" << tmp.file("x.ply") << "\t-\ttrain\n";
  }
  CHECK_THROWS_AS(load_manifest(tmp.file("missing.tsv")), std::runtime_error);
  CHECK_NOTHROW(load_manifest(tmp.file("missing.tsv"), false));
}
