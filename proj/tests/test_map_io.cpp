#include "doctest.h"

#include <cstring>
#include <fstream>
#include <random>

#include "trajkit/errors.hpp"
#include "trajkit/map_io.hpp"

using namespace trajkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "trajkit_map_io_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("raw map round trip keeps float32 values") {
  VectorMap3D m(3, 2, 4, 5);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  for (double& v : m.values) v = n(rng);
  const fs::path base = scratch("loc");
  write_raw_map(base, to_raw(m, "localization"));
  const RawMap raw = read_raw_map(base);
  CHECK(raw.kind == "localization");
  CHECK(raw.shape == std::vector<int>{3, 2, 4, 5});
  const VectorMap3D back = vector_map3d_from_raw(raw);
  REQUIRE(back.values.size() == m.values.size());
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    CHECK(back.values[i] == static_cast<double>(static_cast<float>(m.values[i])));
  }
  CHECK(fs::file_size(fs::path(base.string() + ".bin")) == m.values.size() * 4);
}

TEST_CASE("binary layout is little-endian channel-first") {
  VectorMap2D m(2, 1, 2);
  m.values = {1.0, 2.0, -0.5, 3.0};
  const fs::path base = scratch("world");
  write_raw_map(base, to_raw(m, "world"));
  std::ifstream in(base.string() + ".bin", std::ios::binary);
  unsigned char bytes[16];
  in.read(reinterpret_cast<char*>(bytes), 16);
  // 1.0f = 0x3F800000
  CHECK(bytes[0] == 0x00);
  CHECK(bytes[3] == 0x3F);
  CHECK(bytes[2] == 0x80);
  // third value -0.5f = 0xBF000000
  CHECK(bytes[11] == 0xBF);
}

TEST_CASE("center map shape") {
  CenterMap3D c(2, 3, 4);
  c.at({1, 2, 3}) = 0.25;
  const fs::path base = scratch("center");
  write_raw_map(base, to_raw(c));
  const CenterMap3D back = center_map_from_raw(read_raw_map(base));
  CHECK(back.D == 2);
  CHECK(back.at({1, 2, 3}) == 0.25);
  RawMap wrong = to_raw(c);
  wrong.shape = {2, 2, 3, 4};
  CHECK_THROWS_AS(center_map_from_raw(wrong), Error);
}

TEST_CASE("size mismatches are rejected") {
  RawMap bad{"x", {2, 2}, {1.f, 2.f, 3.f}};
  CHECK_THROWS_AS(write_raw_map(scratch("bad"), bad), Error);

  const fs::path base = scratch("short");
  write_raw_map(base, RawMap{"x", {4}, {1.f, 2.f, 3.f, 4.f}});
  {
    std::ofstream trunc(base.string() + ".bin", std::ios::binary | std::ios::trunc);
    const float one = 1.0f;
    trunc.write(reinterpret_cast<const char*>(&one), 4);
  }
  try {
    read_raw_map(base);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
  }
  CHECK_THROWS_AS(read_raw_map(scratch("missing")), Error);
}
