#include "trajkit/map_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "trajkit/errors.hpp"

namespace trajkit {
namespace {

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
  std::filesystem::path p = base;
  p += suffix;
  return p;
}

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int s : shape) {
    if (s < 1) fail(ErrorKind::kParse, "map shape entries must be positive");
    n *= static_cast<std::size_t>(s);
  }
  return n;
}

template <typename Src>
std::vector<float> to_float(const Src& values) {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i]);
  return out;
}

std::vector<double> to_double(const std::vector<float>& values) {
  return {values.begin(), values.end()};
}

}  // namespace

void write_raw_map(const std::filesystem::path& base, const RawMap& map) {
  if (element_count(map.shape) != map.data.size()) {
    fail(ErrorKind::kInvalidArgument, "write_raw_map: shape does not match data size");
  }
  std::ofstream bin(with_suffix(base, ".bin"), std::ios::binary | std::ios::trunc);
  if (!bin) fail(ErrorKind::kInvalidArgument, "cannot open " + with_suffix(base, ".bin").string());
  std::vector<unsigned char> bytes(map.data.size() * 4);
  for (std::size_t i = 0; i < map.data.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(map.data[i]);
    bytes[4 * i + 0] = static_cast<unsigned char>(bits & 0xFFu);
    bytes[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xFFu);
    bytes[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xFFu);
    bytes[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xFFu);
  }
  bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));

  nlohmann::ordered_json side;
  side["format"] = "trajkit-map";
  side["version"] = 1;
  side["kind"] = map.kind;
  side["dtype"] = "float32";
  side["endianness"] = "little";
  side["order"] = "channel-first-row-major";
  side["shape"] = map.shape;
  std::ofstream js(with_suffix(base, ".json"), std::ios::trunc);
  js << side.dump(2) << '\n';
}

RawMap read_raw_map(const std::filesystem::path& base) {
  std::ifstream js(with_suffix(base, ".json"));
  if (!js) fail(ErrorKind::kParse, "cannot open " + with_suffix(base, ".json").string());
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("map sidecar: ") + e.what());
  }
  if (side.value("format", "") != "trajkit-map" || side.value("dtype", "") != "float32" ||
      side.value("endianness", "") != "little") {
    fail(ErrorKind::kParse, "map sidecar: unsupported format");
  }
  RawMap map;
  map.kind = side.value("kind", "");
  map.shape = side.at("shape").get<std::vector<int>>();
  const std::size_t n = element_count(map.shape);

  std::ifstream bin(with_suffix(base, ".bin"), std::ios::binary);
  if (!bin) fail(ErrorKind::kParse, "cannot open " + with_suffix(base, ".bin").string());
  std::vector<unsigned char> bytes(n * 4);
  bin.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(bin.gcount()) != bytes.size() || bin.peek() != EOF) {
    fail(ErrorKind::kParse, "map binary size does not match sidecar shape");
  }
  map.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    map.data[i] = std::bit_cast<float>(bits);
  }
  return map;
}

RawMap to_raw(const CenterMap3D& map) {
  return {"center3d", {1, map.D, map.H, map.W}, to_float(map.values)};
}

RawMap to_raw(const VectorMap3D& map, const std::string& kind) {
  return {kind, {map.V, map.D, map.H, map.W}, to_float(map.values)};
}

RawMap to_raw(const VectorMap2D& map, const std::string& kind) {
  return {kind, {map.V, map.H, map.W}, to_float(map.values)};
}

CenterMap3D center_map_from_raw(const RawMap& raw) {
  if (raw.shape.size() != 4 || raw.shape[0] != 1) fail(ErrorKind::kParse, "center map shape must be [1,D,H,W]");
  CenterMap3D m(raw.shape[1], raw.shape[2], raw.shape[3]);
  m.values = to_double(raw.data);
  return m;
}

VectorMap3D vector_map3d_from_raw(const RawMap& raw) {
  if (raw.shape.size() != 4) fail(ErrorKind::kParse, "vector map shape must be [V,D,H,W]");
  VectorMap3D m(raw.shape[0], raw.shape[1], raw.shape[2], raw.shape[3]);
  m.values = to_double(raw.data);
  return m;
}

VectorMap2D vector_map2d_from_raw(const RawMap& raw) {
  if (raw.shape.size() != 3) fail(ErrorKind::kParse, "2D vector map shape must be [V,H,W]");
  VectorMap2D m(raw.shape[0], raw.shape[1], raw.shape[2]);
  m.values = to_double(raw.data);
  return m;
}

}  // namespace trajkit
