#pragma once

// Binary map interchange.
//
// Each map is a pair of files sharing a base path:
//   <base>.bin   raw IEEE-754 float32 values, little-endian, no header,
//                channel-first row-major order (last axis fastest)
//   <base>.json  sidecar: {"format": "trajkit-map", "version": 1,
//                "kind": <string>, "dtype": "float32", "endianness": "little",
//                "order": "channel-first-row-major", "shape": [dims...]}
// The product of "shape" equals the number of floats in the .bin file.
// Values are stored as float32; in-memory maps hold doubles, so writing is
// lossy below float precision.

#include <filesystem>
#include <string>
#include <vector>

#include "trajkit/maps.hpp"

namespace trajkit {

struct RawMap {
  std::string kind;
  std::vector<int> shape;
  std::vector<float> data;
};

void write_raw_map(const std::filesystem::path& base, const RawMap& map);
RawMap read_raw_map(const std::filesystem::path& base);

RawMap to_raw(const CenterMap3D& map);                          // shape [1, D, H, W]
RawMap to_raw(const VectorMap3D& map, const std::string& kind);  // shape [V, D, H, W]
RawMap to_raw(const VectorMap2D& map, const std::string& kind);  // shape [V, H, W]

CenterMap3D center_map_from_raw(const RawMap& raw);
VectorMap3D vector_map3d_from_raw(const RawMap& raw);
VectorMap2D vector_map2d_from_raw(const RawMap& raw);

}  // namespace trajkit
