#pragma once

// Binary weight-vector files. Layout (all integers and floats little-endian):
//
//   dense : "GVFW" | u32 version (=1) | u64 dimension | f64 x dimension
//   sparse: "GVFS" | u32 version (=1) | u64 dimension | u64 count |
//           (u64 index, f64 value) x count, indices strictly increasing
//
// The sparse form stores only nonzero entries; -0.0 is written as a nonzero
// so round trips are bit-exact.

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "gvf/sparse_linalg.hpp"

namespace gvf {

enum class WeightEncoding { kDense, kSparse };

inline constexpr std::uint32_t kWeightFormatVersion = 1;

void write_weights(std::ostream& out, const Weights& w, WeightEncoding encoding);

/// Reads either encoding, dispatching on the magic string.
Weights read_weights(std::istream& in);

void save_weights(const std::filesystem::path& path, const Weights& w,
                  WeightEncoding encoding = WeightEncoding::kSparse);
Weights load_weights(const std::filesystem::path& path);

namespace le {
void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f64(std::ostream& out, double v);
std::uint32_t get_u32(std::istream& in);
std::uint64_t get_u64(std::istream& in);
double get_f64(std::istream& in);
}  // namespace le

}  // namespace gvf
