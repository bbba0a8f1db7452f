#pragma once

// Hashed tile coding over independently tiled variables.
//
// Each variable is normalized to [0, 1] (clamping out-of-range values) and
// covered by `num_tilings` uniform grids of width `tile_width`, tiling k
// displaced by k / num_tilings of a width. A tile (variable, tiling, coord)
// is hashed together with the seed and an action code into
// [0, memory_size - 1); index memory_size - 1 is the always-active bias.
//
// Hash: h = mix64(seed); then h = mix64(h ^ x) for x in
// (variable, tiling, coord as two's-complement u64, action code), where
// mix64 is the splitmix64 finalizer and the action code is 0 for state-only
// encodings and action + 1 otherwise. A tile landing on an index already
// taken within the same encoding is re-probed with h = mix64(h + probe), so
// every encoding has exactly num_tilings * num_variables + 1 active indices.

#include <cstdint>
#include <span>
#include <vector>

#include "gvf/sparse_linalg.hpp"

namespace gvf {

using ActionId = std::uint32_t;

struct VariableRange {
  double min = 0.0;
  double max = 1.0;
};

struct TileCoderConfig {
  std::size_t memory_size = 1'000'001;
  std::size_t num_tilings = 16;
  std::vector<VariableRange> variable_ranges;
  /// Tile width per variable in normalized units; empty means 1/16 for all.
  std::vector<double> tile_widths;
  /// Number of valid action ids for state-action encodings.
  std::size_t num_actions = 12;
  std::uint64_t hash_seed = 0;
};

double normalize(double value, VariableRange range);

std::uint64_t mix64(std::uint64_t x) noexcept;

class TileCoder {
 public:
  explicit TileCoder(TileCoderConfig config);

  const TileCoderConfig& config() const noexcept { return config_; }
  std::size_t num_variables() const noexcept { return config_.variable_ranges.size(); }
  std::size_t memory_size() const noexcept { return config_.memory_size; }
  std::size_t bias_index() const noexcept { return config_.memory_size - 1; }
  /// Nominal active count: num_tilings * num_variables + 1.
  std::size_t active_count() const noexcept { return config_.num_tilings * num_variables() + 1; }

  SparseBinaryVector encode_state(std::span<const double> vars) const;
  SparseBinaryVector encode_state_action(std::span<const double> vars, ActionId action) const;

 private:
  SparseBinaryVector encode(std::span<const double> vars, std::uint64_t action_code) const;

  TileCoderConfig config_;
};

inline SparseBinaryVector encode_state(const TileCoder& coder, std::span<const double> vars) {
  return coder.encode_state(vars);
}

inline SparseBinaryVector encode_state_action(const TileCoder& coder, std::span<const double> vars,
                                              ActionId action) {
  return coder.encode_state_action(vars, action);
}

}  // namespace gvf
