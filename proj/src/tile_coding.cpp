#include "gvf/tile_coding.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace gvf {

double normalize(double value, VariableRange range) {
  const double clamped = std::clamp(value, range.min, range.max);
  return (clamped - range.min) / (range.max - range.min);
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

TileCoder::TileCoder(TileCoderConfig config) : config_(std::move(config)) {
  require(config_.num_tilings > 0, "TileCoder: num_tilings must be positive");
  require(!config_.variable_ranges.empty(), "TileCoder: at least one variable is required");
  for (const auto& r : config_.variable_ranges)
    require(r.min < r.max, "TileCoder: each variable range needs min < max");
  require(config_.memory_size > config_.num_tilings * num_variables(),
          "TileCoder: memory_size must exceed num_tilings * num_variables");
  if (config_.tile_widths.empty())
    config_.tile_widths.assign(num_variables(), 1.0 / 16.0);
  require(config_.tile_widths.size() == num_variables(), "TileCoder: one tile width per variable");
  for (double w : config_.tile_widths) require(w > 0 && std::isfinite(w), "TileCoder: tile widths must be positive");
}

SparseBinaryVector TileCoder::encode_state(std::span<const double> vars) const {
  return encode(vars, 0);
}

SparseBinaryVector TileCoder::encode_state_action(std::span<const double> vars, ActionId action) const {
  require(action < config_.num_actions, "TileCoder: unknown action id");
  return encode(vars, static_cast<std::uint64_t>(action) + 1);
}

SparseBinaryVector TileCoder::encode(std::span<const double> vars, std::uint64_t action_code) const {
  require(vars.size() == num_variables(), "TileCoder: variable count mismatch");
  const std::uint64_t slots = config_.memory_size - 1;
  const std::uint64_t seed_hash = mix64(config_.hash_seed);
  const std::size_t tilings = config_.num_tilings;

  std::vector<std::uint64_t> hashes;
  std::vector<std::size_t> indices;
  hashes.reserve(tilings * vars.size());
  indices.reserve(tilings * vars.size() + 1);
  for (std::size_t v = 0; v < vars.size(); ++v) {
    const double scaled = normalize(vars[v], config_.variable_ranges[v]) / config_.tile_widths[v];
    for (std::size_t k = 0; k < tilings; ++k) {
      const auto coord = static_cast<std::int64_t>(
          std::floor(scaled + static_cast<double>(k) / static_cast<double>(tilings)));
      std::uint64_t h = mix64(seed_hash ^ v);
      h = mix64(h ^ k);
      h = mix64(h ^ static_cast<std::uint64_t>(coord));
      h = mix64(h ^ action_code);
      hashes.push_back(h);
      indices.push_back(static_cast<std::size_t>(h % slots));
    }
  }

  std::vector<std::size_t> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()) {
    sorted.push_back(bias_index());  // above every tile slot, so still sorted
    return SparseBinaryVector(config_.memory_size, std::move(sorted));
  }
  // Rare: re-probe later tiles in generation order until every slot is distinct.
  std::unordered_set<std::size_t> taken;
  taken.reserve(indices.size() * 2);
  for (std::size_t t = 0; t < indices.size(); ++t) {
    std::uint64_t h = hashes[t];
    std::size_t idx = indices[t];
    for (std::uint64_t probe = 1; taken.count(idx) != 0; ++probe) {
      h = mix64(h + probe);
      idx = static_cast<std::size_t>(h % slots);
    }
    taken.insert(idx);
    indices[t] = idx;
  }
  indices.push_back(bias_index());
  return SparseBinaryVector(config_.memory_size, std::move(indices));
}

}  // namespace gvf
