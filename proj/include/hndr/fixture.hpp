#pragma once

#include <cstdint>
#include <filesystem>

namespace hndr {

struct FixtureOptions {
  std::uint64_t seed = 7;
  /// Replace the drug-protein interactions with the same number of uniformly
  /// random cells (a null model with no signal).
  bool shuffle_labels = false;
  int repeats = 2;
};

/// Writes a synthetic 50-drug / 40-protein / 20-disease universe with planted
/// low-rank structure: ID maps, 17 input networks, an external drug list, a
/// protein subset and config.json. Returns the path of config.json.
std::filesystem::path write_fixture(const std::filesystem::path& dir, const FixtureOptions& opts = {});

}  // namespace hndr
