// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "mvaug/clients.hpp"

namespace mvaug {

struct AssetSource {
  std::string episode_id;
  ViewRole view;
  int frame = 0;
  bool operator==(const AssetSource&) const = default;
};

struct AssetScores {
  double iqa = 0.0;
  double sharpness = 0.0;
  double clip_sim = 0.0;
  int resolution = 0;  // side length S of the square crop
  bool operator==(const AssetScores&) const = default;
};

/// Square object crop with everything outside the object zeroed.
struct IdentityAsset {
  std::string id;  // content hash of the crop
  Image image;
  std::string class_label;
  double bg_fraction = 0.0;
  AssetScores scores;
  AssetSource source;
  bool clipped = false;  // region touched the frame border
  bool operator==(const IdentityAsset&) const = default;
};

struct CascadeStage {
  std::string name;
  int input = 0;
  int removed = 0;
  int output = 0;
};

struct CascadeReport {
  std::vector<CascadeStage> stages;
  std::string scope = "global";  // percentiles over the whole candidate set
  int dropped_unscored = 0;
};

struct IdentityPool {
  std::vector<IdentityAsset> assets;
  CascadeReport report;
};

inline constexpr double kMaxBackgroundFraction = 0.60;

/// Reads one class label per line (blank lines and '#' comments ignored).
std::set<std::string> load_allowlist(const std::filesystem::path& path);
/// The allowlist shipped in data/identity_allowlist.txt.
std::filesystem::path default_allowlist_path();

/// Crops every allowlisted panoptic region into a centred square (zero
/// padded where it leaves the frame) and rejects crops that are mostly
/// background.
std::vector<IdentityAsset> harvest_assets(const Image& frame, const PanopticResult& panoptic,
                                          const std::set<std::string>& allowlist, const AssetSource& source,
                                          double max_bg_fraction = kMaxBackgroundFraction);

/// Variance of the 3x3 Laplacian on the luma channel.
double sharpness(const Image& image);

struct ScoreOutcome {
  std::vector<IdentityAsset> scored;
  std::vector<std::string> dropped;  // ids whose scorer failed
};

/// Fills in iqa / sharpness / clip_sim / resolution. The alignment text is
/// the asset's class label.
ScoreOutcome score_assets(std::vector<IdentityAsset> assets, QualityScorer& iqa, AlignmentScorer& clip);

/// Percent removed at each cascade stage.
struct CascadePercents {
  int iqa_low = 50;
  int resolution_each_side = 10;
  int sharpness_low = 30;
  int clip_low = 60;
};

/// IQA -> resolution (both tails) -> sharpness -> text alignment. Each stage
/// removes exactly floor(n * p / 100) by rank; ties keep the earlier asset.
IdentityPool filter_cascade(std::vector<IdentityAsset> assets, const CascadePercents& p = {});

/// Survivor count the cascade produces for n assets with distinct scores.
int cascade_survivors(int n, const CascadePercents& p = {});

/// Uniform sample without replacement; k is clamped to the pool size.
std::vector<IdentityAsset> pool_sample(const std::vector<IdentityAsset>& pool, int k, std::uint64_t seed);
std::vector<std::size_t> pool_sample_indices(std::size_t pool_size, int k, std::uint64_t seed);

/// Assets as <id>.png plus pool.json.
std::filesystem::path save_pool(const IdentityPool& pool, const std::filesystem::path& dir);
IdentityPool load_pool(const std::filesystem::path& dir);

}  // namespace mvaug
