// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "mvaug/identity_pool.hpp"
#include "mvaug/latent_codec.hpp"

namespace mvaug {

class PackingError : public Error { using Error::Error; };
class BudgetError : public Error { using Error::Error; };

// --- identity packing ------------------------------------------------------

struct ResizedAsset {
  IdentityAsset asset;
  double scale = 1.0;
};

/// Bilinear resize of a square asset to round(scale * S).
IdentityAsset resize_asset(const IdentityAsset& asset, double scale);

/// Draws scale ~ U[lo, hi] from `seed` and resizes.
ResizedAsset random_resize(const IdentityAsset& asset, std::uint64_t seed, double lo = 0.8, double hi = 1.2);

struct Placement {
  std::string asset_id;
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  double scale = 1.0;  // shrink applied by the packer, on top of any prior resize
  bool operator==(const Placement&) const = default;
};

struct PackedIdentityFrame {
  Image image;
  std::vector<Placement> placements;
  ViewRole source_view;
};

struct PackingConfig {
  int max_identities = 4;
  int gutter = 2;
  double shrink = 0.9;
  int max_retries = 10;
};

/// Shelf packing on a black canvas: tallest first, rows filled left to right
/// with `gutter` pixels around every asset. If something does not fit, all
/// assets shrink by `shrink` and packing restarts, up to max_retries times.
PackedIdentityFrame pack_identities(const std::vector<IdentityAsset>& assets, int frame_h, int frame_w,
                                    const PackingConfig& config = {});

// --- multi-view stitching --------------------------------------------------

/// Stacks views top to bottom in the given (canonical) order; slots past the
/// provided views are black.
Image stitch_views(const std::vector<Image>& per_view, int expected_views);

/// Inverse of stitch_views: returns all `expected_views` slots.
std::vector<Image> unstitch_views(const Image& stitched, int expected_views);

struct BudgetCheck {
  bool pass = false;
  int margin_h = 0;  // budget_h - n_views * per_view_h
  int margin_w = 0;  // budget_w - per_view_w
};

BudgetCheck check_resolution_budget(int n_views, int per_view_h, int per_view_w, int budget_h, int budget_w);

// --- temporal chunking -----------------------------------------------------

struct Chunk {
  int start = 0;
  int end = 0;  // exclusive
  int padded_len = 1;
  int length() const { return end - start; }
  bool operator==(const Chunk&) const = default;
};

struct ChunkPlan {
  std::vector<Chunk> chunks;
  int max_chunk = 33;
};

/// Smallest 4N+1 that is >= length.
int padded_length(int length);

/// Greedy tiling of [0, T) into chunks of max_chunk frames plus a shorter tail.
ChunkPlan plan_chunks(int frame_count, int max_chunk = 33);

/// Stitches frames [chunk.start, chunk.end) of each view and repeats the
/// last stitched frame up to chunk.padded_len.
Video stitch_chunk(const std::vector<const Video*>& per_view, const Chunk& chunk, int expected_views);

// --- bundles ---------------------------------------------------------------

struct AssemblyConfig {
  int expected_views = 2;
  int spatial_factor = codec::kDefaultSpatialFactor;
  int budget_h = 720;
  int budget_w = 1280;
  int min_identities = 2;
  int max_identities = 4;
  double resize_lo = 0.8;
  double resize_hi = 1.2;
  PackingConfig packing;
};

/// Everything the denoiser is conditioned on for one chunk.
struct ConditioningBundle {
  Video stitched_frames;  // padded_len masked frames, (expected_views * H) x W
  codec::LatentVideo mask_latent;
  std::optional<PackedIdentityFrame> packed_identity;
  std::optional<codec::LatentVideo> identity_latent;  // exactly one latent frame
  std::string prompt;
  int n_views = 0;
  std::vector<ViewRole> view_roles;
  int view_height = 0;
  int view_width = 0;
  Chunk chunk;
  std::uint64_t seed = 0;
};

/// Seed for chunk `index` of an episode, so each chunk draws fresh identities.
std::uint64_t chunk_seed(std::uint64_t base, const std::string& episode_id, int index);

/// Builds one bundle. With n_identities unset the count is drawn uniformly
/// from [min_identities, max_identities]; zero omits the identity frame.
/// Identities are drawn from a single source view of the pool.
ConditioningBundle assemble_bundle(const std::vector<ConditioningVideo>& views,
                                   const std::vector<IdentityAsset>& pool, std::string prompt,
                                   const Chunk& chunk, std::uint64_t seed, std::optional<int> n_identities,
                                   const AssemblyConfig& config);

std::filesystem::path save_bundle(const ConditioningBundle& bundle, const std::filesystem::path& dir);
/// Reloads frames and metadata and re-encodes the latents.
ConditioningBundle load_bundle(const std::filesystem::path& dir);

}  // namespace mvaug
