// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Shared builders for tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mvaug/conditioning.hpp"
#include "mvaug/denoiser.hpp"
#include "mvaug/hash.hpp"
#include "mvaug/identity_pool.hpp"
#include "mvaug/latent_codec.hpp"
#include "mvaug/segmentation.hpp"
#include "mvaug/stub_clients.hpp"
#include "mvaug/synth.hpp"

namespace mvaug::testing {

inline Image random_image(int h, int w, std::mt19937_64& rng) {
  Image img(h, w);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(d(rng));
  return img;
}

/// Square crop with a filled disc, keyed by `seed`; background pixels are 0.
inline IdentityAsset disc_asset(int side, std::uint64_t seed, const ViewRole& view = ViewRole::wrist()) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> c(40, 250);
  const int r = c(rng), g = c(rng), b = c(rng);
  IdentityAsset a;
  a.image = Image(side, side);
  const double rad = side / 2.0;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double dy = y + 0.5 - rad, dx = x + 0.5 - rad;
      if (dx * dx + dy * dy > rad * rad) continue;
      std::uint8_t* p = a.image.at(y, x);
      p[0] = static_cast<std::uint8_t>(r);
      p[1] = static_cast<std::uint8_t>((g + 7 * x) % 256);
      p[2] = static_cast<std::uint8_t>((b + 5 * y) % 256);
    }
  a.id = sha256_hex(std::span<const std::uint8_t>(a.image.pixels)).substr(0, 16);
  a.class_label = "cup";
  a.scores.resolution = side;
  a.source = {"pool", view, 0};
  return a;
}

inline std::vector<IdentityAsset> disc_pool(int n, std::uint64_t seed, int side = 8) {
  std::vector<IdentityAsset> out;
  for (int i = 0; i < n; ++i) out.push_back(disc_asset(side, derive_seed(seed, "disc/" + std::to_string(i))));
  return out;
}

/// One synthetic episode with its stub-driven conditioning videos.
struct SyntheticClip {
  Episode episode;
  std::vector<ConditioningVideo> conditioning;
};

inline SyntheticClip synthetic_clip(int frames = 33, std::uint64_t seed = 5) {
  synth::SceneSpec spec{"clip", {ViewRole::wrist(), ViewRole::third_person(0)}, frames, 32, 32, "carrot", seed};
  SyntheticClip c;
  c.episode = synth::make_episode(spec);
  const ClientSet clients = ClientSet::from(std::make_shared<StubBackend>(synth::stub_fixtures({spec})));
  SegmentationConfig sc;
  sc.seed = derive_seed(seed, "segment");
  const EpisodeSegmentation seg = segment_episode(c.episode, clients, sc);
  for (const auto& v : c.episode.views) {
    const ViewSegmentation& vs = seg.views.at(v.role);
    c.conditioning.push_back(build_conditioning_video(v, merge_entities(vs.robot, vs.object)));
  }
  return c;
}

/// Bundle for the whole clip (one chunk) plus its pooled training target.
struct TrainingPair {
  ConditioningBundle bundle;
  codec::LatentVideo target;
};

inline TrainingPair training_pair(const SyntheticClip& clip, std::optional<int> n_identities, std::uint64_t seed) {
  const int T = clip.episode.frame_count();
  const Chunk chunk{0, T, padded_length(T)};
  AssemblyConfig ac;
  TrainingPair p;
  p.bundle = assemble_bundle(clip.conditioning, disc_pool(12, seed), "a table with a cup. the arm picks up the carrot.",
                             chunk, seed, n_identities, ac);
  std::vector<const Video*> views;
  for (const auto& v : clip.episode.views) views.push_back(&v.frames);
  p.target = codec::encode(stitch_chunk(views, chunk, ac.expected_views), ac.spatial_factor);
  return p;
}

inline diffusion::DenoiserConfig small_model(std::uint64_t seed = 1, int blocks = 2) {
  diffusion::DenoiserConfig c;
  c.dim = 24;
  c.blocks = blocks;
  c.heads = 2;
  c.lora_rank = 4;
  c.lora_alpha = 4.0;
  c.seed = seed;
  return c;
}

inline codec::LatentVideo gaussian_latent(const codec::LatentVideo& like, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  codec::LatentVideo out = like;
  for (auto& v : out.data) v = n(rng);
  return out;
}

}  // namespace mvaug::testing
