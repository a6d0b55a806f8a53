// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "mvaug/hash.hpp"
#include "mvaug/image_io.hpp"
#include "mvaug/imaging.hpp"

namespace mvaug {

namespace fs = std::filesystem;
using nlohmann::json;

IdentityAsset resize_asset(const IdentityAsset& asset, double scale) {
  if (!(scale > 0.0)) throw ParameterError("resize scale must be positive");
  IdentityAsset out = asset;
  const int h = std::max(1, static_cast<int>(std::lround(scale * asset.image.height)));
  const int w = std::max(1, static_cast<int>(std::lround(scale * asset.image.width)));
  out.image = resize_bilinear(asset.image, h, w);
  return out;
}

ResizedAsset random_resize(const IdentityAsset& asset, std::uint64_t seed, double lo, double hi) {
  if (!(lo > 0.0) || hi < lo) throw ParameterError("resize range must satisfy 0 < lo <= hi");
  std::mt19937_64 rng(seed);
  const double scale = std::uniform_real_distribution<double>(lo, hi)(rng);
  return {resize_asset(asset, scale), scale};
}

namespace {

struct ShelfResult {
  bool ok = false;
  std::vector<std::pair<int, int>> xy;  // per input index
};

ShelfResult shelf_pack(const std::vector<std::pair<int, int>>& sizes, int frame_h, int frame_w, int gutter) {
  // Tallest first; ties keep input order.
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sizes[a].first > sizes[b].first; });
  ShelfResult r;
  r.xy.resize(sizes.size());
  int x = gutter, y = gutter, shelf_h = 0;
  for (std::size_t i : order) {
    const auto [h, w] = sizes[i];
    if (x + w + gutter > frame_w && x > gutter) {
      y += shelf_h + gutter;
      x = gutter;
      shelf_h = 0;
    }
    if (x + w + gutter > frame_w || y + h + gutter > frame_h) return r;
    r.xy[i] = {x, y};
    x += w + gutter;
    shelf_h = std::max(shelf_h, h);
  }
  r.ok = true;
  return r;
}

}  // namespace

PackedIdentityFrame pack_identities(const std::vector<IdentityAsset>& assets, int frame_h, int frame_w,
                                    const PackingConfig& config) {
  if (assets.empty()) throw PreconditionError("no identities to pack");
  if (static_cast<int>(assets.size()) > config.max_identities) {
    throw PreconditionError("at most " + std::to_string(config.max_identities) + " identities can be packed, got " +
                            std::to_string(assets.size()));
  }
  if (frame_h < 1 || frame_w < 1) throw ParameterError("packing canvas must be non-empty");
  for (const auto& a : assets) {
    if (!(a.source.view == assets.front().source.view)) {
      throw PreconditionError("identities in one frame must come from a single source view");
    }
  }

  double scale = 1.0;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    std::vector<std::pair<int, int>> sizes;
    for (const auto& a : assets) {
      sizes.emplace_back(std::max(1, static_cast<int>(std::lround(a.image.height * scale))),
                         std::max(1, static_cast<int>(std::lround(a.image.width * scale))));
    }
    const auto r = shelf_pack(sizes, frame_h, frame_w, config.gutter);
    if (r.ok) {
      PackedIdentityFrame out;
      out.image = Image(frame_h, frame_w);
      out.source_view = assets.front().source.view;
      for (std::size_t i = 0; i < assets.size(); ++i) {
        const auto [h, w] = sizes[i];
        const auto [px, py] = r.xy[i];
        const Image img = (h == assets[i].image.height && w == assets[i].image.width)
                              ? assets[i].image
                              : resize_bilinear(assets[i].image, h, w);
        for (int y = 0; y < h; ++y) std::copy_n(img.at(y, 0), 3 * w, out.image.at(py + y, px));
        out.placements.push_back({assets[i].id, px, py, w, h, scale});
      }
      return out;
    }
    scale *= config.shrink;
  }
  throw PackingError("identities do not fit a " + std::to_string(frame_h) + "x" + std::to_string(frame_w) +
                     " frame after " + std::to_string(config.max_retries) + " rescales");
}

Image stitch_views(const std::vector<Image>& per_view, int expected_views) {
  if (per_view.empty()) throw PreconditionError("no views to stitch");
  if (static_cast<int>(per_view.size()) > expected_views) {
    throw PreconditionError("got " + std::to_string(per_view.size()) + " views, expected at most " +
                            std::to_string(expected_views));
  }
  const int h = per_view.front().height, w = per_view.front().width;
  Image out(h * expected_views, w);
  for (std::size_t v = 0; v < per_view.size(); ++v) {
    const Image& img = per_view[v];
    if (img.height != h || img.width != w) throw PreconditionError("views to stitch differ in size");
    std::copy(img.pixels.begin(), img.pixels.end(), out.pixels.begin() + static_cast<std::ptrdiff_t>(v) * h * w * 3);
  }
  return out;
}

std::vector<Image> unstitch_views(const Image& stitched, int expected_views) {
  if (expected_views < 1 || stitched.height % expected_views != 0) {
    throw PreconditionError("stitched height " + std::to_string(stitched.height) + " is not a multiple of " +
                            std::to_string(expected_views));
  }
  const int h = stitched.height / expected_views, w = stitched.width;
  std::vector<Image> out;
  for (int v = 0; v < expected_views; ++v) {
    Image img(h, w);
    const auto first = stitched.pixels.begin() + static_cast<std::ptrdiff_t>(v) * h * w * 3;
    std::copy(first, first + static_cast<std::ptrdiff_t>(h) * w * 3, img.pixels.begin());
    out.push_back(std::move(img));
  }
  return out;
}

BudgetCheck check_resolution_budget(int n_views, int per_view_h, int per_view_w, int budget_h, int budget_w) {
  BudgetCheck c;
  c.margin_h = budget_h - n_views * per_view_h;
  c.margin_w = budget_w - per_view_w;
  c.pass = c.margin_h >= 0 && c.margin_w >= 0;
  return c;
}

int padded_length(int length) {
  if (length < 1) throw PreconditionError("chunk length must be positive");
  return 4 * ((length - 1 + 3) / 4) + 1;
}

ChunkPlan plan_chunks(int frame_count, int max_chunk) {
  if (frame_count < 1) throw PreconditionError("cannot chunk an empty clip");
  if (max_chunk < 1 || (max_chunk - 1) % 4 != 0) throw ParameterError("max chunk length must be 4N+1");
  ChunkPlan plan;
  plan.max_chunk = max_chunk;
  for (int s = 0; s < frame_count; s += max_chunk) {
    const int e = std::min(frame_count, s + max_chunk);
    plan.chunks.push_back({s, e, padded_length(e - s)});
  }
  return plan;
}

Video stitch_chunk(const std::vector<const Video*>& per_view, const Chunk& chunk, int expected_views) {
  if (per_view.empty()) throw PreconditionError("no views to stitch");
  if (chunk.length() < 1 || chunk.padded_len < chunk.length()) throw PreconditionError("malformed chunk");
  for (const Video* v : per_view) {
    if (static_cast<int>(v->size()) < chunk.end) {
      throw PreconditionError("chunk ends at " + std::to_string(chunk.end) + " but view has " +
                              std::to_string(v->size()) + " frames");
    }
  }
  Video out;
  out.reserve(chunk.padded_len);
  for (int t = chunk.start; t < chunk.end; ++t) {
    std::vector<Image> frames;
    for (const Video* v : per_view) frames.push_back((*v)[t]);
    out.push_back(stitch_views(frames, expected_views));
  }
  while (static_cast<int>(out.size()) < chunk.padded_len) out.push_back(out.back());
  return out;
}

std::uint64_t chunk_seed(std::uint64_t base, const std::string& episode_id, int index) {
  return derive_seed(base, "chunk/" + episode_id + "/" + std::to_string(index));
}

ConditioningBundle assemble_bundle(const std::vector<ConditioningVideo>& views,
                                   const std::vector<IdentityAsset>& pool, std::string prompt,
                                   const Chunk& chunk, std::uint64_t seed, std::optional<int> n_identities,
                                   const AssemblyConfig& config) {
  if (views.empty()) throw PreconditionError("bundle needs at least one view");
  if (static_cast<int>(views.size()) > config.expected_views) {
    throw PreconditionError("episode has more views than the configured layout");
  }
  const int vh = views.front().frames.empty() ? 0 : views.front().frames.front().height;
  const int vw = views.front().frames.empty() ? 0 : views.front().frames.front().width;
  const auto budget = check_resolution_budget(config.expected_views, vh, vw, config.budget_h, config.budget_w);
  if (!budget.pass) {
    throw BudgetError("stitched canvas " + std::to_string(config.expected_views * vh) + "x" + std::to_string(vw) +
                      " exceeds budget " + std::to_string(config.budget_h) + "x" + std::to_string(config.budget_w));
  }

  ConditioningBundle b;
  b.prompt = std::move(prompt);
  b.n_views = config.expected_views;
  b.view_height = vh;
  b.view_width = vw;
  b.chunk = chunk;
  b.seed = seed;
  std::vector<const Video*> frames;
  for (const auto& v : views) {
    b.view_roles.push_back(v.view);
    frames.push_back(&v.frames);
  }
  b.stitched_frames = stitch_chunk(frames, chunk, config.expected_views);
  b.mask_latent = codec::encode(b.stitched_frames, config.spatial_factor);

  std::mt19937_64 rng(derive_seed(seed, "identity-count"));
  const int n = n_identities ? *n_identities
                             : std::uniform_int_distribution<int>(config.min_identities, config.max_identities)(rng);
  if (n < 0) throw ParameterError("identity count must be non-negative");
  if (n == 0) return b;
  if (pool.empty()) throw PreconditionError("identity pool is empty");

  // One source view per frame: pick the view role first, then sample within it.
  std::map<ViewRole, std::vector<IdentityAsset>> by_view;
  for (const auto& a : pool) by_view[a.source.view].push_back(a);
  auto it = by_view.begin();
  std::advance(it, std::uniform_int_distribution<std::size_t>(0, by_view.size() - 1)(rng));
  auto chosen = pool_sample(it->second, n, derive_seed(seed, "identity-sample"));
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    chosen[i] = random_resize(chosen[i], derive_seed(seed, "identity-resize/" + std::to_string(i)), config.resize_lo,
                              config.resize_hi)
                    .asset;
  }
  b.packed_identity = pack_identities(chosen, config.expected_views * vh, vw, config.packing);
  b.identity_latent = codec::encode(Video{b.packed_identity->image}, config.spatial_factor);
  return b;
}

namespace {

std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d.png", i);
  return buf;
}

}  // namespace

fs::path save_bundle(const ConditioningBundle& b, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "stitched", ec);
  if (ec) throw SaveError("cannot create bundle directory '" + dir.string() + "'");
  for (std::size_t i = 0; i < b.stitched_frames.size(); ++i) {
    io::write_png(dir / "stitched" / frame_name(static_cast<int>(i)), b.stitched_frames[i]);
  }
  json roles = json::array();
  for (const auto& r : b.view_roles) roles.push_back(r.str());
  json meta = {{"prompt", b.prompt},
               {"seed", b.seed},
               {"n_views", b.n_views},
               {"view_roles", roles},
               {"view_height", b.view_height},
               {"view_width", b.view_width},
               {"spatial_factor", b.mask_latent.spatial_factor},
               {"chunk", {{"start", b.chunk.start}, {"end", b.chunk.end}, {"padded_len", b.chunk.padded_len}}},
               {"identity", nullptr}};
  if (b.packed_identity) {
    io::write_png(dir / "identity.png", b.packed_identity->image);
    json placements = json::array();
    for (const auto& p : b.packed_identity->placements) {
      placements.push_back({{"asset_id", p.asset_id},
                            {"x", p.x},
                            {"y", p.y},
                            {"width", p.width},
                            {"height", p.height},
                            {"scale", p.scale}});
    }
    meta["identity"] = {{"file", "identity.png"},
                        {"source_view", b.packed_identity->source_view.str()},
                        {"placements", placements}};
  }
  const fs::path path = dir / "meta.json";
  std::ofstream out(path);
  if (!out) throw SaveError("cannot write '" + path.string() + "'");
  out << meta.dump(2) << '\n';
  return path;
}

ConditioningBundle load_bundle(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw LoadError("missing bundle metadata in '" + dir.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed bundle metadata: ") + e.what());
  }
  ConditioningBundle b;
  try {
    b.prompt = j.at("prompt").get<std::string>();
    b.seed = j.at("seed").get<std::uint64_t>();
    b.n_views = j.at("n_views").get<int>();
    for (const auto& r : j.at("view_roles")) b.view_roles.push_back(ViewRole::parse(r.get<std::string>()));
    b.view_height = j.at("view_height").get<int>();
    b.view_width = j.at("view_width").get<int>();
    const auto& c = j.at("chunk");
    b.chunk = {c.at("start").get<int>(), c.at("end").get<int>(), c.at("padded_len").get<int>()};
    const int s = j.at("spatial_factor").get<int>();
    for (int i = 0; i < b.chunk.padded_len; ++i) b.stitched_frames.push_back(io::read_png(dir / "stitched" / frame_name(i)));
    b.mask_latent = codec::encode(b.stitched_frames, s);
    if (!j.at("identity").is_null()) {
      const auto& id = j.at("identity");
      PackedIdentityFrame p;
      p.image = io::read_png(dir / id.at("file").get<std::string>());
      p.source_view = ViewRole::parse(id.at("source_view").get<std::string>());
      for (const auto& q : id.at("placements")) {
        p.placements.push_back({q.at("asset_id").get<std::string>(), q.at("x").get<int>(), q.at("y").get<int>(),
                                q.at("width").get<int>(), q.at("height").get<int>(), q.at("scale").get<double>()});
      }
      b.identity_latent = codec::encode(Video{p.image}, s);
      b.packed_identity = std::move(p);
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("bundle metadata missing a field: ") + e.what());
  }
  return b;
}

}  // namespace mvaug
