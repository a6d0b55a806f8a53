// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/identity_pool.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mvaug/hash.hpp"
#include "mvaug/image_io.hpp"
#include "mvaug/imaging.hpp"
#include "mvaug/kernels.hpp"

#ifndef MVAUG_DATA_DIR
#define MVAUG_DATA_DIR "data"
#endif

namespace mvaug {

namespace fs = std::filesystem;
using nlohmann::json;

std::set<std::string> load_allowlist(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open allowlist '" + path.string() + "'");
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.insert(line.substr(b, e - b + 1));
  }
  return out;
}

fs::path default_allowlist_path() { return fs::path(MVAUG_DATA_DIR) / "identity_allowlist.txt"; }

std::vector<IdentityAsset> harvest_assets(const Image& frame, const PanopticResult& panoptic,
                                          const std::set<std::string>& allowlist, const AssetSource& source,
                                          double max_bg_fraction) {
  std::vector<IdentityAsset> out;
  for (const auto& region : panoptic.regions) {
    if (!allowlist.count(region.label)) continue;
    const Mask& m = region.mask;
    if (m.height != frame.height || m.width != frame.width) {
      throw PreconditionError("panoptic mask shape differs from frame");
    }
    int y0 = m.height, y1 = -1, x0 = m.width, x1 = -1;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (m.get(y, x)) {
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
        }
    if (y1 < 0) continue;

    const int bh = y1 - y0 + 1, bw = x1 - x0 + 1;
    const int side = std::max(bh, bw);
    int top = y0 - (side - bh) / 2;
    int left = x0 - (side - bw) / 2;
    if (side <= frame.height) top = std::clamp(top, 0, frame.height - side);
    if (side <= frame.width) left = std::clamp(left, 0, frame.width - side);

    IdentityAsset a;
    a.image = crop_padded(frame, top, left, side, side);
    long kept = 0;
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const int fy = top + y, fx = left + x;
        const bool inside = fy >= 0 && fy < frame.height && fx >= 0 && fx < frame.width && m.get(fy, fx);
        if (inside) {
          ++kept;
        } else {
          std::fill_n(a.image.at(y, x), 3, std::uint8_t{0});
        }
      }
    }
    a.bg_fraction = 1.0 - static_cast<double>(kept) / (static_cast<double>(side) * side);
    if (a.bg_fraction > max_bg_fraction) continue;
    a.class_label = region.label;
    a.scores.resolution = side;
    a.source = source;
    a.clipped = y0 == 0 || x0 == 0 || y1 == frame.height - 1 || x1 == frame.width - 1;
    a.id = sha256_hex(a.image.pixels).substr(0, 16);
    out.push_back(std::move(a));
  }
  return out;
}

double sharpness(const Image& image) {
  std::vector<double> gray(static_cast<std::size_t>(image.height) * image.width);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const std::uint8_t* p = &image.pixels[i * 3];
    gray[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return kernels::laplacian_variance(gray, image.height, image.width);
}

ScoreOutcome score_assets(std::vector<IdentityAsset> assets, QualityScorer& iqa, AlignmentScorer& clip) {
  ScoreOutcome out;
  for (auto& a : assets) {
    try {
      a.scores.iqa = iqa.iqa(a.id, a.image);
      a.scores.clip_sim = clip.clip_similarity(a.id, a.image, a.class_label);
    } catch (const ClientError&) {
      out.dropped.push_back(a.id);
      continue;
    }
    a.scores.sharpness = sharpness(a.image);
    a.scores.resolution = a.image.width;
    out.scored.push_back(std::move(a));
  }
  return out;
}

namespace {

// Indices of `v` ordered by key ascending; equal keys keep their input order.
template <typename Key>
std::vector<std::size_t> rank_ascending(const std::vector<IdentityAsset>& v, Key key) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(v[a]) < key(v[b]); });
  return idx;
}

std::vector<IdentityAsset> keep_except(std::vector<IdentityAsset>& v, const std::vector<char>& drop) {
  std::vector<IdentityAsset> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!drop[i]) out.push_back(std::move(v[i]));
  return out;
}

template <typename Key>
std::vector<IdentityAsset> drop_lowest(std::vector<IdentityAsset> v, int pct, Key key, CascadeReport& rep,
                                       const char* name) {
  const int n = static_cast<int>(v.size());
  const int m = n * pct / 100;
  const auto order = rank_ascending(v, key);
  std::vector<char> drop(v.size(), 0);
  for (int i = 0; i < m; ++i) drop[order[i]] = 1;
  auto out = keep_except(v, drop);
  rep.stages.push_back({name, n, m, static_cast<int>(out.size())});
  return out;
}

}  // namespace

IdentityPool filter_cascade(std::vector<IdentityAsset> assets, const CascadePercents& p) {
  IdentityPool pool;
  auto& rep = pool.report;
  assets = drop_lowest(std::move(assets), p.iqa_low, [](const IdentityAsset& a) { return a.scores.iqa; }, rep, "iqa");

  {
    const int n = static_cast<int>(assets.size());
    const int m = n * p.resolution_each_side / 100;
    const auto order = rank_ascending(assets, [](const IdentityAsset& a) { return a.scores.resolution; });
    std::vector<char> drop(assets.size(), 0);
    for (int i = 0; i < m; ++i) {
      drop[order[i]] = 1;
      drop[order[n - 1 - i]] = 1;
    }
    assets = keep_except(assets, drop);
    rep.stages.push_back({"resolution", n, 2 * m, static_cast<int>(assets.size())});
  }

  assets = drop_lowest(std::move(assets), p.sharpness_low,
                       [](const IdentityAsset& a) { return a.scores.sharpness; }, rep, "sharpness");
  assets = drop_lowest(std::move(assets), p.clip_low, [](const IdentityAsset& a) { return a.scores.clip_sim; },
                       rep, "clip");
  pool.assets = std::move(assets);
  return pool;
}

int cascade_survivors(int n, const CascadePercents& p) {
  n -= n * p.iqa_low / 100;
  n -= 2 * (n * p.resolution_each_side / 100);
  n -= n * p.sharpness_low / 100;
  n -= n * p.clip_low / 100;
  return n;
}

std::vector<std::size_t> pool_sample_indices(std::size_t pool_size, int k, std::uint64_t seed) {
  if (pool_size == 0) throw PreconditionError("cannot sample from an empty identity pool");
  if (k < 1) throw ParameterError("sample size must be positive");
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), pool_size);
  // Sparse Fisher-Yates: only displaced slots are stored.
  std::mt19937_64 rng(seed);
  std::unordered_map<std::size_t, std::size_t> swapped;
  auto slot = [&](std::size_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  std::vector<std::size_t> out;
  out.reserve(kk);
  for (std::size_t i = 0; i < kk; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, pool_size - 1)(rng);
    const std::size_t vi = slot(i), vj = slot(j);
    out.push_back(vj);
    swapped[j] = vi;
    swapped[i] = vj;
  }
  return out;
}

std::vector<IdentityAsset> pool_sample(const std::vector<IdentityAsset>& pool, int k, std::uint64_t seed) {
  std::vector<IdentityAsset> out;
  for (std::size_t i : pool_sample_indices(pool.size(), k, seed)) out.push_back(pool[i]);
  return out;
}

fs::path save_pool(const IdentityPool& pool, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "assets", ec);
  if (ec) throw SaveError("cannot create pool directory '" + dir.string() + "'");
  json assets = json::array();
  for (const auto& a : pool.assets) {
    const std::string file = "assets/" + a.id + ".png";
    io::write_png(dir / file, a.image);
    assets.push_back({{"id", a.id},
                      {"file", file},
                      {"class_label", a.class_label},
                      {"bg_fraction", a.bg_fraction},
                      {"clipped", a.clipped},
                      {"scores",
                       {{"iqa", a.scores.iqa},
                        {"sharpness", a.scores.sharpness},
                        {"clip_sim", a.scores.clip_sim},
                        {"resolution", a.scores.resolution}}},
                      {"source",
                       {{"episode_id", a.source.episode_id},
                        {"view", a.source.view.str()},
                        {"frame", a.source.frame}}}});
  }
  json stages = json::array();
  for (const auto& s : pool.report.stages) {
    stages.push_back({{"stage", s.name}, {"input", s.input}, {"removed", s.removed}, {"output", s.output}});
  }
  json manifest = {{"count", pool.assets.size()},
                   {"percentile_scope", pool.report.scope},
                   {"dropped_unscored", pool.report.dropped_unscored},
                   {"cascade", stages},
                   {"assets", assets}};
  const fs::path path = dir / "pool.json";
  std::ofstream out(path);
  if (!out) throw SaveError("cannot write '" + path.string() + "'");
  out << manifest.dump(2) << '\n';
  return path;
}

IdentityPool load_pool(const fs::path& dir) {
  std::ifstream in(dir / "pool.json");
  if (!in) throw LoadError("missing pool manifest in '" + dir.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed pool manifest: ") + e.what());
  }
  IdentityPool pool;
  pool.report.scope = j.value("percentile_scope", std::string("global"));
  pool.report.dropped_unscored = j.value("dropped_unscored", 0);
  for (const auto& s : j.value("cascade", json::array())) {
    pool.report.stages.push_back({s.at("stage").get<std::string>(), s.at("input").get<int>(),
                                  s.at("removed").get<int>(), s.at("output").get<int>()});
  }
  for (const auto& a : j.at("assets")) {
    IdentityAsset asset;
    asset.id = a.at("id").get<std::string>();
    asset.image = io::read_png(dir / a.at("file").get<std::string>());
    asset.class_label = a.at("class_label").get<std::string>();
    asset.bg_fraction = a.at("bg_fraction").get<double>();
    asset.clipped = a.value("clipped", false);
    const auto& s = a.at("scores");
    asset.scores = {s.at("iqa").get<double>(), s.at("sharpness").get<double>(), s.at("clip_sim").get<double>(),
                    s.at("resolution").get<int>()};
    const auto& src = a.at("source");
    asset.source = {src.at("episode_id").get<std::string>(), ViewRole::parse(src.at("view").get<std::string>()),
                    src.at("frame").get<int>()};
    pool.assets.push_back(std::move(asset));
  }
  if (static_cast<std::size_t>(j.value("count", -1)) != pool.assets.size()) {
    throw ValidationError("pool manifest count does not match its asset list");
  }
  return pool;
}

}  // namespace mvaug
