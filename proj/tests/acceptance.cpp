// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Run a subset with `acceptance 3 8`.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mvaug/eval.hpp"
#include "mvaug/keyframing.hpp"
#include "mvaug/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace mvaug;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// 1. interaction_windows against the run-scan oracle.
Outcome windowing() {
  std::mt19937_64 rng(101);
  long mismatches = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int T = std::uniform_int_distribution<int>(1, 200)(rng);
    const int pre = std::uniform_int_distribution<int>(0, 10)(rng);
    const int post = std::uniform_int_distribution<int>(0, 10)(rng);
    // Vary run density so both sparse and dense sequences appear.
    const double p = std::uniform_real_distribution<double>(0.02, 0.98)(rng);
    std::bernoulli_distribution bit(p);
    std::vector<std::uint8_t> seq(T);
    for (auto& b : seq) b = bit(rng);
    const auto got = interaction_windows(seq, pre, post);
    const auto want = oracle::windows(seq, pre, post);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].start == want[i].start && got[i].end == want[i].end && got[i].close_idx == want[i].close_idx &&
             got[i].open_idx == want[i].open_idx;
    }
    mismatches += !same;
  }
  return {mismatches == 0, fmt("10000 sequences, %.0f mismatches", mismatches)};
}

// 2. Chunk tiling and 4N+1 padding for T in [1, 600].
Outcome chunk_arithmetic() {
  long violations = 0;
  for (int T = 1; T <= 600; ++T) {
    const ChunkPlan plan = plan_chunks(T, 33);
    int cursor = 0;
    for (const Chunk& c : plan.chunks) {
      const int L = c.end - c.start;
      const int formula = 4 * ((L - 1 + 3) / 4) + 1;
      if (c.start != cursor || L < 1 || L > 33) ++violations;
      if (c.padded_len != formula || c.padded_len != oracle::padded(L) || c.padded_len % 4 != 1) ++violations;
      cursor = c.end;
    }
    if (cursor != T) ++violations;
  }
  return {violations == 0, fmt("T=1..600, %.0f violations", violations)};
}

// 3. Filter cascade survivors and the closed form.
Outcome cascade() {
  std::mt19937_64 rng(303);
  auto distinct_scores = [&](int n) {
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 0.0);
    std::shuffle(v.begin(), v.end(), rng);
    return v;
  };
  auto make_assets = [&](int n, std::vector<std::vector<double>>& cols) {
    cols = {distinct_scores(n), distinct_scores(n), distinct_scores(n), distinct_scores(n)};
    std::vector<IdentityAsset> assets(n);
    for (int i = 0; i < n; ++i) {
      assets[i].id = std::to_string(i);
      assets[i].scores.iqa = cols[0][i];
      assets[i].scores.resolution = static_cast<int>(cols[1][i]) + 1;
      assets[i].scores.sharpness = cols[2][i];
      assets[i].scores.clip_sim = cols[3][i];
    }
    return assets;
  };
  std::vector<std::vector<double>> cols;
  const IdentityPool pool = filter_cascade(make_assets(1000, cols));
  std::set<int> got;
  for (const auto& a : pool.assets) got.insert(std::stoi(a.id));
  const auto want_v = oracle::cascade(cols);
  const std::set<int> want(want_v.begin(), want_v.end());
  const bool main_ok = pool.assets.size() == 112 && got == want;

  int bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 5000)(rng);
    std::vector<std::vector<double>> c;
    const int real = static_cast<int>(filter_cascade(make_assets(n, c)).assets.size());
    if (real != oracle::cascade_n4(n) || cascade_survivors(n) != oracle::cascade_n4(n)) ++bad;
  }
  return {main_ok && bad == 0,
          fmt("1000 -> %.0f survivors (oracle set match %.0f); closed form mismatches %.0f/200",
              static_cast<double>(pool.assets.size()), got == want, bad)};
}

// 4. Codec frame count and block-mean round trip.
Outcome codec_contract() {
  std::mt19937_64 rng(404);
  int bad_f = 0;
  double worst = 0.0;
  for (int T = 1; T <= 600; ++T) {
    const int F = codec::latent_frame_count(T);
    if (F != 1 + (T - 1 + 3) / 4) ++bad_f;
    Video v;
    for (int t = 0; t < T; ++t) v.push_back(testing::random_image(16, 16, rng));
    const codec::LatentVideo z = codec::encode(v, 8);
    if (z.frames != F) ++bad_f;
    const codec::RealVideo r = codec::decode(z);
    for (int f = 0; f < F; ++f) {
      const auto [first, last] = codec::frame_group(f, T);
      const auto want = oracle::block_means(v, first, last, 8);
      std::size_t k = 0;
      for (int by = 0; by < 2; ++by)
        for (int bx = 0; bx < 2; ++bx)
          for (int c = 0; c < 3; ++c, ++k) {
            double sum = 0;
            int n = 0;
            for (int t = first; t <= last; ++t)
              for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x, ++n) sum += r.at(t, by * 8 + y, bx * 8 + x, c);
            worst = std::max(worst, std::abs(sum / n - want[k]));
          }
    }
  }
  const bool t33 = codec::latent_frame_count(33) == 9;
  return {bad_f == 0 && worst < 1e-6 && t33,
          fmt("F formula mismatches %.0f, max block-mean error %.2e, F(33)=%.0f", bad_f, worst,
              codec::latent_frame_count(33))};
}

// 5. Adapted forward equals the frozen base at initialisation.
Outcome zero_adapter() {
  const auto clip = testing::synthetic_clip(17, 5);
  int unequal = 0;
  for (int i = 0; i < 20; ++i) {
    const auto pair = testing::training_pair(clip, i % 2 ? std::optional<int>(2) : std::optional<int>(0), 500 + i);
    const diffusion::DenoiserModel model(testing::small_model(900 + i));
    const auto noisy = testing::gaussian_latent(pair.target, 700 + i);
    const double t = (i + 0.5) / 20.0;
    const auto a = diffusion::forward_denoise(model, noisy, pair.bundle, t, true).prediction;
    const auto b = diffusion::forward_denoise(model, noisy, pair.bundle, t, false).prediction;
    unequal += !(a.data == b.data);
  }
  return {unequal == 0, fmt("20 random inputs, %.0f not bit-identical", unequal)};
}

// 6. Analytic gradients against central differences.
Outcome gradient_check() {
  const auto clip = testing::synthetic_clip(9, 6);
  const auto pair = testing::training_pair(clip, 2, 61);
  diffusion::DenoiserModel model(testing::small_model(62, 2));
  model.randomize_adapters(63, 0.3);
  const auto noise = testing::gaussian_latent(pair.target, 64);
  const double t = 0.37;
  diffusion::loss_and_grad(model, pair.bundle, pair.target, noise, t);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < model.params().size(); ++p)
    if (model.params()[p].trainable)
      for (std::size_t i = 0; i < model.params()[p].value.size(); ++i) coords.emplace_back(p, i);
  std::mt19937_64 rng(65);
  std::shuffle(coords.begin(), coords.end(), rng);
  coords.resize(100);

  const double h = 1e-5;
  double worst = 0.0;
  for (auto [p, i] : coords) {
    auto& prm = model.params()[p];
    const double analytic = prm.grad.data[i];
    const double orig = prm.value.data[i];
    prm.value.data[i] = orig + h;
    const double up = diffusion::evaluate_loss(model, pair.bundle, pair.target, noise, t);
    prm.value.data[i] = orig - h;
    const double down = diffusion::evaluate_loss(model, pair.bundle, pair.target, noise, t);
    prm.value.data[i] = orig;
    const double fd = (up - down) / (2 * h);
    // Floor keeps coordinates with a (near) zero gradient from dividing noise by noise.
    const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
    worst = std::max(worst, rel);
  }
  return {worst < 1e-4, fmt("100 coordinates, max relative error %.2e", worst)};
}

// 7. Identity frame never adds loss terms but does change predictions.
Outcome loss_domain() {
  const auto clip = testing::synthetic_clip(17, 7);
  int term_bad = 0, dead = 0;
  for (int s = 0; s < 10; ++s) {
    const auto with = testing::training_pair(clip, 3, 1000 + s);
    const auto without = testing::training_pair(clip, 0, 1000 + s);
    diffusion::DenoiserModel model(testing::small_model(2000 + s));
    model.randomize_adapters(3000 + s, 0.2);
    const auto noise = testing::gaussian_latent(with.target, 4000 + s);
    const auto a = diffusion::loss_and_grad(model, with.bundle, with.target, noise, 0.5);
    const auto b = diffusion::loss_and_grad(model, without.bundle, without.target, noise, 0.5);
    // One term per video latent element; identity and text tokens add none.
    const std::size_t expected = with.target.data.size();
    if (a.loss_terms != b.loss_terms || a.loss_terms != expected || a.tokens.identity == 0 ||
        b.tokens.identity != 0) {
      ++term_bad;
    }
    // Liveness: zero the identity latent and permute its channels.
    const auto noisy = testing::gaussian_latent(with.target, 5000 + s);
    const auto base = diffusion::forward_denoise(model, noisy, with.bundle, 0.4).prediction;
    ConditioningBundle zeroed = with.bundle;
    std::fill(zeroed.identity_latent->data.begin(), zeroed.identity_latent->data.end(), 0.0);
    ConditioningBundle permuted = with.bundle;
    auto& id = *permuted.identity_latent;
    const std::size_t plane = static_cast<std::size_t>(id.height) * id.width;
    std::rotate(id.data.begin(), id.data.begin() + static_cast<std::ptrdiff_t>(plane), id.data.end());
    const auto z = diffusion::forward_denoise(model, noisy, zeroed, 0.4).prediction;
    const auto p = diffusion::forward_denoise(model, noisy, permuted, 0.4).prediction;
    double dz = 0, dp = 0;
    for (std::size_t i = 0; i < base.data.size(); ++i) {
      dz += std::pow(base.data[i] - z.data[i], 2);
      dp += std::pow(base.data[i] - p.data[i], 2);
    }
    dead += !(dz > 0 && dp > 0);
  }
  return {term_bad == 0 && dead == 0, fmt("10 seeds: loss-term mismatches %.0f, dead identity %.0f", term_bad, dead)};
}

// 8. Overfit one 2-view 33-frame clip.
Outcome overfit() {
  const auto start = std::chrono::steady_clock::now();
  const auto clip = testing::synthetic_clip(33, 5);
  const auto pair = testing::training_pair(clip, 2, 99);
  diffusion::DenoiserConfig cfg;
  cfg.dim = 64;
  cfg.blocks = 2;
  cfg.heads = 4;
  cfg.draws = 4;
  cfg.scope = diffusion::TrainableScope::kFull;
  cfg.seed = 7;
  diffusion::DenoiserModel model(cfg);
  // Fixed evaluation draws, stratified over t.
  std::vector<std::pair<double, codec::LatentVideo>> probe;
  for (int i = 0; i < 32; ++i) probe.emplace_back((i + 0.5) / 32, testing::gaussian_latent(pair.target, 1000 + i));
  auto avg_loss = [&] {
    double s = 0;
    for (const auto& [t, n] : probe) s += diffusion::evaluate_loss(model, pair.bundle, pair.target, n, t);
    return s / static_cast<double>(probe.size());
  };
  const double initial = avg_loss();
  diffusion::TrainState state(3);
  const int steps = 2000;
  for (int s = 0; s < steps; ++s) diffusion::training_step(model, pair.bundle, pair.target, state);
  const double final_loss = avg_loss();
  const codec::RealVideo ref = codec::decode(pair.target);
  const codec::RealVideo gen = codec::decode(diffusion::sample(model, pair.bundle, 20, 42));
  double mae = 0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) mae += std::abs(ref.data[i] - gen.data[i]);
  mae /= static_cast<double>(ref.data.size());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double ratio = initial / final_loss;
  return {ratio >= 5.0 && mae <= 10.0 && secs <= 600.0,
          fmt("loss %.3f -> %.4f (%.1fx), sample MAE %.2f/255", initial, final_loss, ratio, mae) +
              fmt(" [%.0f s]", secs)};
}

// 9. Stitch/unstitch bijection and black padding.
Outcome stitching() {
  std::mt19937_64 rng(909);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int expected = std::uniform_int_distribution<int>(1, 4)(rng);
    const int present = std::uniform_int_distribution<int>(1, expected)(rng);
    const int H = std::uniform_int_distribution<int>(1, 24)(rng);
    const int W = std::uniform_int_distribution<int>(1, 24)(rng);
    std::vector<Image> views;
    for (int v = 0; v < present; ++v) views.push_back(testing::random_image(H, W, rng));
    const Image s = stitch_views(views, expected);
    if (s.height != expected * H || s.width != W) {
      ++bad;
      continue;
    }
    const auto back = unstitch_views(s, expected);
    for (int v = 0; v < expected; ++v) {
      if (v < present) {
        bad += !(back[v] == views[v]);
      } else {
        const bool zero = std::all_of(back[v].pixels.begin(), back[v].pixels.end(), [](auto p) { return p == 0; });
        bad += !zero;
      }
    }
    // Padding rows never contain white.
    for (int y = present * H; y < expected * H; ++y)
      for (int x = 0; x < W; ++x) bad += s.at(y, x)[0] == 255 || s.at(y, x)[1] == 255 || s.at(y, x)[2] == 255;
  }
  return {bad == 0, fmt("1000 frames, %.0f violations", bad)};
}

// 10. MV-Mat self-match maximal and monotone under noise.
Outcome mvmat() {
  StubBackend stub(nlohmann::json::object());
  std::mt19937_64 rng(1010);
  const int T = 4, H = 64, W = 64;
  const long max = StubBackend::max_matches(H, W);
  const std::vector<double> sigmas = {0.12, 0.15, 0.18, 0.2, 0.3};
  std::vector<double> means(sigmas.size() + 1, 0.0);
  bool self_max = true;
  for (int trial = 0; trial < 20; ++trial) {
    ViewStream a{ViewRole::third_person(0), {}};
    for (int t = 0; t < T; ++t) a.frames.push_back(testing::random_image(H, W, rng));
    const auto self = eval::mv_match_count(a, a, stub, 1, 0.5, "trial");
    self_max = self_max && self.mean_count == static_cast<double>(max);
    means[0] += self.mean_count / 20;
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
      std::normal_distribution<double> n(0.0, sigmas[k]);
      ViewStream b = a;
      for (auto& f : b.frames)
        for (auto& p : f.pixels) p = static_cast<std::uint8_t>(std::clamp(std::lround(p + n(rng)), 0L, 255L));
      means[k + 1] += eval::mv_match_count(a, b, stub, 1, 0.5, "trial").mean_count / 20;
    }
  }
  bool monotone = true;
  for (std::size_t k = 1; k < means.size(); ++k) monotone = monotone && means[k] <= means[k - 1];
  const bool degrades = means.back() < means.front();
  std::ostringstream d;
  d << "self " << means[0] << " (max " << max << "); sigma means";
  for (std::size_t k = 1; k < means.size(); ++k) d << ' ' << fmt("%.2f", means[k]);
  return {self_max && monotone && degrades, d.str()};
}

// 11. Two full runs on the bundled fixtures are bit-identical.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("mvaug_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::ostringstream log;
  std::vector<fs::path> outs;
  int exit_codes = 0;
  for (const char* name : {"run_a", "run_b"}) {
    pipeline::PipelineConfig cfg = pipeline::load_config(fs::path(MVAUG_FIXTURE_DIR) / "pipeline.json");
    cfg.output_dir = root / name;
    exit_codes += pipeline::run(cfg, pipeline::Stage::kAll, log).exit_code;
    outs.push_back(cfg.output_dir);
  }
  auto listing = [](const fs::path& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir).generic_string());
    std::sort(files.begin(), files.end());
    return files;
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto fa = listing(outs[0]), fb = listing(outs[1]);
  int differing = fa == fb ? 0 : 1;
  std::size_t compared = 0;
  bool has_report = false;
  if (fa == fb) {
    for (const auto& rel : fa) {
      has_report = has_report || rel == "evaluate/report.tsv";
      std::string a = slurp(outs[0] / rel), b = slurp(outs[1] / rel);
      if (fs::path(rel).filename() == "stage_manifest.json") {
        // Wall-clock timings are the only field allowed to differ.
        auto ja = nlohmann::json::parse(a), jb = nlohmann::json::parse(b);
        ja.erase("timings");
        jb.erase("timings");
        a = ja.dump();
        b = jb.dump();
      }
      differing += a != b;
      ++compared;
    }
  }
  fs::remove_all(root);
  return {exit_codes == 0 && differing == 0 && has_report && compared > 0,
          fmt("%.0f files compared, %.0f differ, exit codes sum %.0f", static_cast<double>(compared), differing,
              exit_codes)};
}

// 12. Pool sampling uniformity.
Outcome sampling_uniformity() {
  const std::size_t N = 10000;
  const int k = 4;
  const int trials = 100000;
  std::vector<long> counts(N, 0);
  for (int i = 0; i < trials; ++i)
    for (std::size_t j : pool_sample_indices(N, k, derive_seed(1212, std::to_string(i)))) ++counts[j];
  const double chi = oracle::chi_square_uniform(counts);
  const double df = static_cast<double>(N - 1);
  const double z = (chi - df) / std::sqrt(2 * df);
  const double expected = static_cast<double>(trials) * k / N;
  const double sd = std::sqrt(expected * (1.0 - static_cast<double>(k) / N));
  long outliers = 0;
  for (long c : counts) outliers += std::abs(c - expected) > 5 * sd;
  return {std::abs(z) <= 5.0 && outliers == 0,
          fmt("chi2 %.1f on %.0f df (z=%.2f), per-asset 5-sigma outliers %.0f", chi, df, z, outliers)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"windowing oracle", windowing},
      {"chunk arithmetic", chunk_arithmetic},
      {"filter cascade", cascade},
      {"codec contract", codec_contract},
      {"zero-adapter equivalence", zero_adapter},
      {"gradient check", gradient_check},
      {"loss domain and identity liveness", loss_domain},
      {"overfit smoke test", overfit},
      {"stitching bijection", stitching},
      {"mv-mat properties", mvmat},
      {"end-to-end determinism", determinism},
      {"pool sampling uniformity", sampling_uniformity},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
