// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mvaug/eval.hpp"
#include "mvaug/stub_clients.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mvaug;
namespace fs = std::filesystem;

namespace {

Episode noise_episode(const std::string& id, int T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Episode ep;
  ep.id = id;
  for (auto role : {ViewRole::wrist(), ViewRole::third_person(0)}) {
    ViewStream s{role, {}};
    for (int t = 0; t < T; ++t) s.frames.push_back(testing::random_image(32, 32, rng));
    ep.views.push_back(s);
  }
  ep.actions.gripper.assign(T, 0.0);
  ep.actions.delta_pose.assign(T, {0, 0, 0, 0, 0, 0});
  return ep;
}

// Brute-force per-pixel MSE over stitched frames.
double brute_mse(const std::vector<Episode>& gen, const std::vector<Episode>& ref) {
  double sum = 0;
  double n = 0;
  for (std::size_t e = 0; e < gen.size(); ++e)
    for (int t = 0; t < gen[e].frame_count(); ++t)
      for (std::size_t v = 0; v < gen[e].views.size(); ++v) {
        const Image& a = gen[e].views[v].frames[t];
        const Image& b = ref[e].views[v].frames[t];
        for (std::size_t i = 0; i < a.pixels.size(); ++i) {
          const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
          sum += d * d;
          n += 1;
        }
      }
  return sum / n;
}

}  // namespace

TEST_CASE("sampled timestamps") {
  CHECK(eval::sampled_timestamps(33, 5) == std::vector<int>{0, 5, 10, 15, 20, 25, 30});
  CHECK(eval::sampled_timestamps(3, 1) == std::vector<int>{0, 1, 2});
  CHECK_THROWS(eval::sampled_timestamps(10, 0));
}

TEST_CASE("cross-view match counts with the stub matcher") {
  StubBackend stub(nlohmann::json::object());
  const Episode ep = noise_episode("e", 6, 1);
  const auto self = eval::mv_match_count(ep.views[0], ep.views[0], stub);
  CHECK(self.mean_count == StubBackend::max_matches(32, 32));
  CHECK(self.per_pair.size() == 6);
  const auto cross = eval::mv_match_count(ep.views[0], ep.views[1], stub);
  CHECK(cross.mean_count < 0.01 * StubBackend::max_matches(32, 32));
  for (const auto& p : cross.per_pair)
    CHECK(p.count == oracle::block_matches(ep.views[0].frames[p.frame], ep.views[1].frames[p.frame], 8));
  CHECK(eval::mv_match_count(ep.views[0], ep.views[0], stub, 4).per_pair.size() == 2);
}

TEST_CASE("report rows and missing backends") {
  auto stub = std::make_shared<StubBackend>(nlohmann::json::object());
  eval::MetricRegistry reg;
  reg.add(std::make_shared<eval::MvMatMetric>(stub));
  reg.add(std::make_shared<eval::MseStandinMetric>());
  const std::vector<Episode> gen = {noise_episode("a", 4, 1), noise_episode("b", 4, 2), noise_episode("c", 4, 3)};

  const eval::EvalReport two = eval::evaluate_set(gen, &gen, reg);
  REQUIRE(two.rows.size() == 2);
  for (const auto& r : two.rows) CHECK(r.status == "ok");
  for (const auto& r : two.rows)
    if (r.metric == "mse-standin") CHECK(*r.value == 0.0);

  const eval::EvalReport with_fid = eval::evaluate_set(gen, &gen, reg, {"mvmat", "fid"});
  REQUIRE(with_fid.rows.size() == 2);
  CHECK(with_fid.rows[1].metric == "fid");
  CHECK(with_fid.rows[1].status == "backend absent");
  CHECK_FALSE(with_fid.rows[1].value.has_value());

  const eval::EvalReport no_ref = eval::evaluate_set(gen, nullptr, reg, {"mse-standin"});
  REQUIRE(no_ref.rows.size() == 1);
  CHECK(no_ref.rows[0].status.rfind("error", 0) == 0);
}

TEST_CASE("stand-in MSE is exact") {
  const std::vector<Episode> gen = {noise_episode("a", 3, 1), noise_episode("b", 2, 2)};
  const std::vector<Episode> ref = {noise_episode("a", 3, 5), noise_episode("b", 2, 6)};
  eval::MseStandinMetric m;
  CHECK(m.compute(gen, &ref).value == brute_mse(gen, ref));
  // Pairing is by id, so reference order does not matter.
  const std::vector<Episode> ref_rev = {ref[1], ref[0]};
  CHECK(m.compute(gen, &ref_rev).value == brute_mse(gen, ref));
}

TEST_CASE("report values are invariant to episode order") {
  auto stub = std::make_shared<StubBackend>(nlohmann::json::object());
  eval::MetricRegistry reg;
  reg.add(std::make_shared<eval::MvMatMetric>(stub, 1, 0.5, 2));
  reg.add(std::make_shared<eval::MseStandinMetric>());
  std::vector<Episode> gen = {noise_episode("a", 4, 1), noise_episode("b", 5, 2), noise_episode("c", 3, 3)};
  std::vector<Episode> ref = {noise_episode("a", 4, 7), noise_episode("b", 5, 8), noise_episode("c", 3, 9)};
  // Give mvmat something non-zero to average.
  gen[1].views[1] = gen[1].views[0];
  const auto base = eval::evaluate_set(gen, &ref, reg);
  std::vector<Episode> g2 = {gen[2], gen[0], gen[1]};
  std::vector<Episode> r2 = {ref[1], ref[2], ref[0]};
  const auto perm = eval::evaluate_set(g2, &r2, reg);
  REQUIRE(base.rows.size() == perm.rows.size());
  for (std::size_t i = 0; i < base.rows.size(); ++i) {
    CHECK(base.rows[i].metric == perm.rows[i].metric);
    CHECK(*base.rows[i].value == *perm.rows[i].value);
  }
}

TEST_CASE("stitched frames and report files") {
  const Episode ep = noise_episode("s", 2, 4);
  const Image s = eval::stitched_frame(ep, 1);
  CHECK(s.height == 64);
  CHECK(s.at(40, 3)[0] == ep.views[1].frames[1].at(8, 3)[0]);

  eval::EvalReport rep;
  rep.rows = {{"mvmat", 12.5, "stub", "ok"}, {"fid", std::nullopt, "", "backend absent"}};
  rep.detail = {{"note", 1}};
  const fs::path dir = fs::temp_directory_path() / ("mvaug_report_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  eval::write_report(rep, dir);
  std::ifstream in(dir / "report.tsv");
  std::string header, l1, l2;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(l1.rfind("mvmat\t", 0) == 0);
  CHECK(l2.find("backend absent") != std::string::npos);
  CHECK(fs::exists(dir / "report_detail.json"));
  fs::remove_all(dir);
}
