// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>

#include "mvaug/conditioning.hpp"

namespace mvaug::eval {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> sampled_timestamps(int frame_count, int stride) {
  if (stride < 1) throw ParameterError("frame stride must be positive");
  std::vector<int> out;
  for (int t = 0; t < frame_count; t += stride) out.push_back(t);
  return out;
}

MatchReport mv_match_count(const ViewStream& a, const ViewStream& b, FeatureMatcher& matcher, int stride,
                           double confidence_threshold, const std::string& episode_id) {
  if (a.frames.size() != b.frames.size()) {
    throw PreconditionError("view streams differ in length: " + std::to_string(a.frames.size()) + " vs " +
                            std::to_string(b.frames.size()));
  }
  MatchReport r;
  r.matcher = matcher.info().backend;
  r.confidence_threshold = confidence_threshold;
  long total = 0;
  for (int t : sampled_timestamps(static_cast<int>(a.frames.size()), stride)) {
    const long n = matcher.match_features(a.frames[t], b.frames[t], confidence_threshold);
    r.per_pair.push_back({episode_id, t, n});
    total += n;
  }
  r.mean_count = r.per_pair.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(r.per_pair.size());
  return r;
}

Image stitched_frame(const Episode& ep, int t) {
  std::vector<Image> frames;
  for (const auto& v : ep.views) frames.push_back(v.frames.at(t));
  return stitch_views(frames, static_cast<int>(frames.size()));
}

MvMatMetric::MvMatMetric(std::shared_ptr<FeatureMatcher> matcher, int stride, double confidence_threshold,
                         int workers)
    : matcher_(std::move(matcher)), stride_(stride), threshold_(confidence_threshold), workers_(std::max(1, workers)) {
  if (!matcher_) throw PreconditionError("mvmat needs a feature matcher");
}

std::string MvMatMetric::backend_id() const { return matcher_->info().backend; }

MetricResult MvMatMetric::compute(const std::vector<Episode>& generated, const std::vector<Episode>*) {
  std::vector<MatchReport> per_episode(generated.size());
  std::vector<char> usable(generated.size(), 0);
  auto run = [&](std::size_t first, std::size_t step) {
    for (std::size_t i = first; i < generated.size(); i += step) {
      const Episode& ep = generated[i];
      if (ep.views.size() < 2) continue;
      per_episode[i] = mv_match_count(ep.views[0], ep.views[1], *matcher_, stride_, threshold_, ep.id);
      usable[i] = 1;
    }
  };
  std::vector<std::future<void>> jobs;
  for (int w = 1; w < workers_; ++w) jobs.push_back(std::async(std::launch::async, run, w, workers_));
  run(0, static_cast<std::size_t>(workers_));
  for (auto& j : jobs) j.get();

  long total = 0;
  long pairs = 0;
  double episode_mean_sum = 0.0;
  int episodes = 0;
  json per_pair = json::array();
  json skipped = json::array();
  // Sort by id so the detail file does not depend on input order.
  std::vector<std::size_t> order(generated.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return generated[a].id < generated[b].id; });
  std::vector<double> episode_means;
  for (std::size_t i : order) {
    if (!usable[i]) {
      skipped.push_back(generated[i].id);
      continue;
    }
    for (const auto& p : per_episode[i].per_pair) {
      per_pair.push_back({{"episode_id", p.episode_id}, {"frame", p.frame}, {"count", p.count}});
      total += p.count;
      ++pairs;
    }
    episode_means.push_back(per_episode[i].mean_count);
    ++episodes;
  }
  for (double m : episode_means) episode_mean_sum += m;
  MetricResult r;
  r.value = pairs ? static_cast<double>(total) / static_cast<double>(pairs) : 0.0;
  r.detail = {{"matcher", backend_id()},
              {"confidence_threshold", threshold_},
              {"stride", stride_},
              {"mean_over_frames", r.value},
              {"mean_over_episodes", episodes ? episode_mean_sum / episodes : 0.0},
              {"pairs", pairs},
              {"skipped_single_view", skipped},
              {"per_pair", per_pair}};
  return r;
}

MetricResult MseStandinMetric::compute(const std::vector<Episode>& generated, const std::vector<Episode>* references) {
  if (!references) throw PreconditionError("mse-standin needs reference episodes");
  std::map<std::string, const Episode*> refs;
  for (const auto& r : *references) refs[r.id] = &r;
  unsigned long long sq = 0, count = 0;
  for (const auto& g : generated) {
    auto it = refs.find(g.id);
    if (it == refs.end()) throw LookupError("no reference for episode '" + g.id + "'");
    const Episode& ref = *it->second;
    const int tg = g.views.empty() ? 0 : static_cast<int>(g.views.front().frames.size());
    const int tr = ref.views.empty() ? 0 : static_cast<int>(ref.views.front().frames.size());
    if (tg != tr || g.views.size() != ref.views.size()) {
      throw PreconditionError("episode '" + g.id + "' differs in shape from its reference");
    }
    for (int t = 0; t < tg; ++t) {
      const Image a = stitched_frame(g, t);
      const Image b = stitched_frame(ref, t);
      if (a.height != b.height || a.width != b.width) {
        throw PreconditionError("episode '" + g.id + "' frame size differs from its reference");
      }
      for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const long d = static_cast<long>(a.pixels[i]) - static_cast<long>(b.pixels[i]);
        sq += static_cast<unsigned long long>(d * d);
      }
      count += a.pixels.size();
    }
  }
  MetricResult r;
  r.value = count ? static_cast<double>(sq) / static_cast<double>(count) : 0.0;
  r.detail = {{"squared_error_sum", sq}, {"values", count}};
  return r;
}

void MetricRegistry::add(std::shared_ptr<Metric> metric) {
  if (!metric) throw PreconditionError("cannot register a null metric");
  metrics_[metric->name()] = std::move(metric);
}

std::shared_ptr<Metric> MetricRegistry::get(const std::string& name) const {
  auto it = metrics_.find(name);
  if (it == metrics_.end()) throw LookupError("metric '" + name + "' is not registered");
  return it->second;
}

std::vector<std::string> MetricRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : metrics_) out.push_back(k);
  return out;
}

EvalReport evaluate_set(const std::vector<Episode>& generated, const std::vector<Episode>* references,
                        const MetricRegistry& registry, const std::vector<std::string>& requested) {
  const auto names = requested.empty() ? registry.names() : requested;
  EvalReport report;
  report.detail = json::object();
  report.detail["episodes"] = generated.size();
  json metrics = json::object();
  for (const auto& name : names) {
    ReportRow row;
    row.metric = name;
    if (!registry.has(name)) {
      row.backend = "none";
      row.status = "backend absent";
      report.rows.push_back(row);
      continue;
    }
    auto m = registry.get(name);
    row.backend = m->backend_id();
    if (m->needs_references() && !references) {
      row.status = "error: metric needs reference episodes";
      report.rows.push_back(row);
      continue;
    }
    try {
      MetricResult r = m->compute(generated, references);
      row.value = r.value;
      row.status = "ok";
      metrics[name] = r.detail;
    } catch (const Error& e) {
      row.status = std::string("error: ") + e.what();
    }
    report.rows.push_back(row);
  }
  report.detail["metrics"] = metrics;
  return report;
}

void write_report(const EvalReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw SaveError("cannot create report directory '" + dir.string() + "'");
  std::ofstream tsv(dir / "report.tsv");
  if (!tsv) throw SaveError("cannot write report table in '" + dir.string() + "'");
  tsv << "metric\tvalue\tbackend\tstatus\n";
  for (const auto& r : report.rows) {
    std::string value = "NA";
    if (r.value) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", *r.value);
      value = buf;
    }
    tsv << r.metric << '\t' << value << '\t' << r.backend << '\t' << r.status << '\n';
  }
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"metric", r.metric},
                    {"value", r.value ? json(*r.value) : json(nullptr)},
                    {"backend", r.backend},
                    {"status", r.status}});
  }
  json detail = report.detail;
  detail["rows"] = rows;
  std::ofstream js(dir / "report_detail.json");
  if (!js) throw SaveError("cannot write report detail in '" + dir.string() + "'");
  js << detail.dump(2) << '\n';
}

}  // namespace mvaug::eval
