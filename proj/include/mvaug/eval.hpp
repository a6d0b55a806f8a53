// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvaug/clients.hpp"
#include "mvaug/episode.hpp"

namespace mvaug::eval {

struct PairMatch {
  std::string episode_id;
  int frame = 0;
  long count = 0;
};

struct MatchReport {
  std::vector<PairMatch> per_pair;
  double mean_count = 0.0;
  std::string matcher;
  double confidence_threshold = 0.0;
};

/// 0, stride, 2*stride, ... below frame_count.
std::vector<int> sampled_timestamps(int frame_count, int stride);

/// Cross-view match counts between two synchronised streams.
MatchReport mv_match_count(const ViewStream& a, const ViewStream& b, FeatureMatcher& matcher, int stride = 1,
                           double confidence_threshold = 0.5, const std::string& episode_id = "");

/// Frame t of every view stacked top to bottom, in the episode's view order.
Image stitched_frame(const Episode& ep, int t);

struct MetricResult {
  double value = 0.0;
  nlohmann::json detail;
};

class Metric {
 public:
  virtual ~Metric() = default;
  virtual std::string name() const = 0;
  virtual std::string backend_id() const = 0;
  virtual bool needs_references() const = 0;
  virtual MetricResult compute(const std::vector<Episode>& generated, const std::vector<Episode>* references) = 0;
};

/// Mean cross-view match count over all sampled (episode, frame) pairs of the
/// first two views. The detail also carries the per-episode-first average.
class MvMatMetric final : public Metric {
 public:
  MvMatMetric(std::shared_ptr<FeatureMatcher> matcher, int stride = 1, double confidence_threshold = 0.5,
              int workers = 1);
  std::string name() const override { return "mvmat"; }
  std::string backend_id() const override;
  bool needs_references() const override { return false; }
  MetricResult compute(const std::vector<Episode>& generated, const std::vector<Episode>* references) override;

 private:
  std::shared_ptr<FeatureMatcher> matcher_;
  int stride_;
  double threshold_;
  int workers_;
};

/// Per-pixel MSE between stitched generated and reference frames, paired by
/// episode id. Accumulated in integers, so it is exact and order-free.
class MseStandinMetric final : public Metric {
 public:
  std::string name() const override { return "mse-standin"; }
  std::string backend_id() const override { return "builtin"; }
  bool needs_references() const override { return true; }
  MetricResult compute(const std::vector<Episode>& generated, const std::vector<Episode>* references) override;
};

/// Metric names that need an external backend to compute.
inline const std::vector<std::string> kBackendMetrics = {"fid", "fvd", "lpips"};

class MetricRegistry {
 public:
  void add(std::shared_ptr<Metric> metric);
  bool has(const std::string& name) const { return metrics_.count(name) != 0; }
  std::shared_ptr<Metric> get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::shared_ptr<Metric>> metrics_;
};

struct ReportRow {
  std::string metric;
  std::optional<double> value;
  std::string backend;
  std::string status;  // "ok", "backend absent" or "error: ..."
};

struct EvalReport {
  std::vector<ReportRow> rows;
  nlohmann::json detail;
};

/// Evaluates `requested` metrics (all registered ones when empty). A requested
/// name without a registered backend yields a "backend absent" row; a metric
/// that needs references and has none yields an error row.
EvalReport evaluate_set(const std::vector<Episode>& generated, const std::vector<Episode>* references,
                        const MetricRegistry& registry, const std::vector<std::string>& requested = {});

/// Writes report.tsv and report_detail.json into `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace mvaug::eval
