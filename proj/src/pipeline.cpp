// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>
#include <typeinfo>

#include "mvaug/eval.hpp"
#include "mvaug/hash.hpp"
#include "mvaug/remote_clients.hpp"
#include "mvaug/stub_clients.hpp"

namespace mvaug::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// --- stages ----------------------------------------------------------------

namespace {

const std::vector<std::pair<Stage, const char*>> kStageNames = {
    {Stage::kIngest, "ingest"},     {Stage::kSegment, "segment"}, {Stage::kCuratePool, "curate-pool"},
    {Stage::kAssemble, "assemble"}, {Stage::kTrainToy, "train-toy"}, {Stage::kAugment, "augment"},
    {Stage::kEvaluate, "evaluate"}, {Stage::kAll, "all"}};

}  // namespace

std::string to_string(Stage s) {
  for (const auto& [st, name] : kStageNames)
    if (st == s) return name;
  return "?";
}

Stage parse_stage(const std::string& s) {
  std::string valid;
  for (const auto& [st, name] : kStageNames) {
    if (s == name) return st;
    valid += valid.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError("unknown stage '" + s + "' (expected one of: " + valid + ")");
}

const std::vector<Stage>& stage_order() {
  static const std::vector<Stage> order = {Stage::kIngest,   Stage::kSegment, Stage::kCuratePool, Stage::kAssemble,
                                           Stage::kTrainToy, Stage::kAugment, Stage::kEvaluate};
  return order;
}

bool PipelineConfig::stage_enabled(Stage s) const {
  auto it = enabled.find(s);
  return it == enabled.end() || it->second;
}

// --- configuration ---------------------------------------------------------

namespace {

template <typename T>
void read(const json& obj, const char* section, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + section + "." + key + "' has the wrong type");
  }
}

const json& section(const json& j, const char* name) {
  static const json empty = json::object();
  if (!j.contains(name)) return empty;
  if (!j.at(name).is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
  return j.at(name);
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(std::string("unknown config key '") + where + k + "'");
  }
}

}  // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(j, "", {"seed", "workers", "paths", "stages", "clients", "curation", "segmentation", "pool", "assembly",
                     "model", "train", "augment", "evaluate"});
  PipelineConfig c;
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    read(j, "", "seed", s);
    c.seed = s;
  }
  read(j, "", "workers", c.workers);

  const json& paths = section(j, "paths");
  check_keys(paths, "paths.", {"episodes", "pool", "output"});
  std::string p;
  if (paths.contains("episodes")) read(paths, "paths", "episodes", p), c.episodes_dir = resolve(base_dir, p);
  if (paths.contains("pool")) read(paths, "paths", "pool", p), c.pool_dir = resolve(base_dir, p);
  c.output_dir = resolve(base_dir, paths.contains("output") ? paths.at("output").get<std::string>() : "out");

  const json& stages = section(j, "stages");
  for (const auto& [k, v] : stages.items()) {
    const Stage s = parse_stage(k);
    if (s == Stage::kAll || !v.is_boolean()) throw ConfigError("stage toggle '" + k + "' must name a stage and be boolean");
    c.enabled[s] = v.get<bool>();
  }

  const json& clients = section(j, "clients");
  check_keys(clients, "clients.", {"stub_fixtures", "remote"});
  if (clients.contains("stub_fixtures")) {
    read(clients, "clients", "stub_fixtures", p);
    c.stub_fixtures = resolve(base_dir, p);
  }
  if (clients.contains("remote")) {
    const json& r = clients.at("remote");
    read(r, "clients.remote", "argv", c.remote_argv);
    if (r.contains("passthrough")) c.remote_passthrough = r.at("passthrough");
  }

  const json& cur = section(j, "curation");
  check_keys(cur, "curation.", {"min_frames", "max_frames"});
  read(cur, "curation", "min_frames", c.min_frames);
  read(cur, "curation", "max_frames", c.max_frames);

  const json& seg = section(j, "segmentation");
  check_keys(seg, "segmentation.", {"close_threshold", "pre_buffer", "post_buffer", "anchor_samples", "median_kernel",
                                    "prompt_points", "question"});
  auto& sc = c.segmentation;
  read(seg, "segmentation", "close_threshold", sc.close_threshold);
  read(seg, "segmentation", "pre_buffer", sc.pre_buffer);
  read(seg, "segmentation", "post_buffer", sc.post_buffer);
  read(seg, "segmentation", "anchor_samples", sc.anchor_samples);
  read(seg, "segmentation", "median_kernel", sc.median_kernel);
  read(seg, "segmentation", "prompt_points", sc.prompt_points);
  read(seg, "segmentation", "question", sc.question);

  const json& pool = section(j, "pool");
  check_keys(pool, "pool.", {"max_bg_fraction", "allowlist", "frames_per_view", "percentiles"});
  read(pool, "pool", "max_bg_fraction", c.max_bg_fraction);
  if (pool.contains("allowlist")) read(pool, "pool", "allowlist", p), c.allowlist = resolve(base_dir, p);
  read(pool, "pool", "frames_per_view", c.pool_frames_per_view);
  const json& pct = section(pool, "percentiles");
  check_keys(pct, "pool.percentiles.", {"iqa", "resolution", "sharpness", "clip"});
  read(pct, "pool.percentiles", "iqa", c.percents.iqa_low);
  read(pct, "pool.percentiles", "resolution", c.percents.resolution_each_side);
  read(pct, "pool.percentiles", "sharpness", c.percents.sharpness_low);
  read(pct, "pool.percentiles", "clip", c.percents.clip_low);

  const json& as = section(j, "assembly");
  check_keys(as, "assembly.", {"expected_views", "spatial_factor", "budget_h", "budget_w", "min_identities",
                               "max_identities", "n_identities", "max_chunk", "resize_range", "gutter", "shrink",
                               "max_retries"});
  auto& ac = c.assembly;
  read(as, "assembly", "expected_views", ac.expected_views);
  read(as, "assembly", "spatial_factor", ac.spatial_factor);
  read(as, "assembly", "budget_h", ac.budget_h);
  read(as, "assembly", "budget_w", ac.budget_w);
  read(as, "assembly", "min_identities", ac.min_identities);
  read(as, "assembly", "max_identities", ac.max_identities);
  if (as.contains("n_identities") && !as.at("n_identities").is_null()) {
    int n = 0;
    read(as, "assembly", "n_identities", n);
    c.n_identities = n;
  }
  read(as, "assembly", "max_chunk", c.max_chunk);
  if (as.contains("resize_range")) {
    std::vector<double> r;
    read(as, "assembly", "resize_range", r);
    if (r.size() != 2) throw ConfigError("assembly.resize_range must be [lo, hi]");
    ac.resize_lo = r[0];
    ac.resize_hi = r[1];
  }
  read(as, "assembly", "gutter", ac.packing.gutter);
  read(as, "assembly", "shrink", ac.packing.shrink);
  read(as, "assembly", "max_retries", ac.packing.max_retries);
  ac.packing.max_identities = ac.max_identities;

  const json& m = section(j, "model");
  check_keys(m, "model.", {"dim", "blocks", "heads", "patch", "lora_rank", "lora_alpha", "ffn_mult", "text_buckets",
                           "max_text_tokens", "learning_rate", "draws", "scope"});
  auto& mc = c.model;
  read(m, "model", "dim", mc.dim);
  read(m, "model", "blocks", mc.blocks);
  read(m, "model", "heads", mc.heads);
  read(m, "model", "patch", mc.patch);
  read(m, "model", "lora_rank", mc.lora_rank);
  read(m, "model", "lora_alpha", mc.lora_alpha);
  read(m, "model", "ffn_mult", mc.ffn_mult);
  read(m, "model", "text_buckets", mc.text_buckets);
  read(m, "model", "max_text_tokens", mc.max_text_tokens);
  read(m, "model", "learning_rate", mc.learning_rate);
  read(m, "model", "draws", mc.draws);
  if (m.contains("scope")) {
    std::string s;
    read(m, "model", "scope", s);
    try {
      mc.scope = diffusion::parse_scope(s);
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
  }

  const json& tr = section(j, "train");
  check_keys(tr, "train.", {"steps"});
  read(tr, "train", "steps", c.train_steps);
  const json& au = section(j, "augment");
  check_keys(au, "augment.", {"sample_steps"});
  read(au, "augment", "sample_steps", c.sample_steps);
  const json& ev = section(j, "evaluate");
  check_keys(ev, "evaluate.", {"stride", "confidence_threshold", "metrics"});
  read(ev, "evaluate", "stride", c.eval_stride);
  read(ev, "evaluate", "confidence_threshold", c.match_threshold);
  read(ev, "evaluate", "metrics", c.metrics);
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

json to_json(const PipelineConfig& c) {
  const auto& sc = c.segmentation;
  const auto& ac = c.assembly;
  const auto& mc = c.model;
  json stages = json::object();
  for (Stage s : stage_order()) stages[to_string(s)] = c.stage_enabled(s);
  return {
      {"seed", c.seed ? json(*c.seed) : json(nullptr)},
      {"workers", c.workers},
      {"paths",
       {{"episodes", c.episodes_dir.string()}, {"pool", c.pool_dir.string()}, {"output", c.output_dir.string()}}},
      {"stages", stages},
      {"clients",
       {{"stub_fixtures", c.stub_fixtures.string()},
        {"remote", {{"argv", c.remote_argv}, {"passthrough", c.remote_passthrough}}}}},
      {"curation", {{"min_frames", c.min_frames}, {"max_frames", c.max_frames}}},
      {"segmentation",
       {{"close_threshold", sc.close_threshold},
        {"pre_buffer", sc.pre_buffer},
        {"post_buffer", sc.post_buffer},
        {"anchor_samples", sc.anchor_samples},
        {"median_kernel", sc.median_kernel},
        {"prompt_points", sc.prompt_points},
        {"question", sc.question}}},
      {"pool",
       {{"max_bg_fraction", c.max_bg_fraction},
        {"allowlist", c.allowlist.string()},
        {"frames_per_view", c.pool_frames_per_view},
        {"percentiles",
         {{"iqa", c.percents.iqa_low},
          {"resolution", c.percents.resolution_each_side},
          {"sharpness", c.percents.sharpness_low},
          {"clip", c.percents.clip_low}}}}},
      {"assembly",
       {{"expected_views", ac.expected_views},
        {"spatial_factor", ac.spatial_factor},
        {"budget_h", ac.budget_h},
        {"budget_w", ac.budget_w},
        {"min_identities", ac.min_identities},
        {"max_identities", ac.max_identities},
        {"n_identities", c.n_identities ? json(*c.n_identities) : json(nullptr)},
        {"max_chunk", c.max_chunk},
        {"resize_range", {ac.resize_lo, ac.resize_hi}},
        {"gutter", ac.packing.gutter},
        {"shrink", ac.packing.shrink},
        {"max_retries", ac.packing.max_retries}}},
      {"model",
       {{"dim", mc.dim},
        {"blocks", mc.blocks},
        {"heads", mc.heads},
        {"patch", mc.patch},
        {"lora_rank", mc.lora_rank},
        {"lora_alpha", mc.lora_alpha},
        {"ffn_mult", mc.ffn_mult},
        {"text_buckets", mc.text_buckets},
        {"max_text_tokens", mc.max_text_tokens},
        {"learning_rate", mc.learning_rate},
        {"draws", mc.draws},
        {"scope", diffusion::to_string(mc.scope)}}},
      {"train", {{"steps", c.train_steps}}},
      {"augment", {{"sample_steps", c.sample_steps}}},
      {"evaluate", {{"stride", c.eval_stride}, {"confidence_threshold", c.match_threshold}, {"metrics", c.metrics}}}};
}

namespace {

long long parse_int(const char* name, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(std::string(name) + " must be an integer, got '" + v + "'");
  }
}

}  // namespace

void apply_env_overrides(PipelineConfig& c, const std::function<const char*(const char*)>& lookup) {
  auto get = [&](const char* name) -> const char* { return lookup ? lookup(name) : std::getenv(name); };
  if (const char* v = get("ROBOVIP_SEED")) {
    try {
      std::size_t used = 0;
      const std::string s(v);
      // stoull wraps negatives instead of rejecting them.
      if (s.empty() || !std::isdigit(static_cast<unsigned char>(s.front()))) throw std::invalid_argument(s);
      c.seed = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError(std::string("ROBOVIP_SEED must be a non-negative integer, got '") + v + "'");
    }
  }
  if (const char* v = get("ROBOVIP_WORKERS")) c.workers = static_cast<int>(parse_int("ROBOVIP_WORKERS", v));
  if (const char* v = get("ROBOVIP_STUB_FIXTURES")) c.stub_fixtures = fs::absolute(v);
  if (const char* v = get("ROBOVIP_EPISODES")) c.episodes_dir = fs::absolute(v);
  if (const char* v = get("ROBOVIP_POOL")) c.pool_dir = fs::absolute(v);
  if (const char* v = get("ROBOVIP_OUTPUT")) c.output_dir = fs::absolute(v);
  if (const char* v = get("ROBOVIP_TRAIN_STEPS")) c.train_steps = static_cast<int>(parse_int("ROBOVIP_TRAIN_STEPS", v));
  if (const char* v = get("ROBOVIP_SAMPLE_STEPS")) {
    c.sample_steps = static_cast<int>(parse_int("ROBOVIP_SAMPLE_STEPS", v));
  }
  if (const char* v = get("ROBOVIP_MAX_CHUNK")) c.max_chunk = static_cast<int>(parse_int("ROBOVIP_MAX_CHUNK", v));
}

void validate_config(const PipelineConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!c.seed) fail("a seed is required (config 'seed', ROBOVIP_SEED or --seed)");
  if (c.episodes_dir.empty()) fail("paths.episodes is required");
  if (c.output_dir.empty()) fail("paths.output is required");
  if (c.workers < 1) fail("workers must be at least 1");
  if (c.min_frames < 1 || c.max_frames < c.min_frames) fail("curation needs 1 <= min_frames <= max_frames");
  if (c.max_chunk < 1 || (c.max_chunk - 1) % 4 != 0) fail("assembly.max_chunk must have the form 4N+1");
  if (c.assembly.expected_views < 1) fail("assembly.expected_views must be positive");
  if (c.assembly.spatial_factor < 1) fail("assembly.spatial_factor must be positive");
  if (c.assembly.min_identities < 0 || c.assembly.max_identities < c.assembly.min_identities) {
    fail("assembly needs 0 <= min_identities <= max_identities");
  }
  if (c.n_identities && (*c.n_identities < 0 || *c.n_identities > c.assembly.max_identities)) {
    fail("assembly.n_identities must lie in [0, max_identities]");
  }
  const auto& p = c.percents;
  for (int v : {p.iqa_low, p.sharpness_low, p.clip_low}) {
    if (v < 0 || v > 100) fail("pool percentiles must lie in [0, 100]");
  }
  if (p.resolution_each_side < 0 || p.resolution_each_side > 50) fail("pool.percentiles.resolution must lie in [0, 50]");
  if (c.pool_frames_per_view < 1) fail("pool.frames_per_view must be positive");
  if (c.train_steps < 0) fail("train.steps must be non-negative");
  if (c.model.draws < 1) fail("model.draws must be positive");
  if (c.sample_steps < 1) fail("augment.sample_steps must be positive");
  if (c.eval_stride < 1) fail("evaluate.stride must be positive");
  if (c.stub_fixtures.empty() && c.remote_argv.empty()) {
    fail("no client backend configured: set clients.stub_fixtures, clients.remote.argv or --stub-fixtures");
  }
  if (!c.stub_fixtures.empty() && !fs::exists(c.stub_fixtures)) {
    fail("stub fixture file '" + c.stub_fixtures.string() + "' does not exist");
  }
  try {
    diffusion::DenoiserModel probe(diffusion::DenoiserConfig{c.model.dim, 1, c.model.heads, c.model.patch,
                                                             c.model.channels, 1, 1.0, 1, 1, 1});
  } catch (const ParameterError& e) {
    fail(std::string("model: ") + e.what());
  }
}

// --- run machinery ---------------------------------------------------------

namespace {

constexpr const char* kManifest = "stage_manifest.json";
constexpr const char* kLedger = "errors.json";

std::string file_hash(const fs::path& p) { return Sha256().update_file(p).hex(); }

// Hash over relative paths and contents of every regular file under `roots`,
// skipping stage manifests.
std::string hash_tree(const std::vector<fs::path>& roots) {
  std::vector<std::pair<std::string, fs::path>> files;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    const fs::path& root = roots[i];
    if (fs::is_regular_file(root)) {
      files.emplace_back(std::to_string(i) + ":" + root.filename().string(), root);
      continue;
    }
    if (!fs::is_directory(root)) continue;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file() || e.path().filename() == kManifest) continue;
      files.emplace_back(std::to_string(i) + ":" + fs::relative(e.path(), root).generic_string(), e.path());
    }
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& [rel, path] : files) {
    h.update(rel);
    h.update(std::string_view("\0", 1));
    h.update(file_hash(path));
    h.update("\n");
  }
  return h.hex();
}

std::optional<json> read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw SaveError("cannot write '" + p.string() + "'");
  out << j.dump(2) << '\n';
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ClientError*>(&e)) return "client";
  if (dynamic_cast<const UnusableEpisode*>(&e)) return "unusable";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const LoadError*>(&e)) return "load";
  if (dynamic_cast<const SaveError*>(&e)) return "save";
  if (dynamic_cast<const PackingError*>(&e)) return "packing";
  if (dynamic_cast<const BudgetError*>(&e)) return "budget";
  if (dynamic_cast<const diffusion::TrainingError*>(&e)) return "training";
  if (dynamic_cast<const PreconditionError*>(&e)) return "precondition";
  if (dynamic_cast<const Error*>(&e)) return "error";
  return "internal";
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. fn must not throw.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (k <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < k; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string chunk_dir_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "chunk_%03d", k);
  return buf;
}

std::vector<fs::path> chunk_dirs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("chunk_", 0) == 0) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Context {
  const PipelineConfig& cfg;
  std::ostream& log;
  const ClientSet* override_clients = nullptr;
  std::optional<ClientSet> owned;
  std::string fingerprint;

  std::uint64_t seed() const { return *cfg.seed; }
  fs::path dir(Stage s) const { return cfg.output_dir / to_string(s); }
  fs::path pool_dir() const { return cfg.pool_dir.empty() ? cfg.output_dir / "pool" : cfg.pool_dir; }
  fs::path episode_manifest(const std::string& id) const {
    return dir(Stage::kIngest) / "episodes" / id / kEpisodeManifest;
  }

  const ClientSet& clients() {
    if (override_clients) return *override_clients;
    if (!owned) {
      try {
        if (!cfg.stub_fixtures.empty()) {
          owned = ClientSet::from(StubBackend::from_file(cfg.stub_fixtures));
        } else {
          owned = ClientSet::from(
              std::make_shared<RemoteBackend>(cfg.remote_argv, cfg.output_dir / ".remote", cfg.remote_passthrough));
        }
      } catch (const Error& e) {
        throw ConfigError(std::string("cannot start client backend: ") + e.what());
      }
    }
    return *owned;
  }

  const std::string& client_fingerprint() {
    if (fingerprint.empty()) {
      if (override_clients) {
        const auto info = override_clients->reasoner ? override_clients->reasoner->info() : BackendInfo{"custom", ""};
        fingerprint = "override:" + info.backend + ":" + info.version;
      } else if (!cfg.stub_fixtures.empty()) {
        fingerprint = "stub:" + file_hash(cfg.stub_fixtures);
      } else {
        fingerprint = "remote:" + json(cfg.remote_argv).dump() + cfg.remote_passthrough.dump();
      }
    }
    return fingerprint;
  }
};

json ledger_json(const std::vector<LedgerEntry>& entries) {
  json out = json::array();
  for (const auto& e : entries) {
    out.push_back({{"episode_id", e.episode_id}, {"stage", e.stage}, {"kind", e.kind}, {"message", e.message}});
  }
  return out;
}

std::vector<LedgerEntry> ledger_from_json(const json& j) {
  std::vector<LedgerEntry> out;
  for (const auto& e : j) {
    out.push_back({e.at("episode_id").get<std::string>(), e.at("stage").get<std::string>(),
                   e.at("kind").get<std::string>(), e.at("message").get<std::string>()});
  }
  return out;
}

/// What a stage body reports back.
struct StageResult {
  std::vector<std::string> succeeded;
  std::vector<LedgerEntry> errors;
  json extra = json::object();
};

/// Per-episode jobs with a shared error ledger; results keep input order.
template <typename Fn>
StageResult run_jobs(Stage stage, const std::vector<std::string>& ids, int workers, Fn fn) {
  std::vector<std::optional<LedgerEntry>> errs(ids.size());
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    try {
      fn(ids[i]);
    } catch (const std::exception& e) {
      errs[i] = LedgerEntry{ids[i], to_string(stage), error_kind(e), e.what()};
    }
  });
  StageResult r;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (errs[i]) {
      r.errors.push_back(*errs[i]);
    } else {
      r.succeeded.push_back(ids[i]);
    }
  }
  return r;
}

json require_upstream(const Context& ctx, Stage up, Stage me) {
  const fs::path p = ctx.dir(up) / kManifest;
  auto m = read_json(p);
  if (!m || !m->contains("outputs_hash")) {
    throw ConfigError("stage '" + to_string(me) + "' needs the output of stage '" + to_string(up) +
                      "' (no manifest at " + p.string() + "); run `--stage " + to_string(up) + "` first");
  }
  return *m;
}

std::vector<std::string> succeeded_of(const json& manifest) {
  return manifest.value("succeeded", std::vector<std::string>{});
}

std::vector<ConditioningVideo> load_conditioning(const Context& ctx, const Episode& ep) {
  std::vector<ConditioningVideo> out;
  for (const auto& v : ep.views) {
    out.push_back(load_conditioning_video(ctx.dir(Stage::kSegment) / ep.id / v.role.str() / "conditioning" /
                                          kConditioningManifest));
  }
  return out;
}

std::vector<const Video*> view_frames(const Episode& ep) {
  std::vector<const Video*> out;
  for (const auto& v : ep.views) out.push_back(&v.frames);
  return out;
}

// --- stage bodies ----------------------------------------------------------

StageResult do_ingest(Context& ctx, const fs::path& dir) {
  const fs::path src = ctx.cfg.episodes_dir;
  if (!fs::is_directory(src)) throw ConfigError("episodes directory '" + src.string() + "' does not exist");
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(src)) {
    if (e.is_directory() && fs::exists(e.path() / kEpisodeManifest)) names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  std::vector<std::string> decisions(names.size());
  std::vector<std::string> loaded_ids(names.size());
  auto idx = [&](const std::string& name) {
    return static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), name) - names.begin());
  };
  StageResult r = run_jobs(Stage::kIngest, names, ctx.cfg.workers, [&](const std::string& name) {
    Episode ep = load_episode(src / name / kEpisodeManifest);
    if (ep.id != name) throw ValidationError("episode id '" + ep.id + "' differs from its directory name");
    const CurationDecision d = curate_length(ep, ctx.cfg.min_frames, ctx.cfg.max_frames);
    decisions[idx(name)] = to_string(d.action);
    if (d.action == CurationDecision::Action::kDiscard) return;
    save_artifact(apply_curation(ep, d), dir / "episodes" / ep.id);
  });
  json curation = json::object();
  std::vector<std::string> kept;
  for (const auto& id : r.succeeded) {
    curation[id] = decisions[idx(id)];
    if (decisions[idx(id)] != "discard") kept.push_back(id);
  }
  r.succeeded = kept;
  r.extra["curation"] = curation;
  return r;
}

StageResult do_segment(Context& ctx, const fs::path& dir, const std::map<Stage, json>& up) {
  const auto ids = succeeded_of(up.at(Stage::kIngest));
  const ClientSet& clients = ctx.clients();
  return run_jobs(Stage::kSegment, ids, ctx.cfg.workers, [&](const std::string& id) {
    const Episode ep = load_episode(ctx.episode_manifest(id));
    SegmentationConfig sc = ctx.cfg.segmentation;
    sc.seed = derive_seed(ctx.seed(), "segment/" + id);
    const EpisodeSegmentation seg = segment_episode(ep, clients, sc);
    json views = json::array();
    for (const auto& v : ep.views) {
      const ViewSegmentation& vs = seg.views.at(v.role);
      const fs::path vd = dir / id / v.role.str();
      save_artifact(vs.robot, vd / "robot");
      save_artifact(vs.object, vd / "object");
      save_artifact(build_conditioning_video(v, merge_entities(vs.robot, vs.object)), vd / "conditioning");
      views.push_back({{"role", v.role.str()},
                       {"robot_anchor", vs.robot.anchor_index},
                       {"object_anchor", vs.object.anchor_index},
                       {"object_absent", vs.object.entity_absent}});
    }
    json windows = json::array();
    for (const auto& w : seg.windows) {
      windows.push_back({{"start", w.start},
                         {"end", w.end},
                         {"close_idx", w.close_idx},
                         {"open_idx", w.open_idx ? json(*w.open_idx) : json(nullptr)}});
    }
    write_json(dir / id / "segmentation.json",
               {{"label", seg.label},
                {"label_source", seg.label_source == LabelSource::kWrist ? "wrist" : "third_person"},
                {"full_clip_fallback", seg.full_clip_fallback},
                {"windows", windows},
                {"views", views}});
  });
}

StageResult do_curate_pool(Context& ctx, const fs::path& dir, const std::map<Stage, json>& up) {
  const auto ids = succeeded_of(up.at(Stage::kIngest));
  const ClientSet& clients = ctx.clients();
  const auto allowlist = load_allowlist(ctx.cfg.allowlist.empty() ? default_allowlist_path() : ctx.cfg.allowlist);
  std::vector<std::vector<IdentityAsset>> found(ids.size());
  StageResult r = run_jobs(Stage::kCuratePool, ids, ctx.cfg.workers, [&](const std::string& id) {
    const Episode ep = load_episode(ctx.episode_manifest(id));
    std::vector<IdentityAsset> assets;
    for (const auto& v : ep.views) {
      for (int t : uniform_sample_indices(v.frame_count(), ctx.cfg.pool_frames_per_view)) {
        const PanopticResult pan = clients.panoptic->panoptic_segment({id, v.role, t}, v.frames[t]);
        auto got = harvest_assets(v.frames[t], pan, allowlist, {id, v.role, t}, ctx.cfg.max_bg_fraction);
        std::move(got.begin(), got.end(), std::back_inserter(assets));
      }
    }
    const auto i = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
    found[i] = std::move(assets);
  });
  std::vector<IdentityAsset> candidates;
  for (auto& f : found) std::move(f.begin(), f.end(), std::back_inserter(candidates));
  const std::size_t n_candidates = candidates.size();
  ScoreOutcome scored = score_assets(std::move(candidates), *clients.iqa, *clients.clip);
  IdentityPool pool = filter_cascade(std::move(scored.scored), ctx.cfg.percents);
  pool.report.dropped_unscored = static_cast<int>(scored.dropped.size());
  const fs::path pd = ctx.pool_dir();
  std::error_code ec;
  fs::remove(pd / "pool.json", ec);
  fs::remove_all(pd / "assets", ec);
  save_pool(pool, pd);
  json stages = json::array();
  for (const auto& s : pool.report.stages) {
    stages.push_back({{"stage", s.name}, {"input", s.input}, {"removed", s.removed}, {"output", s.output}});
  }
  r.extra = {{"candidates", n_candidates},
             {"dropped_unscored", scored.dropped.size()},
             {"pool_size", pool.assets.size()},
             {"cascade", stages}};
  write_json(dir / "pool_summary.json", r.extra);
  return r;
}

StageResult do_assemble(Context& ctx, const fs::path& dir, const std::map<Stage, json>& up) {
  const auto ids = succeeded_of(up.at(Stage::kSegment));
  const ClientSet& clients = ctx.clients();
  const IdentityPool pool = load_pool(ctx.pool_dir());
  AssemblyConfig ac = ctx.cfg.assembly;
  ac.packing.max_identities = ac.max_identities;
  return run_jobs(Stage::kAssemble, ids, ctx.cfg.workers, [&](const std::string& id) {
    const Episode ep = load_episode(ctx.episode_manifest(id));
    const auto conds = load_conditioning(ctx, ep);
    const int T = ep.frame_count();
    const Video stitched = stitch_chunk(view_frames(ep), Chunk{0, T, T}, ac.expected_views);
    const CallContext call{id, ep.views.front().role, -1};
    const std::string scene = clients.captioner->caption_episode(call, stitched, CaptionTemplate::kScene);
    const ChunkPlan plan = plan_chunks(T, ctx.cfg.max_chunk);
    const CaptionTemplate action_t =
        plan.chunks.size() == 1 ? CaptionTemplate::kAction : CaptionTemplate::kActionChunked;
    json actions = json::array();
    for (std::size_t k = 0; k < plan.chunks.size(); ++k) {
      const Chunk& c = plan.chunks[k];
      const Video clip(stitched.begin() + c.start, stitched.begin() + c.end);
      const std::string action = clients.captioner->caption_episode({id, call.view, c.start}, clip, action_t);
      const ConditioningBundle b = assemble_bundle(conds, pool.assets, compose_prompt(scene, action), c,
                                                   chunk_seed(ctx.seed(), id, static_cast<int>(k)),
                                                   ctx.cfg.n_identities, ac);
      save_bundle(b, dir / id / chunk_dir_name(static_cast<int>(k)));
      actions.push_back(action);
    }
    write_json(dir / id / "captions.json", {{"scene", scene}, {"actions", actions}});
  });
}

struct TrainItem {
  ConditioningBundle bundle;
  codec::LatentVideo target;
};

StageResult do_train(Context& ctx, const fs::path& dir, const std::map<Stage, json>& up) {
  const auto ids = succeeded_of(up.at(Stage::kAssemble));
  std::vector<TrainItem> items;
  for (const auto& id : ids) {
    const Episode ep = load_episode(ctx.episode_manifest(id));
    for (const auto& cd : chunk_dirs(ctx.dir(Stage::kAssemble) / id)) {
      TrainItem it;
      it.bundle = load_bundle(cd);
      const Video target = stitch_chunk(view_frames(ep), it.bundle.chunk, it.bundle.n_views);
      it.target = codec::encode(target, it.bundle.mask_latent.spatial_factor);
      items.push_back(std::move(it));
    }
  }
  StageResult r;
  if (items.empty()) {
    r.errors.push_back({"*", to_string(Stage::kTrainToy), "no-data", "no assembled bundles to train on"});
    return r;
  }
  diffusion::DenoiserConfig mc = ctx.cfg.model;
  mc.seed = derive_seed(ctx.seed(), "model");
  diffusion::DenoiserModel model(mc);
  diffusion::TrainState state(derive_seed(ctx.seed(), "train"));
  diffusion::TrainingLog log(dir / "train_log.jsonl");
  try {
    for (int s = 0; s < ctx.cfg.train_steps; ++s) {
      const TrainItem& it = items[static_cast<std::size_t>(s) % items.size()];
      const auto res = diffusion::training_step(model, it.bundle, it.target, state);
      log.append(state.step, res.loss, res.grad_norm, state.seed);
    }
  } catch (const diffusion::TrainingError& e) {
    r.errors.push_back({"*", to_string(Stage::kTrainToy), "training", e.what()});
    return r;
  }
  diffusion::save_checkpoint(dir / "model.ckpt", model, state);
  r.succeeded = ids;
  const auto& h = state.loss_history;
  r.extra = {{"bundles", items.size()},
             {"steps", ctx.cfg.train_steps},
             {"trainable_parameters", model.trainable_count()},
             {"first_loss", h.empty() ? json(nullptr) : json(h.front())},
             {"last_loss", h.empty() ? json(nullptr) : json(h.back())}};
  return r;
}

StageResult do_augment(Context& ctx, const fs::path& dir, const std::map<Stage, json>& up) {
  const auto ids = succeeded_of(up.at(Stage::kTrainToy));
  const auto ck = diffusion::load_checkpoint(ctx.dir(Stage::kTrainToy) / "model.ckpt");
  return run_jobs(Stage::kAugment, ids, ctx.cfg.workers, [&](const std::string& id) {
    const Episode ep = load_episode(ctx.episode_manifest(id));
    const auto conds = load_conditioning(ctx, ep);
    Episode out = ep;
    out.source = "augmented:" + ep.source;
    for (auto& v : out.views) v.frames.clear();
    for (const auto& cd : chunk_dirs(ctx.dir(Stage::kAssemble) / id)) {
      const ConditioningBundle b = load_bundle(cd);
      const auto latent = diffusion::sample(ck.model, b, ctx.cfg.sample_steps, derive_seed(b.seed, "sample"));
      const Video frames = codec::decode(latent).to_frames();
      for (int t = 0; t < b.chunk.length(); ++t) {
        const auto slots = unstitch_views(frames[t], b.n_views);
        for (std::size_t v = 0; v < out.views.size(); ++v) {
          // Robot and object pixels come from the source episode.
          Image img = slots[v];
          const Image& src = ep.views[v].frames[b.chunk.start + t];
          const Mask& keep = conds[v].keep_mask[b.chunk.start + t];
          for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
              if (keep.get(y, x)) std::copy_n(src.at(y, x), 3, img.at(y, x));
          out.views[v].frames.push_back(std::move(img));
        }
      }
    }
    save_artifact(out, dir / id);
  });
}

StageResult do_evaluate(Context& ctx, const fs::path& dir, const std::map<Stage, json>& up) {
  const auto ids = succeeded_of(up.at(Stage::kAugment));
  std::vector<Episode> generated, references;
  StageResult r = run_jobs(Stage::kEvaluate, ids, 1, [&](const std::string& id) {
    Episode g = load_episode(ctx.dir(Stage::kAugment) / id / kEpisodeManifest);
    Episode ref = load_episode(ctx.episode_manifest(id));
    generated.push_back(std::move(g));
    references.push_back(std::move(ref));
  });
  eval::MetricRegistry registry;
  registry.add(std::make_shared<eval::MvMatMetric>(ctx.clients().matcher, ctx.cfg.eval_stride,
                                                   ctx.cfg.match_threshold, ctx.cfg.workers));
  registry.add(std::make_shared<eval::MseStandinMetric>());
  const auto report = eval::evaluate_set(generated, &references, registry, ctx.cfg.metrics);
  eval::write_report(report, dir);
  for (const auto& row : report.rows) {
    if (row.status.rfind("error", 0) == 0) {
      r.errors.push_back({"*", to_string(Stage::kEvaluate), "metric", row.metric + ": " + row.status});
    }
  }
  return r;
}

// --- stage wrapper ---------------------------------------------------------

std::vector<Stage> upstream_of(Stage s) {
  switch (s) {
    case Stage::kIngest: return {};
    case Stage::kSegment: return {Stage::kIngest};
    case Stage::kCuratePool: return {Stage::kIngest};
    case Stage::kAssemble: return {Stage::kIngest, Stage::kSegment, Stage::kCuratePool};
    case Stage::kTrainToy: return {Stage::kIngest, Stage::kAssemble};
    case Stage::kAugment: return {Stage::kIngest, Stage::kSegment, Stage::kAssemble, Stage::kTrainToy};
    case Stage::kEvaluate: return {Stage::kIngest, Stage::kAugment};
    case Stage::kAll: break;
  }
  return {};
}

bool uses_clients(Stage s) {
  return s == Stage::kSegment || s == Stage::kCuratePool || s == Stage::kAssemble || s == Stage::kEvaluate;
}

json config_section(const PipelineConfig& cfg, Stage s) {
  const json all = to_json(cfg);
  switch (s) {
    case Stage::kIngest: return all.at("curation");
    case Stage::kSegment: return all.at("segmentation");
    case Stage::kCuratePool: {
      json j = all.at("pool");
      const fs::path al = cfg.allowlist.empty() ? default_allowlist_path() : cfg.allowlist;
      j["allowlist_hash"] = fs::exists(al) ? file_hash(al) : "missing";
      j.erase("allowlist");
      return j;
    }
    case Stage::kAssemble: return all.at("assembly");
    case Stage::kTrainToy: return {{"model", all.at("model")}, {"train", all.at("train")}};
    case Stage::kAugment: return all.at("augment");
    case Stage::kEvaluate: {
      json j = all.at("evaluate");
      return j;
    }
    case Stage::kAll: break;
  }
  return json::object();
}

StageOutcome run_stage(Context& ctx, Stage s) {
  const fs::path dir = ctx.dir(s);
  std::map<Stage, json> up;
  json inputs = {{"stage", to_string(s)}, {"seed", ctx.seed()}, {"config", config_section(ctx.cfg, s)}};
  json up_hashes = json::object();
  for (Stage u : upstream_of(s)) {
    if (u == Stage::kCuratePool && !fs::exists(ctx.dir(u) / kManifest) && fs::exists(ctx.pool_dir() / "pool.json")) {
      // A pool curated elsewhere is an external input.
      up_hashes["pool"] = hash_tree({ctx.pool_dir()});
      continue;
    }
    up[u] = require_upstream(ctx, u, s);
    up_hashes[to_string(u)] = up[u].at("outputs_hash");
  }
  inputs["upstream"] = up_hashes;
  if (s == Stage::kIngest) inputs["episodes"] = hash_tree({ctx.cfg.episodes_dir});
  if (uses_clients(s)) inputs["clients"] = ctx.client_fingerprint();
  const std::string inputs_hash = sha256_hex(inputs.dump());

  std::vector<fs::path> roots = {dir};
  if (s == Stage::kCuratePool) roots = {dir, ctx.pool_dir() / "pool.json", ctx.pool_dir() / "assets"};

  StageOutcome outcome;
  outcome.stage = s;
  if (auto m = read_json(dir / kManifest);
      m && m->value("inputs_hash", std::string()) == inputs_hash &&
      m->value("outputs_hash", std::string()) == hash_tree(roots)) {
    outcome.up_to_date = true;
    outcome.succeeded = succeeded_of(*m);
    outcome.errors = ledger_from_json(m->value("errors", json::array()));
    ctx.log << to_string(s) << ": up-to-date\n";
    return outcome;
  }

  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir, ec);
  if (ec) throw SaveError("cannot create stage directory '" + dir.string() + "'");
  const auto t0 = std::chrono::steady_clock::now();
  StageResult r;
  switch (s) {
    case Stage::kIngest: r = do_ingest(ctx, dir); break;
    case Stage::kSegment: r = do_segment(ctx, dir, up); break;
    case Stage::kCuratePool: r = do_curate_pool(ctx, dir, up); break;
    case Stage::kAssemble: r = do_assemble(ctx, dir, up); break;
    case Stage::kTrainToy: r = do_train(ctx, dir, up); break;
    case Stage::kAugment: r = do_augment(ctx, dir, up); break;
    case Stage::kEvaluate: r = do_evaluate(ctx, dir, up); break;
    case Stage::kAll: break;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(dir / kLedger, ledger_json(r.errors));
  json manifest = {{"stage", to_string(s)},
                   {"status", r.errors.empty() ? "ok" : "partial"},
                   {"inputs_hash", inputs_hash},
                   {"inputs", inputs},
                   {"outputs_hash", hash_tree(roots)},
                   {"seeds", {{"base", ctx.seed()}}},
                   {"succeeded", r.succeeded},
                   {"errors", ledger_json(r.errors)},
                   {"summary", r.extra},
                   {"timings", {{"seconds", seconds}}}};
  write_json(dir / kManifest, manifest);
  outcome.succeeded = r.succeeded;
  outcome.errors = r.errors;
  ctx.log << to_string(s) << ": " << r.succeeded.size() << " ok, " << r.errors.size() << " failed";
  if (!r.errors.empty()) ctx.log << " (ledger: " << (dir / kLedger).string() << ")";
  ctx.log << '\n';
  for (const auto& e : r.errors) ctx.log << "  " << e.episode_id << " [" << e.kind << "] " << e.message << '\n';
  return outcome;
}

}  // namespace

RunResult run(const PipelineConfig& config, Stage stage, std::ostream& log, const ClientSet* clients) {
  validate_config(config);
  Context ctx{config, log, clients, std::nullopt, {}};
  std::vector<Stage> todo;
  if (stage == Stage::kAll) {
    for (Stage s : stage_order())
      if (config.stage_enabled(s)) todo.push_back(s);
  } else {
    todo.push_back(stage);
  }
  RunResult result;
  for (Stage s : todo) {
    result.stages.push_back(run_stage(ctx, s));
    result.exit_code = std::max(result.exit_code, result.stages.back().exit_code());
  }
  return result;
}

}  // namespace mvaug::pipeline
