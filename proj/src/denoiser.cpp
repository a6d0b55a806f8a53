// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/denoiser.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvaug/hash.hpp"

namespace mvaug::diffusion {

namespace fs = std::filesystem;
using ag::Mat;
using ag::Parameter;
using ag::Tape;
using ag::Var;
using codec::LatentVideo;
using nlohmann::json;

std::string to_string(TrainableScope s) { return s == TrainableScope::kFull ? "full" : "adapters"; }

TrainableScope parse_scope(const std::string& s) {
  if (s == "adapters") return TrainableScope::kAdapters;
  if (s == "full") return TrainableScope::kFull;
  throw ParameterError("unknown trainable scope '" + s + "' (expected adapters or full)");
}

// --- model -----------------------------------------------------------------

Parameter& DenoiserModel::add(std::string name, int rows, int cols, bool trainable) {
  Parameter p;
  p.name = std::move(name);
  p.value = Mat(rows, cols);
  p.grad = Mat(rows, cols);
  p.adam_m = Mat(rows, cols);
  p.adam_v = Mat(rows, cols);
  p.trainable = trainable || config_.scope == TrainableScope::kFull;
  params_.push_back(std::move(p));
  return params_.back();
}

DenoiserModel::DenoiserModel(const DenoiserConfig& config) : config_(config) {
  const int d = config.dim, c = config.channels, p = config.patch, r = config.lora_rank;
  if (d < 6 || d % 2 != 0) throw ParameterError("model width must be even and at least 6");
  if (config.heads < 1 || d % config.heads != 0) throw ParameterError("model width must divide into heads");
  if (config.blocks < 1 || p < 1 || c < 1 || r < 1 || config.ffn_mult < 1) {
    throw ParameterError("model sizes must be positive");
  }
  if (config.text_buckets < 1) throw ParameterError("text bucket count must be positive");

  const int in = 2 * c * p * p, out = c * p * p, hidden = config.ffn_mult * d;
  add("patchify.w", in, d, true);
  add("patchify.b", 1, d, true);
  add("time.w", d, d, false);
  add("text.table", config.text_buckets, d, true);
  add("global.w", c, d, true);
  add("global.b", 1, d, true);
  for (int i = 0; i < config.blocks; ++i) {
    const std::string b = "block" + std::to_string(i) + ".";
    for (const char* w : {"wq", "wk", "wv", "wo"}) add(b + w, d, d, false);
    add(b + "lora_q.a", d, r, true);
    add(b + "lora_q.b", r, d, true);
    add(b + "lora_v.a", d, r, true);
    add(b + "lora_v.b", r, d, true);
    add(b + "ffn.w1", d, hidden, false);
    add(b + "ffn.b1", 1, hidden, false);
    add(b + "ffn.w2", hidden, d, false);
    add(b + "ffn.b2", 1, d, false);
  }
  add("unpatchify.w", d, out, false);
  add("unpatchify.b", 1, out, false);

  // Biases and adapter B start at zero; everything else is N(0, 1/fan_in),
  // except the text table which starts small.
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto ends_with = [](const std::string& s, const char* suffix) {
    const std::size_t n = std::strlen(suffix);
    return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
  };
  for (auto& prm : params_) {
    const bool zero = ends_with(prm.name, ".b") || ends_with(prm.name, ".b1") || ends_with(prm.name, ".b2");
    if (zero) continue;
    const double sd = prm.name == "text.table" ? 0.02 : 1.0 / std::sqrt(static_cast<double>(prm.value.rows));
    for (double& v : prm.value.data) v = sd * n01(rng);
  }
}

Parameter& DenoiserModel::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw LookupError("no parameter named '" + name + "'");
}

const Parameter& DenoiserModel::param(const std::string& name) const {
  return const_cast<DenoiserModel*>(this)->param(name);
}

void DenoiserModel::randomize_adapters(std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, stddev);
  for (auto& p : params_) {
    if (p.name.find(".lora_") != std::string::npos && p.name.back() == 'b' && p.name[p.name.size() - 2] == '.') {
      for (double& v : p.value.data) v = n(rng);
    }
  }
}

void DenoiserModel::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

std::size_t DenoiserModel::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.value.size();
  return n;
}

// --- graph -----------------------------------------------------------------

namespace {

void sinusoid(double pos, int dims, double* out) {
  for (int i = 0; i < dims / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dims);
    out[2 * i] = std::sin(pos * freq);
    out[2 * i + 1] = std::cos(pos * freq);
  }
}

// Writes channel c of latent frame f into columns (col_offset + c) * p * p + dy * p + dx.
void write_patches(const LatentVideo& lat, int f, int col_offset, int p, Mat& rows, int row0) {
  const int pw = lat.width / p;
  for (int c = 0; c < lat.channels; ++c)
    for (int y = 0; y < lat.height; ++y)
      for (int x = 0; x < lat.width; ++x) {
        const int row = row0 + (y / p) * pw + x / p;
        rows(row, (col_offset + c) * p * p + (y % p) * p + x % p) = lat.at(f, c, y, x);
      }
}

LatentVideo read_patches(const Mat& rows, int frames, int channels, int h, int w, int p) {
  LatentVideo out(frames, channels, h, w);
  const int per_frame = (h / p) * (w / p);
  for (int f = 0; f < frames; ++f)
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const int row = f * per_frame + (y / p) * (w / p) + x / p;
          out.at(f, c, y, x) = rows(row, c * p * p + (y % p) * p + x % p);
        }
  return out;
}

std::vector<int> text_ids(const std::string& prompt, int buckets, int max_tokens) {
  std::vector<int> ids;
  std::string word;
  auto flush = [&] {
    if (!word.empty() && static_cast<int>(ids.size()) < max_tokens) {
      ids.push_back(static_cast<int>(fnv1a64(word) % static_cast<std::uint64_t>(buckets)));
    }
    word.clear();
  };
  for (char ch : prompt) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else {
      flush();
    }
  }
  flush();
  return ids;
}

void check_inputs(const DenoiserConfig& cfg, const LatentVideo& noisy, const ConditioningBundle& b) {
  const LatentVideo& m = b.mask_latent;
  if (noisy.channels != cfg.channels || m.channels != cfg.channels) {
    throw PreconditionError("latent channel count does not match the model");
  }
  if (noisy.frames != m.frames) {
    throw PreconditionError("noisy latent has " + std::to_string(noisy.frames) + " frames but mask latent has " +
                            std::to_string(m.frames));
  }
  if (noisy.height != m.height || noisy.width != m.width) {
    throw PreconditionError("noisy and mask latents differ in spatial size");
  }
  if (m.height % cfg.patch != 0 || m.width % cfg.patch != 0) {
    throw PreconditionError("latent size is not divisible by the patch size");
  }
  if (b.identity_latent) {
    const LatentVideo& id = *b.identity_latent;
    if (id.frames != 1) throw PreconditionError("identity latent must be exactly one frame");
    if (id.height != m.height || id.width != m.width || id.channels != m.channels) {
      throw PreconditionError("identity latent shape differs from the video latent");
    }
  }
}

struct Graph {
  Var video_out;  // (F * per_frame) x (C * p * p)
  TokenCounts tokens;
};

Graph build(Tape& tape, DenoiserModel& model, const LatentVideo& noisy, const ConditioningBundle& bundle, double t,
            bool use_adapters) {
  const DenoiserConfig& cfg = model.config();
  check_inputs(cfg, noisy, bundle);
  const int d = cfg.dim, p = cfg.patch, C = cfg.channels;
  const int F = noisy.frames, h = noisy.height, w = noisy.width;
  const int per_frame = (h / p) * (w / p);
  const int n_id = bundle.identity_latent ? 1 : 0;
  const int rows = (n_id + F) * per_frame;

  Mat x_in(rows, 2 * C * p * p);
  Mat pe(rows, d);
  const int d_axis = 2 * (d / 6), d_frame = d - 2 * d_axis;
  auto fill_pe = [&](int row0, int frame) {
    for (int r = 0; r < per_frame; ++r) {
      double* out = &pe(row0 + r, 0);
      sinusoid(frame, d_frame, out);
      sinusoid(r / (w / p), d_axis, out + d_frame);
      sinusoid(r % (w / p), d_axis, out + d_frame + d_axis);
    }
  };
  if (n_id) {
    write_patches(*bundle.identity_latent, 0, C, p, x_in, 0);  // noisy half stays zero
    fill_pe(0, -1);
  }
  for (int f = 0; f < F; ++f) {
    const int row0 = (n_id + f) * per_frame;
    write_patches(noisy, f, 0, p, x_in, row0);
    write_patches(bundle.mask_latent, f, C, p, x_in, row0);
    fill_pe(row0, f);
  }

  Var tok = tape.matmul(tape.constant(std::move(x_in)), tape.param(model.param("patchify.w")));
  tok = tape.add_row(tok, tape.param(model.param("patchify.b")));
  tok = tape.add(tok, tape.constant(std::move(pe)));

  Graph g;
  std::vector<Var> seq;
  const auto ids = text_ids(bundle.prompt, cfg.text_buckets, cfg.max_text_tokens);
  if (!ids.empty()) {
    seq.push_back(tape.mean_rows(tape.gather_rows(tape.param(model.param("text.table")), ids)));
    g.tokens.text = 1;
  }
  Mat pooled(1, C);
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) s += bundle.mask_latent.at(0, c, y, x);
    pooled.data[c] = s / (static_cast<double>(h) * w);
  }
  Var glob = tape.matmul(tape.constant(std::move(pooled)), tape.param(model.param("global.w")));
  seq.push_back(tape.add_row(glob, tape.param(model.param("global.b"))));
  g.tokens.global = 1;
  seq.push_back(tok);
  g.tokens.identity = n_id * per_frame;
  g.tokens.video = F * per_frame;
  const int prefix = g.tokens.text + g.tokens.global;

  Var x = tape.concat_rows(seq);
  Mat tvec(1, d);
  sinusoid(1000.0 * t, d, tvec.data.data());
  x = tape.add_row(x, tape.matmul(tape.constant(std::move(tvec)), tape.param(model.param("time.w"))));

  const int dh = d / cfg.heads;
  const double lora_scale = cfg.lora_alpha / cfg.lora_rank;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int i = 0; i < cfg.blocks; ++i) {
    const std::string b = "block" + std::to_string(i) + ".";
    auto P = [&](const char* name) { return tape.param(model.param(b + name)); };
    Var xn = tape.rms_norm(x);
    Var q = tape.matmul(xn, P("wq"));
    Var k = tape.matmul(xn, P("wk"));
    Var v = tape.matmul(xn, P("wv"));
    if (use_adapters) {
      q = tape.add(q, tape.scale(tape.matmul(tape.matmul(xn, P("lora_q.a")), P("lora_q.b")), lora_scale));
      v = tape.add(v, tape.scale(tape.matmul(tape.matmul(xn, P("lora_v.a")), P("lora_v.b")), lora_scale));
    }
    std::vector<Var> heads;
    for (int hd = 0; hd < cfg.heads; ++hd) {
      Var qh = tape.slice_cols(q, hd * dh, dh);
      Var kh = tape.slice_cols(k, hd * dh, dh);
      Var vh = tape.slice_cols(v, hd * dh, dh);
      Var att = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), attn_scale));
      heads.push_back(tape.matmul(att, vh));
    }
    x = tape.add(x, tape.matmul(tape.concat_cols(heads), P("wo")));
    Var hn = tape.rms_norm(x);
    Var ff = tape.gelu(tape.add_row(tape.matmul(hn, P("ffn.w1")), P("ffn.b1")));
    ff = tape.add_row(tape.matmul(ff, P("ffn.w2")), P("ffn.b2"));
    x = tape.add(x, ff);
  }
  Var video = tape.slice_rows(tape.rms_norm(x), prefix + g.tokens.identity, g.tokens.video);
  g.video_out = tape.add_row(tape.matmul(video, tape.param(model.param("unpatchify.w"))),
                             tape.param(model.param("unpatchify.b")));
  return g;
}

Mat velocity_rows(const LatentVideo& target, const LatentVideo& noise, int p) {
  if (target.frames != noise.frames || target.channels != noise.channels || target.height != noise.height ||
      target.width != noise.width) {
    throw PreconditionError("target and noise latents differ in shape");
  }
  LatentVideo vel = target;
  for (std::size_t i = 0; i < vel.data.size(); ++i) vel.data[i] = target.data[i] - noise.data[i];
  const int per_frame = (target.height / p) * (target.width / p);
  Mat rows(target.frames * per_frame, target.channels * p * p);
  for (int f = 0; f < target.frames; ++f) write_patches(vel, f, 0, p, rows, f * per_frame);
  return rows;
}

LatentVideo mix_noisy(const LatentVideo& target, const LatentVideo& noise, double t) {
  LatentVideo x = target;
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = (1.0 - t) * noise.data[i] + t * target.data[i];
  return x;
}

}  // namespace

ForwardResult forward_denoise(const DenoiserModel& model, const LatentVideo& noisy, const ConditioningBundle& bundle,
                              double t, bool use_adapters) {
  Tape tape;
  // build() only reads the model; gradients stay untouched without backward().
  Graph g = build(tape, const_cast<DenoiserModel&>(model), noisy, bundle, t, use_adapters);
  const auto& cfg = model.config();
  ForwardResult r;
  r.prediction = read_patches(g.video_out.value(), noisy.frames, cfg.channels, noisy.height, noisy.width, cfg.patch);
  r.prediction.source_frames = noisy.source_frames;
  r.prediction.spatial_factor = noisy.spatial_factor;
  r.tokens = g.tokens;
  return r;
}

namespace {

// Adds weight * d(loss)/d(theta) into the trainable gradients.
LossResult accumulate(DenoiserModel& model, const ConditioningBundle& bundle, const LatentVideo& target,
                      const LatentVideo& noise, double t, double weight) {
  if (target.frames != bundle.mask_latent.frames) {
    throw PreconditionError("target has " + std::to_string(target.frames) + " latent frames, bundle has " +
                            std::to_string(bundle.mask_latent.frames));
  }
  Tape tape;
  const Mat vel = velocity_rows(target, noise, model.config().patch);
  Graph g = build(tape, model, mix_noisy(target, noise, t), bundle, t, true);
  Var loss = tape.mse(g.video_out, vel);
  tape.backward(weight == 1.0 ? loss : tape.scale(loss, weight));
  LossResult r;
  r.loss = loss.value().data[0];
  r.loss_terms = vel.size();
  r.tokens = g.tokens;
  return r;
}

double grad_norm(const DenoiserModel& model) {
  double sq = 0.0;
  for (const auto& p : model.params())
    if (p.trainable)
      for (double v : p.grad.data) sq += v * v;
  return std::sqrt(sq);
}

}  // namespace

LossResult loss_and_grad(DenoiserModel& model, const ConditioningBundle& bundle, const LatentVideo& target,
                         const LatentVideo& noise, double t) {
  model.zero_grad();
  LossResult r = accumulate(model, bundle, target, noise, t, 1.0);
  r.grad_norm = grad_norm(model);
  return r;
}

double evaluate_loss(const DenoiserModel& model, const ConditioningBundle& bundle, const LatentVideo& target,
                     const LatentVideo& noise, double t) {
  Tape tape;
  const Mat vel = velocity_rows(target, noise, model.config().patch);
  Graph g = build(tape, const_cast<DenoiserModel&>(model), mix_noisy(target, noise, t), bundle, t, true);
  return tape.mse(g.video_out, vel).value().data[0];
}

LatentVideo gaussian_like(const LatentVideo& like, std::mt19937_64& rng) {
  LatentVideo out(like.frames, like.channels, like.height, like.width);
  out.source_frames = like.source_frames;
  out.spatial_factor = like.spatial_factor;
  std::normal_distribution<double> n01(0.0, 1.0);
  for (double& v : out.data) v = n01(rng);
  return out;
}

LossResult training_step(DenoiserModel& model, const ConditioningBundle& bundle, const LatentVideo& target,
                         TrainState& state, std::optional<double> t) {
  // A step averages `draws` (t, noise) pairs; t is stratified over [0, 1).
  const int k = std::max(1, model.config().draws);
  model.zero_grad();
  LossResult r;
  double tt = 0.0;
  for (int i = 0; i < k; ++i) {
    tt = t ? *t : (i + std::uniform_real_distribution<double>(0.0, 1.0)(state.rng)) / k;
    const LatentVideo noise = gaussian_like(target, state.rng);
    const LossResult one = accumulate(model, bundle, target, noise, tt, 1.0 / k);
    r.loss += one.loss / k;
    r.loss_terms = one.loss_terms;
    r.tokens = one.tokens;
  }
  r.grad_norm = grad_norm(model);
  if (!std::isfinite(r.loss) || !std::isfinite(r.grad_norm)) {
    std::ostringstream msg;
    msg << "non-finite training signal at step " << state.step << " (t=" << tt << ", loss=" << r.loss
        << ", grad_norm=" << r.grad_norm << ", seed=" << state.seed << ")";
    throw TrainingError(msg.str());
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++state.step;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = model.config().learning_rate;
  for (auto& p : model.params()) {
    if (!p.trainable) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      p.adam_m.data[i] = b1 * p.adam_m.data[i] + (1.0 - b1) * g;
      p.adam_v.data[i] = b2 * p.adam_v.data[i] + (1.0 - b2) * g * g;
      p.value.data[i] -= lr * (p.adam_m.data[i] / c1) / (std::sqrt(p.adam_v.data[i] / c2) + eps);
    }
  }
  state.loss_history.push_back(r.loss);
  return r;
}

LatentVideo sample(const DenoiserModel& model, const ConditioningBundle& bundle, int steps, std::uint64_t seed) {
  if (steps < 1) throw ParameterError("sampling needs at least one step");
  std::mt19937_64 rng(seed);
  LatentVideo x = gaussian_like(bundle.mask_latent, rng);
  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    const LatentVideo v = forward_denoise(model, x, bundle, t).prediction;
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += v.data[i] / steps;
  }
  return x;
}

// --- persistence -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'M', 'V', 'A', 'U', 'G', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

json config_json(const DenoiserConfig& c) {
  return {{"dim", c.dim},
          {"blocks", c.blocks},
          {"heads", c.heads},
          {"patch", c.patch},
          {"channels", c.channels},
          {"lora_rank", c.lora_rank},
          {"lora_alpha", c.lora_alpha},
          {"ffn_mult", c.ffn_mult},
          {"text_buckets", c.text_buckets},
          {"max_text_tokens", c.max_text_tokens},
          {"learning_rate", c.learning_rate},
          {"draws", c.draws},
          {"scope", to_string(c.scope)},
          {"seed", c.seed}};
}

DenoiserConfig config_from_json(const json& j) {
  DenoiserConfig c;
  c.dim = j.at("dim").get<int>();
  c.blocks = j.at("blocks").get<int>();
  c.heads = j.at("heads").get<int>();
  c.patch = j.at("patch").get<int>();
  c.channels = j.at("channels").get<int>();
  c.lora_rank = j.at("lora_rank").get<int>();
  c.lora_alpha = j.at("lora_alpha").get<double>();
  c.ffn_mult = j.at("ffn_mult").get<int>();
  c.text_buckets = j.at("text_buckets").get<int>();
  c.max_text_tokens = j.at("max_text_tokens").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.draws = j.value("draws", 1);
  c.scope = parse_scope(j.at("scope").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw LoadError("truncated checkpoint");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1u << 26)) throw LoadError("implausible string length in checkpoint");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw LoadError("truncated checkpoint");
  return s;
}

void put_mat(std::ostream& out, const Mat& m) {
  out.write(reinterpret_cast<const char*>(m.data.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void get_mat(std::istream& in, Mat& m) {
  in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw LoadError("truncated checkpoint");
}

}  // namespace

void save_checkpoint(const fs::path& path, const DenoiserModel& model, const TrainState& state) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SaveError("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  put(out, kCheckpointVersion);
  put_string(out, config_json(model.config()).dump());
  put<std::int64_t>(out, state.step);
  put<std::uint64_t>(out, state.seed);
  std::ostringstream rng;
  rng << state.rng;
  put_string(out, rng.str());
  put<std::uint64_t>(out, state.loss_history.size());
  for (double l : state.loss_history) put(out, l);
  put<std::uint64_t>(out, model.params().size());
  for (const auto& p : model.params()) {
    put_string(out, p.name);
    put<std::int32_t>(out, p.value.rows);
    put<std::int32_t>(out, p.value.cols);
    put<std::uint8_t>(out, p.trainable ? 1 : 0);
    put_mat(out, p.value);
    put_mat(out, p.adam_m);
    put_mat(out, p.adam_v);
  }
  if (!out) throw SaveError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw LoadError("not a checkpoint file");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
  DenoiserConfig cfg;
  try {
    cfg = config_from_json(json::parse(get_string(in)));
  } catch (const json::exception& e) {
    throw LoadError(std::string("bad checkpoint config: ") + e.what());
  }
  Checkpoint ck{DenoiserModel(cfg), TrainState(0)};
  ck.state.step = get<std::int64_t>(in);
  ck.state.seed = get<std::uint64_t>(in);
  std::istringstream rng(get_string(in));
  rng >> ck.state.rng;
  const auto n_loss = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n_loss; ++i) ck.state.loss_history.push_back(get<double>(in));
  const auto n = get<std::uint64_t>(in);
  if (n != ck.model.params().size()) throw LoadError("checkpoint parameter count does not match its config");
  for (auto& p : ck.model.params()) {
    const std::string name = get_string(in);
    const auto rows = get<std::int32_t>(in);
    const auto cols = get<std::int32_t>(in);
    p.trainable = get<std::uint8_t>(in) != 0;
    if (name != p.name || rows != p.value.rows || cols != p.value.cols) {
      throw LoadError("checkpoint parameter '" + name + "' does not match the model layout");
    }
    get_mat(in, p.value);
    get_mat(in, p.adam_m);
    get_mat(in, p.adam_v);
  }
  return ck;
}

TrainingLog::TrainingLog(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path_.parent_path(), ec);
  }
}

void TrainingLog::append(long step, double loss, double grad_norm, std::uint64_t seed) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw SaveError("cannot append to training log '" + path_.string() + "'");
  out << json{{"step", step}, {"loss", loss}, {"grad_norm", grad_norm}, {"seed", seed}}.dump() << '\n';
}

}  // namespace mvaug::diffusion
