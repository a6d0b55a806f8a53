// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Toy inpainting video denoiser. Each latent position carries 2C channels:
// video positions hold (noisy, mask latent) and the optional identity frame
// holds (zeros, identity latent). Positions are cut into p x p patches and
// linearly embedded, then a text token, a global first-frame token, the
// identity tokens and the video tokens share one self-attention stack. Only
// video rows are unpatchified and only they enter the loss.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mvaug/autograd.hpp"
#include "mvaug/conditioning.hpp"
#include "mvaug/latent_codec.hpp"

namespace mvaug::diffusion {

class TrainingError : public Error { using Error::Error; };

enum class TrainableScope { kAdapters, kFull };

struct DenoiserConfig {
  int dim = 128;
  int blocks = 4;
  int heads = 4;
  int patch = 2;
  int channels = codec::kChannels;
  int lora_rank = 8;
  double lora_alpha = 8.0;
  int ffn_mult = 4;
  int text_buckets = 256;
  int max_text_tokens = 16;
  double learning_rate = 1e-3;
  int draws = 1;  // (t, noise) pairs averaged per training step
  // kAdapters: LoRA, patchify, text table and global projection train; the
  // rest is frozen. kFull trains everything.
  TrainableScope scope = TrainableScope::kAdapters;
  std::uint64_t seed = 0;
};

std::string to_string(TrainableScope s);
TrainableScope parse_scope(const std::string& s);

class DenoiserModel {
 public:
  explicit DenoiserModel(const DenoiserConfig& config);

  const DenoiserConfig& config() const { return config_; }
  std::vector<ag::Parameter>& params() { return params_; }
  const std::vector<ag::Parameter>& params() const { return params_; }
  ag::Parameter& param(const std::string& name);
  const ag::Parameter& param(const std::string& name) const;

  /// Fills every adapter B with N(0, stddev^2). Tests use this to leave the
  /// zero-adapter state.
  void randomize_adapters(std::uint64_t seed, double stddev);
  void zero_grad();
  std::size_t trainable_count() const;

 private:
  ag::Parameter& add(std::string name, int rows, int cols, bool trainable);

  DenoiserConfig config_;
  std::vector<ag::Parameter> params_;
};

struct TokenCounts {
  int text = 0;
  int global = 0;
  int identity = 0;
  int video = 0;
  int total() const { return text + global + identity + video; }
};

struct ForwardResult {
  codec::LatentVideo prediction;  // F video frames only
  TokenCounts tokens;
};

/// Velocity prediction at time t. With use_adapters false the LoRA branches
/// are skipped, which yields the frozen base model.
ForwardResult forward_denoise(const DenoiserModel& model, const codec::LatentVideo& noisy,
                              const ConditioningBundle& bundle, double t, bool use_adapters = true);

struct LossResult {
  double loss = 0.0;
  std::size_t loss_terms = 0;
  double grad_norm = 0.0;
  TokenCounts tokens;
};

/// Rectified-flow loss for one (t, noise) draw. Gradients are zeroed and then
/// accumulated into the trainable parameters.
LossResult loss_and_grad(DenoiserModel& model, const ConditioningBundle& bundle, const codec::LatentVideo& target,
                         const codec::LatentVideo& noise, double t);

/// Loss only, no gradient bookkeeping.
double evaluate_loss(const DenoiserModel& model, const ConditioningBundle& bundle, const codec::LatentVideo& target,
                     const codec::LatentVideo& noise, double t);

struct TrainState {
  long step = 0;
  std::uint64_t seed = 0;
  std::mt19937_64 rng;
  std::vector<double> loss_history;

  explicit TrainState(std::uint64_t s = 0) : seed(s), rng(s) {}
};

/// Gaussian latent shaped like `like`.
codec::LatentVideo gaussian_like(const codec::LatentVideo& like, std::mt19937_64& rng);

/// Draws t ~ U[0, 1) (unless given) and noise from state.rng, then takes one
/// Adam step. Throws TrainingError on a non-finite loss or gradient.
LossResult training_step(DenoiserModel& model, const ConditioningBundle& bundle, const codec::LatentVideo& target,
                         TrainState& state, std::optional<double> t = std::nullopt);

/// Euler integration from noise at t = 0 to t = 1; identity conditioning is
/// fed at every step.
codec::LatentVideo sample(const DenoiserModel& model, const ConditioningBundle& bundle, int steps,
                          std::uint64_t seed);

void save_checkpoint(const std::filesystem::path& path, const DenoiserModel& model, const TrainState& state);

struct Checkpoint {
  DenoiserModel model;
  TrainState state;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Append-only JSON lines log of training steps.
class TrainingLog {
 public:
  explicit TrainingLog(std::filesystem::path path);
  void append(long step, double loss, double grad_norm, std::uint64_t seed);

 private:
  std::filesystem::path path_;
};

}  // namespace mvaug::diffusion
