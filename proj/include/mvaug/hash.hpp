// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace mvaug {

/// Incremental SHA-256 producing lowercase hex.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::uint8_t> bytes);
  Sha256& update(std::string_view text);
  /// Hashes file contents; throws LoadError if unreadable.
  Sha256& update_file(const std::filesystem::path& path);
  std::string hex();

 private:
  void* ctx_;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// Stable 64-bit FNV-1a, used for bucketing words and deriving sub-seeds.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Derives an independent stream seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace mvaug
