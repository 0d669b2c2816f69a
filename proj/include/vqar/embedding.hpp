// Copyright 2026 The vqar Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqar/error.hpp"
#include "vqar/text.hpp"

namespace vqar {

struct EmbeddingVector {
  std::vector<double> values;

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }

  bool degenerate() const {
    for (double v : values)
      if (v != 0.0) return false;
    return true;
  }

  std::size_t dimension() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

// Cosine similarity; 0 when either vector is all-zero.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.degenerate() || b.degenerate() || a.dimension() != b.dimension()) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  double c = dot / (a.norm() * b.norm());
  return std::clamp(c, -1.0, 1.0);
}

// Maps texts to vectors. Implementations must be deterministic and safe to
// call from several threads at once.
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const = 0;

  // Short human-readable identity, recorded in config metadata.
  virtual std::string describe() const = 0;

  EmbeddingVector embed(std::string_view text) const {
    std::string t(text);
    return embed_batch(std::span<const std::string>(&t, 1)).front();
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Signed feature hashing of lowercased word tokens (stopwords kept).
//
// For token t: h = splitmix64(fnv1a64(t) ^ seed); bucket = h mod dimension;
// sign = +1 if the top bit of h is clear, else -1. Counts are accumulated and
// the result is unit-normalized; an empty token stream (or one whose signed
// counts cancel) gives the zero vector.
class HashingEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 1024;
  static constexpr std::uint64_t kDefaultSeed = 0x5EEDC0DE5EEDC0DEULL;

  explicit HashingEmbedder(std::size_t dimension = kDefaultDimension,
                           std::uint64_t seed = kDefaultSeed)
      : dimension_(dimension), seed_(seed) {
    if (dimension_ == 0) throw ConfigError("embedding dimension must be positive");
  }

  EmbeddingVector embed_one(std::string_view text) const {
    EmbeddingVector v;
    v.values.assign(dimension_, 0.0);
    for (const auto& tok : text::word_tokens(text)) {
      auto h = splitmix64(text::fnv1a64(tok) ^ seed_);
      v.values[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
    }
    double n = v.norm();
    if (n > 0.0)
      for (auto& x : v.values) x /= n;
    return v;
  }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::string describe() const override {
    return "hashing(fnv1a64+splitmix64, dim=" + std::to_string(dimension_) +
           ", seed=" + std::to_string(seed_) + ")";
  }

  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

}  // namespace vqar
