// Copyright 2026 The intentfuse Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef INTENTFUSE_RNG_H_
#define INTENTFUSE_RNG_H_

#include <cstdint>
#include <string_view>
#include <vector>

namespace intentfuse {

// Counter-based generator: every draw is a pure function of
// (seed, purpose, substream, counter), so independent consumers
// (sampler, dropout, mixup, reparameterisation, data synthesis) never
// share or perturb each other's streams, and a stream can be resumed
// exactly by restoring its counter. Output is identical across
// platforms for a given key.
class RngStream {
 public:
  static constexpr const char* kAlgorithm = "splitmix64-counter-v1";

  RngStream(std::uint64_t seed, std::string_view purpose,
            std::uint64_t substream = 0);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via Box-Muller (cosine branch, one pair of
  // uniforms per draw; nothing is cached).
  double normal();

  // Beta(a, b) via Johnk's rejection method. Requires a, b > 0.
  double beta(double a, double b);

  bool bernoulli(double p);

  // Unbiased integer in [0, n) by rejection sampling.
  std::size_t index_below(std::size_t n);

  // Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// FNV-1a 64-bit hash; also used for dataset/file fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace intentfuse

#endif  // INTENTFUSE_RNG_H_
