// Copyright 2026 The tamperlab Authors. All rights reserved.
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

#include <cstdint>
#include <limits>

namespace tamperlab {

// Salts separating the independent stream families derived from one master
// seed. Changing any of these changes every artifact produced downstream.
inline constexpr std::uint64_t kTrainEnvSalt = 0x7472'6169'6e65'6e76ULL;
inline constexpr std::uint64_t kTrainAgentSalt = 0x7472'6169'6e61'6774ULL;
inline constexpr std::uint64_t kEvalEnvSalt = 0x6576'616c'656e'7600ULL;
inline constexpr std::uint64_t kEvalAgentSalt = 0x6576'616c'6167'7400ULL;
inline constexpr std::uint64_t kUnfrozenExplorationSalt = 0x6366'6578'706c'6f72ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for stream `index` of the family `salt` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt,
                                    std::uint64_t index) {
  return mix64(mix64(mix64(master) ^ salt) ^ index);
}

/// A reproducible random stream: SplitMix64 over the derived seed. Seeding
/// is a single word, which matters because every episode opens fresh streams.
/// The conversions to doubles and bounded integers are exact and portable.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}
  Stream(std::uint64_t master, std::uint64_t salt, std::uint64_t index)
      : state_(derive_seed(master, salt, index)) {}

  std::uint64_t next_u64() {
    const std::uint64_t out = mix64(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return out;
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Rejection keeps it exactly unbiased.
  int below(int n) {
    const auto bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<int>(x % bound);
  }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::uint64_t state_;
};

}  // namespace tamperlab
