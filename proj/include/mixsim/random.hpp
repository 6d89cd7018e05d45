// Copyright 2026 The mixsim Authors
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
#include <random>
#include <string_view>

namespace mixsim {

// splitmix64 finalizer. Used to derive independent, reproducible streams from
// one run seed without carrying generator state around.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::string_view label) noexcept {
  return mix64(seed ^ mix64(hash_label(label)));
}

constexpr std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t counter,
                                     std::uint64_t salt) noexcept {
  return mix64(mix64(seed ^ salt) + mix64(counter));
}

// Uniform integer in [0, n) keyed by (seed, counter, salt). Lemire's
// multiply-shift; the bias is below 2^-32 for the n used here.
constexpr std::uint64_t counter_uniform(std::uint64_t seed, std::uint64_t counter,
                                        std::uint64_t salt,
                                        std::uint64_t n) noexcept {
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(counter_bits(seed, counter, salt)) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view label) {
  return std::mt19937_64(derive_seed(seed, label));
}

}  // namespace mixsim
