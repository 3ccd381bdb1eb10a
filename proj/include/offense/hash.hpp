/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace offense {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

// Incremental 64-bit FNV-1a. Used for file checksums and content hashes;
// stable across platforms and releases.
class Fnv1a64 {
 public:
  explicit Fnv1a64(std::uint64_t basis = kFnvOffsetBasis) : state_(basis) {}

  void update(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = state_;
    for (std::size_t i = 0; i < size; ++i) {
      h ^= p[i];
      h *= kFnvPrime;
    }
    state_ = h;
  }
  void update(std::string_view s) { update(s.data(), s.size()); }

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis = kFnvOffsetBasis) {
  Fnv1a64 h(basis);
  h.update(s);
  return h.value();
}

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Child seeds: every stage and every parallel unit gets its own stream
// derived from the master seed, never from scheduling order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return mix64(seed ^ fnv1a64(label));
}
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) + index);
}

// Maps a 64-bit value to [0, 1) using its top 53 bits.
constexpr double to_unit_interval(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

std::string hex64(std::uint64_t v);

// Hash of a file's full contents (FNV-1a 64). Throws DataError if unreadable.
std::uint64_t hash_file(const std::string& path);

}  // namespace offense
