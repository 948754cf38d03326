// Copyright (C) 2026 The Filtra Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace filtra {

// Fixed-size bit vector packed into 64-bit words. Bit i lives in word i / 64
// at position i % 64. Bits past size() are always zero.
class Bitmask {
 public:
  Bitmask() = default;
  explicit Bitmask(std::size_t nbits, bool value = false);

  static constexpr std::size_t words_for(std::size_t nbits) { return (nbits + 63) / 64; }

  std::size_t size() const noexcept { return nbits_; }
  std::size_t n_words() const noexcept { return words_.size(); }
  std::span<std::uint64_t> words() noexcept { return words_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i) noexcept { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset(std::size_t i) noexcept { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

  void fill(bool value);
  std::size_t count() const noexcept;

  Bitmask& operator&=(const Bitmask& other);
  Bitmask& operator|=(const Bitmask& other);
  // Complement within [0, size()).
  void flip();

  // Indices of set bits in ascending order.
  std::vector<std::uint32_t> to_indices() const;

  bool operator==(const Bitmask& other) const = default;

 private:
  void clear_tail();

  std::vector<std::uint64_t> words_;
  std::size_t nbits_ = 0;
};

}  // namespace filtra
