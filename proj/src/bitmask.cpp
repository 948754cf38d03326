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

#include "filtra/bitmask.hpp"

#include <algorithm>
#include <cassert>

namespace filtra {

Bitmask::Bitmask(std::size_t nbits, bool value) : words_(words_for(nbits), value ? ~std::uint64_t{0} : 0), nbits_(nbits) {
  clear_tail();
}

void Bitmask::fill(bool value) {
  std::fill(words_.begin(), words_.end(), value ? ~std::uint64_t{0} : 0);
  clear_tail();
}

std::size_t Bitmask::count() const noexcept {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

Bitmask& Bitmask::operator&=(const Bitmask& other) {
  assert(other.nbits_ == nbits_);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
  return *this;
}

Bitmask& Bitmask::operator|=(const Bitmask& other) {
  assert(other.nbits_ == nbits_);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
  return *this;
}

void Bitmask::flip() {
  for (auto& w : words_) w = ~w;
  clear_tail();
}

std::vector<std::uint32_t> Bitmask::to_indices() const {
  std::vector<std::uint32_t> out;
  out.reserve(count());
  for (std::size_t w = 0; w < words_.size(); ++w) {
    std::uint64_t bits = words_[w];
    while (bits) {
      const int b = std::countr_zero(bits);
      out.push_back(static_cast<std::uint32_t>(w * 64 + static_cast<std::size_t>(b)));
      bits &= bits - 1;
    }
  }
  return out;
}

void Bitmask::clear_tail() {
  const std::size_t rem = nbits_ & 63;
  if (rem != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << rem) - 1;
}

}  // namespace filtra
