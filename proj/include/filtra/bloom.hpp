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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "filtra/bitmask.hpp"
#include "filtra/catalog.hpp"
#include "filtra/kernels.hpp"

namespace filtra {

// Identifies the hashing recipe in hash_positions. Stored in snapshots.
// h1 = FNV-1a-64 of feature_id || value (little-endian), then per scheme:
//   1: position_i = (h1 + i * (splitmix(h1) | 1)) mod M
//   2: position_i = splitmix(h1 + (i + 1) * golden) mod M, K independent hashes
inline constexpr std::uint32_t kHashDoubleFnv = 1;
inline constexpr std::uint32_t kHashIndependentMix = 2;

struct BloomParams {
  std::uint32_t m_bits = 1024;
  std::uint32_t k_hashes = 5;
  std::uint32_t hash_scheme_id = kHashIndependentMix;

  bool operator==(const BloomParams&) const = default;
};

void validate(const BloomParams& params);

// Bit positions of one (feature, value) term, sorted and unique.
struct QueryBloom {
  std::vector<std::uint32_t> set_bits;
  bool operator==(const QueryBloom&) const = default;
};

// h1 = FNV-1a-64 over (feature_id, value) as 16 little-endian bytes,
// h2 = SplitMix64 finalizer of h1 forced odd, position_i = (h1 + i*h2) mod M.
QueryBloom hash_positions(std::uint64_t feature_id, std::uint64_t value, const BloomParams& params);

// Transposed signature index: M bit-planes over n_slots slots. Plane p is a
// run of words_per_plane words starting at planes[p * words_per_plane].
struct BloomIndex {
  BloomParams params;
  std::size_t n_slots = 0;
  std::size_t words_per_plane = 0;
  std::vector<std::uint64_t> planes;

  const std::uint64_t* plane(std::size_t p) const { return planes.data() + p * words_per_plane; }
  std::size_t plane_bytes() const noexcept { return planes.size() * sizeof(std::uint64_t); }

  bool operator==(const BloomIndex&) const = default;
};

// M * ceil(n_slots / 64) * 8.
std::size_t bloom_plane_bytes(std::uint32_t m_bits, std::size_t n_slots);

// `slots[s]` is the item at slot s, or null for a padding slot.
BloomIndex build_bloom(std::span<const Item* const> slots, const BloomParams& params);
// Identity slot order over the catalog.
BloomIndex build_bloom(const Catalog& catalog, const BloomParams& params);

struct WordRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// AND of the planes selected by qb over the given word ranges. Words outside
// the ranges are left untouched in `out`. Returns the number of plane words
// read.
std::size_t bloom_eval_leaf(const BloomIndex& index, const QueryBloom& qb, std::span<const WordRange> ranges,
                            Bitmask& out, kernels::Exec exec = kernels::Exec::kParallel);
Bitmask bloom_eval_leaf(const BloomIndex& index, const QueryBloom& qb);

// (1 - (1 - 1/M)^(K*n))^K
double bloom_fpr_theoretical(const BloomParams& params, std::size_t n_inserted);

}  // namespace filtra
