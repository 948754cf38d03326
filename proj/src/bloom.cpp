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

#include "filtra/bloom.hpp"

#include <algorithm>
#include <cmath>

#include "filtra/error.hpp"

namespace filtra {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a_term(std::uint64_t feature_id, std::uint64_t value) {
  std::uint64_t h = kFnvOffset;
  for (int i = 0; i < 8; ++i) {
    h ^= (feature_id >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
  for (int i = 0; i < 8; ++i) {
    h ^= (value >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

void validate(const BloomParams& params) {
  if (params.m_bits == 0 || params.k_hashes == 0) throw Error(ErrorCode::kInvalidConfig, "bloom needs M >= 1 and K >= 1");
  if (params.hash_scheme_id != kHashDoubleFnv && params.hash_scheme_id != kHashIndependentMix) {
    throw Error(ErrorCode::kVersionUnsupported, "hash scheme " + std::to_string(params.hash_scheme_id),
                {params.hash_scheme_id});
  }
}

QueryBloom hash_positions(std::uint64_t feature_id, std::uint64_t value, const BloomParams& params) {
  const std::uint64_t h1 = fnv1a_term(feature_id, value);
  QueryBloom qb;
  qb.set_bits.reserve(params.k_hashes);
  if (params.hash_scheme_id == kHashDoubleFnv) {
    const std::uint64_t h2 = splitmix_finalize(h1) | 1u;
    for (std::uint64_t i = 0; i < params.k_hashes; ++i) {
      qb.set_bits.push_back(static_cast<std::uint32_t>((h1 + i * h2) % params.m_bits));
    }
  } else {
    // With M a power of two the double hash above depends only on (h1, h2) mod M, so about
    // M^2/4 position sets exist and terms alias each other at a rate near 4n/M^2.
    for (std::uint64_t i = 0; i < params.k_hashes; ++i) {
      qb.set_bits.push_back(static_cast<std::uint32_t>(splitmix_finalize(h1 + (i + 1) * kGolden) % params.m_bits));
    }
  }
  std::sort(qb.set_bits.begin(), qb.set_bits.end());
  qb.set_bits.erase(std::unique(qb.set_bits.begin(), qb.set_bits.end()), qb.set_bits.end());
  return qb;
}

std::size_t bloom_plane_bytes(std::uint32_t m_bits, std::size_t n_slots) {
  return static_cast<std::size_t>(m_bits) * ((n_slots + 63) / 64) * 8;
}

BloomIndex build_bloom(std::span<const Item* const> slots, const BloomParams& params) {
  validate(params);
  BloomIndex index;
  index.params = params;
  index.n_slots = slots.size();
  index.words_per_plane = (slots.size() + 63) / 64;
  index.planes.assign(static_cast<std::size_t>(params.m_bits) * index.words_per_plane, 0);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!slots[s]) continue;
    const std::uint64_t bit = std::uint64_t{1} << (s & 63);
    for (const auto& f : slots[s]->features) {
      for (auto p : hash_positions(f.feature_id, f.value, params).set_bits) {
        index.planes[static_cast<std::size_t>(p) * index.words_per_plane + (s >> 6)] |= bit;
      }
    }
  }
  return index;
}

BloomIndex build_bloom(const Catalog& catalog, const BloomParams& params) {
  std::vector<const Item*> slots;
  slots.reserve(catalog.size());
  for (const auto& item : catalog.items) slots.push_back(&item);
  return build_bloom(slots, params);
}

std::size_t bloom_eval_leaf(const BloomIndex& index, const QueryBloom& qb, std::span<const WordRange> ranges,
                            Bitmask& out, kernels::Exec exec) {
  std::size_t words_read = 0;
  for (const auto& r : ranges) {
    kernels::and_planes(index.planes.data(), index.words_per_plane, qb.set_bits, r.begin, r.end,
                        out.words().data() + r.begin, exec);
    words_read += qb.set_bits.size() * (r.end - r.begin);
  }
  return words_read;
}

Bitmask bloom_eval_leaf(const BloomIndex& index, const QueryBloom& qb) {
  Bitmask out(index.n_slots);
  const WordRange all{0, index.words_per_plane};
  bloom_eval_leaf(index, qb, std::span(&all, 1), out);
  // Clear bits past n_slots written by an empty query.
  if (qb.set_bits.empty()) out.fill(true);
  return out;
}

double bloom_fpr_theoretical(const BloomParams& params, std::size_t n_inserted) {
  const double m = params.m_bits;
  const double kn = static_cast<double>(params.k_hashes) * static_cast<double>(n_inserted);
  const double fill = 1.0 - std::exp(kn * std::log1p(-1.0 / m));
  return std::pow(fill, static_cast<double>(params.k_hashes));
}

}  // namespace filtra
