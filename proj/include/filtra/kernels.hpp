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

// Data-parallel inner loops. Each kernel has a serial reference and an
// OpenMP variant; both must produce identical output for identical input.
// The serial versions exist for tests and the benchmark target.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>

#include "filtra/bitmask.hpp"
#include "filtra/quantize.hpp"
#include "filtra/topk.hpp"

namespace filtra::kernels {

enum class Exec { kSerial, kParallel };

// Upper bound on the score tile a scan keeps live at once.
inline constexpr std::size_t kScanTileRows = 4096;

inline std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t dim) noexcept {
  std::int32_t acc = 0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < dim; ++i) acc += static_cast<std::int32_t>(a[i]) * static_cast<std::int32_t>(b[i]);
  return acc;
}

inline float dot_f32(const float* a, const float* b, std::size_t dim) noexcept {
  float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < dim; ++i) acc += a[i] * b[i];
  return acc;
}

inline float l2sq_f32(const float* a, const float* b, std::size_t dim) noexcept {
  float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < dim; ++i) {
    const float d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

struct SlotRange {
  std::size_t begin = 0;  // inclusive slot, multiple of 64
  std::size_t end = 0;    // exclusive slot, multiple of 64
};

// Counters filled by the scan. peak_tile_rows is the largest number of
// per-slot scores held in one tile buffer; embeddings are never copied.
struct ScanCounters {
  std::size_t scanned_slots = 0;
  std::size_t scored_slots = 0;
  std::size_t peak_tile_rows = 0;
};

struct ScanInput {
  const std::int8_t* items = nullptr;  // slot-major, dim bytes per slot
  std::size_t dim = 0;
  const std::uint64_t* valid = nullptr;   // validity words over slots
  const std::uint64_t* filter = nullptr;  // optional filter words over slots
  const std::uint64_t* item_ids = nullptr;  // slot -> item id
  const std::int32_t* row_sums = nullptr;   // slot -> sum of the quantized row
  std::int64_t zero_point = 0;              // see zero_point_fixed
};

// Fused masked scan: scores every slot in `ranges` whose valid (and filter)
// bit is set and keeps the best `topk`. Score = scan_score(dot, row_sum, zero_point).
TopkResult masked_scan(const ScanInput& in, std::span<const std::int8_t> query, std::span<const SlotRange> ranges,
                       std::size_t topk, Exec exec, ScanCounters* counters = nullptr);

// out[w - word_begin] = AND over planes[p][w] for p in positions, for words
// in [word_begin, word_end). An empty position list writes all-ones.
void and_planes(const std::uint64_t* planes, std::size_t words_per_plane, std::span<const std::uint32_t> positions,
                std::size_t word_begin, std::size_t word_end, std::uint64_t* out, Exec exec);

}  // namespace filtra::kernels
