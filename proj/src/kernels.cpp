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

#include "filtra/kernels.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <vector>

#include <omp.h>

namespace filtra::kernels {

namespace {

constexpr std::int64_t kScoreScale = std::int64_t{1} << kScoreFracBits;

// Scans one slot range in tiles of at most kScanTileRows scores.
void scan_range(const ScanInput& in, const std::int8_t* query, const SlotRange& range, TopkCollector& out,
                std::vector<std::int64_t>& tile, std::vector<std::uint32_t>& tile_slots, ScanCounters& counters) {
  for (std::size_t tile_begin = range.begin; tile_begin < range.end; tile_begin += kScanTileRows) {
    const std::size_t tile_end = std::min(range.end, tile_begin + kScanTileRows);
    std::size_t live = 0;
    for (std::size_t w = tile_begin / 64; w < tile_end / 64; ++w) {
      const std::uint64_t valid_bits = in.valid[w];
      counters.scanned_slots += static_cast<std::size_t>(std::popcount(valid_bits));
      std::uint64_t bits = valid_bits & (in.filter ? in.filter[w] : ~std::uint64_t{0});
      while (bits) {
        const std::size_t slot = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
        bits &= bits - 1;
        tile[live] = static_cast<std::int64_t>(dot_i8(in.items + slot * in.dim, query, in.dim)) * kScoreScale +
                     in.zero_point * in.row_sums[slot];
        tile_slots[live] = static_cast<std::uint32_t>(slot);
        ++live;
      }
    }
    counters.scored_slots += live;
    counters.peak_tile_rows = std::max(counters.peak_tile_rows, live);
    for (std::size_t i = 0; i < live; ++i) {
      out.push({in.item_ids[tile_slots[i]], static_cast<double>(tile[i]) * (1.0 / kScoreScale)});
    }
  }
}

void add_counters(ScanCounters& into, const ScanCounters& c) {
  into.scanned_slots += c.scanned_slots;
  into.scored_slots += c.scored_slots;
  into.peak_tile_rows = std::max(into.peak_tile_rows, c.peak_tile_rows);
}

}  // namespace

TopkResult masked_scan(const ScanInput& in, std::span<const std::int8_t> query, std::span<const SlotRange> ranges,
                       std::size_t topk, Exec exec, ScanCounters* counters) {
  ScanCounters total;
  std::size_t work = 0;
  for (const auto& r : ranges) work += r.end - r.begin;

  if (exec == Exec::kSerial || ranges.size() < 2 || work < 16384 || omp_get_max_threads() == 1) {
    TopkCollector collector(topk);
    std::vector<std::int64_t> tile(kScanTileRows);
    std::vector<std::uint32_t> tile_slots(kScanTileRows);
    for (const auto& r : ranges) scan_range(in, query.data(), r, collector, tile, tile_slots, total);
    if (counters) *counters = total;
    return collector.take();
  }

  // Each thread keeps its own top-k; hits are totally ordered by
  // (score, item id), so the merged result does not depend on scheduling.
  const int n_threads = omp_get_max_threads();
  std::vector<TopkCollector> partial(static_cast<std::size_t>(n_threads), TopkCollector(topk));
  std::vector<ScanCounters> partial_counters(static_cast<std::size_t>(n_threads));
  const auto n_ranges = static_cast<std::int64_t>(ranges.size());
#pragma omp parallel num_threads(n_threads)
  {
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    std::vector<std::int64_t> tile(kScanTileRows);
    std::vector<std::uint32_t> tile_slots(kScanTileRows);
#pragma omp for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n_ranges; ++i) {
      scan_range(in, query.data(), ranges[static_cast<std::size_t>(i)], partial[t], tile, tile_slots,
                 partial_counters[t]);
    }
  }
  TopkCollector collector(topk);
  for (std::size_t t = 0; t < partial.size(); ++t) {
    collector.merge(std::move(partial[t]));
    add_counters(total, partial_counters[t]);
  }
  if (counters) *counters = total;
  return collector.take();
}

void and_planes(const std::uint64_t* planes, std::size_t words_per_plane, std::span<const std::uint32_t> positions,
                std::size_t word_begin, std::size_t word_end, std::uint64_t* out, Exec exec) {
  const auto begin = static_cast<std::int64_t>(word_begin);
  const auto end = static_cast<std::int64_t>(word_end);
  if (positions.empty()) {
    std::fill(out, out + (word_end - word_begin), ~std::uint64_t{0});
    return;
  }
  const std::uint64_t* first = planes + static_cast<std::size_t>(positions[0]) * words_per_plane;
  const bool parallel = exec == Exec::kParallel && (end - begin) >= 4096;
  // One AND per plane advances 64 slots.
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t w = begin; w < end; ++w) {
    std::uint64_t acc = first[w];
    for (std::size_t p = 1; p < positions.size(); ++p) acc &= planes[static_cast<std::size_t>(positions[p]) * words_per_plane + static_cast<std::size_t>(w)];
    out[w - begin] = acc;
  }
}

}  // namespace filtra::kernels
