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
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "filtra/bitmask.hpp"
#include "filtra/catalog.hpp"
#include "filtra/kernels.hpp"
#include "filtra/kmeans.hpp"
#include "filtra/quantize.hpp"
#include "filtra/topk.hpp"

namespace filtra {

inline constexpr std::uint32_t kPaddingSlot = std::numeric_limits<std::uint32_t>::max();

// Inverted-file index in cluster-major slot order. Cluster c owns slots
// [cluster_offsets[c], cluster_offsets[c + 1]); the first cluster_sizes[c]
// are real items ordered by ascending item id, the rest is zero padding up to
// the next multiple of 64.
struct IvfIndex {
  Centroids centroids;
  std::vector<std::uint64_t> cluster_offsets;  // n_clusters + 1 entries
  std::vector<std::uint64_t> cluster_sizes;
  std::vector<std::uint32_t> perm;      // slot -> catalog index, kPaddingSlot for padding
  std::vector<std::uint64_t> inv_perm;  // catalog index -> slot
  QuantizedMatrix items_q;              // n_slots rows
  Bitmask valid_mask;
  std::vector<std::uint64_t> item_ids;  // slot -> item id, 0 for padding
  std::vector<std::int32_t> row_sums;   // slot -> sum of items_q row, derived on load

  std::size_t dim() const noexcept { return items_q.dim; }
  std::size_t n_slots() const noexcept { return perm.size(); }
  std::size_t n_items() const noexcept { return inv_perm.size(); }
  std::size_t n_clusters() const noexcept { return cluster_sizes.size(); }
  const QuantParams& quant_params() const noexcept { return items_q.params; }

  kernels::SlotRange cluster_range(std::size_t c) const {
    return {static_cast<std::size_t>(cluster_offsets[c]), static_cast<std::size_t>(cluster_offsets[c + 1])};
  }

  bool operator==(const IvfIndex&) const = default;
};

struct IvfBuildOptions {
  std::size_t n_clusters = 0;  // 0 = ceil(sqrt(n_items))
  std::optional<QuantParams> quant_params;  // empty = computed over the catalog
  std::uint64_t seed = 0;
  std::size_t max_iters = 25;
  double tol = 1e-4;
};

std::size_t default_cluster_count(std::size_t n_items);
std::vector<std::int32_t> compute_row_sums(const QuantizedMatrix& m);

IvfIndex build_ivf(const Catalog& catalog, const IvfBuildOptions& options);

// Lays out an index from a fixed assignment. build_ivf trains then calls this.
IvfIndex layout_ivf(const Catalog& catalog, Centroids centroids, const std::vector<std::uint32_t>& assignment,
                    const QuantParams& qp);

// Ids of the nprobe centroids with the highest dot product, best first,
// ties by ascending cluster id. nprobe is clamped to n_clusters.
std::vector<std::uint32_t> probe_centroids(const IvfIndex& index, std::span<const float> query, std::size_t nprobe);

struct SearchStats {
  std::size_t probed_clusters = 0;
  std::size_t scanned_slots = 0;  // real items in probed clusters
  std::size_t peak_tile_rows = 0;
};

// Exact integer top-k over valid slots of the listed clusters whose mask bit
// is set (mask may be null).
TopkResult search_clusters(const IvfIndex& index, std::span<const std::int8_t> query_q,
                           std::span<const std::uint32_t> clusters, const Bitmask* mask, std::size_t topk,
                           SearchStats* stats = nullptr, kernels::Exec exec = kernels::Exec::kParallel);

TopkResult search(const IvfIndex& index, std::span<const float> query, std::size_t nprobe, std::size_t topk,
                  const Bitmask* mask = nullptr, SearchStats* stats = nullptr);

}  // namespace filtra
