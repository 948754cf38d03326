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

#include "filtra/ivf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "filtra/error.hpp"

namespace filtra {

std::size_t default_cluster_count(std::size_t n_items) {
  auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_items))));
  while (k * k < n_items) ++k;
  while (k > 1 && (k - 1) * (k - 1) >= n_items) --k;
  return std::max<std::size_t>(1, k);
}

IvfIndex layout_ivf(const Catalog& catalog, Centroids centroids, const std::vector<std::uint32_t>& assignment,
                    const QuantParams& qp) {
  const std::size_t n = catalog.size();
  const std::size_t k = centroids.n_clusters();
  const std::size_t dim = catalog.dim;

  std::vector<std::vector<std::uint32_t>> members(k);
  for (std::size_t i = 0; i < n; ++i) members[assignment[i]].push_back(static_cast<std::uint32_t>(i));
  for (auto& m : members) {
    std::sort(m.begin(), m.end(), [&](std::uint32_t a, std::uint32_t b) {
      return catalog.items[a].item_id < catalog.items[b].item_id;
    });
  }

  IvfIndex index;
  index.centroids = std::move(centroids);
  index.cluster_offsets.resize(k + 1, 0);
  index.cluster_sizes.resize(k, 0);
  for (std::size_t c = 0; c < k; ++c) {
    index.cluster_sizes[c] = members[c].size();
    const std::uint64_t padded = (members[c].size() + 63) / 64 * 64;
    index.cluster_offsets[c + 1] = index.cluster_offsets[c] + padded;
  }
  const std::size_t n_slots = index.cluster_offsets[k];
  index.perm.assign(n_slots, kPaddingSlot);
  index.inv_perm.assign(n, 0);
  index.item_ids.assign(n_slots, 0);
  index.valid_mask = Bitmask(n_slots);
  index.items_q.rows = n_slots;
  index.items_q.dim = dim;
  index.items_q.params = qp;
  index.items_q.data.assign(n_slots * dim, 0);

  for (std::size_t c = 0; c < k; ++c) {
    std::size_t slot = index.cluster_offsets[c];
    for (auto i : members[c]) {
      index.perm[slot] = i;
      index.inv_perm[i] = slot;
      index.item_ids[slot] = catalog.items[i].item_id;
      index.valid_mask.set(slot);
      quantize_into(catalog.items[i].embedding, qp, index.items_q.row(slot));
      ++slot;
    }
  }
  index.row_sums = compute_row_sums(index.items_q);
  return index;
}

std::vector<std::int32_t> compute_row_sums(const QuantizedMatrix& m) {
  std::vector<std::int32_t> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = row_sum(m.row(i));
  return out;
}

IvfIndex build_ivf(const Catalog& catalog, const IvfBuildOptions& options) {
  if (catalog.size() == 0) throw Error(ErrorCode::kInvalidSpec, "empty catalog");
  const std::size_t k = options.n_clusters ? options.n_clusters : default_cluster_count(catalog.size());
  const FloatMatrix data = catalog.embeddings();
  const QuantParams qp = options.quant_params ? *options.quant_params : compute_quant_params(data);
  auto km = kmeans_train(data, k, options.max_iters, options.tol, options.seed);
  return layout_ivf(catalog, std::move(km.centroids), km.assignment, qp);
}

std::vector<std::uint32_t> probe_centroids(const IvfIndex& index, std::span<const float> query, std::size_t nprobe) {
  const auto& cv = index.centroids.vectors;
  if (query.size() != cv.cols) {
    throw Error(ErrorCode::kDimMismatch, "query length " + std::to_string(query.size()),
                {static_cast<std::int64_t>(cv.cols), static_cast<std::int64_t>(query.size())});
  }
  if (nprobe == 0) throw Error(ErrorCode::kInvalidRequest, "nprobe must be at least 1");
  const std::size_t k = cv.rows;
  nprobe = std::min(nprobe, k);
  std::vector<float> scores(k);
  for (std::size_t c = 0; c < k; ++c) scores[c] = kernels::dot_f32(cv.row(c).data(), query.data(), cv.cols);
  std::vector<std::uint32_t> ids(k);
  std::iota(ids.begin(), ids.end(), 0u);
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(nprobe), ids.end(),
                    [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  ids.resize(nprobe);
  return ids;
}

TopkResult search_clusters(const IvfIndex& index, std::span<const std::int8_t> query_q,
                           std::span<const std::uint32_t> clusters, const Bitmask* mask, std::size_t topk,
                           SearchStats* stats, kernels::Exec exec) {
  if (query_q.size() != index.dim()) {
    throw Error(ErrorCode::kDimMismatch, "query length " + std::to_string(query_q.size()),
                {static_cast<std::int64_t>(index.dim()), static_cast<std::int64_t>(query_q.size())});
  }
  if (mask && mask->size() != index.n_slots()) throw Error(ErrorCode::kLengthMismatch, "mask does not cover all slots");
  std::vector<kernels::SlotRange> ranges;
  ranges.reserve(clusters.size());
  for (auto c : clusters) {
    const auto r = index.cluster_range(c);
    if (r.end > r.begin) ranges.push_back(r);
  }
  kernels::ScanInput in;
  in.items = index.items_q.data.data();
  in.dim = index.dim();
  in.valid = index.valid_mask.words().data();
  in.filter = mask ? mask->words().data() : nullptr;
  in.item_ids = index.item_ids.data();
  in.row_sums = index.row_sums.data();
  in.zero_point = zero_point_fixed(index.quant_params());
  kernels::ScanCounters counters;
  TopkResult result = kernels::masked_scan(in, query_q, ranges, topk, exec, &counters);
  if (stats) {
    stats->probed_clusters = clusters.size();
    stats->scanned_slots = counters.scanned_slots;
    stats->peak_tile_rows = counters.peak_tile_rows;
  }
  return result;
}

TopkResult search(const IvfIndex& index, std::span<const float> query, std::size_t nprobe, std::size_t topk,
                  const Bitmask* mask, SearchStats* stats) {
  const auto probed = probe_centroids(index, query, nprobe);
  const auto query_q = quantize_vector(query, index.quant_params());
  return search_clusters(index, query_q, probed, mask, topk, stats);
}

}  // namespace filtra
