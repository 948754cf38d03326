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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "filtra/bloom.hpp"
#include "filtra/catalog.hpp"
#include "filtra/filter_query.hpp"
#include "filtra/ivf.hpp"
#include "filtra/overarch.hpp"
#include "filtra/value_model.hpp"

namespace filtra {

// Everything a request is served against. Immutable once built or loaded.
struct Engine {
  std::uint64_t snapshot_version = 0;
  IvfIndex ivf;
  BloomIndex bloom;
  EmbeddingCache cache;
  OverArchModel overarch;
  ValueModel value_model;
  FeatureSchema schema;
};

struct TaskQuery {
  std::string task_name;
  std::vector<float> user_embedding;
};

enum class MergeMode { kUnion, kIntersection };

struct RetrievalRequest {
  std::vector<TaskQuery> tasks;
  std::optional<FilterExpr> filter;
  std::size_t nprobe = 32;
  std::size_t k0 = 1000;
  std::size_t topk = 100;
  MergeMode merge = MergeMode::kUnion;
  std::optional<ValueNode> value_model;  // empty = engine default
};

struct StageTimings {
  double probe_us = 0;
  double filter_us = 0;
  double scan_us = 0;
  double overarch_us = 0;
  double total_us = 0;
};

struct CodesignStats {
  std::size_t probed_clusters = 0;
  std::size_t filter_slots = 0;   // slots the bloom program ran over
  std::size_t scanned_slots = 0;  // real items in probed clusters
  std::size_t scratch_words = 0;
  double probe_us = 0;
  double filter_us = 0;
  double scan_us = 0;
};

// Probe, evaluate the filter over probed clusters only, then scan with the
// resulting mask. Returns the same hits as evaluating the filter over every
// slot and searching with that mask.
TopkResult codesigned_search(const IvfIndex& ivf, const BloomIndex& bloom, const CompiledFilter* cf,
                             std::span<const float> query, std::size_t nprobe, std::size_t k0,
                             CodesignStats* stats = nullptr);

// Unfused reference: full-width filter evaluation, then masked search.
TopkResult full_mask_search(const IvfIndex& ivf, const BloomIndex& bloom, const CompiledFilter* cf,
                            std::span<const float> query, std::size_t nprobe, std::size_t k0,
                            CodesignStats* stats = nullptr);

struct RankedItem {
  std::uint64_t item_id = 0;
  double score = 0.0;
  std::vector<double> task_scores;  // aligned with the request tasks

  bool operator==(const RankedItem&) const = default;
};

struct RetrievalResult {
  std::vector<RankedItem> items;
  StageTimings timings;
};

// Union keeps ids from any list, intersection ids present in all; result
// ascending by id.
std::vector<std::uint64_t> merge_candidates(std::span<const TopkResult> per_task, MergeMode mode);

// OverArch per task, value model, sort by final score (ties ascending id),
// truncate to topk.
std::vector<RankedItem> rank_candidates(const OverArchModel& overarch, const ValueModel& value_model,
                                        const EmbeddingCache& cache, std::span<const TaskQuery> tasks,
                                        std::span<const std::uint64_t> candidates, std::size_t topk);

void validate_request(const Engine& engine, const RetrievalRequest& req);

RetrievalResult retrieve(const Engine& engine, const RetrievalRequest& req);

// Single-user ranking of a given id list by one task's OverArch score.
std::vector<RankedItem> esr_rank(const EmbeddingCache& cache, const OverArchModel& scorer,
                                 std::span<const float> user, std::span<const std::uint64_t> item_ids,
                                 std::size_t topk, const std::string& task = "*");

}  // namespace filtra
