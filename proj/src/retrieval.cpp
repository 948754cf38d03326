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

#include "filtra/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <iterator>

#include "filtra/error.hpp"

namespace filtra {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

std::vector<WordRange> word_ranges(const IvfIndex& ivf, std::span<const std::uint32_t> clusters) {
  std::vector<WordRange> ranges;
  ranges.reserve(clusters.size());
  for (auto c : clusters) {
    const auto r = ivf.cluster_range(c);
    if (r.end > r.begin) ranges.push_back({r.begin / 64, r.end / 64});
  }
  return ranges;
}

void check_shared_slots(const IvfIndex& ivf, const BloomIndex& bloom) {
  if (bloom.n_slots != ivf.n_slots()) throw Error(ErrorCode::kLengthMismatch, "bloom and IVF slot spaces differ");
}

}  // namespace

TopkResult codesigned_search(const IvfIndex& ivf, const BloomIndex& bloom, const CompiledFilter* cf,
                             std::span<const float> query, std::size_t nprobe, std::size_t k0, CodesignStats* stats) {
  auto t0 = Clock::now();
  const auto probed = probe_centroids(ivf, query, nprobe);
  const auto query_q = quantize_vector(query, ivf.quant_params());
  CodesignStats local;
  local.probed_clusters = probed.size();
  local.probe_us = micros_since(t0);

  std::optional<Bitmask> mask;
  if (cf) {
    check_shared_slots(ivf, bloom);
    t0 = Clock::now();
    const auto ranges = word_ranges(ivf, probed);
    FilterEvalStats fs;
    mask = eval_compiled(*cf, bloom, ivf.valid_mask, ranges, &fs);
    local.filter_slots = fs.evaluated_slots;
    local.scratch_words = fs.scratch_words;
    local.filter_us = micros_since(t0);
  }

  t0 = Clock::now();
  SearchStats ss;
  TopkResult result = search_clusters(ivf, query_q, probed, mask ? &*mask : nullptr, k0, &ss);
  local.scanned_slots = ss.scanned_slots;
  local.scan_us = micros_since(t0);
  if (stats) *stats = local;
  return result;
}

TopkResult full_mask_search(const IvfIndex& ivf, const BloomIndex& bloom, const CompiledFilter* cf,
                            std::span<const float> query, std::size_t nprobe, std::size_t k0, CodesignStats* stats) {
  std::optional<Bitmask> mask;
  CodesignStats local;
  if (cf) {
    check_shared_slots(ivf, bloom);
    FilterEvalStats fs;
    mask = eval_compiled(*cf, bloom, ivf.valid_mask, &fs);
    local.filter_slots = fs.evaluated_slots;
    local.scratch_words = fs.scratch_words;
  }
  SearchStats ss;
  TopkResult result = search(ivf, query, nprobe, k0, mask ? &*mask : nullptr, &ss);
  local.probed_clusters = ss.probed_clusters;
  local.scanned_slots = ss.scanned_slots;
  if (stats) *stats = local;
  return result;
}

std::vector<std::uint64_t> merge_candidates(std::span<const TopkResult> per_task, MergeMode mode) {
  std::vector<std::uint64_t> merged;
  for (std::size_t t = 0; t < per_task.size(); ++t) {
    std::vector<std::uint64_t> ids;
    ids.reserve(per_task[t].entries.size());
    for (const auto& h : per_task[t].entries) ids.push_back(h.item_id);
    std::sort(ids.begin(), ids.end());
    if (t == 0) {
      merged = std::move(ids);
      continue;
    }
    std::vector<std::uint64_t> out;
    if (mode == MergeMode::kUnion) {
      std::set_union(merged.begin(), merged.end(), ids.begin(), ids.end(), std::back_inserter(out));
    } else {
      std::set_intersection(merged.begin(), merged.end(), ids.begin(), ids.end(), std::back_inserter(out));
    }
    merged = std::move(out);
  }
  return merged;
}

std::vector<RankedItem> rank_candidates(const OverArchModel& overarch, const ValueModel& value_model,
                                        const EmbeddingCache& cache, std::span<const TaskQuery> tasks,
                                        std::span<const std::uint64_t> candidates, std::size_t topk) {
  std::vector<std::string> names;
  std::vector<std::vector<float>> users;
  for (const auto& t : tasks) {
    names.push_back(t.task_name);
    users.push_back(t.user_embedding);
  }
  const auto scores = overarch_score(overarch, names, users, candidates, cache);
  std::vector<RankedItem> ranked(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    ranked[i].item_id = candidates[i];
    ranked[i].task_scores = scores[i];
    ranked[i].score = value_model.eval(names, scores[i]);
  }
  const auto better = [](const RankedItem& a, const RankedItem& b) {
    return a.score > b.score || (a.score == b.score && a.item_id < b.item_id);
  };
  if (topk < ranked.size()) {
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(topk), ranked.end(), better);
    ranked.resize(topk);
  } else {
    std::sort(ranked.begin(), ranked.end(), better);
  }
  return ranked;
}

void validate_request(const Engine& engine, const RetrievalRequest& req) {
  if (req.tasks.empty()) throw Error(ErrorCode::kInvalidRequest, "request needs at least one task");
  if (req.topk == 0 || req.k0 == 0 || req.nprobe == 0) throw Error(ErrorCode::kInvalidRequest, "topk, k0, nprobe must be >= 1");
  if (req.topk > req.k0) throw Error(ErrorCode::kInvalidRequest, "topk must not exceed k0");
  for (const auto& t : req.tasks) {
    if (t.user_embedding.size() != engine.ivf.dim()) {
      throw Error(ErrorCode::kDimMismatch, "task '" + t.task_name + "' embedding length " + std::to_string(t.user_embedding.size()),
                  {static_cast<std::int64_t>(engine.ivf.dim()), static_cast<std::int64_t>(t.user_embedding.size())});
    }
  }
  std::vector<std::string> names;
  for (const auto& t : req.tasks) names.push_back(t.task_name);
  validate_value_model(req.value_model ? *req.value_model : engine.value_model.root(), names);
}

RetrievalResult retrieve(const Engine& engine, const RetrievalRequest& req) {
  const auto t_start = Clock::now();
  validate_request(engine, req);
  RetrievalResult out;

  std::optional<CompiledFilter> cf;
  if (req.filter) cf = compile_filter(*req.filter, engine.bloom.params);

  std::vector<TopkResult> per_task;
  per_task.reserve(req.tasks.size());
  for (const auto& t : req.tasks) {
    CodesignStats cs;
    per_task.push_back(codesigned_search(engine.ivf, engine.bloom, cf ? &*cf : nullptr, t.user_embedding, req.nprobe,
                                         req.k0, &cs));
    out.timings.probe_us += cs.probe_us;
    out.timings.filter_us += cs.filter_us;
    out.timings.scan_us += cs.scan_us;
  }

  const auto t_rank = Clock::now();
  const auto merged = merge_candidates(per_task, req.merge);
  const ValueModel vm = req.value_model ? ValueModel(*req.value_model) : engine.value_model;
  out.items = rank_candidates(engine.overarch, vm, engine.cache, req.tasks, merged, req.topk);
  out.timings.overarch_us = micros_since(t_rank);
  out.timings.total_us = micros_since(t_start);
  return out;
}

std::vector<RankedItem> esr_rank(const EmbeddingCache& cache, const OverArchModel& scorer,
                                 std::span<const float> user, std::span<const std::uint64_t> item_ids,
                                 std::size_t topk, const std::string& task) {
  const TaskQuery q{task, std::vector<float>(user.begin(), user.end())};
  const ValueModel identity(ValueNode::task_score(task));
  return rank_candidates(scorer, identity, cache, std::span(&q, 1), item_ids, topk);
}

}  // namespace filtra
