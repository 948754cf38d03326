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

// Oracles, metrics and the benchmark harness. Nothing here calls into the
// IVF scan, the bloom planes or the kernels; the oracles recompute from the
// catalog so they can check those paths.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "filtra/bitmask.hpp"
#include "filtra/catalog.hpp"
#include "filtra/exact_filter.hpp"
#include "filtra/filter_query.hpp"
#include "filtra/quantize.hpp"
#include "filtra/retrieval.hpp"
#include "filtra/topk.hpp"

namespace filtra::eval {

enum class ScoreMode { kF32Dot, kInt8Dot };

// Full scan in catalog order. `mask` is over catalog indices. int8 mode
// quantizes both sides with `qp`.
TopkResult brute_force_topk(const Catalog& catalog, std::span<const float> query, std::size_t topk,
                            const Bitmask* mask = nullptr, ScoreMode mode = ScoreMode::kF32Dot,
                            const QuantParams* qp = nullptr);

// Exact per-item filter evaluation straight from the catalog feature lists.
bool naive_match(const Item& item, const FilterExpr& expr);
Bitmask naive_filter(const Catalog& catalog, const FilterExpr& expr);

struct GroundTruth {
  std::vector<std::uint64_t> ids;  // exact top-k, best first
};

// |result ∩ truth[0..k)| / k over the first k entries of result.
double recall_at_k(const TopkResult& result, const GroundTruth& truth, std::size_t k);

struct FprReport {
  std::size_t leaves = 0;
  std::uint64_t negatives = 0;  // item-leaf pairs that do not match exactly
  std::uint64_t false_positives = 0;
  double leaf_fpr = 0.0;
  std::size_t queries = 0;
  double query_fpr = 0.0;  // mean over queries of FP / negatives
};

// Leaf-level false positive rate against an exact oracle, plus optional
// query-level rates for NOT-free compiled queries. Throws kInvalidSpec if a
// query contains NOT.
FprReport fpr_measure(const BloomIndex& bloom, const Bitmask& valid, const InvertedIndex& exact,
                      std::span<const FeatureValue> leaves, std::span<const FilterExpr> queries = {});

// Random filter expression over the catalog's observed feature values.
FilterExpr random_filter(const Catalog& catalog, std::uint64_t seed, bool allow_not, std::size_t max_depth = 3);

// Queries near random catalog items.
std::vector<std::vector<float>> random_queries(const Catalog& catalog, std::size_t n, double noise,
                                               std::uint64_t seed);

// Reference replay of retrieve() with every stage recomputed independently:
// centroid dots, full-width plane evaluation, restricted int8 scan, naive
// OverArch forward pass and a naive value-model interpreter.
struct ReplayStage {
  std::vector<std::vector<std::uint32_t>> probed;          // per task
  std::vector<std::vector<Hit>> candidates;                // per task
  std::vector<std::uint64_t> merged;
  std::vector<RankedItem> ranked;
};
ReplayStage reference_retrieve(const Engine& engine, const RetrievalRequest& req);

double naive_overarch(const OverArchModel& model, const std::string& task, std::span<const float> user,
                      std::span<const float> item);
double naive_value_model(const ValueNode& node, std::span<const std::string> tasks, std::span<const double> scores);

struct BenchConfig {
  std::size_t warmup_batches = 50;
  std::size_t timed_batches = 100;
  std::size_t batch_size = 1;
  std::size_t clients = 1;
  std::string workload_id = "default";
  std::uint32_t bloom_m = 0;
  std::uint32_t bloom_k = 0;
  std::size_t recall_k = 0;  // 0 = topk
  bool codesign = true;
};

struct BenchReport {
  std::string workload_id;
  std::size_t nprobe = 0;
  std::size_t topk = 0;
  std::uint32_t bloom_m = 0;
  std::uint32_t bloom_k = 0;
  std::size_t requests = 0;
  double recall_at_k = 0.0;
  double fpr = 0.0;
  double mean_us = 0.0;
  double p50_us = 0.0;
  double p99_us = 0.0;
  double qps = 0.0;
  std::uint64_t peak_bytes = 0;
  std::uint64_t scanned_slots = 0;
  std::uint64_t filter_slots = 0;
  StageTimings stage_mean;
  std::uint64_t result_hash = 0;
};

struct Workload {
  std::vector<RetrievalRequest> requests;
  // Optional exact top-k per request (first task), for recall.
  std::vector<GroundTruth> truth;
  // Exact filter masks per request over slots, for query-level FPR.
  std::vector<Bitmask> exact_masks;
};

// Throws kEmptyWorkload. Requests are cycled to fill the batches.
BenchReport bench(const Engine& engine, const Workload& workload, const BenchConfig& config);

nlohmann::json to_json(const BenchReport& report);
std::string csv_header();
std::string to_csv_row(const BenchReport& report);

std::uint64_t peak_resident_bytes();

}  // namespace filtra::eval
