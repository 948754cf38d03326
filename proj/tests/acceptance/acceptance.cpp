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

// Acceptance suite. One PASS/FAIL line per criterion; exit status 1 if any fails.
// Usage: filtra_acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "filtra/error.hpp"
#include "filtra/eval.hpp"
#include "filtra/exact_filter.hpp"
#include "filtra/serve.hpp"
#include "filtra/snapshot.hpp"
#include "../test_util.hpp"

namespace {

using namespace filtra;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and sizes.
constexpr double kRuntimeLimit1 = 120.0;  // seconds
constexpr double kRuntimeLimit2 = 120.0;
constexpr double kRuntimeLimit3 = 60.0;
constexpr double kFprLow = 0.25;
constexpr double kFprHigh = 4.0;
constexpr std::uint64_t kFprMinTrials = 10'000'000;
constexpr std::size_t kFprItems = 200'000;
constexpr std::size_t kFprLeaves = 25'000;  // 5e9 item-leaf trials per M
constexpr std::size_t kDequantSamples = 1'000'000;
constexpr double kTauMin = 0.9;
constexpr double kRecallAt64 = 0.95;
constexpr std::size_t kRecallK = 1024;
constexpr std::size_t kLargeClusters = 316;
constexpr double kReplayRelTol = 1e-5;
constexpr std::size_t kHotSwapRequests = 10'000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Bitmask slot_mask(const Bitmask& by_index, const IvfIndex& ivf) {
  Bitmask out(ivf.n_slots());
  for (std::size_t i = 0; i < by_index.size(); ++i) {
    if (by_index.test(i)) out.set(ivf.inv_perm[i]);
  }
  return out;
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b))); }

// 1. Exhaustive IVF search equals int8 brute force.
Outcome exhaustive_equivalence() {
  const auto t0 = Clock::now();
  std::size_t queries = 0, mismatches = 0;
  for (std::uint64_t c = 0; c < 50; ++c) {
    Rng rng(1000 + c);
    const std::size_t n = 500 + rng.below(19'501);
    const std::size_t dim = std::size_t{8} << rng.below(3);
    const auto catalog = testing::make_catalog(n, dim, 1 + rng.below(60), c, 0.1 + 0.5 * rng.uniform());
    IvfBuildOptions opt;
    opt.seed = c;
    const auto ivf = build_ivf(catalog, opt);
    const auto qs = eval::random_queries(catalog, 4, 0.5, c);
    for (const auto& q : qs) {
      const std::size_t k = 1 + rng.below(std::min<std::size_t>(n, 600));
      const auto got = search(ivf, q, ivf.n_clusters(), k);
      const auto want = eval::brute_force_topk(catalog, q, k, nullptr, eval::ScoreMode::kInt8Dot, &ivf.quant_params());
      ++queries;
      if (got.entries != want.entries) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kRuntimeLimit1,
          fmt("50 catalogs, %zu queries, %zu mismatches, %.1fs (limit %.0fs)", queries, mismatches, secs, kRuntimeLimit1)};
}

// 2. Co-designed search equals full-mask search.
Outcome codesign_equivalence() {
  const auto t0 = Clock::now();
  std::size_t mismatches = 0, nonempty = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    Rng rng(2000 + i);
    const std::size_t n = 200 + rng.below(4000);
    const auto catalog = testing::make_catalog(n, 8, 1 + rng.below(30), 2000 + i);
    PublishConfig pc;
    pc.seed = i;
    pc.bloom.m_bits = 64u << rng.below(5);
    pc.bloom.k_hashes = static_cast<std::uint32_t>(1 + rng.below(6));
    const auto e = build_engine(catalog, pc, 1);
    const auto expr = eval::random_filter(catalog, 2000 + i, true, 3);
    const auto cf = compile_filter(expr, e.bloom.params);
    const auto q = testing::random_unit(8, rng);
    const std::size_t nprobe = 1 + rng.below(e.ivf.n_clusters());
    const std::size_t k0 = 1 + rng.below(500);
    const auto a = codesigned_search(e.ivf, e.bloom, &cf, q, nprobe, k0);
    const auto b = full_mask_search(e.ivf, e.bloom, &cf, q, nprobe, k0);
    if (a != b) ++mismatches;
    if (!a.entries.empty()) ++nonempty;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kRuntimeLimit2,
          fmt("200 instances (%zu non-empty), %zu mismatches, %.1fs", nonempty, mismatches, secs)};
}

// 3. Bloom mask is a superset of the exact mask for NOT-free queries.
Outcome superset_guarantee() {
  const auto t0 = Clock::now();
  std::uint64_t false_negatives = 0, false_positives = 0, exact_hits = 0;
  std::size_t queries = 0;
  for (std::uint64_t c = 0; c < 20; ++c) {
    Rng rng(3000 + c);
    const auto catalog = testing::make_catalog(500 + rng.below(5000), 8, 1 + rng.below(20), 3000 + c);
    PublishConfig pc;
    pc.seed = c;
    pc.bloom.m_bits = 32u << rng.below(6);
    pc.bloom.k_hashes = static_cast<std::uint32_t>(1 + rng.below(6));
    const auto e = build_engine(catalog, pc, 1);
    const auto slots = testing::slot_items(catalog, e.ivf);
    const auto fi = build_forward_index(slots);
    for (int j = 0; j < 50; ++j, ++queries) {
      const auto expr = eval::random_filter(catalog, c * 100 + j, false, 3);
      const auto approx = eval_compiled(compile_filter(expr, e.bloom.params), e.bloom, e.ivf.valid_mask);
      const auto exact = forward_eval(fi, expr);
      for (std::size_t s = 0; s < exact.size(); ++s) {
        if (exact.test(s)) {
          ++exact_hits;
          if (!approx.test(s)) ++false_negatives;
        } else if (approx.test(s)) {
          ++false_positives;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {false_negatives == 0 && queries == 1000 && secs < kRuntimeLimit3,
          fmt("%zu queries, %llu exact matches, %llu false negatives, %llu false positives, %.1fs", queries,
              static_cast<unsigned long long>(exact_hits), static_cast<unsigned long long>(false_negatives),
              static_cast<unsigned long long>(false_positives), secs)};
}

// 4. forward_eval, inverted_eval and the naive interpreter agree, NOT included.
Outcome oracle_agreement() {
  std::size_t queries = 0, disagreements = 0, with_not = 0;
  for (std::uint64_t c = 0; c < 10; ++c) {
    const auto catalog = testing::make_catalog(300 + 400 * c, 8, 3 + c, 4000 + c);
    IvfBuildOptions opt;
    opt.seed = c;
    const auto ivf = build_ivf(catalog, opt);
    const auto slots = testing::slot_items(catalog, ivf);
    const auto fi = build_forward_index(slots);
    const auto ii = build_inverted_index(slots);
    for (int j = 0; j < 100; ++j, ++queries) {
      const auto expr = eval::random_filter(catalog, 4000 + c * 100 + j, true, 4);
      if (expr.contains_not()) ++with_not;
      const auto f = forward_eval(fi, expr);
      const auto i = inverted_eval(ii, expr, ivf.n_slots());
      const auto n = slot_mask(eval::naive_filter(catalog, expr), ivf);
      if (!(f == i && i == n)) ++disagreements;
    }
  }
  return {disagreements == 0 && queries == 1000,
          fmt("%zu queries (%zu with NOT), %zu disagreements", queries, with_not, disagreements)};
}

// 5. Per-leaf false positive rate follows the bloom law.
Outcome fpr_law() {
  constexpr std::uint32_t kK = 5;
  constexpr std::size_t kValuesPerItem = 10;
  std::vector<Item> items(kFprItems);
  Rng rng(5);
  for (std::size_t i = 0; i < items.size(); ++i) {
    items[i].item_id = i + 1;
    for (std::uint64_t f = 1; f <= kValuesPerItem; ++f) items[i].features.push_back({f, rng.below(1'000'000)});
  }
  std::vector<const Item*> slots;
  for (const auto& it : items) slots.push_back(&it);
  // Values at or above 2^40 never occur, so every item is a negative for every leaf.
  std::vector<FeatureValue> leaves(kFprLeaves);
  for (std::size_t j = 0; j < leaves.size(); ++j) leaves[j] = {1 + rng.below(kValuesPerItem), (std::uint64_t{1} << 40) + j};

  const std::uint64_t trials = static_cast<std::uint64_t>(kFprItems) * kFprLeaves;
  auto measure = [&](std::uint32_t m, std::uint32_t scheme) {
    BloomParams p;
    p.m_bits = m;
    p.k_hashes = kK;
    p.hash_scheme_id = scheme;
    const auto bloom = build_bloom(slots, p);
    std::uint64_t fp = 0;
    for (const auto& leaf : leaves) fp += bloom_eval_leaf(bloom, hash_positions(leaf.feature_id, leaf.value, p)).count();
    return static_cast<double>(fp) / static_cast<double>(trials);
  };

  bool ok = trials >= kFprMinTrials;
  std::string detail = fmt("%.1e trials per M, default scheme %u:", static_cast<double>(trials), BloomParams{}.hash_scheme_id);
  std::string legacy = " | double-hash scheme 1 ratios:";
  double prev = 2.0;
  for (std::uint32_t m : {512u, 1024u, 2048u}) {
    const double law = std::pow(1.0 - std::pow(1.0 - 1.0 / m, static_cast<double>(kK * kValuesPerItem)), kK);
    const double empirical = measure(m, BloomParams{}.hash_scheme_id);
    const double ratio = empirical / law;
    ok = ok && ratio >= kFprLow && ratio <= kFprHigh && empirical < prev;
    prev = empirical;
    detail += fmt(" M=%u fpr=%.3e law=%.3e ratio=%.2f;", m, empirical, law, ratio);
    legacy += fmt(" %.1f", measure(m, kHashDoubleFnv) / law);
  }
  detail += fmt(" band [%.2f, %.2f], strictly decreasing in M", kFprLow, kFprHigh) + legacy;
  return {ok, detail};
}

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++ties_x;
      } else if (dy == 0) {
        ++ties_y;
      } else if ((dx > 0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double denom = std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
  return denom == 0 ? 1.0 : (concordant - discordant) / denom;
}

// 6. Dequantization within half a step; the int8 scan score keeps the f32 order of the top 1%.
Outcome quantization_bounds() {
  Rng rng(6);
  std::size_t violations = 0;
  double worst = 0;
  for (std::size_t i = 0; i < kDequantSamples; ++i) {
    const float lo = static_cast<float>(-4 * rng.uniform());
    const float hi = lo + static_cast<float>(0.01 + 8 * rng.uniform());
    const auto p = QuantParams::from_range(lo, hi);
    const float x = lo + static_cast<float>(rng.uniform()) * (hi - lo);
    const float back = dequantize_value(quantize_value(x, p), p);
    const double half_step = 0.5 / static_cast<double>(p.scale);
    const double slack = 4.0 * std::numeric_limits<float>::epsilon() * std::max({1.0f, std::abs(lo), std::abs(hi)});
    const double err = std::abs(static_cast<double>(back) - x);
    worst = std::max(worst, err / half_step);
    if (err > half_step + slack) ++violations;
  }
  std::vector<double> taus;
  for (std::uint64_t c = 0; c < 5; ++c) {
    const auto catalog = testing::make_catalog(20'000, 32, 100, 6000 + c);
    const auto emb = catalog.embeddings();
    const auto qp = compute_quant_params(emb);
    const auto items_q = quantize_matrix(emb, qp);
    const auto zp = zero_point_fixed(qp);
    for (const auto& q : eval::random_queries(catalog, 20, 0.5, c)) {
      const auto top = eval::brute_force_topk(catalog, q, catalog.size() / 100);
      const auto q8 = quantize_vector(q, qp);
      std::vector<double> f32, i8;
      std::unordered_map<std::uint64_t, std::size_t> row;
      for (std::size_t i = 0; i < catalog.size(); ++i) row[catalog.items[i].item_id] = i;
      for (const auto& h : top.entries) {
        f32.push_back(h.score);
        const auto r = items_q.row(row.at(h.item_id));
        i8.push_back(scan_score(int8_dot(r, q8), row_sum(r), zp));
      }
      taus.push_back(kendall_tau_b(f32, i8));
    }
  }
  double mean = 0;
  for (double t : taus) mean += t;
  mean /= static_cast<double>(taus.size());
  const double min_tau = *std::min_element(taus.begin(), taus.end());
  return {violations == 0 && mean >= kTauMin,
          fmt("%zu values, %zu beyond half step plus float slack (worst %.4f half-steps); Kendall tau over %zu queries mean %.4f min %.4f "
              "(need mean >= %.2f)",
              kDequantSamples, violations, worst, taus.size(), mean, min_tau, kTauMin)};
}

struct Large {
  Catalog catalog;
  IvfIndex ivf;
};

Large make_large(std::size_t blobs) {
  Large out;
  out.catalog = testing::make_catalog(100'000, 32, blobs, 7, 0.3);
  IvfBuildOptions opt;
  opt.n_clusters = kLargeClusters;
  opt.seed = 7;
  out.ivf = build_ivf(out.catalog, opt);
  return out;
}

// Generator clusters match the index's 316.
const Large& large_catalog() {
  static const Large l = make_large(kLargeClusters);
  return l;
}

struct RecallCurve {
  std::string points;
  bool monotone = true;
  double at64 = 0;
  double f32_at64 = 0;
};

// Mean recall@1024 over nprobe 1..64 against int8 brute force; f32 truth kept for reference.
RecallCurve recall_curve(const Large& l) {
  const auto qs = eval::random_queries(l.catalog, 50, 0.5, 77);
  std::vector<eval::GroundTruth> truth, truth_f32;
  for (const auto& q : qs) {
    eval::GroundTruth g, gf;
    for (const auto& h : eval::brute_force_topk(l.catalog, q, kRecallK, nullptr, eval::ScoreMode::kInt8Dot,
                                                &l.ivf.quant_params())
                             .entries)
      g.ids.push_back(h.item_id);
    for (const auto& h : eval::brute_force_topk(l.catalog, q, kRecallK).entries) gf.ids.push_back(h.item_id);
    truth.push_back(std::move(g));
    truth_f32.push_back(std::move(gf));
  }
  RecallCurve out;
  double prev = -1;
  for (std::size_t nprobe : {1, 2, 4, 8, 16, 32, 64}) {
    double sum = 0, sum_f32 = 0;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const auto got = search(l.ivf, qs[i], nprobe, kRecallK);
      sum += eval::recall_at_k(got, truth[i], kRecallK);
      sum_f32 += eval::recall_at_k(got, truth_f32[i], kRecallK);
    }
    const double r = sum / static_cast<double>(qs.size());
    if (r < prev) out.monotone = false;
    prev = r;
    if (nprobe == 64) {
      out.at64 = r;
      out.f32_at64 = sum_f32 / static_cast<double>(qs.size());
    }
    out.points += fmt(" %zu:%.4f", nprobe, r);
  }
  return out;
}

// 7. Recall is non-decreasing in nprobe and high at 64 probes.
// Also reports, without gating, a denser 1000-blob catalog where each
// index cluster mixes about three generator blobs.
Outcome recall_monotonicity() {
  const auto& l = large_catalog();
  const auto c = recall_curve(l);
  const auto dense = recall_curve(make_large(1000));
  return {c.monotone && c.at64 >= kRecallAt64 && l.ivf.n_clusters() == kLargeClusters,
          fmt("n=100000 blobs=%zu clusters=%zu, recall@%zu:%s (need >= %.2f at 64, f32 truth %.4f); "
              "1000 blobs:%s (monotone %s, f32 truth %.4f)",
              kLargeClusters, l.ivf.n_clusters(), kRecallK, c.points.c_str(), kRecallAt64, c.f32_at64,
              dense.points.c_str(), dense.monotone ? "yes" : "no", dense.f32_at64)};
}

// 8. topk = 20000 with exhaustive probing matches brute force.
Outcome large_topk() {
  const auto& l = large_catalog();
  const auto qs = eval::random_queries(l.catalog, 3, 0.5, 88);
  std::size_t ok = 0;
  for (const auto& q : qs) {
    const auto got = search(l.ivf, q, l.ivf.n_clusters(), 20'000);
    const auto want = eval::brute_force_topk(l.catalog, q, 20'000, nullptr, eval::ScoreMode::kInt8Dot, &l.ivf.quant_params());
    if (got.entries.size() == 20'000 && got.entries == want.entries) ++ok;
  }
  return {ok == qs.size(), fmt("%zu/%zu queries returned 20000 hits equal to brute force", ok, qs.size())};
}

struct ServeWorld {
  Catalog catalog;
  std::shared_ptr<const Engine> engine;
};

PublishConfig mlp_config(std::size_t dim, std::uint64_t seed) {
  PublishConfig pc;
  pc.seed = seed;
  const std::vector<std::string> tasks{"like", "share", "comment"};
  pc.overarch = OverArchModel::random_mlp(dim, dim, tasks, std::vector<std::size_t>{32, 16}, seed);
  pc.value_model = value_model_from_json(json::parse(R"({"op":"add","args":[
      {"op":"mul","args":[{"op":"const","value":0.5},{"op":"task","task":"like"}]},
      {"op":"if","cond":{"left":{"op":"task","task":"share"},"cmp":">","right":{"op":"const","value":0}},
       "then":{"op":"mul","args":[{"op":"const","value":0.3},{"op":"task","task":"share"}]},
       "else":{"op":"clamp","lo":-0.5,"hi":0.5,"args":[{"op":"task","task":"comment"}]}}]})"));
  return pc;
}

json random_wire(const Catalog& catalog, Rng& rng, std::uint64_t id) {
  static const char* kTasks[] = {"like", "share", "comment"};
  json j;
  j["id"] = id;
  const std::size_t t = rng.below(4) == 0 ? 1 + rng.below(2) : 3;
  j["tasks"] = json::array();
  for (std::size_t i = 0; i < t; ++i) j["tasks"].push_back({{"name", kTasks[i]}, {"user_embedding", testing::random_unit(catalog.dim, rng)}});
  const auto kind = rng.below(10);
  if (kind == 0) {
    j["tasks"][0]["user_embedding"] = std::vector<float>(catalog.dim + 1, 0.1f);  // malformed
  } else if (kind < 3) {
    j["mode"] = "esr";
    j["item_ids"] = json::array();
    const std::size_t n = 1 + rng.below(300);
    for (std::size_t i = 0; i < n; ++i) j["item_ids"].push_back(catalog.items[rng.below(catalog.size())].item_id);
    if (rng.below(2)) j["topk"] = 1 + rng.below(n);
    return j;
  }
  if (rng.below(3)) j["filter"] = to_string(eval::random_filter(catalog, rng.next_u64(), true, 3), catalog.schema);
  j["nprobe"] = 1 + rng.below(16);
  j["k0"] = 50 + rng.below(300);
  j["topk"] = 1 + rng.below(50);
  if (rng.below(2)) j["merge"] = rng.below(2) ? "union" : "intersection";
  if (t < 3 || rng.below(4) == 0) j["value_model"] = {{"op", "task"}, {"task", kTasks[0]}};
  return j;
}

const ServeWorld& serve_world() {
  static const ServeWorld w = [] {
    ServeWorld out;
    out.catalog = testing::make_catalog(5000, 16, 50, 9);
    out.engine = std::make_shared<const Engine>(build_engine(out.catalog, mlp_config(16, 9), 1));
    return out;
  }();
  return w;
}

// 9. Batched responses equal sequential ones.
Outcome batching_transparency() {
  const auto& w = serve_world();
  Rng rng(9);
  std::size_t requests = 0, diffs = 0, errors = 0, esr = 0;
  for (int b = 0; b < 100; ++b) {
    std::vector<json> batch(1 + rng.below(16));
    for (auto& r : batch) r = random_wire(w.catalog, rng, requests++);
    const auto out = handle_batch(*w.engine, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (out[i].contains("error")) ++errors;
      if (batch[i].value("mode", "") == "esr") ++esr;
      if (strip_stats(out[i]) != strip_stats(handle_request(*w.engine, batch[i]))) ++diffs;
    }
  }
  return {diffs == 0, fmt("100 batches, %zu requests (%zu esr, %zu error responses), %zu differences", requests, esr, errors, diffs)};
}

// 10. One shard is the unsharded engine; four shards match global brute force.
Outcome shard_identity() {
  const auto catalog = testing::make_catalog(20'000, 16, 80, 10);
  const auto pc = mlp_config(16, 10);
  const auto engine = build_engine(catalog, pc, 1);
  const ShardedEngine one(build_shards(catalog, 1, pc, 1, 10));
  const ShardedEngine four(build_shards(catalog, 4, pc, 1, 10));
  Rng rng(10);
  std::size_t diffs1 = 0, diffs4 = 0, diffs4_full = 0, n = 0;
  for (int i = 0; i < 30; ++i, ++n) {
    RetrievalRequest req;
    for (const char* t : {"like", "share", "comment"}) req.tasks.push_back({t, testing::random_unit(16, rng)});
    req.filter = eval::random_filter(catalog, 100 + i, true, 3);
    req.nprobe = 1 + rng.below(20);
    req.k0 = 300;
    req.topk = 50;
    if (one.retrieve(req).items != retrieve(engine, req).items) ++diffs1;

    const auto q = testing::random_unit(16, rng);
    const auto want = eval::brute_force_topk(catalog, q, 500, nullptr, eval::ScoreMode::kInt8Dot, &engine.ivf.quant_params());
    if (four.search(q, 1u << 20, 500).entries != want.entries) ++diffs4;

    req.nprobe = 1u << 20;
    if (four.retrieve(req).items != retrieve(engine, req).items) ++diffs4_full;
  }
  return {diffs1 == 0 && diffs4 == 0 && diffs4_full == 0,
          fmt("%zu requests: S=1 vs unsharded %zu diffs; S=4 global topk vs brute force %zu diffs; S=4 exhaustive "
              "retrieve vs unsharded %zu diffs",
              n, diffs1, diffs4, diffs4_full)};
}

// 11. Snapshot round trip, corruption detection and hot swap.
Outcome snapshot_roundtrip() {
  const auto& w = serve_world();
  testing::TempDir dir;
  const auto p1 = dir / "v1.snap";
  const auto p2 = dir / "v2.snap";
  publish(w.catalog, mlp_config(16, 9), 1, p1);
  auto cfg2 = mlp_config(16, 9);
  cfg2.seed = 99;
  cfg2.bloom.m_bits = 512;
  publish(w.catalog, cfg2, 2, p2);

  const auto loaded = load_shared(p1);
  Rng rng(11);
  std::vector<json> pool;
  for (int i = 0; i < 64; ++i) pool.push_back(random_wire(w.catalog, rng, static_cast<std::uint64_t>(i)));
  std::size_t response_diffs = 0;
  for (const auto& r : pool) {
    if (strip_stats(handle_request(*loaded, r)).dump() != strip_stats(handle_request(*w.engine, r)).dump()) ++response_diffs;
  }

  std::vector<std::uint8_t> bytes = serialize_engine(*loaded);
  const auto header = read_header(bytes);
  std::size_t undetected = 0, flips = 0;
  for (const auto& s : header.sections) {
    for (int t = 0; t < 5; ++t, ++flips) {
      auto bad = bytes;
      bad[s.offset + rng.below(s.length)] ^= static_cast<std::uint8_t>(1 + rng.below(255));
      try {
        deserialize_engine(bad);
        ++undetected;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kChecksumMismatch || e.args() != std::vector<std::int64_t>{s.section_id}) ++undetected;
      }
    }
  }

  // Hot swap under load.
  const auto v2 = load_shared(p2);
  std::vector<std::string> expect1, expect2;
  std::size_t distinct = 0;
  for (const auto& r : pool) {
    expect1.push_back(strip_stats(handle_request(*loaded, r)).dump());
    expect2.push_back(strip_stats(handle_request(*v2, r)).dump());
    if (expect1.back() != expect2.back()) ++distinct;
  }
  Server server(loaded, BatchPolicy{6, std::chrono::milliseconds(1), 256, 3});
  std::vector<std::promise<std::string>> replies(kHotSwapRequests);
  std::vector<std::future<std::string>> futures;
  for (auto& p : replies) futures.push_back(p.get_future());
  std::size_t swapped_at = 0;
  for (std::size_t i = 0; i < kHotSwapRequests; ++i) {
    if (i == kHotSwapRequests / 2) {
      std::promise<std::string> ack;
      auto f = ack.get_future();
      server.submit(json{{"op", "reload"}, {"snapshot", p2.string()}}.dump(), [&](std::string r) { ack.set_value(std::move(r)); });
      if (json::parse(f.get()).value("snapshot_version", 0) != 2) return {false, "reload was not acknowledged"};
      swapped_at = i;
    }
    server.submit(pool[i % pool.size()].dump(), [&replies, i](std::string r) { replies[i].set_value(std::move(r)); });
  }
  std::size_t mixed = 0, stale_after_ack = 0, v1_seen = 0, v2_seen = 0;
  for (std::size_t i = 0; i < kHotSwapRequests; ++i) {
    const auto r = json::parse(futures[i].get());
    const auto body = strip_stats(r).dump();
    const auto& want = r.value("snapshot_version", 0) == 2 ? expect2[i % pool.size()] : expect1[i % pool.size()];
    if (r.contains("error")) {
      if (body != expect1[i % pool.size()] && body != expect2[i % pool.size()]) ++mixed;
      continue;
    }
    const int version = r["snapshot_version"];
    version == 1 ? ++v1_seen : ++v2_seen;
    if (body != want) ++mixed;
    if (i >= swapped_at && version != 2) ++stale_after_ack;
  }
  server.stop();
  return {response_diffs == 0 && undetected == 0 && mixed == 0 && stale_after_ack == 0 && v1_seen > 0 && v2_seen > 0,
          fmt("%zu loaded responses differ; %zu/%zu corruptions undetected; hot swap %zu requests (v1 %zu, v2 %zu, "
              "%zu/%zu pool requests differ by version): %zu mixed, %zu stale after ack",
              response_diffs, undetected, flips, kHotSwapRequests, v1_seen, v2_seen, distinct, pool.size(), mixed,
              stale_after_ack)};
}

// 12. Full retrieve matches an independent staged replay.
Outcome pipeline_replay() {
  const auto catalog = testing::make_catalog(10'000, 32, 60, 12);
  const auto engine = build_engine(catalog, mlp_config(32, 12), 1);
  Rng rng(12);
  std::size_t probe_diffs = 0, candidate_diffs = 0, merge_diffs = 0, rank_diffs = 0, score_diffs = 0, ranked = 0;
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    RetrievalRequest req;
    for (const char* t : {"like", "share", "comment"}) req.tasks.push_back({t, testing::random_unit(32, rng)});
    req.filter = eval::random_filter(catalog, 1200 + i, true, 2);
    req.nprobe = 4 + rng.below(28);
    req.k0 = 500;
    req.topk = 100;
    req.merge = i % 2 ? MergeMode::kUnion : MergeMode::kIntersection;
    const auto ref = eval::reference_retrieve(engine, req);
    const auto cf = compile_filter(*req.filter, engine.bloom.params);
    std::vector<TopkResult> per_task;
    for (std::size_t t = 0; t < 3; ++t) {
      const auto& u = req.tasks[t].user_embedding;
      if (probe_centroids(engine.ivf, u, req.nprobe) != ref.probed[t]) ++probe_diffs;
      per_task.push_back(codesigned_search(engine.ivf, engine.bloom, &cf, u, req.nprobe, req.k0));
      if (per_task.back().entries != ref.candidates[t]) ++candidate_diffs;
    }
    if (merge_candidates(per_task, req.merge) != ref.merged) ++merge_diffs;
    const auto got = retrieve(engine, req).items;
    ranked += got.size();
    if (got.size() != ref.ranked.size()) {
      ++rank_diffs;
      continue;
    }
    for (std::size_t k = 0; k < got.size(); ++k) {
      if (got[k].item_id != ref.ranked[k].item_id) ++rank_diffs;
      bool close = rel_close(got[k].score, ref.ranked[k].score, kReplayRelTol);
      for (std::size_t t = 0; t < 3; ++t) close = close && rel_close(got[k].task_scores[t], ref.ranked[k].task_scores[t], kReplayRelTol);
      if (!close) ++score_diffs;
      worst = std::max(worst, std::abs(got[k].score - ref.ranked[k].score) / std::max(1.0, std::abs(ref.ranked[k].score)));
    }
  }
  return {probe_diffs + candidate_diffs + merge_diffs + rank_diffs + score_diffs == 0 && ranked > 0,
          fmt("20 requests, %zu ranked items; diffs probe %zu candidates %zu merge %zu order %zu scores %zu "
              "(worst rel %.2e, tol %.0e)",
              ranked, probe_diffs, candidate_diffs, merge_diffs, rank_diffs, score_diffs, worst, kReplayRelTol)};
}

// 13. Bloom memory law and the scanned-slot counter.
Outcome memory_law() {
  const std::pair<std::uint32_t, std::size_t> combos[] = {{64, 1}, {512, 1000}, {1024, 4097}, {2048, 10'000}, {4096, 777}};
  std::size_t bad = 0;
  std::string detail;
  std::uint64_t counter_diffs = 0, queries = 0;
  for (const auto& [m, n] : combos) {
    const auto catalog = testing::make_catalog(n, 8, 1 + n / 200, m + n);
    PublishConfig pc;
    pc.bloom.m_bits = m;
    const auto e = build_engine(catalog, pc, 1);
    const std::size_t want = static_cast<std::size_t>(m) * ((e.ivf.n_slots() + 63) / 64) * 8;
    if (e.bloom.plane_bytes() != want || bloom_plane_bytes(m, e.ivf.n_slots()) != want) ++bad;
    detail += fmt("(M=%u n=%zu slots=%zu: %zu bytes) ", m, n, e.ivf.n_slots(), e.bloom.plane_bytes());
    Rng rng(m);
    for (int i = 0; i < 20; ++i, ++queries) {
      const auto cf = compile_filter(eval::random_filter(catalog, m + i, true, 2), e.bloom.params);
      const auto q = testing::random_unit(8, rng);
      const std::size_t nprobe = 1 + rng.below(e.ivf.n_clusters());
      CodesignStats cs;
      codesigned_search(e.ivf, e.bloom, &cf, q, nprobe, 10, &cs);
      std::uint64_t sum = 0;
      for (auto c : probe_centroids(e.ivf, q, nprobe)) sum += e.ivf.cluster_sizes[c];
      if (cs.scanned_slots != sum) ++counter_diffs;
    }
  }
  return {bad == 0 && counter_diffs == 0,
          detail + fmt("; %zu law violations; scanned-slot counter %llu/%llu mismatches", bad,
                       static_cast<unsigned long long>(counter_diffs), static_cast<unsigned long long>(queries))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"exhaustive equivalence", exhaustive_equivalence},
      {"co-design equivalence", codesign_equivalence},
      {"superset guarantee", superset_guarantee},
      {"oracle agreement", oracle_agreement},
      {"FPR law", fpr_law},
      {"quantization bounds", quantization_bounds},
      {"recall monotonicity", recall_monotonicity},
      {"arbitrary topk", large_topk},
      {"batching transparency", batching_transparency},
      {"shard identity", shard_identity},
      {"snapshot round-trip", snapshot_roundtrip},
      {"pipeline oracle replay", pipeline_replay},
      {"memory law", memory_law},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2zu %-24s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
