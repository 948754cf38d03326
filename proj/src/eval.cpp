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

#include "filtra/eval.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <sstream>

#include "filtra/error.hpp"
#include "filtra/rng.hpp"

namespace filtra::eval {

namespace {

using Clock = std::chrono::steady_clock;

std::int32_t quantize_one(float x, const QuantParams& p) {
  const double t = std::nearbyint((static_cast<double>(x) - p.global_min) * static_cast<double>(p.scale)) - 128.0;
  return static_cast<std::int32_t>(std::clamp(t, -128.0, 127.0));
}

void sort_hits(std::vector<Hit>& hits, std::size_t k) {
  std::sort(hits.begin(), hits.end(), ranks_before);
  if (hits.size() > k) hits.resize(k);
}

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) ;
  return v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)];
}

// Recursive full-width evaluation straight from the bit-planes.
std::vector<std::uint64_t> plane_eval(const BloomIndex& bloom, const std::vector<std::uint64_t>& valid,
                                      const FilterExpr& e) {
  const std::size_t w = bloom.words_per_plane;
  switch (e.kind) {
    case FilterExpr::Kind::kLeaf: {
      std::vector<std::uint64_t> out(valid);
      for (auto p : hash_positions(e.leaf.feature_id, e.leaf.value, bloom.params).set_bits) {
        const std::uint64_t* plane = bloom.planes.data() + static_cast<std::size_t>(p) * w;
        for (std::size_t i = 0; i < w; ++i) out[i] &= plane[i];
      }
      return out;
    }
    case FilterExpr::Kind::kAnd: {
      std::vector<std::uint64_t> out(valid);
      for (const auto& c : e.children) {
        const auto m = plane_eval(bloom, valid, c);
        for (std::size_t i = 0; i < w; ++i) out[i] &= m[i];
      }
      return out;
    }
    case FilterExpr::Kind::kOr: {
      std::vector<std::uint64_t> out(w, 0);
      for (const auto& c : e.children) {
        const auto m = plane_eval(bloom, valid, c);
        for (std::size_t i = 0; i < w; ++i) out[i] |= m[i];
      }
      return out;
    }
    case FilterExpr::Kind::kNot: {
      auto m = plane_eval(bloom, valid, e.children.at(0));
      for (std::size_t i = 0; i < w; ++i) m[i] = ~m[i] & valid[i];
      return m;
    }
  }
  return {};
}

double naive_forward(const DenseLayer& l, const std::vector<double>& x, std::size_t o) {
  double acc = l.bias[o];
  for (std::size_t i = 0; i < l.in; ++i) acc += static_cast<double>(l.weights[o * l.in + i]) * x[i];
  return acc;
}

std::vector<double> naive_layer(const DenseLayer& l, const std::vector<double>& x, bool relu) {
  std::vector<double> y(l.out);
  for (std::size_t o = 0; o < l.out; ++o) {
    const double v = naive_forward(l, x, o);
    y[o] = relu ? std::max(v, 0.0) : v;
  }
  return y;
}

std::size_t pick_head(const std::vector<std::string>& names, const std::string& task) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == task) return i;
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "*") return i;
  }
  throw Error(ErrorCode::kUnknownTask, task);
}

// Fixed-point scan score recomputed from scratch: integer dot plus the item
// row sum times the rounded zero-point 128 + min * scale, in units of 2^-16.
double oracle_int8_score(std::int64_t dot, std::int64_t item_sum, const QuantParams& qp) {
  const long double c = 128.0L + static_cast<long double>(qp.global_min) * static_cast<long double>(qp.scale);
  const std::int64_t zp = std::llroundl(c * 65536.0L);
  return static_cast<double>(dot * 65536 + zp * item_sum) / 65536.0;
}

}  // namespace

TopkResult brute_force_topk(const Catalog& catalog, std::span<const float> query, std::size_t topk,
                            const Bitmask* mask, ScoreMode mode, const QuantParams* qp) {
  if (query.size() != catalog.dim) {
    throw Error(ErrorCode::kDimMismatch, "query length", {static_cast<std::int64_t>(catalog.dim),
                                                           static_cast<std::int64_t>(query.size())});
  }
  if (mode == ScoreMode::kInt8Dot && qp == nullptr) throw Error(ErrorCode::kInvalidSpec, "int8 mode needs quant params");
  std::vector<std::int32_t> qq;
  if (mode == ScoreMode::kInt8Dot) {
    for (float x : query) qq.push_back(quantize_one(x, *qp));
  }
  std::vector<Hit> hits;
  hits.reserve(catalog.size());
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (mask && !mask->test(i)) continue;
    const auto& emb = catalog.items[i].embedding;
    double s = 0;
    if (mode == ScoreMode::kF32Dot) {
      for (std::size_t d = 0; d < emb.size(); ++d) s += static_cast<double>(emb[d]) * query[d];
    } else {
      std::int64_t acc = 0;
      std::int64_t sum = 0;
      for (std::size_t d = 0; d < emb.size(); ++d) {
        const std::int64_t v = quantize_one(emb[d], *qp);
        acc += v * qq[d];
        sum += v;
      }
      s = oracle_int8_score(acc, sum, *qp);
    }
    hits.push_back({catalog.items[i].item_id, s});
  }
  sort_hits(hits, topk);
  return {std::move(hits), topk};
}

bool naive_match(const Item& item, const FilterExpr& expr) {
  switch (expr.kind) {
    case FilterExpr::Kind::kLeaf:
      for (const auto& f : item.features) {
        if (f == expr.leaf) return true;
      }
      return false;
    case FilterExpr::Kind::kAnd:
      for (const auto& c : expr.children) {
        if (!naive_match(item, c)) return false;
      }
      return true;
    case FilterExpr::Kind::kOr:
      for (const auto& c : expr.children) {
        if (naive_match(item, c)) return true;
      }
      return false;
    case FilterExpr::Kind::kNot:
      return !naive_match(item, expr.children.at(0));
  }
  return false;
}

Bitmask naive_filter(const Catalog& catalog, const FilterExpr& expr) {
  Bitmask out(catalog.size());
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (naive_match(catalog.items[i], expr)) out.set(i);
  }
  return out;
}

double recall_at_k(const TopkResult& result, const GroundTruth& truth, std::size_t k) {
  if (k == 0 || k > truth.ids.size()) {
    throw Error(ErrorCode::kInvalidSpec, "recall k must be in [1, |truth|]",
                {static_cast<std::int64_t>(k), static_cast<std::int64_t>(truth.ids.size())});
  }
  std::set<std::uint64_t> want(truth.ids.begin(), truth.ids.begin() + static_cast<std::ptrdiff_t>(k));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < std::min(k, result.entries.size()); ++i) hit += want.count(result.entries[i].item_id);
  return static_cast<double>(hit) / static_cast<double>(k);
}

FprReport fpr_measure(const BloomIndex& bloom, const Bitmask& valid, const InvertedIndex& exact,
                      std::span<const FeatureValue> leaves, std::span<const FilterExpr> queries) {
  for (const auto& q : queries) {
    if (q.contains_not()) throw Error(ErrorCode::kInvalidSpec, "FPR workload must be NOT-free");
  }
  if (valid.size() != bloom.n_slots || exact.n_slots != bloom.n_slots) {
    throw Error(ErrorCode::kLengthMismatch, "slot spaces differ");
  }
  FprReport r;
  r.leaves = leaves.size();
  const std::uint64_t n_valid = valid.count();
  const auto vw = valid.words();
  std::vector<std::uint64_t> m(bloom.words_per_plane);
  for (const auto& leaf : leaves) {
    std::copy(vw.begin(), vw.end(), m.begin());
    for (auto p : hash_positions(leaf.feature_id, leaf.value, bloom.params).set_bits) {
      const std::uint64_t* plane = bloom.plane(p);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] &= plane[i];
    }
    std::uint64_t admitted = 0;
    for (auto w : m) admitted += static_cast<std::uint64_t>(std::popcount(w));
    const auto& post = exact.posting(leaf);
    std::uint64_t true_admitted = 0;
    for (auto s : post) true_admitted += (m[s >> 6] >> (s & 63)) & 1;
    r.negatives += n_valid - post.size();
    r.false_positives += admitted - true_admitted;
  }
  r.leaf_fpr = r.negatives ? static_cast<double>(r.false_positives) / static_cast<double>(r.negatives) : 0.0;

  std::vector<std::uint64_t> valid_words(vw.begin(), vw.end());
  double sum = 0;
  for (const auto& q : queries) {
    const auto approx = plane_eval(bloom, valid_words, q);
    const auto truth = inverted_eval(exact, q, bloom.n_slots);
    std::uint64_t fp = 0;
    const auto tw = truth.words();
    for (std::size_t i = 0; i < approx.size(); ++i) fp += static_cast<std::uint64_t>(std::popcount(approx[i] & ~tw[i]));
    const std::uint64_t neg = n_valid - truth.count();
    if (neg == 0) continue;
    sum += static_cast<double>(fp) / static_cast<double>(neg);
    ++r.queries;
  }
  r.query_fpr = r.queries ? sum / static_cast<double>(r.queries) : 0.0;
  return r;
}

namespace {

FilterExpr random_node(const std::vector<FeatureValue>& pool, Rng& rng, bool allow_not, std::size_t depth,
                       std::size_t max_depth) {
  const bool leaf = depth >= max_depth || rng.uniform() < 0.35;
  FilterExpr node;
  if (leaf) {
    if (rng.uniform() < 0.1) {
      const auto& base = pool[static_cast<std::size_t>(rng.below(pool.size()))];
      node = FilterExpr::make_leaf(base.feature_id, (rng.next_u64() >> 1) | (1ULL << 62));
    } else {
      const auto& fv = pool[static_cast<std::size_t>(rng.below(pool.size()))];
      node = FilterExpr::make_leaf(fv.feature_id, fv.value);
    }
  } else {
    std::vector<FilterExpr> children;
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(2));
    for (std::size_t i = 0; i < n; ++i) children.push_back(random_node(pool, rng, allow_not, depth + 1, max_depth));
    node = rng.uniform() < 0.5 ? FilterExpr::make_and(std::move(children)) : FilterExpr::make_or(std::move(children));
  }
  if (allow_not && rng.uniform() < 0.2) node = FilterExpr::make_not(std::move(node));
  return node;
}

}  // namespace

FilterExpr random_filter(const Catalog& catalog, std::uint64_t seed, bool allow_not, std::size_t max_depth) {
  std::set<FeatureValue> seen;
  for (const auto& it : catalog.items) seen.insert(it.features.begin(), it.features.end());
  if (seen.empty()) throw Error(ErrorCode::kInvalidSpec, "catalog has no feature values");
  const std::vector<FeatureValue> pool(seen.begin(), seen.end());
  Rng rng(seed);
  return random_node(pool, rng, allow_not, 0, max_depth);
}

std::vector<std::vector<float>> random_queries(const Catalog& catalog, std::size_t n, double noise,
                                               std::uint64_t seed) {
  if (catalog.size() == 0) throw Error(ErrorCode::kInvalidSpec, "empty catalog");
  Rng rng(seed);
  const double sigma = noise / std::sqrt(static_cast<double>(catalog.dim));
  std::vector<std::vector<float>> out;
  out.reserve(n);
  for (std::size_t q = 0; q < n; ++q) {
    const auto& base = catalog.items[static_cast<std::size_t>(rng.below(catalog.size()))].embedding;
    std::vector<double> v(base.begin(), base.end());
    double norm = 0;
    for (auto& x : v) {
      x += sigma * rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    std::vector<float> f(v.size());
    for (std::size_t d = 0; d < v.size(); ++d) f[d] = static_cast<float>(norm > 0 ? v[d] / norm : v[d]);
    out.push_back(std::move(f));
  }
  return out;
}

double naive_overarch(const OverArchModel& model, const std::string& task, std::span<const float> user,
                      std::span<const float> item) {
  std::vector<double> x(user.begin(), user.end());
  x.insert(x.end(), item.begin(), item.end());
  if (const auto* mlp = std::get_if<MlpOverArch>(&model.model())) {
    const std::size_t head = pick_head(mlp->head_names, task);
    if (mlp->cross_dot) {
      double d = 0;
      for (std::size_t i = 0; i < user.size(); ++i) d += static_cast<double>(user[i]) * item[i];
      x.push_back(d);
    }
    for (const auto& l : mlp->hidden) x = naive_layer(l, x, true);
    return naive_forward(mlp->heads[head], x, 0);
  }
  const auto& mol = std::get<MolOverArch>(model.model());
  const auto logits = naive_layer(mol.gates[pick_head(mol.gate_names, task)], x, false);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0;
  for (double l : logits) denom += std::exp(l - mx);
  const std::vector<double> u(user.begin(), user.end());
  const std::vector<double> it(item.begin(), item.end());
  double total = 0;
  for (std::size_t p = 0; p < mol.user_proj.size(); ++p) {
    const auto up = naive_layer(mol.user_proj[p], u, false);
    const auto ip = naive_layer(mol.item_proj[p], it, false);
    double d = 0;
    for (std::size_t i = 0; i < up.size(); ++i) d += up[i] * ip[i];
    total += std::exp(logits[p] - mx) / denom * d;
  }
  return total;
}

double naive_value_model(const ValueNode& node, std::span<const std::string> tasks, std::span<const double> scores) {
  using Op = ValueNode::Op;
  std::vector<double> a;
  if (node.op != Op::kIf) {
    for (const auto& c : node.args) a.push_back(naive_value_model(c, tasks, scores));
  }
  switch (node.op) {
    case Op::kConst: return node.value;
    case Op::kTask:
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i] == node.task) return scores[i];
      }
      if (node.task == "*" && !scores.empty()) return scores[0];
      throw Error(ErrorCode::kUnknownTask, node.task);
    case Op::kAdd: {
      double s = 0;
      for (double v : a) s += v;
      return s;
    }
    case Op::kMul: {
      double s = 1;
      for (double v : a) s *= v;
      return s;
    }
    case Op::kSub: return a.at(0) - a.at(1);
    case Op::kDiv:
      if (a.at(1) == 0.0) throw Error(ErrorCode::kDivByZero, "division by zero");
      return a[0] / a[1];
    case Op::kMin: return *std::min_element(a.begin(), a.end());
    case Op::kMax: return *std::max_element(a.begin(), a.end());
    case Op::kClamp: return a.at(0) < node.lo ? node.lo : (a[0] > node.hi ? node.hi : a[0]);
    case Op::kIf: {
      const double l = naive_value_model(node.args.at(0), tasks, scores);
      const double r = naive_value_model(node.args.at(1), tasks, scores);
      bool c = false;
      switch (node.cmp) {
        case ValueNode::Cmp::kLt: c = l < r; break;
        case ValueNode::Cmp::kLe: c = l <= r; break;
        case ValueNode::Cmp::kGt: c = l > r; break;
        case ValueNode::Cmp::kGe: c = l >= r; break;
        case ValueNode::Cmp::kEq: c = l == r; break;
      }
      return naive_value_model(node.args.at(c ? 2 : 3), tasks, scores);
    }
  }
  return 0.0;
}

ReplayStage reference_retrieve(const Engine& engine, const RetrievalRequest& req) {
  const IvfIndex& ivf = engine.ivf;
  const auto& cen = ivf.centroids.vectors;
  const QuantParams qp = ivf.quant_params();
  ReplayStage out;

  std::optional<std::vector<std::uint64_t>> mask;
  if (req.filter) {
    const auto vw = ivf.valid_mask.words();
    mask = plane_eval(engine.bloom, std::vector<std::uint64_t>(vw.begin(), vw.end()), *req.filter);
  }

  for (const auto& task : req.tasks) {
    const auto& q = task.user_embedding;
    std::vector<std::pair<float, std::uint32_t>> cs;
    for (std::size_t c = 0; c < cen.rows; ++c) {
      float d = 0;
      for (std::size_t i = 0; i < cen.cols; ++i) d += cen.data[c * cen.cols + i] * q[i];
      cs.push_back({d, static_cast<std::uint32_t>(c)});
    }
    std::sort(cs.begin(), cs.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::vector<std::uint32_t> probed;
    for (std::size_t i = 0; i < std::min(req.nprobe, cs.size()); ++i) probed.push_back(cs[i].second);

    std::vector<std::int32_t> qq;
    for (float x : q) qq.push_back(quantize_one(x, qp));
    std::vector<Hit> hits;
    for (auto c : probed) {
      for (std::size_t s = ivf.cluster_offsets[c]; s < ivf.cluster_offsets[c + 1]; ++s) {
        if (!ivf.valid_mask.test(s)) continue;
        if (mask && !(((*mask)[s >> 6] >> (s & 63)) & 1)) continue;
        std::int64_t acc = 0;
        std::int64_t sum = 0;
        for (std::size_t d = 0; d < qq.size(); ++d) {
          const std::int64_t v = ivf.items_q.data[s * qq.size() + d];
          acc += v * qq[d];
          sum += v;
        }
        hits.push_back({ivf.item_ids[s], oracle_int8_score(acc, sum, qp)});
      }
    }
    sort_hits(hits, req.k0);
    out.probed.push_back(std::move(probed));
    out.candidates.push_back(std::move(hits));
  }

  std::map<std::uint64_t, std::size_t> seen;
  for (const auto& list : out.candidates) {
    for (const auto& h : list) ++seen[h.item_id];
  }
  for (const auto& [id, n] : seen) {
    if (req.merge == MergeMode::kUnion || n == req.tasks.size()) out.merged.push_back(id);
  }

  const ValueNode& vm = req.value_model ? *req.value_model : engine.value_model.root();
  std::vector<std::string> names;
  for (const auto& t : req.tasks) names.push_back(t.task_name);
  for (auto id : out.merged) {
    RankedItem r;
    r.item_id = id;
    const auto emb = engine.cache.lookup(id);
    for (const auto& t : req.tasks) r.task_scores.push_back(naive_overarch(engine.overarch, t.task_name, t.user_embedding, emb));
    r.score = naive_value_model(vm, names, r.task_scores);
    out.ranked.push_back(std::move(r));
  }
  std::sort(out.ranked.begin(), out.ranked.end(), [](const RankedItem& a, const RankedItem& b) {
    return a.score > b.score || (a.score == b.score && a.item_id < b.item_id);
  });
  if (out.ranked.size() > req.topk) out.ranked.resize(req.topk);
  return out;
}

namespace {

struct Run {
  std::vector<RankedItem> items;
  StageTimings timings;
  std::uint64_t scanned = 0;
  std::uint64_t filtered = 0;
};

Run run_request(const Engine& engine, const RetrievalRequest& req, bool codesign) {
  const auto t0 = Clock::now();
  validate_request(engine, req);
  Run run;
  std::optional<CompiledFilter> cf;
  if (req.filter) cf = compile_filter(*req.filter, engine.bloom.params);
  std::vector<TopkResult> per_task;
  for (const auto& t : req.tasks) {
    CodesignStats cs;
    const auto t_task = Clock::now();
    if (codesign) {
      per_task.push_back(codesigned_search(engine.ivf, engine.bloom, cf ? &*cf : nullptr, t.user_embedding, req.nprobe, req.k0, &cs));
      run.timings.probe_us += cs.probe_us;
      run.timings.filter_us += cs.filter_us;
      run.timings.scan_us += cs.scan_us;
    } else {
      per_task.push_back(full_mask_search(engine.ivf, engine.bloom, cf ? &*cf : nullptr, t.user_embedding, req.nprobe, req.k0, &cs));
      run.timings.scan_us += std::chrono::duration<double, std::micro>(Clock::now() - t_task).count();
    }
    run.scanned += cs.scanned_slots;
    run.filtered += cs.filter_slots;
  }
  const auto t_rank = Clock::now();
  const auto merged = merge_candidates(per_task, req.merge);
  const ValueModel vm = req.value_model ? ValueModel(*req.value_model) : engine.value_model;
  run.items = rank_candidates(engine.overarch, vm, engine.cache, req.tasks, merged, req.topk);
  run.timings.overarch_us = std::chrono::duration<double, std::micro>(Clock::now() - t_rank).count();
  run.timings.total_us = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
  return run;
}

}  // namespace

BenchReport bench(const Engine& engine, const Workload& workload, const BenchConfig& config) {
  if (workload.requests.empty()) throw Error(ErrorCode::kEmptyWorkload, "workload has no requests");
  if (config.batch_size == 0 || config.clients == 0) throw Error(ErrorCode::kInvalidConfig, "batch size and clients must be >= 1");
  const auto& reqs = workload.requests;
  BenchReport rep;
  rep.workload_id = config.workload_id;
  rep.nprobe = reqs[0].nprobe;
  rep.topk = reqs[0].topk;
  rep.bloom_m = config.bloom_m ? config.bloom_m : engine.bloom.params.m_bits;
  rep.bloom_k = config.bloom_k ? config.bloom_k : engine.bloom.params.k_hashes;

  // One untimed pass for results, counters, recall and the result hash.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  double recall_sum = 0;
  std::size_t recall_n = 0;
  const std::size_t rk = config.recall_k ? config.recall_k : rep.topk;
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    const Run run = run_request(engine, reqs[i], config.codesign);
    rep.scanned_slots += run.scanned;
    rep.filter_slots += run.filtered;
    for (const auto& it : run.items) {
      h = fnv_mix(h, it.item_id);
      h = fnv_mix(h, std::bit_cast<std::uint64_t>(it.score));
    }
    if (i < workload.truth.size() && !workload.truth[i].ids.empty()) {
      TopkResult r;
      for (const auto& it : run.items) r.entries.push_back({it.item_id, it.score});
      recall_sum += recall_at_k(r, workload.truth[i], std::min(rk, workload.truth[i].ids.size()));
      ++recall_n;
    }
  }
  rep.result_hash = h;
  rep.recall_at_k = recall_n ? recall_sum / static_cast<double>(recall_n) : 0.0;

  double fpr_sum = 0;
  std::size_t fpr_n = 0;
  const auto vw = engine.ivf.valid_mask.words();
  const std::vector<std::uint64_t> valid_words(vw.begin(), vw.end());
  const std::uint64_t n_valid = engine.ivf.valid_mask.count();
  for (std::size_t i = 0; i < std::min(reqs.size(), workload.exact_masks.size()); ++i) {
    if (!reqs[i].filter || reqs[i].filter->contains_not()) continue;
    const CompiledFilter cf = compile_filter(*reqs[i].filter, engine.bloom.params);
    const Bitmask approx = eval_compiled(cf, engine.bloom, engine.ivf.valid_mask);
    const auto& exact = workload.exact_masks[i];
    std::uint64_t fp = 0;
    for (std::size_t w = 0; w < approx.n_words(); ++w) {
      fp += static_cast<std::uint64_t>(std::popcount(approx.words()[w] & ~exact.words()[w]));
    }
    const std::uint64_t neg = n_valid - exact.count();
    if (neg == 0) continue;
    fpr_sum += static_cast<double>(fp) / static_cast<double>(neg);
    ++fpr_n;
  }
  rep.fpr = fpr_n ? fpr_sum / static_cast<double>(fpr_n) : 0.0;

  std::vector<double> latencies;
  StageTimings stage_sum;
  std::size_t cursor = 0;
  double timed_wall = 0;
  const std::size_t total = config.warmup_batches + config.timed_batches;
  for (std::size_t b = 0; b < total; ++b) {
    std::vector<const RetrievalRequest*> batch;
    for (std::size_t j = 0; j < config.batch_size; ++j) batch.push_back(&reqs[cursor++ % reqs.size()]);
    std::vector<StageTimings> st(batch.size());
    const auto t0 = Clock::now();
    const auto nb = static_cast<std::int64_t>(batch.size());
#pragma omp parallel for num_threads(static_cast<int>(config.clients)) schedule(dynamic, 1)
    for (std::int64_t j = 0; j < nb; ++j) {
      st[static_cast<std::size_t>(j)] = run_request(engine, *batch[static_cast<std::size_t>(j)], config.codesign).timings;
    }
    const double us = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
    if (b < config.warmup_batches) continue;
    latencies.push_back(us);
    timed_wall += us;
    for (const auto& s : st) {
      stage_sum.probe_us += s.probe_us;
      stage_sum.filter_us += s.filter_us;
      stage_sum.scan_us += s.scan_us;
      stage_sum.overarch_us += s.overarch_us;
      stage_sum.total_us += s.total_us;
    }
  }
  rep.requests = latencies.size() * config.batch_size;
  if (!latencies.empty()) {
    double sum = 0;
    for (double l : latencies) sum += l;
    rep.mean_us = sum / static_cast<double>(latencies.size());
    rep.p50_us = percentile(latencies, 0.50);
    rep.p99_us = percentile(latencies, 0.99);
    rep.qps = timed_wall > 0 ? static_cast<double>(rep.requests) / (timed_wall * 1e-6) : 0.0;
    const double n = static_cast<double>(rep.requests);
    rep.stage_mean = {stage_sum.probe_us / n, stage_sum.filter_us / n, stage_sum.scan_us / n,
                      stage_sum.overarch_us / n, stage_sum.total_us / n};
  }
  rep.peak_bytes = peak_resident_bytes();
  return rep;
}

nlohmann::json to_json(const BenchReport& r) {
  return {{"workload_id", r.workload_id},
          {"nprobe", r.nprobe},
          {"topk", r.topk},
          {"M", r.bloom_m},
          {"K", r.bloom_k},
          {"requests", r.requests},
          {"recall_at_k", r.recall_at_k},
          {"fpr", r.fpr},
          {"mean_us", r.mean_us},
          {"p50_us", r.p50_us},
          {"p99_us", r.p99_us},
          {"qps", r.qps},
          {"peak_bytes", r.peak_bytes},
          {"scanned_slots", r.scanned_slots},
          {"filter_slots", r.filter_slots},
          {"stage_mean_us",
           {{"probe_us", r.stage_mean.probe_us},
            {"filter_us", r.stage_mean.filter_us},
            {"scan_us", r.stage_mean.scan_us},
            {"overarch_us", r.stage_mean.overarch_us},
            {"total_us", r.stage_mean.total_us}}},
          {"result_hash", r.result_hash}};
}

std::string csv_header() {
  return "workload_id,nprobe,topk,M,K,recall_at_k,fpr,mean_us,p99_us,qps,peak_bytes,scanned_slots";
}

std::string to_csv_row(const BenchReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.workload_id << ',' << r.nprobe << ',' << r.topk << ',' << r.bloom_m << ',' << r.bloom_k << ','
     << r.recall_at_k << ',' << r.fpr << ',' << r.mean_us << ',' << r.p99_us << ',' << r.qps << ',' << r.peak_bytes
     << ',' << r.scanned_slots;
  return os.str();
}

std::uint64_t peak_resident_bytes() {
  rusage ru{};
  if (getrusage(RUSAGE_SELF, &ru) != 0) return 0;
  return static_cast<std::uint64_t>(ru.ru_maxrss) * 1024;
}

}  // namespace filtra::eval
