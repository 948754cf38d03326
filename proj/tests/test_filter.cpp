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

#include <gtest/gtest.h>

#include <set>

#include <cmath>
#include <cstring>

#include "filtra/bloom.hpp"
#include "filtra/error.hpp"
#include "filtra/eval.hpp"
#include "filtra/exact_filter.hpp"
#include "filtra/filter_query.hpp"
#include "test_util.hpp"

namespace filtra {
namespace {

// Standalone hash recipes over the raw little-endian bytes.
std::uint64_t ref_fnv(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t ref_mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<std::uint32_t> ref_positions(std::uint64_t f, std::uint64_t v, std::uint32_t m, std::uint32_t k,
                                         std::uint32_t scheme = 1) {
  unsigned char buf[16];
  std::memcpy(buf, &f, 8);
  std::memcpy(buf + 8, &v, 8);
  const std::uint64_t h1 = ref_fnv(buf, 16);
  const std::uint64_t h2 = ref_mix(h1) | 1;
  std::vector<std::uint32_t> out;
  for (std::uint64_t i = 0; i < k; ++i) {
    const auto p = static_cast<std::uint32_t>(scheme == 1 ? (h1 + i * h2) % m : ref_mix(h1 + (i + 1) * 0x9e3779b97f4a7c15ULL) % m);
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Hash, ReferencePrimitives) {
  const unsigned char a = 'a';
  EXPECT_EQ(ref_fnv(&a, 1), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(ref_mix(0x9e3779b97f4a7c15ULL), 0xe220a8397b1dcdafULL);
}

TEST(Hash, MatchesStandaloneRecipe) {
  for (std::uint32_t scheme : {kHashDoubleFnv, kHashIndependentMix}) {
    BloomParams p;
    p.m_bits = 1024;
    p.k_hashes = 5;
    p.hash_scheme_id = scheme;
    EXPECT_EQ(hash_positions(1, 2, p).set_bits, ref_positions(1, 2, 1024, 5, scheme));
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
      BloomParams q;
      q.m_bits = 1 + static_cast<std::uint32_t>(rng.below(3000));
      q.k_hashes = 1 + static_cast<std::uint32_t>(rng.below(8));
      q.hash_scheme_id = scheme;
      const auto f = rng.next_u64(), v = rng.next_u64();
      EXPECT_EQ(hash_positions(f, v, q).set_bits, ref_positions(f, v, q.m_bits, q.k_hashes, scheme));
    }
  }
}

TEST(Hash, UnknownSchemeRejected) {
  BloomParams p;
  p.hash_scheme_id = 3;
  try {
    validate(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionUnsupported);
  }
}

// The double hash takes only about M^2/4 distinct position sets; independent hashes do not alias.
TEST(Hash, DistinctPositionSets) {
  for (std::uint32_t scheme : {kHashDoubleFnv, kHashIndependentMix}) {
    BloomParams p;
    p.m_bits = 64;
    p.k_hashes = 5;
    p.hash_scheme_id = scheme;
    std::set<std::vector<std::uint32_t>> sets;
    for (std::uint64_t v = 0; v < 20000; ++v) sets.insert(hash_positions(1, v, p).set_bits);
    if (scheme == kHashDoubleFnv) {
      EXPECT_LE(sets.size(), 64u * 32u);
    } else {
      EXPECT_GT(sets.size(), 15000u);
    }
  }
}

TEST(Hash, SingleHashIsH1ModM) {
  BloomParams p;
  p.hash_scheme_id = kHashDoubleFnv;
  p.m_bits = 777;
  p.k_hashes = 1;
  unsigned char buf[16] = {};
  const std::uint64_t f = 9, v = 12345;
  std::memcpy(buf, &f, 8);
  std::memcpy(buf + 8, &v, 8);
  EXPECT_EQ(hash_positions(f, v, p).set_bits, std::vector<std::uint32_t>{static_cast<std::uint32_t>(ref_fnv(buf, 16) % 777)});
}

TEST(Bloom, ColumnsFollowFeatureHashes) {
  Item empty{1, {}, {1.0f}};
  Item one{2, {{3, 4}}, {1.0f}};
  const std::vector<const Item*> slots{&empty, nullptr, &one};
  BloomParams p;
  const auto b = build_bloom(slots, p);
  EXPECT_EQ(b.n_slots, 3u);
  std::size_t set0 = 0, set1 = 0, set2 = 0;
  for (std::size_t m = 0; m < p.m_bits; ++m) {
    set0 += b.plane(m)[0] & 1;
    set1 += (b.plane(m)[0] >> 1) & 1;
    set2 += (b.plane(m)[0] >> 2) & 1;
  }
  EXPECT_EQ(set0, 0u);
  EXPECT_EQ(set1, 0u);
  EXPECT_EQ(set2, hash_positions(3, 4, p).set_bits.size());
  EXPECT_LE(set2, 5u);
}

TEST(Bloom, MemoryLaw) {
  for (auto [m, n] : std::vector<std::pair<std::uint32_t, std::size_t>>{{64, 1}, {512, 64}, {1024, 65}, {2048, 1000}, {100, 130}}) {
    std::vector<Item> items(n, Item{0, {{1, 1}}, {1.0f}});
    std::vector<const Item*> slots;
    for (const auto& it : items) slots.push_back(&it);
    BloomParams p;
    p.m_bits = m;
    const auto b = build_bloom(slots, p);
    EXPECT_EQ(b.plane_bytes(), static_cast<std::size_t>(m) * ((n + 63) / 64) * 8);
    EXPECT_EQ(bloom_plane_bytes(m, n), b.plane_bytes());
  }
}

TEST(Bloom, TheoreticalRate) {
  BloomParams p;
  EXPECT_NEAR(bloom_fpr_theoretical(p, 10), std::pow(1 - std::pow(1 - 1.0 / 1024, 50), 5), 1e-18);
  EXPECT_NEAR(bloom_fpr_theoretical(p, 10), 2.5e-7, 0.1e-7);
  p.m_bits = 1 << 30;
  EXPECT_LT(bloom_fpr_theoretical(p, 10), 1e-30);
  // Sizing heuristic: max values per item x hashes x collision buffer.
  EXPECT_EQ(120 * 5 * 3, 1800);
}

TEST(Bloom, ToyLeafIsSupersetOfExact) {
  std::vector<Item> items;
  Rng rng(1);
  for (std::uint64_t i = 0; i < 8; ++i) {
    Item it{i, {}, {1.0f}};
    for (std::uint64_t v = 0; v < 3; ++v) it.features.push_back({1, rng.below(6)});
    normalize_item(it, false);
    items.push_back(it);
  }
  std::vector<const Item*> slots;
  for (const auto& it : items) slots.push_back(&it);
  BloomParams p;
  p.m_bits = 8;
  p.k_hashes = 2;
  const auto b = build_bloom(slots, p);
  const auto fi = build_forward_index(slots);
  for (std::uint64_t v = 0; v < 6; ++v) {
    const auto approx = bloom_eval_leaf(b, hash_positions(1, v, p));
    const auto exact = forward_eval(fi, FilterExpr::make_leaf(1, v));
    for (std::size_t s = 0; s < 8; ++s) {
      if (exact.test(s)) EXPECT_TRUE(approx.test(s));
    }
    EXPECT_GE(approx.count(), exact.count());
  }
}

TEST(Bloom, EmptyQueryBloomIsAllOnes) {
  const auto c = testing::make_catalog(100, 4, 2, 1);
  const auto slots = identity_slots(c);
  const auto b = build_bloom(slots, BloomParams{});
  EXPECT_EQ(bloom_eval_leaf(b, QueryBloom{}).count(), 100u);
}

FeatureSchema country_lang_schema() {
  FeatureSchema s;
  s.names[1] = "country";
  s.names[2] = "lang";
  s.values[{1, "US"}] = 1;
  s.values[{1, "FR"}] = 2;
  s.values[{2, "EN"}] = 1;
  s.values[{2, "ES"}] = 2;
  return s;
}

TEST(Parse, CanonicalQueryShape) {
  const auto s = country_lang_schema();
  const auto e = parse_filter(R"(country = "US" AND (lang = "EN" OR lang = "ES"))", s);
  const auto want = FilterExpr::make_and(
      {FilterExpr::make_leaf(1, 1), FilterExpr::make_or({FilterExpr::make_leaf(2, 1), FilterExpr::make_leaf(2, 2)})});
  EXPECT_EQ(e, want);
  EXPECT_EQ(parse_filter(R"(lang = "EN")", s), FilterExpr::make_leaf(2, 1));
}

TEST(Parse, OrBindsTighterThanAnd) {
  const auto s = country_lang_schema();
  const auto e = parse_filter("country = 1 AND lang = 1 OR lang = 2", s);
  EXPECT_EQ(e, parse_filter("country = 1 AND (lang = 1 OR lang = 2)", s));
  const auto n = parse_filter("not country = 1 and lang = 7", s);
  EXPECT_EQ(n, FilterExpr::make_and({FilterExpr::make_not(FilterExpr::make_leaf(1, 1)), FilterExpr::make_leaf(2, 7)}));
}

TEST(Parse, Errors) {
  const auto s = country_lang_schema();
  auto code = [&](const char* text) {
    try {
      parse_filter(text, s);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIoError;
  };
  EXPECT_EQ(code("country = "), ErrorCode::kSyntaxError);
  EXPECT_EQ(code("(country = 1"), ErrorCode::kSyntaxError);
  EXPECT_EQ(code("country = 1 lang = 2"), ErrorCode::kSyntaxError);
  EXPECT_EQ(code("city = 1"), ErrorCode::kUnknownFeature);
  EXPECT_EQ(code("lang = \"DE\""), ErrorCode::kUnknownValue);
  EXPECT_EQ(code("country == 1"), ErrorCode::kSyntaxError);
}

TEST(Parse, PrintRoundTripIsFixpoint) {
  const auto c = testing::make_catalog(300, 4, 2, 5);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto e = eval::random_filter(c, seed, true, 4);
    const auto text = to_string(e, c.schema);
    const auto back = parse_filter(text, c.schema);
    EXPECT_EQ(back, e) << text;
    EXPECT_EQ(to_string(back, c.schema), text);
  }
}

TEST(Compile, PostOrder) {
  BloomParams p;
  using Code = FilterOp::Code;
  const auto leaf = compile_filter(FilterExpr::make_leaf(1, 1), p);
  EXPECT_EQ(leaf.ops, (std::vector<FilterOp>{{Code::kPushLeaf, 0}}));
  const auto e = FilterExpr::make_and(
      {FilterExpr::make_leaf(1, 1), FilterExpr::make_or({FilterExpr::make_leaf(2, 1), FilterExpr::make_leaf(2, 2)})});
  const auto cf = compile_filter(e, p);
  EXPECT_EQ(cf.ops, (std::vector<FilterOp>{{Code::kPushLeaf, 0}, {Code::kPushLeaf, 1}, {Code::kPushLeaf, 2},
                                           {Code::kOr, 0}, {Code::kAnd, 0}}));
  EXPECT_EQ(cf.leaves.size(), 3u);
  EXPECT_EQ(cf.leaves[1].bloom, hash_positions(2, 1, p));
}

TEST(Compile, DeduplicatesLeaves) {
  const auto e = FilterExpr::make_or({FilterExpr::make_leaf(1, 1), FilterExpr::make_not(FilterExpr::make_leaf(1, 1))});
  const auto cf = compile_filter(e, BloomParams{});
  EXPECT_EQ(cf.leaves.size(), 1u);
}

TEST(Compile, StackBalancedOnRandomExpressions) {
  const auto c = testing::make_catalog(200, 4, 2, 6);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto cf = compile_filter(eval::random_filter(c, seed, true, 5), BloomParams{});
    // Symbolic simulation: leaves push, binary ops pop two push one, Not keeps depth.
    long depth = 0, peak = 0;
    bool ok = true;
    for (const auto& op : cf.ops) {
      if (op.code == FilterOp::Code::kPushLeaf) {
        ok &= op.leaf < cf.leaves.size();
        ++depth;
      } else if (op.code != FilterOp::Code::kNot) {
        ok &= depth >= 2;
        --depth;
      } else {
        ok &= depth >= 1;
      }
      peak = std::max(peak, depth);
    }
    EXPECT_TRUE(ok && depth == 1);
    EXPECT_EQ(static_cast<std::size_t>(peak), cf.max_stack_depth);
    EXPECT_EQ(check_stack_balance(cf.ops, cf.leaves.size()), cf.max_stack_depth);
  }
  using Code = FilterOp::Code;
  const std::vector<FilterOp> bad{{Code::kPushLeaf, 0}, {Code::kAnd, 0}};
  EXPECT_FALSE(check_stack_balance(bad, 1));
  const std::vector<FilterOp> two{{Code::kPushLeaf, 0}, {Code::kPushLeaf, 0}};
  EXPECT_FALSE(check_stack_balance(two, 1));
}

struct FilterFixture {
  Catalog catalog;
  std::vector<const Item*> slots;
  BloomIndex bloom;
  Bitmask valid;
  ForwardIndex fi;
  InvertedIndex ii;

  FilterFixture(std::size_t n, std::uint64_t seed, BloomParams p = {}) : catalog(testing::make_catalog(n, 4, 3, seed)) {
    // Interleave padding so slot space differs from catalog order.
    for (const auto& it : catalog.items) {
      slots.push_back(&it);
      if (it.item_id % 7 == 3) slots.push_back(nullptr);
    }
    bloom = build_bloom(slots, p);
    valid = Bitmask(slots.size());
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (slots[s]) valid.set(s);
    }
    fi = build_forward_index(slots);
    ii = build_inverted_index(slots);
  }

  Bitmask naive(const FilterExpr& e) const {
    Bitmask m(slots.size());
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (slots[s] && eval::naive_match(*slots[s], e)) m.set(s);
    }
    return m;
  }
};

TEST(ExactOracles, AgreeIncludingNot) {
  FilterFixture fx(700, 1);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto e = eval::random_filter(fx.catalog, seed, true, 4);
    const auto want = fx.naive(e);
    EXPECT_EQ(forward_eval(fx.fi, e), want);
    EXPECT_EQ(inverted_eval(fx.ii, e, fx.slots.size()), want);
  }
}

TEST(ExactOracles, EmptyFeatureItem) {
  Item bare{1, {}, {1.0f}};
  const std::vector<const Item*> slots{&bare};
  const auto fi = build_forward_index(slots);
  EXPECT_EQ(forward_eval(fi, FilterExpr::make_leaf(1, 1)).count(), 0u);
  EXPECT_EQ(forward_eval(fi, FilterExpr::make_not(FilterExpr::make_leaf(1, 1))).count(), 1u);
  const auto ii = build_inverted_index(slots);
  EXPECT_EQ(inverted_eval(ii, FilterExpr::make_leaf(5, 5), 1).count(), 0u);
}

TEST(ExactOracles, ForwardGroupsSorted) {
  FilterFixture fx(200, 2);
  for (std::size_t s = 0; s + 1 < fx.fi.item_offsets.size(); ++s) {
    for (auto g = fx.fi.item_offsets[s]; g < fx.fi.item_offsets[s + 1]; ++g) {
      for (auto v = fx.fi.feature_offsets[g] + 1; v < fx.fi.feature_offsets[g + 1]; ++v) {
        EXPECT_LT(fx.fi.feature_values[v - 1], fx.fi.feature_values[v]);
      }
    }
  }
  for (const auto& [term, list] : fx.ii.postings) {
    for (std::size_t i = 1; i < list.size(); ++i) EXPECT_LT(list[i - 1], list[i]);
  }
}

TEST(EvalCompiled, SupersetOnNotFreeQueries) {
  FilterFixture fx(1500, 3);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto e = eval::random_filter(fx.catalog, seed, false, 4);
    const auto approx = eval_compiled(compile_filter(e, fx.bloom.params), fx.bloom, fx.valid);
    const auto exact = forward_eval(fx.fi, e);
    Bitmask miss = exact;
    Bitmask inv = approx;
    inv.flip();
    miss &= inv;
    EXPECT_EQ(miss.count(), 0u);
    Bitmask outside = approx;
    Bitmask invalid = fx.valid;
    invalid.flip();
    outside &= invalid;
    EXPECT_EQ(outside.count(), 0u);
  }
}

TEST(EvalCompiled, NotIsComplementWithinValid) {
  FilterFixture fx(400, 4);
  const auto& term = fx.catalog.items[0].features[0];
  const auto leaf = FilterExpr::make_leaf(term.feature_id, term.value);
  auto l = eval_compiled(compile_filter(leaf, fx.bloom.params), fx.bloom, fx.valid);
  const auto n = eval_compiled(compile_filter(FilterExpr::make_not(leaf), fx.bloom.params), fx.bloom, fx.valid);
  l.flip();
  l &= fx.valid;
  EXPECT_EQ(n, l);
}

TEST(EvalCompiled, ContradictionOnlyAtFalsePositives) {
  BloomParams small;
  small.m_bits = 64;
  small.k_hashes = 2;
  FilterFixture fx(600, 5, small);
  std::size_t nonempty = 0;
  for (std::uint64_t v = 0; v < 50; ++v) {
    const auto leaf = FilterExpr::make_leaf(4, v);
    const auto e = FilterExpr::make_and({leaf, FilterExpr::make_not(leaf)});
    const auto approx = eval_compiled(compile_filter(e, small), fx.bloom, fx.valid);
    EXPECT_EQ(forward_eval(fx.fi, e).count(), 0u);
    // And(L, Not L) is empty even approximately: Not complements L's own mask.
    EXPECT_EQ(approx.count(), 0u);
    nonempty += approx.count();
  }
  EXPECT_EQ(nonempty, 0u);
}

TEST(EvalCompiled, RangeLocality) {
  FilterFixture fx(3000, 6);
  Rng rng(2);
  const std::size_t words = fx.bloom.words_per_plane;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto e = eval::random_filter(fx.catalog, seed, true, 4);
    const auto cf = compile_filter(e, fx.bloom.params);
    const auto full = eval_compiled(cf, fx.bloom, fx.valid);
    std::vector<WordRange> ranges;
    std::size_t w = rng.below(3);
    while (w < words) {
      const std::size_t len = 1 + rng.below(4);
      ranges.push_back({w, std::min(words, w + len)});
      w += len + 1 + rng.below(3);
    }
    FilterEvalStats st;
    for (auto exec : {kernels::Exec::kSerial, kernels::Exec::kParallel}) {
      const auto part = eval_compiled(cf, fx.bloom, fx.valid, ranges, &st, exec);
      Bitmask want(fx.slots.size());
      std::size_t slots_in = 0;
      for (const auto& r : ranges) {
        for (std::size_t s = r.begin * 64; s < std::min(r.end * 64, fx.slots.size()); ++s) {
          if (full.test(s)) want.set(s);
        }
        slots_in += (r.end - r.begin) * 64;
      }
      EXPECT_EQ(part, want);
      EXPECT_EQ(st.evaluated_slots, slots_in);
    }
  }
}

TEST(Bloom, LeafCountsNonIncreasingInM) {
  // Averaged over seeds, larger M never admits more false positives.
  double prev = 1e300;
  for (std::uint32_t m : {128u, 256u, 512u, 1024u}) {
    double fp = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto c = testing::make_catalog(2000, 4, 2, 100 + seed);
      const auto slots = identity_slots(c);
      BloomParams p;
      p.m_bits = m;
      const auto b = build_bloom(slots, p);
      const auto ii = build_inverted_index(slots);
      Rng rng(seed);
      std::vector<FeatureValue> leaves;
      for (int i = 0; i < 50; ++i) leaves.push_back({rng.next_u64(), rng.next_u64()});
      fp += static_cast<double>(eval::fpr_measure(b, Bitmask(c.size(), true), ii, leaves).false_positives);
    }
    EXPECT_LE(fp, prev) << m;
    prev = fp;
  }
}

}  // namespace
}  // namespace filtra
