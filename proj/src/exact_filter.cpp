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

#include "filtra/exact_filter.hpp"

#include <algorithm>
#include <iterator>

namespace filtra {

std::vector<const Item*> identity_slots(const Catalog& catalog) {
  std::vector<const Item*> slots;
  slots.reserve(catalog.size());
  for (const auto& item : catalog.items) slots.push_back(&item);
  return slots;
}

ForwardIndex build_forward_index(std::span<const Item* const> slots) {
  ForwardIndex fi;
  fi.valid = Bitmask(slots.size());
  fi.item_offsets.reserve(slots.size() + 1);
  fi.item_offsets.push_back(0);
  fi.feature_offsets.push_back(0);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s]) {
      fi.valid.set(s);
      auto feats = slots[s]->features;
      std::sort(feats.begin(), feats.end());
      feats.erase(std::unique(feats.begin(), feats.end()), feats.end());
      for (std::size_t i = 0; i < feats.size(); ++i) {
        if (i == 0 || feats[i].feature_id != feats[i - 1].feature_id) {
          if (i != 0) fi.feature_offsets.push_back(fi.feature_values.size());
          fi.feature_ids.push_back(feats[i].feature_id);
        }
        fi.feature_values.push_back(feats[i].value);
      }
      if (!feats.empty()) fi.feature_offsets.push_back(fi.feature_values.size());
    }
    fi.item_offsets.push_back(fi.feature_ids.size());
  }
  return fi;
}

bool ForwardIndex::has(std::size_t slot, std::uint64_t feature_id, std::uint64_t value) const {
  const auto g_begin = feature_ids.begin() + static_cast<std::ptrdiff_t>(item_offsets[slot]);
  const auto g_end = feature_ids.begin() + static_cast<std::ptrdiff_t>(item_offsets[slot + 1]);
  const auto g = std::lower_bound(g_begin, g_end, feature_id);
  if (g == g_end || *g != feature_id) return false;
  const auto gi = static_cast<std::size_t>(g - feature_ids.begin());
  const auto v_begin = feature_values.begin() + static_cast<std::ptrdiff_t>(feature_offsets[gi]);
  const auto v_end = feature_values.begin() + static_cast<std::ptrdiff_t>(feature_offsets[gi + 1]);
  return std::binary_search(v_begin, v_end, value);
}

namespace {

bool forward_match(const ForwardIndex& fi, std::size_t slot, const FilterExpr& e) {
  switch (e.kind) {
    case FilterExpr::Kind::kLeaf:
      return fi.has(slot, e.leaf.feature_id, e.leaf.value);
    case FilterExpr::Kind::kAnd:
      for (const auto& c : e.children) {
        if (!forward_match(fi, slot, c)) return false;
      }
      return true;
    case FilterExpr::Kind::kOr:
      for (const auto& c : e.children) {
        if (forward_match(fi, slot, c)) return true;
      }
      return false;
    case FilterExpr::Kind::kNot:
      return !forward_match(fi, slot, e.children[0]);
  }
  return false;
}

std::vector<std::uint32_t> set_union(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  std::vector<std::uint32_t> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<std::uint32_t> set_intersection(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  std::vector<std::uint32_t> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

Bitmask forward_eval(const ForwardIndex& fi, const FilterExpr& expr,
                     std::optional<std::pair<std::size_t, std::size_t>> range) {
  const std::size_t n = fi.n_slots();
  Bitmask out(n);
  const std::size_t begin = range ? range->first : 0;
  const std::size_t end = range ? std::min(range->second, n) : n;
  // Word-aligned chunks so threads never share an output word.
  const auto w_begin = static_cast<std::int64_t>(begin / 64);
  const auto w_end = static_cast<std::int64_t>((end + 63) / 64);
  auto words = out.words();
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t w = w_begin; w < w_end; ++w) {
    std::uint64_t bits = 0;
    const std::size_t lo = std::max<std::size_t>(begin, static_cast<std::size_t>(w) * 64);
    const std::size_t hi = std::min<std::size_t>(end, static_cast<std::size_t>(w) * 64 + 64);
    for (std::size_t s = lo; s < hi; ++s) {
      if (fi.valid.test(s) && forward_match(fi, s, expr)) bits |= std::uint64_t{1} << (s & 63);
    }
    words[static_cast<std::size_t>(w)] = bits;
  }
  return out;
}

InvertedIndex build_inverted_index(std::span<const Item* const> slots) {
  InvertedIndex ii;
  ii.n_slots = slots.size();
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!slots[s]) continue;
    ii.universe.push_back(static_cast<std::uint32_t>(s));
    for (const auto& f : slots[s]->features) {
      auto& list = ii.postings[f];
      if (list.empty() || list.back() != s) list.push_back(static_cast<std::uint32_t>(s));
    }
  }
  return ii;
}

const std::vector<std::uint32_t>& InvertedIndex::posting(const FeatureValue& term) const {
  static const std::vector<std::uint32_t> kEmpty;
  const auto it = postings.find(term);
  return it == postings.end() ? kEmpty : it->second;
}

std::vector<std::uint32_t> inverted_eval_list(const InvertedIndex& ii, const FilterExpr& expr) {
  switch (expr.kind) {
    case FilterExpr::Kind::kLeaf:
      return ii.posting(expr.leaf);
    case FilterExpr::Kind::kAnd: {
      auto acc = inverted_eval_list(ii, expr.children[0]);
      for (std::size_t i = 1; i < expr.children.size() && !acc.empty(); ++i) {
        acc = set_intersection(acc, inverted_eval_list(ii, expr.children[i]));
      }
      return acc;
    }
    case FilterExpr::Kind::kOr: {
      std::vector<std::uint32_t> acc;
      for (const auto& c : expr.children) acc = set_union(acc, inverted_eval_list(ii, c));
      return acc;
    }
    case FilterExpr::Kind::kNot: {
      const auto child = inverted_eval_list(ii, expr.children[0]);
      std::vector<std::uint32_t> out;
      std::set_difference(ii.universe.begin(), ii.universe.end(), child.begin(), child.end(), std::back_inserter(out));
      return out;
    }
  }
  return {};
}

Bitmask inverted_eval(const InvertedIndex& ii, const FilterExpr& expr, std::size_t universe) {
  Bitmask out(universe);
  for (auto s : inverted_eval_list(ii, expr)) {
    if (s < universe) out.set(s);
  }
  return out;
}

}  // namespace filtra
