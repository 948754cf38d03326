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
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "filtra/bitmask.hpp"
#include "filtra/catalog.hpp"
#include "filtra/filter_query.hpp"

namespace filtra {

// Per-slot sorted feature groups. Slot s owns groups
// [item_offsets[s], item_offsets[s + 1]); group g has feature id
// feature_ids[g] and values feature_values[feature_offsets[g] ..
// feature_offsets[g + 1]) sorted ascending. Groups within a slot are sorted by
// feature id.
struct ForwardIndex {
  std::vector<std::uint64_t> item_offsets;
  std::vector<std::uint64_t> feature_ids;
  std::vector<std::uint64_t> feature_offsets;
  std::vector<std::uint64_t> feature_values;
  Bitmask valid;

  std::size_t n_slots() const noexcept { return valid.size(); }
  bool has(std::size_t slot, std::uint64_t feature_id, std::uint64_t value) const;
};

ForwardIndex build_forward_index(std::span<const Item* const> slots);

// Exact evaluation, item-parallel. Restricted to [slot_begin, slot_end) when
// a range is given.
Bitmask forward_eval(const ForwardIndex& fi, const FilterExpr& expr,
                     std::optional<std::pair<std::size_t, std::size_t>> range = std::nullopt);

struct InvertedIndex {
  std::map<FeatureValue, std::vector<std::uint32_t>> postings;
  std::vector<std::uint32_t> universe;  // all valid slots, ascending
  std::size_t n_slots = 0;

  const std::vector<std::uint32_t>& posting(const FeatureValue& term) const;
};

InvertedIndex build_inverted_index(std::span<const Item* const> slots);

// Sorted-list evaluation: union for OR, intersection for AND, difference
// from the universe for NOT. Missing postings are empty.
std::vector<std::uint32_t> inverted_eval_list(const InvertedIndex& ii, const FilterExpr& expr);
Bitmask inverted_eval(const InvertedIndex& ii, const FilterExpr& expr, std::size_t universe);

// Slot views over a catalog in identity order.
std::vector<const Item*> identity_slots(const Catalog& catalog);

}  // namespace filtra
