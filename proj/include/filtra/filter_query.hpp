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
#include <string_view>
#include <vector>

#include "filtra/bitmask.hpp"
#include "filtra/bloom.hpp"
#include "filtra/catalog.hpp"

namespace filtra {

struct FilterExpr {
  enum class Kind { kLeaf, kAnd, kOr, kNot };

  Kind kind = Kind::kLeaf;
  FeatureValue leaf;
  std::vector<FilterExpr> children;

  static FilterExpr make_leaf(std::uint64_t feature_id, std::uint64_t value);
  static FilterExpr make_and(std::vector<FilterExpr> children);
  static FilterExpr make_or(std::vector<FilterExpr> children);
  static FilterExpr make_not(FilterExpr child);

  bool contains_not() const;
  bool operator==(const FilterExpr&) const = default;
};

// Grammar (OR binds tighter than AND):
//   expr    := or_term (AND or_term)*
//   or_term := factor (OR factor)*
//   factor  := [NOT] (leaf | '(' expr ')')
//   leaf    := name '=' value
// Names resolve through the schema; a value is an unsigned integer or a
// double-quoted string resolved through the schema's value dictionary.
// Keywords are case-insensitive.
FilterExpr parse_filter(std::string_view text, const FeatureSchema& schema);

// Prints text that parses back to the same tree. Feature names without a
// schema entry are an error; values print as dictionary strings when known.
std::string to_string(const FilterExpr& expr, const FeatureSchema& schema);

struct FilterOp {
  enum class Code : std::uint8_t { kPushLeaf, kAnd, kOr, kNot };
  Code code = Code::kPushLeaf;
  std::uint32_t leaf = 0;

  bool operator==(const FilterOp&) const = default;
};

struct CompiledLeaf {
  FeatureValue term;
  QueryBloom bloom;
  bool operator==(const CompiledLeaf&) const = default;
};

// Postfix program evaluated by a stack of bit masks.
struct CompiledFilter {
  std::vector<FilterOp> ops;
  std::vector<CompiledLeaf> leaves;
  std::size_t max_stack_depth = 0;

  bool operator==(const CompiledFilter&) const = default;
};

CompiledFilter compile_filter(const FilterExpr& expr, const BloomParams& params);

// Symbolic stack simulation; returns the peak depth or nullopt when the
// program underflows or does not end with exactly one value.
std::optional<std::size_t> check_stack_balance(std::span<const FilterOp> ops, std::size_t n_leaves);

struct FilterEvalStats {
  std::size_t evaluated_slots = 0;
  std::size_t plane_words_read = 0;
  std::size_t scratch_words = 0;  // words held by all live stack masks at peak
};

// Runs the program over the given word ranges. Scratch masks cover only the
// words in the ranges; the result is a full-width mask that is zero outside
// them and always ANDed with `valid`.
Bitmask eval_compiled(const CompiledFilter& cf, const BloomIndex& index, const Bitmask& valid,
                      std::span<const WordRange> ranges, FilterEvalStats* stats = nullptr,
                      kernels::Exec exec = kernels::Exec::kParallel);
// Whole slot space.
Bitmask eval_compiled(const CompiledFilter& cf, const BloomIndex& index, const Bitmask& valid,
                      FilterEvalStats* stats = nullptr);

}  // namespace filtra
