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
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace filtra {

inline constexpr std::size_t kMaxValueModelDepth = 64;

// Expression tree that folds per-task scores into one final score.
struct ValueNode {
  enum class Op { kConst, kTask, kAdd, kSub, kMul, kDiv, kMin, kMax, kClamp, kIf };
  enum class Cmp { kLt, kLe, kGt, kGe, kEq };

  Op op = Op::kConst;
  double value = 0.0;  // kConst
  std::string task;    // kTask
  double lo = 0.0;     // kClamp
  double hi = 0.0;     // kClamp
  std::vector<ValueNode> args;  // operands; kIf holds {cond_left, cond_right, then, else}
  Cmp cmp = Cmp::kLt;           // kIf

  static ValueNode constant(double v);
  static ValueNode task_score(std::string name);
  static ValueNode make(Op op, std::vector<ValueNode> args);
  static ValueNode clamp(ValueNode arg, double lo, double hi);
  static ValueNode if_then_else(ValueNode left, Cmp cmp, ValueNode right, ValueNode then_branch,
                                ValueNode else_branch);

  bool operator==(const ValueNode&) const = default;
};

// JSON form:
//   {"op":"const","value":1.5}        {"op":"task","task":"like"}
//   {"op":"add"|"mul"|"min"|"max","args":[...]}   (one or more args)
//   {"op":"sub"|"div","args":[a,b]}
//   {"op":"clamp","lo":0,"hi":1,"args":[x]}
//   {"op":"if","cond":{"left":n,"cmp":"<"|"<="|">"|">="|"==","right":n},"then":n,"else":n}
// Throws kInvalidConfig on malformed input or depth over the limit.
ValueNode value_model_from_json(const nlohmann::json& j);
nlohmann::json value_model_to_json(const ValueNode& node);

std::size_t value_model_depth(const ValueNode& node);
// Throws kUnknownTask if a task reference is not in `tasks`.
void validate_value_model(const ValueNode& node, std::span<const std::string> tasks);

// Task scores are passed positionally, aligned with `tasks`.
class ValueModel {
 public:
  ValueModel() : ValueModel(ValueNode::task_score("*")) {}
  explicit ValueModel(ValueNode root) : root_(std::move(root)) {}

  const ValueNode& root() const noexcept { return root_; }

  // Throws kDivByZero or kUnknownTask. The task name "*" resolves to the
  // first task.
  double eval(std::span<const std::string> tasks, std::span<const double> scores) const;

 private:
  ValueNode root_;
};

double value_model_eval(const ValueNode& cfg, const std::map<std::string, double>& task_scores);

}  // namespace filtra
