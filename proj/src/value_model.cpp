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

#include "filtra/value_model.hpp"

#include <algorithm>
#include <cmath>

#include "filtra/error.hpp"

namespace filtra {

ValueNode ValueNode::constant(double v) {
  ValueNode n;
  n.op = Op::kConst;
  n.value = v;
  return n;
}

ValueNode ValueNode::task_score(std::string name) {
  ValueNode n;
  n.op = Op::kTask;
  n.task = std::move(name);
  return n;
}

ValueNode ValueNode::make(Op op, std::vector<ValueNode> args) {
  ValueNode n;
  n.op = op;
  n.args = std::move(args);
  return n;
}

ValueNode ValueNode::clamp(ValueNode arg, double lo, double hi) {
  ValueNode n;
  n.op = Op::kClamp;
  n.lo = lo;
  n.hi = hi;
  n.args.push_back(std::move(arg));
  return n;
}

ValueNode ValueNode::if_then_else(ValueNode left, Cmp cmp, ValueNode right, ValueNode then_branch,
                                  ValueNode else_branch) {
  ValueNode n;
  n.op = Op::kIf;
  n.cmp = cmp;
  n.args = {std::move(left), std::move(right), std::move(then_branch), std::move(else_branch)};
  return n;
}

namespace {

Error bad(const std::string& what) { return Error(ErrorCode::kInvalidConfig, "value model: " + what); }

const char* op_name(ValueNode::Op op) {
  using Op = ValueNode::Op;
  switch (op) {
    case Op::kConst: return "const";
    case Op::kTask: return "task";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kMin: return "min";
    case Op::kMax: return "max";
    case Op::kClamp: return "clamp";
    case Op::kIf: return "if";
  }
  return "?";
}

const char* cmp_name(ValueNode::Cmp c) {
  using Cmp = ValueNode::Cmp;
  switch (c) {
    case Cmp::kLt: return "<";
    case Cmp::kLe: return "<=";
    case Cmp::kGt: return ">";
    case Cmp::kGe: return ">=";
    case Cmp::kEq: return "==";
  }
  return "?";
}

ValueNode from_json(const nlohmann::json& j, std::size_t depth) {
  using Op = ValueNode::Op;
  using Cmp = ValueNode::Cmp;
  if (depth > kMaxValueModelDepth) throw bad("deeper than " + std::to_string(kMaxValueModelDepth));
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string()) throw bad("node needs a string \"op\"");
  const std::string op = j["op"];
  auto number = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) throw bad(op + " needs numeric \"" + key + "\"");
    return j[key].get<double>();
  };
  auto args = [&](std::size_t min, std::size_t max) {
    if (!j.contains("args") || !j["args"].is_array()) throw bad(op + " needs \"args\"");
    const auto& a = j["args"];
    if (a.size() < min || a.size() > max) throw bad(op + " has wrong argument count");
    std::vector<ValueNode> out;
    for (const auto& x : a) out.push_back(from_json(x, depth + 1));
    return out;
  };
  constexpr std::size_t kMany = static_cast<std::size_t>(-1);
  if (op == "const") return ValueNode::constant(number("value"));
  if (op == "task") {
    if (!j.contains("task") || !j["task"].is_string()) throw bad("task needs \"task\"");
    return ValueNode::task_score(j["task"]);
  }
  if (op == "add") return ValueNode::make(Op::kAdd, args(1, kMany));
  if (op == "mul") return ValueNode::make(Op::kMul, args(1, kMany));
  if (op == "min") return ValueNode::make(Op::kMin, args(1, kMany));
  if (op == "max") return ValueNode::make(Op::kMax, args(1, kMany));
  if (op == "sub") return ValueNode::make(Op::kSub, args(2, 2));
  if (op == "div") return ValueNode::make(Op::kDiv, args(2, 2));
  if (op == "clamp") {
    auto a = args(1, 1);
    const double lo = number("lo");
    const double hi = number("hi");
    if (lo > hi) throw bad("clamp needs lo <= hi");
    return ValueNode::clamp(std::move(a[0]), lo, hi);
  }
  if (op == "if") {
    if (!j.contains("cond") || !j.contains("then") || !j.contains("else")) throw bad("if needs cond, then, else");
    const auto& c = j["cond"];
    if (!c.is_object() || !c.contains("left") || !c.contains("right") || !c.contains("cmp")) {
      throw bad("cond needs left, cmp, right");
    }
    const std::string cmp = c["cmp"].is_string() ? c["cmp"].get<std::string>() : "";
    Cmp cc;
    if (cmp == "<") cc = Cmp::kLt;
    else if (cmp == "<=") cc = Cmp::kLe;
    else if (cmp == ">") cc = Cmp::kGt;
    else if (cmp == ">=") cc = Cmp::kGe;
    else if (cmp == "==") cc = Cmp::kEq;
    else throw bad("unknown comparison '" + cmp + "'");
    return ValueNode::if_then_else(from_json(c["left"], depth + 1), cc, from_json(c["right"], depth + 1),
                                   from_json(j["then"], depth + 1), from_json(j["else"], depth + 1));
  }
  throw bad("unknown op '" + op + "'");
}

double eval_node(const ValueNode& n, std::span<const std::string> tasks, std::span<const double> scores) {
  using Op = ValueNode::Op;
  auto arg = [&](std::size_t i) { return eval_node(n.args[i], tasks, scores); };
  switch (n.op) {
    case Op::kConst:
      return n.value;
    case Op::kTask: {
      if (n.task == "*" && !tasks.empty()) return scores[0];
      const auto it = std::find(tasks.begin(), tasks.end(), n.task);
      if (it == tasks.end()) throw Error(ErrorCode::kUnknownTask, n.task);
      return scores[static_cast<std::size_t>(it - tasks.begin())];
    }
    case Op::kAdd: {
      double acc = 0;
      for (std::size_t i = 0; i < n.args.size(); ++i) acc += arg(i);
      return acc;
    }
    case Op::kMul: {
      double acc = 1;
      for (std::size_t i = 0; i < n.args.size(); ++i) acc *= arg(i);
      return acc;
    }
    case Op::kMin: {
      double acc = arg(0);
      for (std::size_t i = 1; i < n.args.size(); ++i) acc = std::min(acc, arg(i));
      return acc;
    }
    case Op::kMax: {
      double acc = arg(0);
      for (std::size_t i = 1; i < n.args.size(); ++i) acc = std::max(acc, arg(i));
      return acc;
    }
    case Op::kSub:
      return arg(0) - arg(1);
    case Op::kDiv: {
      const double d = arg(1);
      if (d == 0.0) throw Error(ErrorCode::kDivByZero, "value model division by zero");
      return arg(0) / d;
    }
    case Op::kClamp:
      return std::clamp(arg(0), n.lo, n.hi);
    case Op::kIf: {
      const double l = arg(0);
      const double r = arg(1);
      bool c = false;
      switch (n.cmp) {
        case ValueNode::Cmp::kLt: c = l < r; break;
        case ValueNode::Cmp::kLe: c = l <= r; break;
        case ValueNode::Cmp::kGt: c = l > r; break;
        case ValueNode::Cmp::kGe: c = l >= r; break;
        case ValueNode::Cmp::kEq: c = l == r; break;
      }
      return c ? arg(2) : arg(3);
    }
  }
  return 0.0;
}

void collect_tasks(const ValueNode& n, std::vector<std::string>& out) {
  if (n.op == ValueNode::Op::kTask) out.push_back(n.task);
  for (const auto& a : n.args) collect_tasks(a, out);
}

}  // namespace

ValueNode value_model_from_json(const nlohmann::json& j) { return from_json(j, 1); }

nlohmann::json value_model_to_json(const ValueNode& n) {
  using Op = ValueNode::Op;
  nlohmann::json j;
  j["op"] = op_name(n.op);
  switch (n.op) {
    case Op::kConst:
      j["value"] = n.value;
      break;
    case Op::kTask:
      j["task"] = n.task;
      break;
    case Op::kIf:
      j["cond"] = {{"left", value_model_to_json(n.args[0])}, {"cmp", cmp_name(n.cmp)}, {"right", value_model_to_json(n.args[1])}};
      j["then"] = value_model_to_json(n.args[2]);
      j["else"] = value_model_to_json(n.args[3]);
      break;
    case Op::kClamp:
      j["lo"] = n.lo;
      j["hi"] = n.hi;
      [[fallthrough]];
    default: {
      auto& a = j["args"] = nlohmann::json::array();
      for (const auto& c : n.args) a.push_back(value_model_to_json(c));
    }
  }
  return j;
}

std::size_t value_model_depth(const ValueNode& node) {
  std::size_t d = 0;
  for (const auto& a : node.args) d = std::max(d, value_model_depth(a));
  return d + 1;
}

void validate_value_model(const ValueNode& node, std::span<const std::string> tasks) {
  if (value_model_depth(node) > kMaxValueModelDepth) throw bad("too deep");
  std::vector<std::string> refs;
  collect_tasks(node, refs);
  for (const auto& r : refs) {
    if (r == "*" && !tasks.empty()) continue;
    if (std::find(tasks.begin(), tasks.end(), r) == tasks.end()) throw Error(ErrorCode::kUnknownTask, r);
  }
}

double ValueModel::eval(std::span<const std::string> tasks, std::span<const double> scores) const {
  return eval_node(root_, tasks, scores);
}

double value_model_eval(const ValueNode& cfg, const std::map<std::string, double>& task_scores) {
  std::vector<std::string> tasks;
  std::vector<double> scores;
  for (const auto& [k, v] : task_scores) {
    tasks.push_back(k);
    scores.push_back(v);
  }
  validate_value_model(cfg, tasks);
  return eval_node(cfg, tasks, scores);
}

}  // namespace filtra
