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
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "filtra/matrix.hpp"

namespace filtra {

// Precomputed item-tower outputs keyed by item id.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  EmbeddingCache(std::vector<std::uint64_t> ids, FloatMatrix table);

  std::size_t dim() const noexcept { return table_.cols; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool contains(std::uint64_t id) const { return index_.count(id) != 0; }
  // Throws kMissingItem.
  std::span<const float> lookup(std::uint64_t id) const;

  const std::vector<std::uint64_t>& ids() const noexcept { return ids_; }
  const FloatMatrix& table() const noexcept { return table_; }

  bool operator==(const EmbeddingCache& other) const { return ids_ == other.ids_ && table_ == other.table_; }

 private:
  std::vector<std::uint64_t> ids_;
  FloatMatrix table_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weights;  // out x in, row-major
  std::vector<float> bias;     // out

  bool operator==(const DenseLayer&) const = default;
};

// Input is user ‖ item, plus the scalar <user, item> when cross_dot is set.
// Hidden layers use ReLU; each task head is a linear layer with one output.
struct MlpOverArch {
  std::size_t user_dim = 0;  // 0 with item_dim 0: split the input evenly
  std::size_t item_dim = 0;
  bool cross_dot = false;
  std::vector<DenseLayer> hidden;
  std::vector<std::string> head_names;  // "*" matches any task
  std::vector<DenseLayer> heads;

  bool operator==(const MlpOverArch&) const = default;
};

// score_t = sum_p softmax(gate_t([u ‖ i]))_p * <U_p u, I_p i>
struct MolOverArch {
  std::vector<DenseLayer> user_proj;  // one per component
  std::vector<DenseLayer> item_proj;
  std::vector<std::string> gate_names;  // "*" matches any task
  std::vector<DenseLayer> gates;        // out = number of components

  bool operator==(const MolOverArch&) const = default;
};

class OverArchModel {
 public:
  using Variant = std::variant<MlpOverArch, MolOverArch>;

  OverArchModel() = default;
  explicit OverArchModel(Variant model);

  // One head "*" reading only the <user, item> feature: score = dot product.
  static OverArchModel dot_product(std::size_t user_dim, std::size_t item_dim);
  // Random weights for tests and demos.
  static OverArchModel random_mlp(std::size_t user_dim, std::size_t item_dim, std::span<const std::string> tasks,
                                  std::span<const std::size_t> hidden, std::uint64_t seed, bool cross_dot = true);
  static OverArchModel random_mol(std::size_t user_dim, std::size_t item_dim, std::span<const std::string> tasks,
                                  std::size_t components, std::size_t component_dim, std::uint64_t seed);

  const Variant& model() const noexcept { return model_; }
  std::size_t user_dim() const noexcept { return user_dim_; }
  std::size_t item_dim() const noexcept { return item_dim_; }

  // Throws kUnknownTask when no head matches, kDimMismatch on bad shapes.
  double score(std::string_view task, std::span<const float> user, std::span<const float> item) const;

  bool operator==(const OverArchModel&) const = default;

 private:
  void check_shapes();

  Variant model_;
  std::size_t user_dim_ = 0;
  std::size_t item_dim_ = 0;
};

// JSON weights file: {"type":"mlp","cross_dot":bool,"hidden":[layer...],
// "heads":{"name":layer}} or {"type":"mol","user_proj":[...],"item_proj":[...],
// "gates":{"name":layer}}; layer = {"in":n,"out":m,"weights":[...],"bias":[...]}.
OverArchModel overarch_from_json(const nlohmann::json& j);
nlohmann::json overarch_to_json(const OverArchModel& model);

// Per-task scores for each item: result[item][task].
std::vector<std::vector<double>> overarch_score(const OverArchModel& model, std::span<const std::string> tasks,
                                                std::span<const std::vector<float>> users,
                                                std::span<const std::uint64_t> items, const EmbeddingCache& cache);

}  // namespace filtra
