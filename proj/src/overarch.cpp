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

#include "filtra/overarch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "filtra/error.hpp"
#include "filtra/kernels.hpp"
#include "filtra/rng.hpp"

namespace filtra {

EmbeddingCache::EmbeddingCache(std::vector<std::uint64_t> ids, FloatMatrix table)
    : ids_(std::move(ids)), table_(std::move(table)) {
  if (ids_.size() != table_.rows) throw Error(ErrorCode::kLengthMismatch, "cache ids and rows differ");
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw Error(ErrorCode::kDuplicateItemId, "cache id " + std::to_string(ids_[i]), {static_cast<std::int64_t>(ids_[i])});
    }
  }
}

std::span<const float> EmbeddingCache::lookup(std::uint64_t id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::kMissingItem, "item " + std::to_string(id), {static_cast<std::int64_t>(id)});
  return table_.row(it->second);
}

namespace {

void check_layer(const DenseLayer& l) {
  if (l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
    throw Error(ErrorCode::kDimMismatch, "dense layer weights do not match " + std::to_string(l.out) + "x" + std::to_string(l.in));
  }
}

// y = W x + b, optional ReLU.
void forward(const DenseLayer& l, std::span<const float> x, std::vector<float>& y, bool relu) {
  y.resize(l.out);
  for (std::size_t o = 0; o < l.out; ++o) {
    float v = l.bias[o] + kernels::dot_f32(l.weights.data() + o * l.in, x.data(), l.in);
    y[o] = relu ? std::max(v, 0.0f) : v;
  }
}

DenseLayer random_layer(std::size_t in, std::size_t out, Rng& rng) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  l.weights.resize(in * out);
  for (auto& w : l.weights) w = static_cast<float>(rng.normal() * s);
  l.bias.resize(out);
  for (auto& b : l.bias) b = static_cast<float>(rng.normal() * 0.1);
  return l;
}

template <typename Names>
std::size_t find_head(const Names& names, std::string_view task) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == task) return i;
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "*") return i;
  }
  throw Error(ErrorCode::kUnknownTask, "no OverArch head for task '" + std::string(task) + "'");
}

// Heads keyed by name, sorted so a JSON round trip is exact.
void sort_by_name(std::vector<std::string>& names, std::vector<DenseLayer>& layers) {
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return names[a] < names[b]; });
  std::vector<std::string> n;
  std::vector<DenseLayer> l;
  for (auto i : order) {
    n.push_back(std::move(names[i]));
    l.push_back(std::move(layers[i]));
  }
  for (std::size_t i = 1; i < n.size(); ++i) {
    if (n[i] == n[i - 1]) throw Error(ErrorCode::kInvalidConfig, "duplicate head '" + n[i] + "'");
  }
  names = std::move(n);
  layers = std::move(l);
}

nlohmann::json layer_to_json(const DenseLayer& l) {
  return {{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}};
}

DenseLayer layer_from_json(const nlohmann::json& j) {
  DenseLayer l;
  try {
    l.in = j.at("in").get<std::size_t>();
    l.out = j.at("out").get<std::size_t>();
    l.weights = j.at("weights").get<std::vector<float>>();
    l.bias = j.at("bias").get<std::vector<float>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("OverArch layer: ") + e.what());
  }
  check_layer(l);
  return l;
}

}  // namespace

OverArchModel::OverArchModel(Variant model) : model_(std::move(model)) { check_shapes(); }

void OverArchModel::check_shapes() {
  if (auto* mlp = std::get_if<MlpOverArch>(&model_)) {
    if (mlp->heads.empty() || mlp->heads.size() != mlp->head_names.size()) {
      throw Error(ErrorCode::kInvalidConfig, "MLP needs one name per head");
    }
    sort_by_name(mlp->head_names, mlp->heads);
    const DenseLayer& first = mlp->hidden.empty() ? mlp->heads.front() : mlp->hidden.front();
    std::size_t width = first.in;
    for (const auto& l : mlp->hidden) {
      check_layer(l);
      if (l.in != width) throw Error(ErrorCode::kDimMismatch, "hidden layer shapes do not chain");
      width = l.out;
    }
    for (const auto& h : mlp->heads) {
      check_layer(h);
      if (h.in != width || h.out != 1) throw Error(ErrorCode::kDimMismatch, "head must map the last width to 1");
    }
    const std::size_t concat = first.in - (mlp->cross_dot ? 1 : 0);
    if (mlp->user_dim == 0 && mlp->item_dim == 0) {
      mlp->user_dim = concat / 2;
      mlp->item_dim = concat - mlp->user_dim;
    }
    if (mlp->user_dim + mlp->item_dim != concat) throw Error(ErrorCode::kDimMismatch, "MLP input width mismatch");
    if (mlp->cross_dot && mlp->user_dim != mlp->item_dim) {
      throw Error(ErrorCode::kDimMismatch, "cross_dot needs equal user and item widths");
    }
    user_dim_ = mlp->user_dim;
    item_dim_ = mlp->item_dim;
  } else {
    auto& mol = std::get<MolOverArch>(model_);
    if (mol.user_proj.empty() || mol.user_proj.size() != mol.item_proj.size()) {
      throw Error(ErrorCode::kInvalidConfig, "MoL needs matching user and item projections");
    }
    if (mol.gates.empty() || mol.gates.size() != mol.gate_names.size()) {
      throw Error(ErrorCode::kInvalidConfig, "MoL needs one name per gate");
    }
    sort_by_name(mol.gate_names, mol.gates);
    user_dim_ = mol.user_proj[0].in;
    item_dim_ = mol.item_proj[0].in;
    for (std::size_t p = 0; p < mol.user_proj.size(); ++p) {
      check_layer(mol.user_proj[p]);
      check_layer(mol.item_proj[p]);
      if (mol.user_proj[p].in != user_dim_ || mol.item_proj[p].in != item_dim_ ||
          mol.user_proj[p].out != mol.item_proj[p].out) {
        throw Error(ErrorCode::kDimMismatch, "MoL projection shapes differ");
      }
    }
    for (const auto& g : mol.gates) {
      check_layer(g);
      if (g.in != user_dim_ + item_dim_ || g.out != mol.user_proj.size()) {
        throw Error(ErrorCode::kDimMismatch, "MoL gate must map user ‖ item to one logit per component");
      }
    }
  }
}

OverArchModel OverArchModel::dot_product(std::size_t user_dim, std::size_t item_dim) {
  if (user_dim != item_dim) throw Error(ErrorCode::kDimMismatch, "dot product needs equal widths");
  MlpOverArch mlp;
  mlp.user_dim = user_dim;
  mlp.item_dim = item_dim;
  mlp.cross_dot = true;
  DenseLayer head;
  head.in = user_dim + item_dim + 1;
  head.out = 1;
  head.weights.assign(head.in, 0.0f);
  head.weights.back() = 1.0f;
  head.bias = {0.0f};
  mlp.head_names = {"*"};
  mlp.heads = {head};
  return OverArchModel(std::move(mlp));
}

OverArchModel OverArchModel::random_mlp(std::size_t user_dim, std::size_t item_dim, std::span<const std::string> tasks,
                                        std::span<const std::size_t> hidden, std::uint64_t seed, bool cross_dot) {
  Rng rng(seed);
  MlpOverArch mlp;
  mlp.user_dim = user_dim;
  mlp.item_dim = item_dim;
  mlp.cross_dot = cross_dot;
  std::size_t width = user_dim + item_dim + (cross_dot ? 1 : 0);
  for (auto h : hidden) {
    mlp.hidden.push_back(random_layer(width, h, rng));
    width = h;
  }
  for (const auto& t : tasks) {
    mlp.head_names.push_back(t);
    mlp.heads.push_back(random_layer(width, 1, rng));
  }
  return OverArchModel(std::move(mlp));
}

OverArchModel OverArchModel::random_mol(std::size_t user_dim, std::size_t item_dim, std::span<const std::string> tasks,
                                        std::size_t components, std::size_t component_dim, std::uint64_t seed) {
  Rng rng(seed);
  MolOverArch mol;
  for (std::size_t p = 0; p < components; ++p) {
    mol.user_proj.push_back(random_layer(user_dim, component_dim, rng));
    mol.item_proj.push_back(random_layer(item_dim, component_dim, rng));
  }
  for (const auto& t : tasks) {
    mol.gate_names.push_back(t);
    mol.gates.push_back(random_layer(user_dim + item_dim, components, rng));
  }
  return OverArchModel(std::move(mol));
}

double OverArchModel::score(std::string_view task, std::span<const float> user, std::span<const float> item) const {
  if (user.size() != user_dim_ || item.size() != item_dim_) {
    throw Error(ErrorCode::kDimMismatch, "OverArch input widths " + std::to_string(user.size()) + "/" + std::to_string(item.size()));
  }
  std::vector<float> x;
  x.reserve(user.size() + item.size() + 1);
  x.insert(x.end(), user.begin(), user.end());
  x.insert(x.end(), item.begin(), item.end());

  if (const auto* mlp = std::get_if<MlpOverArch>(&model_)) {
    const std::size_t head = find_head(mlp->head_names, task);
    if (mlp->cross_dot) x.push_back(kernels::dot_f32(user.data(), item.data(), user.size()));
    std::vector<float> y;
    for (const auto& l : mlp->hidden) {
      forward(l, x, y, true);
      x.swap(y);
    }
    forward(mlp->heads[head], x, y, false);
    return y[0];
  }

  const auto& mol = std::get<MolOverArch>(model_);
  const std::size_t gate = find_head(mol.gate_names, task);
  std::vector<float> logits;
  forward(mol.gates[gate], x, logits, false);
  const float mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0;
  for (auto& l : logits) denom += std::exp(static_cast<double>(l - mx));
  double total = 0;
  std::vector<float> up;
  std::vector<float> ip;
  for (std::size_t p = 0; p < mol.user_proj.size(); ++p) {
    forward(mol.user_proj[p], user, up, false);
    forward(mol.item_proj[p], item, ip, false);
    const double gate_p = std::exp(static_cast<double>(logits[p] - mx)) / denom;
    total += gate_p * kernels::dot_f32(up.data(), ip.data(), up.size());
  }
  return total;
}

OverArchModel overarch_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) throw Error(ErrorCode::kInvalidConfig, "OverArch needs \"type\"");
  const std::string type = j["type"];
  if (type == "mlp") {
    MlpOverArch mlp;
    mlp.cross_dot = j.value("cross_dot", false);
    mlp.user_dim = j.value("user_dim", std::size_t{0});
    mlp.item_dim = j.value("item_dim", std::size_t{0});
    if (j.contains("hidden")) {
      for (const auto& l : j["hidden"]) mlp.hidden.push_back(layer_from_json(l));
    }
    for (const auto& [name, l] : j.at("heads").items()) {
      mlp.head_names.push_back(name);
      mlp.heads.push_back(layer_from_json(l));
    }
    return OverArchModel(std::move(mlp));
  }
  if (type == "mol") {
    MolOverArch mol;
    for (const auto& l : j.at("user_proj")) mol.user_proj.push_back(layer_from_json(l));
    for (const auto& l : j.at("item_proj")) mol.item_proj.push_back(layer_from_json(l));
    for (const auto& [name, l] : j.at("gates").items()) {
      mol.gate_names.push_back(name);
      mol.gates.push_back(layer_from_json(l));
    }
    return OverArchModel(std::move(mol));
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown OverArch type '" + type + "'");
}

nlohmann::json overarch_to_json(const OverArchModel& model) {
  nlohmann::json j;
  if (const auto* mlp = std::get_if<MlpOverArch>(&model.model())) {
    j["type"] = "mlp";
    j["user_dim"] = mlp->user_dim;
    j["item_dim"] = mlp->item_dim;
    j["cross_dot"] = mlp->cross_dot;
    j["hidden"] = nlohmann::json::array();
    for (const auto& l : mlp->hidden) j["hidden"].push_back(layer_to_json(l));
    j["heads"] = nlohmann::json::object();
    for (std::size_t i = 0; i < mlp->heads.size(); ++i) j["heads"][mlp->head_names[i]] = layer_to_json(mlp->heads[i]);
  } else {
    const auto& mol = std::get<MolOverArch>(model.model());
    j["type"] = "mol";
    for (const auto& l : mol.user_proj) j["user_proj"].push_back(layer_to_json(l));
    for (const auto& l : mol.item_proj) j["item_proj"].push_back(layer_to_json(l));
    j["gates"] = nlohmann::json::object();
    for (std::size_t i = 0; i < mol.gates.size(); ++i) j["gates"][mol.gate_names[i]] = layer_to_json(mol.gates[i]);
  }
  return j;
}

std::vector<std::vector<double>> overarch_score(const OverArchModel& model, std::span<const std::string> tasks,
                                                std::span<const std::vector<float>> users,
                                                std::span<const std::uint64_t> items, const EmbeddingCache& cache) {
  if (users.size() != tasks.size()) throw Error(ErrorCode::kLengthMismatch, "one user embedding per task");
  std::vector<std::vector<double>> out(items.size(), std::vector<double>(tasks.size()));
  for (auto id : items) (void)cache.lookup(id);
  const auto n = static_cast<std::int64_t>(items.size());
#pragma omp parallel for schedule(static) if (n > 256)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto emb = cache.lookup(items[static_cast<std::size_t>(i)]);
    for (std::size_t t = 0; t < tasks.size(); ++t) out[static_cast<std::size_t>(i)][t] = model.score(tasks[t], users[t], emb);
  }
  return out;
}

}  // namespace filtra
