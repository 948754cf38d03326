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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "filtra/matrix.hpp"

namespace filtra {

struct FeatureValue {
  std::uint64_t feature_id = 0;
  std::uint64_t value = 0;

  auto operator<=>(const FeatureValue&) const = default;
};

struct Item {
  std::uint64_t item_id = 0;
  std::vector<FeatureValue> features;
  std::vector<float> embedding;

  bool operator==(const Item&) const = default;
};

// Feature names and string dictionaries for categorical values. Values are
// integers everywhere inside the engine; strings only exist at the query
// text boundary.
struct FeatureSchema {
  std::map<std::uint64_t, std::string> names;
  std::map<std::pair<std::uint64_t, std::string>, std::uint64_t> values;

  std::optional<std::uint64_t> feature_id(const std::string& name) const;
  std::optional<std::uint64_t> value_id(std::uint64_t feature_id, const std::string& text) const;
  // Reverse lookup; empty when the value has no dictionary string.
  std::optional<std::string> value_text(std::uint64_t feature_id, std::uint64_t value) const;

  bool operator==(const FeatureSchema&) const = default;
};

struct Catalog {
  std::vector<Item> items;
  std::size_t dim = 0;
  FeatureSchema schema;

  std::size_t size() const noexcept { return items.size(); }
  // Copies the embeddings into an n_items x dim matrix in catalog order.
  FloatMatrix embeddings() const;

  bool operator==(const Catalog&) const = default;
};

enum class CatalogFormat { kJsonl, kTsv };

struct LoadOptions {
  bool normalize = true;
  std::optional<std::filesystem::path> schema_path;
};

// Sorts and deduplicates each item's feature list, optionally L2-normalizes
// embeddings, and checks catalog invariants.
void normalize_item(Item& item, bool normalize_embedding);

Catalog load_catalog(const std::filesystem::path& path, CatalogFormat format, const LoadOptions& options = {});
void save_catalog(const Catalog& catalog, const std::filesystem::path& path, CatalogFormat format);

// Sidecar schema file, tab separated, one mapping per line:
//   feature <feature_id> <name>
//   value   <feature_id> <value_id> <string>
FeatureSchema load_schema(const std::filesystem::path& path);
void save_schema(const FeatureSchema& schema, const std::filesystem::path& path);

CatalogFormat format_from_path(const std::filesystem::path& path);

struct FeatureSpec {
  std::uint64_t feature_id = 0;
  std::uint64_t cardinality = 1;
  // Mean number of distinct values per item. The integer part is always
  // drawn; the fractional part is the probability of one more.
  double values_per_item = 1.0;
};

struct SynthSpec {
  std::size_t n_items = 0;
  std::size_t dim = 0;
  std::size_t n_clusters = 1;
  std::vector<FeatureSpec> features;
  std::uint64_t seed = 0;
  // Standard deviation of the isotropic blob noise, expressed as the expected
  // noise norm relative to the unit-norm cluster centers.
  double cluster_spread = 0.3;
};

Catalog synth_catalog(const SynthSpec& spec);

// Six features totalling ten values per item on average.
std::vector<FeatureSpec> default_feature_specs();

}  // namespace filtra
