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

#include "filtra/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include <json.hpp>

#include "filtra/error.hpp"
#include "filtra/rng.hpp"

namespace filtra {

namespace {

// Already unit-norm vectors are left untouched so save/load round trips are
// bit-exact.
constexpr double kUnitNormTolerance = 1e-6;

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

Error parse_error(std::size_t line, const std::string& what) {
  return Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + what,
               {static_cast<std::int64_t>(line)});
}

Item parse_jsonl_record(const std::string& text, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error(line, e.what());
  }
  if (!j.is_object() || !j.contains("item_id") || !j.contains("embedding") || !j.contains("features")) {
    throw parse_error(line, "record needs item_id, embedding and features");
  }
  Item item;
  try {
    if (!j["item_id"].is_number_unsigned() && !(j["item_id"].is_number_integer() && j["item_id"].get<std::int64_t>() >= 0)) {
      throw parse_error(line, "item_id must be an unsigned integer");
    }
    item.item_id = j["item_id"].get<std::uint64_t>();
    for (const auto& v : j["embedding"]) {
      if (!v.is_number()) throw parse_error(line, "embedding values must be numbers");
      item.embedding.push_back(static_cast<float>(v.get<double>()));
    }
    for (const auto& f : j["features"]) {
      if (!f.is_array() || f.size() != 2) throw parse_error(line, "feature must be [feature_id, value]");
      item.features.push_back({f[0].get<std::uint64_t>(), f[1].get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(line, e.what());
  }
  return item;
}

Item parse_tsv_record(std::string_view text, std::size_t line) {
  const auto fields = split(text, '\t');
  if (fields.size() < 2 || fields.size() > 3) throw parse_error(line, "expected 2 or 3 tab-separated fields");
  Item item;
  if (!parse_number(fields[0], item.item_id)) throw parse_error(line, "bad item_id");
  if (!fields[1].empty()) {
    for (auto part : split(fields[1], ',')) {
      float v = 0;
      if (!parse_number(part, v)) throw parse_error(line, "bad embedding value");
      item.embedding.push_back(v);
    }
  }
  if (fields.size() == 3) {
    std::string_view feats = fields[2];
    while (!feats.empty() && feats.back() == '\r') feats.remove_suffix(1);
    if (!feats.empty()) {
      for (auto pair : split(feats, ';')) {
        const auto kv = split(pair, ':');
        FeatureValue fv;
        if (kv.size() != 2 || !parse_number(kv[0], fv.feature_id) || !parse_number(kv[1], fv.value)) {
          throw parse_error(line, "bad feature pair");
        }
        item.features.push_back(fv);
      }
    }
  }
  return item;
}

std::string format_float(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::optional<std::uint64_t> FeatureSchema::feature_id(const std::string& name) const {
  for (const auto& [id, n] : names) {
    if (n == name) return id;
  }
  return std::nullopt;
}

std::optional<std::uint64_t> FeatureSchema::value_id(std::uint64_t fid, const std::string& text) const {
  const auto it = values.find({fid, text});
  if (it == values.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> FeatureSchema::value_text(std::uint64_t fid, std::uint64_t value) const {
  for (const auto& [key, v] : values) {
    if (key.first == fid && v == value) return key.second;
  }
  return std::nullopt;
}

FloatMatrix Catalog::embeddings() const {
  FloatMatrix m(items.size(), dim);
  for (std::size_t i = 0; i < items.size(); ++i) std::copy(items[i].embedding.begin(), items[i].embedding.end(), m.row(i).begin());
  return m;
}

void normalize_item(Item& item, bool normalize_embedding) {
  std::sort(item.features.begin(), item.features.end());
  item.features.erase(std::unique(item.features.begin(), item.features.end()), item.features.end());
  if (!normalize_embedding) return;
  double sq = 0;
  for (float v : item.embedding) sq += static_cast<double>(v) * v;
  const double norm = std::sqrt(sq);
  if (norm == 0.0 || std::abs(norm - 1.0) <= kUnitNormTolerance) return;
  for (float& v : item.embedding) v = static_cast<float>(v / norm);
}

Catalog load_catalog(const std::filesystem::path& path, CatalogFormat format, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  Catalog catalog;
  std::unordered_set<std::uint64_t> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Item item = format == CatalogFormat::kJsonl ? parse_jsonl_record(text, line) : parse_tsv_record(text, line);
    if (catalog.dim == 0) {
      if (item.embedding.empty()) throw parse_error(line, "empty embedding");
      catalog.dim = item.embedding.size();
    } else if (item.embedding.size() != catalog.dim) {
      throw Error(ErrorCode::kDimMismatch,
                  "expected " + std::to_string(catalog.dim) + ", got " + std::to_string(item.embedding.size()),
                  {static_cast<std::int64_t>(catalog.dim), static_cast<std::int64_t>(item.embedding.size())});
    }
    if (!seen.insert(item.item_id).second) {
      throw Error(ErrorCode::kDuplicateItemId, "item_id " + std::to_string(item.item_id),
                  {static_cast<std::int64_t>(item.item_id)});
    }
    normalize_item(item, options.normalize);
    catalog.items.push_back(std::move(item));
  }
  if (options.schema_path) catalog.schema = load_schema(*options.schema_path);
  return catalog;
}

void save_catalog(const Catalog& catalog, const std::filesystem::path& path, CatalogFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kWriteError, "cannot write " + path.string());
  for (const auto& item : catalog.items) {
    if (format == CatalogFormat::kJsonl) {
      nlohmann::json j;
      j["item_id"] = item.item_id;
      auto& emb = j["embedding"] = nlohmann::json::array();
      for (float v : item.embedding) emb.push_back(v);
      auto& feats = j["features"] = nlohmann::json::array();
      for (const auto& f : item.features) feats.push_back({f.feature_id, f.value});
      out << j.dump() << '\n';
    } else {
      out << item.item_id << '\t';
      for (std::size_t i = 0; i < item.embedding.size(); ++i) out << (i ? "," : "") << format_float(item.embedding[i]);
      out << '\t';
      for (std::size_t i = 0; i < item.features.size(); ++i) {
        out << (i ? ";" : "") << item.features[i].feature_id << ':' << item.features[i].value;
      }
      out << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kWriteError, "short write to " + path.string());
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  FeatureSchema schema;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty() || text[0] == '#') continue;
    const auto fields = split(text, '\t');
    std::uint64_t fid = 0;
    if (fields[0] == "feature" && fields.size() == 3 && parse_number(fields[1], fid)) {
      schema.names[fid] = std::string(fields[2]);
    } else if (fields[0] == "value" && fields.size() == 4 && parse_number(fields[1], fid)) {
      std::uint64_t value = 0;
      if (!parse_number(fields[2], value)) throw parse_error(line, "bad value id");
      schema.values[{fid, std::string(fields[3])}] = value;
    } else {
      throw parse_error(line, "expected 'feature' or 'value' mapping");
    }
  }
  return schema;
}

void save_schema(const FeatureSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kWriteError, "cannot write " + path.string());
  for (const auto& [id, name] : schema.names) out << "feature\t" << id << '\t' << name << '\n';
  for (const auto& [key, value] : schema.values) out << "value\t" << key.first << '\t' << value << '\t' << key.second << '\n';
}

CatalogFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? CatalogFormat::kTsv : CatalogFormat::kJsonl;
}

std::vector<FeatureSpec> default_feature_specs() {
  return {{1, 50, 1.0}, {2, 200, 1.0}, {3, 20, 2.0}, {4, 1000, 3.0}, {5, 10, 1.0}, {6, 500, 2.0}};
}

Catalog synth_catalog(const SynthSpec& spec) {
  if (spec.n_items == 0 || spec.dim == 0 || spec.n_clusters == 0 || spec.n_clusters > spec.n_items) {
    throw Error(ErrorCode::kInvalidSpec, "need n_items >= n_clusters >= 1 and dim >= 1");
  }
  std::set<std::uint64_t> fids;
  for (const auto& f : spec.features) {
    if (f.cardinality == 0 || f.values_per_item < 0 || !fids.insert(f.feature_id).second) {
      throw Error(ErrorCode::kInvalidSpec, "feature specs need distinct ids and cardinality >= 1");
    }
  }

  Rng rng(spec.seed);
  FloatMatrix centers(spec.n_clusters, spec.dim);
  for (std::size_t c = 0; c < spec.n_clusters; ++c) {
    auto row = centers.row(c);
    double sq = 0;
    for (auto& v : row) {
      v = static_cast<float>(rng.normal());
      sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    for (auto& v : row) v = static_cast<float>(v / norm);
  }

  const double sigma = spec.cluster_spread / std::sqrt(static_cast<double>(spec.dim));
  Catalog catalog;
  catalog.dim = spec.dim;
  catalog.items.resize(spec.n_items);
  for (const auto& f : spec.features) catalog.schema.names[f.feature_id] = "f" + std::to_string(f.feature_id);

  for (std::size_t i = 0; i < spec.n_items; ++i) {
    Item& item = catalog.items[i];
    item.item_id = i;
    // The first n_clusters items seed one cluster each so every blob exists.
    const std::size_t c = i < spec.n_clusters ? i : static_cast<std::size_t>(rng.below(spec.n_clusters));
    const auto center = centers.row(c);
    item.embedding.resize(spec.dim);
    double sq = 0;
    for (std::size_t d = 0; d < spec.dim; ++d) {
      const float v = static_cast<float>(center[d] + sigma * rng.normal());
      item.embedding[d] = v;
      sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    for (auto& v : item.embedding) v = static_cast<float>(v / norm);

    for (const auto& f : spec.features) {
      const double whole = std::floor(f.values_per_item);
      std::uint64_t count = static_cast<std::uint64_t>(whole);
      if (rng.uniform() < f.values_per_item - whole) ++count;
      count = std::min(count, f.cardinality);
      std::set<std::uint64_t> picked;
      while (picked.size() < count) picked.insert(rng.below(f.cardinality));
      for (auto v : picked) item.features.push_back({f.feature_id, v});
    }
    std::sort(item.features.begin(), item.features.end());
  }
  return catalog;
}

}  // namespace filtra
