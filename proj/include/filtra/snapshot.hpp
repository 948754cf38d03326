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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "filtra/bloom.hpp"
#include "filtra/catalog.hpp"
#include "filtra/overarch.hpp"
#include "filtra/retrieval.hpp"
#include "filtra/value_model.hpp"

namespace filtra {

inline constexpr std::array<char, 8> kSnapshotMagic = {'F', 'L', 'T', 'R', 'S', 'N', 'P', '1'};
// Version 1: FNV-1a-64 section checksums, little-endian, IEEE-754 binary32.
inline constexpr std::uint32_t kSnapshotFormatVersion = 1;

enum class SectionId : std::uint32_t {
  kCentroids = 1,
  kLayout = 2,
  kQuantizedItems = 3,
  kQuantParams = 4,
  kBloomPlanes = 5,
  kValidMask = 6,
  kItemIds = 7,
  kEmbeddingCache = 8,
  kScorerWeights = 9,
  kValueModel = 10,
  kFeatureSchema = 11,
};

struct SectionEntry {
  std::uint32_t section_id = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::uint64_t checksum = 0;
};

struct SnapshotHeader {
  std::uint32_t format_version = kSnapshotFormatVersion;
  std::uint64_t snapshot_version = 0;
  std::uint32_t dim = 0;
  std::uint64_t n_items = 0;
  std::uint64_t n_slots = 0;
  std::uint32_t n_clusters = 0;
  std::uint32_t bloom_m = 0;
  std::uint32_t bloom_k = 0;
  std::uint32_t hash_scheme_id = 0;
  std::vector<SectionEntry> sections;
};

std::uint64_t checksum64(std::span<const std::uint8_t> bytes);

struct PublishConfig {
  std::size_t n_clusters = 0;  // 0 = ceil(sqrt(n))
  BloomParams bloom;
  std::optional<QuantParams> quant_params;
  std::uint64_t seed = 0;
  std::size_t kmeans_iters = 25;
  double kmeans_tol = 1e-4;
  std::optional<OverArchModel> overarch;  // empty = dot product head
  std::optional<ValueNode> value_model;   // empty = first task's score
};

// Builds every index and cache in memory. Item-tower embeddings default to
// the catalog embeddings.
Engine build_engine(const Catalog& catalog, const PublishConfig& config, std::uint64_t version,
                    const FloatMatrix* item_tower = nullptr);

std::vector<std::uint8_t> serialize_engine(const Engine& engine);
// Throws kBadMagic, kVersionUnsupported, kChecksumMismatch, kTruncated.
Engine deserialize_engine(std::span<const std::uint8_t> bytes);

// Writes via a temporary file and rename. Throws kWriteError.
void write_snapshot(const Engine& engine, const std::filesystem::path& path);
void publish(const Catalog& catalog, const PublishConfig& config, std::uint64_t version,
             const std::filesystem::path& path, const FloatMatrix* item_tower = nullptr);

Engine load_snapshot(const std::filesystem::path& path);
std::shared_ptr<const Engine> load_shared(const std::filesystem::path& path);

SnapshotHeader read_header(std::span<const std::uint8_t> bytes);
SnapshotHeader read_header(const std::filesystem::path& path);
std::string section_name(std::uint32_t id);

}  // namespace filtra
