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

#include "filtra/snapshot.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "byte_io.hpp"
#include "filtra/error.hpp"

namespace filtra {

using detail::ByteReader;
using detail::ByteWriter;

namespace {

constexpr std::size_t kFixedHeaderBytes = 8 + 4 + 8 + 4 + 8 + 8 + 4 + 4 + 4 + 4 + 4;
constexpr std::size_t kSectionEntryBytes = 4 + 4 + 8 + 8 + 8;

void put_layer(ByteWriter& w, const DenseLayer& l) {
  w.put<std::uint64_t>(l.in);
  w.put<std::uint64_t>(l.out);
  w.put_array<float>(l.weights);
  w.put_array<float>(l.bias);
}

DenseLayer get_layer(ByteReader& r) {
  DenseLayer l;
  l.in = r.get<std::uint64_t>();
  l.out = r.get<std::uint64_t>();
  l.weights = r.get_array<float>(static_cast<std::uint64_t>(l.in) * l.out);
  l.bias = r.get_array<float>(l.out);
  return l;
}

std::vector<std::uint8_t> encode_scorer(const OverArchModel& model) {
  ByteWriter w;
  if (const auto* mlp = std::get_if<MlpOverArch>(&model.model())) {
    w.put<std::uint32_t>(0);
    w.put<std::uint64_t>(mlp->user_dim);
    w.put<std::uint64_t>(mlp->item_dim);
    w.put<std::uint8_t>(mlp->cross_dot ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(mlp->hidden.size()));
    for (const auto& l : mlp->hidden) put_layer(w, l);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(mlp->heads.size()));
    for (std::size_t i = 0; i < mlp->heads.size(); ++i) {
      w.put_string(mlp->head_names[i]);
      put_layer(w, mlp->heads[i]);
    }
  } else {
    const auto& mol = std::get<MolOverArch>(model.model());
    w.put<std::uint32_t>(1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(mol.user_proj.size()));
    for (const auto& l : mol.user_proj) put_layer(w, l);
    for (const auto& l : mol.item_proj) put_layer(w, l);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(mol.gates.size()));
    for (std::size_t i = 0; i < mol.gates.size(); ++i) {
      w.put_string(mol.gate_names[i]);
      put_layer(w, mol.gates[i]);
    }
  }
  return std::move(w.bytes());
}

OverArchModel decode_scorer(ByteReader& r) {
  const auto kind = r.get<std::uint32_t>();
  if (kind == 0) {
    MlpOverArch mlp;
    mlp.user_dim = r.get<std::uint64_t>();
    mlp.item_dim = r.get<std::uint64_t>();
    mlp.cross_dot = r.get<std::uint8_t>() != 0;
    const auto n_hidden = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_hidden; ++i) mlp.hidden.push_back(get_layer(r));
    const auto n_heads = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_heads; ++i) {
      mlp.head_names.push_back(r.get_string());
      mlp.heads.push_back(get_layer(r));
    }
    return OverArchModel(std::move(mlp));
  }
  if (kind == 1) {
    MolOverArch mol;
    const auto p = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < p; ++i) mol.user_proj.push_back(get_layer(r));
    for (std::uint32_t i = 0; i < p; ++i) mol.item_proj.push_back(get_layer(r));
    const auto n_gates = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_gates; ++i) {
      mol.gate_names.push_back(r.get_string());
      mol.gates.push_back(get_layer(r));
    }
    return OverArchModel(std::move(mol));
  }
  throw Error(ErrorCode::kParseError, "unknown scorer kind " + std::to_string(kind));
}

struct Section {
  SectionId id;
  std::vector<std::uint8_t> bytes;
};

std::vector<Section> encode_sections(const Engine& e) {
  std::vector<Section> out;
  const auto& ivf = e.ivf;
  {
    ByteWriter w;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ivf.centroids.vectors.rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ivf.centroids.vectors.cols));
    w.put_array<float>(ivf.centroids.vectors.data);
    out.push_back({SectionId::kCentroids, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    w.put<std::uint64_t>(ivf.n_clusters());
    w.put_array<std::uint64_t>(ivf.cluster_offsets);
    w.put_array<std::uint64_t>(ivf.cluster_sizes);
    w.put<std::uint64_t>(ivf.n_items());
    w.put<std::uint64_t>(ivf.n_slots());
    w.put_array<std::uint32_t>(ivf.perm);
    out.push_back({SectionId::kLayout, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    w.put<std::uint64_t>(ivf.items_q.rows);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ivf.items_q.dim));
    w.put_array<std::int8_t>(ivf.items_q.data);
    out.push_back({SectionId::kQuantizedItems, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    w.put<float>(ivf.items_q.params.global_min);
    w.put<float>(ivf.items_q.params.global_max);
    w.put<float>(ivf.items_q.params.scale);
    out.push_back({SectionId::kQuantParams, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    w.put<std::uint32_t>(e.bloom.params.m_bits);
    w.put<std::uint32_t>(e.bloom.params.k_hashes);
    w.put<std::uint32_t>(e.bloom.params.hash_scheme_id);
    w.put<std::uint64_t>(e.bloom.n_slots);
    w.put<std::uint64_t>(e.bloom.words_per_plane);
    w.put_array<std::uint64_t>(e.bloom.planes);
    out.push_back({SectionId::kBloomPlanes, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    w.put<std::uint64_t>(ivf.valid_mask.size());
    w.put_array<std::uint64_t>(ivf.valid_mask.words());
    out.push_back({SectionId::kValidMask, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    w.put<std::uint64_t>(ivf.item_ids.size());
    w.put_array<std::uint64_t>(ivf.item_ids);
    out.push_back({SectionId::kItemIds, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    w.put<std::uint64_t>(e.cache.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.cache.dim()));
    w.put_array<std::uint64_t>(e.cache.ids());
    w.put_array<float>(e.cache.table().data);
    out.push_back({SectionId::kEmbeddingCache, std::move(w.bytes())});
  }
  out.push_back({SectionId::kScorerWeights, encode_scorer(e.overarch)});
  {
    const std::string text = value_model_to_json(e.value_model.root()).dump();
    out.push_back({SectionId::kValueModel, std::vector<std::uint8_t>(text.begin(), text.end())});
  }
  {
    ByteWriter w;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.schema.names.size()));
    for (const auto& [id, name] : e.schema.names) {
      w.put<std::uint64_t>(id);
      w.put_string(name);
    }
    w.put<std::uint64_t>(e.schema.values.size());
    for (const auto& [key, value] : e.schema.values) {
      w.put<std::uint64_t>(key.first);
      w.put_string(key.second);
      w.put<std::uint64_t>(value);
    }
    out.push_back({SectionId::kFeatureSchema, std::move(w.bytes())});
  }
  return out;
}

void put_fixed_header(ByteWriter& w, const SnapshotHeader& h) {
  for (char c : kSnapshotMagic) w.put<std::uint8_t>(static_cast<std::uint8_t>(c));
  w.put<std::uint32_t>(h.format_version);
  w.put<std::uint64_t>(h.snapshot_version);
  w.put<std::uint32_t>(h.dim);
  w.put<std::uint64_t>(h.n_items);
  w.put<std::uint64_t>(h.n_slots);
  w.put<std::uint32_t>(h.n_clusters);
  w.put<std::uint32_t>(h.bloom_m);
  w.put<std::uint32_t>(h.bloom_k);
  w.put<std::uint32_t>(h.hash_scheme_id);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(h.sections.size()));
}

std::span<const std::uint8_t> section_bytes(std::span<const std::uint8_t> file, const SectionEntry& s) {
  return file.subspan(static_cast<std::size_t>(s.offset), static_cast<std::size_t>(s.length));
}

Error checksum_error(std::uint32_t id) {
  return Error(ErrorCode::kChecksumMismatch, "section " + section_name(id), {static_cast<std::int64_t>(id)});
}

}  // namespace

std::uint64_t checksum64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::string section_name(std::uint32_t id) {
  switch (static_cast<SectionId>(id)) {
    case SectionId::kCentroids: return "centroids";
    case SectionId::kLayout: return "layout";
    case SectionId::kQuantizedItems: return "quantized_items";
    case SectionId::kQuantParams: return "quant_params";
    case SectionId::kBloomPlanes: return "bloom_planes";
    case SectionId::kValidMask: return "valid_mask";
    case SectionId::kItemIds: return "item_ids";
    case SectionId::kEmbeddingCache: return "embedding_cache";
    case SectionId::kScorerWeights: return "scorer_weights";
    case SectionId::kValueModel: return "value_model";
    case SectionId::kFeatureSchema: return "feature_schema";
  }
  return "section_" + std::to_string(id);
}

Engine build_engine(const Catalog& catalog, const PublishConfig& config, std::uint64_t version,
                    const FloatMatrix* item_tower) {
  validate(config.bloom);
  Engine e;
  e.snapshot_version = version;
  IvfBuildOptions opts;
  opts.n_clusters = config.n_clusters;
  opts.quant_params = config.quant_params;
  opts.seed = config.seed;
  opts.max_iters = config.kmeans_iters;
  opts.tol = config.kmeans_tol;
  e.ivf = build_ivf(catalog, opts);

  std::vector<const Item*> slots(e.ivf.n_slots(), nullptr);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (e.ivf.perm[s] != kPaddingSlot) slots[s] = &catalog.items[e.ivf.perm[s]];
  }
  e.bloom = build_bloom(slots, config.bloom);

  std::vector<std::uint64_t> ids;
  ids.reserve(catalog.size());
  for (const auto& item : catalog.items) ids.push_back(item.item_id);
  if (item_tower) {
    if (item_tower->rows != catalog.size()) throw Error(ErrorCode::kLengthMismatch, "item tower rows must match catalog");
    e.cache = EmbeddingCache(std::move(ids), *item_tower);
  } else {
    e.cache = EmbeddingCache(std::move(ids), catalog.embeddings());
  }
  e.overarch = config.overarch ? *config.overarch : OverArchModel::dot_product(catalog.dim, e.cache.dim());
  if (e.overarch.item_dim() != e.cache.dim()) throw Error(ErrorCode::kDimMismatch, "OverArch item width differs from the cache");
  e.value_model = config.value_model ? ValueModel(*config.value_model) : ValueModel();
  e.schema = catalog.schema;
  return e;
}

std::vector<std::uint8_t> serialize_engine(const Engine& engine) {
  auto sections = encode_sections(engine);
  SnapshotHeader h;
  h.snapshot_version = engine.snapshot_version;
  h.dim = static_cast<std::uint32_t>(engine.ivf.dim());
  h.n_items = engine.ivf.n_items();
  h.n_slots = engine.ivf.n_slots();
  h.n_clusters = static_cast<std::uint32_t>(engine.ivf.n_clusters());
  h.bloom_m = engine.bloom.params.m_bits;
  h.bloom_k = engine.bloom.params.k_hashes;
  h.hash_scheme_id = engine.bloom.params.hash_scheme_id;

  // Sections follow the header, table and header checksum back to back, so
  // every byte of the file is covered by some checksum.
  std::uint64_t offset = kFixedHeaderBytes + sections.size() * kSectionEntryBytes + 8;
  for (const auto& s : sections) {
    h.sections.push_back({static_cast<std::uint32_t>(s.id), offset, s.bytes.size(), checksum64(s.bytes)});
    offset += s.bytes.size();
  }

  ByteWriter w;
  put_fixed_header(w, h);
  for (const auto& s : h.sections) {
    w.put<std::uint32_t>(s.section_id);
    w.put<std::uint32_t>(0);
    w.put<std::uint64_t>(s.offset);
    w.put<std::uint64_t>(s.length);
    w.put<std::uint64_t>(s.checksum);
  }
  w.put<std::uint64_t>(checksum64(w.bytes()));
  for (std::size_t i = 0; i < sections.size(); ++i) {
    w.bytes().insert(w.bytes().end(), sections[i].bytes.begin(), sections[i].bytes.end());
  }
  return std::move(w.bytes());
}

SnapshotHeader read_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "snapshot header");
  if (bytes.size() < kSnapshotMagic.size() ||
      !std::equal(kSnapshotMagic.begin(), kSnapshotMagic.end(), bytes.begin(),
                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    throw Error(ErrorCode::kBadMagic, "not a snapshot file");
  }
  for (std::size_t i = 0; i < kSnapshotMagic.size(); ++i) r.get<std::uint8_t>();
  SnapshotHeader h;
  h.format_version = r.get<std::uint32_t>();
  if (h.format_version != kSnapshotFormatVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "format version " + std::to_string(h.format_version),
                {static_cast<std::int64_t>(h.format_version)});
  }
  h.snapshot_version = r.get<std::uint64_t>();
  h.dim = r.get<std::uint32_t>();
  h.n_items = r.get<std::uint64_t>();
  h.n_slots = r.get<std::uint64_t>();
  h.n_clusters = r.get<std::uint32_t>();
  h.bloom_m = r.get<std::uint32_t>();
  h.bloom_k = r.get<std::uint32_t>();
  h.hash_scheme_id = r.get<std::uint32_t>();
  const auto n_sections = r.get<std::uint32_t>();
  if (n_sections > 1024) throw Error(ErrorCode::kChecksumMismatch, "implausible section count", {0});
  for (std::uint32_t i = 0; i < n_sections; ++i) {
    SectionEntry s;
    s.section_id = r.get<std::uint32_t>();
    r.get<std::uint32_t>();
    s.offset = r.get<std::uint64_t>();
    s.length = r.get<std::uint64_t>();
    s.checksum = r.get<std::uint64_t>();
    h.sections.push_back(s);
  }
  const std::size_t header_end = r.position();
  const auto stored = r.get<std::uint64_t>();
  if (stored != checksum64(bytes.first(header_end))) throw checksum_error(0);

  // Sections must lie inside the file and not overlap.
  auto sorted = h.sections;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.offset < b.offset; });
  std::uint64_t cursor = header_end + 8;
  for (const auto& s : sorted) {
    if (s.offset < cursor || s.length > bytes.size() || s.offset > bytes.size() - s.length) {
      throw Error(ErrorCode::kTruncated, "section " + section_name(s.section_id) + " out of bounds",
                  {static_cast<std::int64_t>(s.section_id)});
    }
    cursor = s.offset + s.length;
  }
  if (cursor != bytes.size()) throw Error(ErrorCode::kTruncated, "file size does not match the section table");
  return h;
}

SnapshotHeader read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return read_header(bytes);
}

Engine deserialize_engine(std::span<const std::uint8_t> bytes) {
  const SnapshotHeader h = read_header(bytes);
  for (const auto& s : h.sections) {
    if (checksum64(section_bytes(bytes, s)) != s.checksum) throw checksum_error(s.section_id);
  }
  auto find = [&](SectionId id) {
    for (const auto& s : h.sections) {
      if (s.section_id == static_cast<std::uint32_t>(id)) return ByteReader(section_bytes(bytes, s), section_name(s.section_id));
    }
    throw Error(ErrorCode::kTruncated, "missing section " + section_name(static_cast<std::uint32_t>(id)),
                {static_cast<std::int64_t>(id)});
  };
  auto mismatch = [](const std::string& what) { return Error(ErrorCode::kParseError, "snapshot inconsistent: " + what); };

  Engine e;
  e.snapshot_version = h.snapshot_version;
  auto& ivf = e.ivf;
  {
    auto r = find(SectionId::kCentroids);
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    ivf.centroids.vectors.rows = rows;
    ivf.centroids.vectors.cols = cols;
    ivf.centroids.vectors.data = r.get_array<float>(static_cast<std::uint64_t>(rows) * cols);
    r.expect_end();
    if (rows != h.n_clusters || cols != h.dim) throw mismatch("centroid shape");
  }
  {
    auto r = find(SectionId::kLayout);
    const auto k = r.get<std::uint64_t>();
    if (k != h.n_clusters) throw mismatch("cluster count");
    ivf.cluster_offsets = r.get_array<std::uint64_t>(k + 1);
    ivf.cluster_sizes = r.get_array<std::uint64_t>(k);
    const auto n_items = r.get<std::uint64_t>();
    const auto n_slots = r.get<std::uint64_t>();
    if (n_items != h.n_items || n_slots != h.n_slots) throw mismatch("layout sizes");
    ivf.perm = r.get_array<std::uint32_t>(n_slots);
    r.expect_end();
    ivf.inv_perm.assign(static_cast<std::size_t>(n_items), 0);
    std::uint64_t real = 0;
    for (std::size_t s = 0; s < ivf.perm.size(); ++s) {
      if (ivf.perm[s] == kPaddingSlot) continue;
      if (ivf.perm[s] >= n_items) throw mismatch("perm entry out of range");
      ivf.inv_perm[ivf.perm[s]] = s;
      ++real;
    }
    if (real != n_items || ivf.cluster_offsets.back() != n_slots) throw mismatch("perm is not a bijection");
  }
  {
    auto r = find(SectionId::kQuantizedItems);
    ivf.items_q.rows = r.get<std::uint64_t>();
    ivf.items_q.dim = r.get<std::uint32_t>();
    if (ivf.items_q.rows != h.n_slots || ivf.items_q.dim != h.dim) throw mismatch("quantized shape");
    ivf.items_q.data = r.get_array<std::int8_t>(static_cast<std::uint64_t>(ivf.items_q.rows) * ivf.items_q.dim);
    r.expect_end();
  }
  {
    auto r = find(SectionId::kQuantParams);
    ivf.items_q.params.global_min = r.get<float>();
    ivf.items_q.params.global_max = r.get<float>();
    ivf.items_q.params.scale = r.get<float>();
    ivf.row_sums = compute_row_sums(ivf.items_q);
    r.expect_end();
  }
  {
    auto r = find(SectionId::kBloomPlanes);
    e.bloom.params.m_bits = r.get<std::uint32_t>();
    e.bloom.params.k_hashes = r.get<std::uint32_t>();
    e.bloom.params.hash_scheme_id = r.get<std::uint32_t>();
    validate(e.bloom.params);
    e.bloom.n_slots = r.get<std::uint64_t>();
    e.bloom.words_per_plane = r.get<std::uint64_t>();
    if (e.bloom.n_slots != h.n_slots || e.bloom.words_per_plane != (h.n_slots + 63) / 64 ||
        e.bloom.params.m_bits != h.bloom_m || e.bloom.params.k_hashes != h.bloom_k) {
      throw mismatch("bloom shape");
    }
    e.bloom.planes = r.get_array<std::uint64_t>(static_cast<std::uint64_t>(e.bloom.params.m_bits) * e.bloom.words_per_plane);
    r.expect_end();
  }
  {
    auto r = find(SectionId::kValidMask);
    const auto nbits = r.get<std::uint64_t>();
    if (nbits != h.n_slots) throw mismatch("valid mask size");
    ivf.valid_mask = Bitmask(static_cast<std::size_t>(nbits));
    const auto words = r.get_array<std::uint64_t>(Bitmask::words_for(static_cast<std::size_t>(nbits)));
    std::copy(words.begin(), words.end(), ivf.valid_mask.words().begin());
    r.expect_end();
  }
  {
    auto r = find(SectionId::kItemIds);
    const auto n = r.get<std::uint64_t>();
    if (n != h.n_slots) throw mismatch("item id table size");
    ivf.item_ids = r.get_array<std::uint64_t>(n);
    r.expect_end();
  }
  {
    auto r = find(SectionId::kEmbeddingCache);
    const auto n = r.get<std::uint64_t>();
    const auto dim = r.get<std::uint32_t>();
    auto ids = r.get_array<std::uint64_t>(n);
    FloatMatrix table;
    table.rows = static_cast<std::size_t>(n);
    table.cols = dim;
    table.data = r.get_array<float>(n * dim);
    r.expect_end();
    e.cache = EmbeddingCache(std::move(ids), std::move(table));
  }
  {
    auto r = find(SectionId::kScorerWeights);
    e.overarch = decode_scorer(r);
    r.expect_end();
  }
  {
    const auto it = std::find_if(h.sections.begin(), h.sections.end(), [](const auto& s) {
      return s.section_id == static_cast<std::uint32_t>(SectionId::kValueModel);
    });
    if (it == h.sections.end()) throw Error(ErrorCode::kTruncated, "missing section value_model");
    const auto text = section_bytes(bytes, *it);
    try {
      e.value_model = ValueModel(value_model_from_json(nlohmann::json::parse(text.begin(), text.end())));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::kParseError, std::string("value model section: ") + ex.what());
    }
  }
  {
    auto r = find(SectionId::kFeatureSchema);
    const auto n_names = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_names; ++i) {
      const auto id = r.get<std::uint64_t>();
      e.schema.names[id] = r.get_string();
    }
    const auto n_values = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_values; ++i) {
      const auto fid = r.get<std::uint64_t>();
      auto text = r.get_string();
      e.schema.values[{fid, std::move(text)}] = r.get<std::uint64_t>();
    }
    r.expect_end();
  }
  return e;
}

void write_snapshot(const Engine& engine, const std::filesystem::path& path) {
  const auto bytes = serialize_engine(engine);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kWriteError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kWriteError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kWriteError, "rename to " + path.string() + ": " + ec.message());
}

void publish(const Catalog& catalog, const PublishConfig& config, std::uint64_t version,
             const std::filesystem::path& path, const FloatMatrix* item_tower) {
  write_snapshot(build_engine(catalog, config, version, item_tower), path);
}

Engine load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_engine(bytes);
}

std::shared_ptr<const Engine> load_shared(const std::filesystem::path& path) {
  return std::make_shared<const Engine>(load_snapshot(path));
}

}  // namespace filtra
