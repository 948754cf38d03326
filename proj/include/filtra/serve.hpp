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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "filtra/retrieval.hpp"
#include "filtra/snapshot.hpp"

namespace filtra {

enum class RequestMode { kRetrieve, kEsr };

struct WireTask {
  std::string name;
  std::vector<float> user_embedding;
};

struct WireRequest {
  std::string id;
  std::vector<WireTask> tasks;
  std::optional<std::string> filter;
  std::optional<std::size_t> nprobe;
  std::optional<std::size_t> k0;
  std::optional<std::size_t> topk;
  std::optional<MergeMode> merge;
  std::optional<nlohmann::json> value_model;
  RequestMode mode = RequestMode::kRetrieve;
  std::vector<std::uint64_t> item_ids;
};

// Throws kInvalidRequest.
WireRequest parse_wire_request(const nlohmann::json& j);
nlohmann::json to_json(const WireRequest& req);

struct ServeDefaults {
  std::size_t nprobe = 32;
  std::size_t k0 = 1000;
  std::size_t topk = 100;
};

// Response JSON: {"id","snapshot_version","items":[{"item_id","score",
// "task_scores":{...}}],"stats":{...}} or {"id","error":{"code","message"}}.
nlohmann::json handle_request(const Engine& engine, const nlohmann::json& request, const ServeDefaults& defaults = {});

// Serves every request against the same engine. Results equal serving each
// request alone; errors stay in-band per request.
std::vector<nlohmann::json> handle_batch(const Engine& engine, const std::vector<nlohmann::json>& requests,
                                         const ServeDefaults& defaults = {});

// Response without the timing block, for comparisons.
nlohmann::json strip_stats(nlohmann::json response);

// In-process shards over disjoint item partitions. All shards must share the
// quantization params and scorer weights.
class ShardedEngine {
 public:
  explicit ShardedEngine(std::vector<std::shared_ptr<const Engine>> shards);

  std::size_t size() const noexcept { return shards_.size(); }
  const Engine& shard(std::size_t i) const { return *shards_[i]; }

  // Fan out per shard, keep the global top-k0 per task by ANN score, merge
  // across tasks, then score the gathered set once on a coordinator.
  RetrievalResult retrieve(const RetrievalRequest& req) const;
  // Global top-k of the IVF stage across shards.
  TopkResult search(std::span<const float> query, std::size_t nprobe, std::size_t k,
                    const FilterExpr* filter = nullptr) const;

 private:
  std::span<const float> lookup(std::uint64_t id) const;
  TopkResult search_compiled(const std::vector<std::optional<CompiledFilter>>& filters, std::span<const float> query,
                             std::size_t nprobe, std::size_t k, StageTimings* timings) const;

  std::vector<std::shared_ptr<const Engine>> shards_;
  mutable std::atomic<std::size_t> next_coordinator_{0};
};

// Partitions the catalog into `n_shards` pieces by a seeded shuffle and builds
// one engine per piece with shared quantization params.
std::vector<std::shared_ptr<const Engine>> build_shards(const Catalog& catalog, std::size_t n_shards,
                                                        const PublishConfig& config, std::uint64_t version,
                                                        std::uint64_t partition_seed);

// Current engine reference. Replacing publishes a new engine; readers that
// already hold the old one finish on it.
class EngineHolder {
 public:
  explicit EngineHolder(std::shared_ptr<const Engine> engine) : engine_(std::move(engine)) {}

  std::shared_ptr<const Engine> get() const {
    std::lock_guard lock(mu_);
    return engine_;
  }
  void replace(std::shared_ptr<const Engine> engine) {
    std::lock_guard lock(mu_);
    engine_ = std::move(engine);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Engine> engine_;
};

struct BatchPolicy {
  std::size_t max_batch = 6;
  std::chrono::milliseconds timeout{10};
  std::size_t queue_capacity = 1024;
  std::size_t workers = 1;
};

// Bounded request queue that hands out batches when max_batch requests are
// waiting or the oldest waiting request has aged past the timeout.
class BatchQueue {
 public:
  struct Pending {
    nlohmann::json request;
    std::function<void(nlohmann::json)> reply;
    std::chrono::steady_clock::time_point arrived;
  };

  explicit BatchQueue(BatchPolicy policy) : policy_(policy) {}

  // Blocks while the queue is full. Returns false after close().
  bool push(Pending p);
  // Empty result means closed and drained.
  std::vector<Pending> pop_batch();
  void close();

 private:
  BatchPolicy policy_;
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<Pending> items_;
  bool closed_ = false;
};

// NDJSON server: one ingest context per input stream, a bounded batch queue,
// and worker threads running handle_batch against the current engine.
// A line {"op":"reload","snapshot":path} swaps the engine.
class Server {
 public:
  Server(std::shared_ptr<const Engine> engine, BatchPolicy policy, ServeDefaults defaults = {});
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  EngineHolder& engine() noexcept { return holder_; }

  // Submits one NDJSON line; `reply` receives the response line.
  void submit(const std::string& line, std::function<void(std::string)> reply);

  // Reads requests from `in` until EOF and writes responses to `out`.
  void serve_stream(std::istream& in, std::ostream& out);
  // Accepts TCP connections until stop(). Returns the bound port.
  std::uint16_t listen(std::uint16_t port);
  void stop();

 private:
  void worker_loop();
  void accept_loop(int listen_fd);
  void connection_loop(int fd);

  EngineHolder holder_;
  BatchPolicy policy_;
  ServeDefaults defaults_;
  BatchQueue queue_;
  std::vector<std::thread> workers_;
  std::thread acceptor_;
  std::atomic<bool> stopping_{false};
  int listen_fd_ = -1;
  std::mutex conn_mu_;
  std::vector<std::thread> connections_;
};

}  // namespace filtra
