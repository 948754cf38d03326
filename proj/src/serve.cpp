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

#include "filtra/serve.hpp"

#include <algorithm>
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <istream>
#include <ostream>

#include "filtra/error.hpp"
#include "filtra/rng.hpp"

namespace filtra {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

Error bad_request(const std::string& what) { return Error(ErrorCode::kInvalidRequest, what); }

std::size_t get_count(const json& j, const char* key) {
  const auto& v = j[key];
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw bad_request(std::string(key) + " must be a non-negative integer");
  return v.get<std::size_t>();
}

json error_response(const json& request, const std::string& code, const std::string& message) {
  json out;
  out["id"] = request.is_object() && request.contains("id") ? request["id"] : json(nullptr);
  out["error"] = {{"code", code}, {"message", message}};
  return out;
}

json items_json(const std::vector<RankedItem>& items, const std::vector<std::string>& names) {
  json arr = json::array();
  for (const auto& it : items) {
    json task_scores = json::object();
    for (std::size_t t = 0; t < names.size(); ++t) task_scores[names[t]] = it.task_scores[t];
    arr.push_back({{"item_id", it.item_id}, {"score", it.score}, {"task_scores", std::move(task_scores)}});
  }
  return arr;
}

json stats_json(const StageTimings& t) {
  return {{"probe_us", t.probe_us}, {"filter_us", t.filter_us}, {"scan_us", t.scan_us},
          {"overarch_us", t.overarch_us}, {"total_us", t.total_us}};
}

}  // namespace

WireRequest parse_wire_request(const json& j) {
  if (!j.is_object()) throw bad_request("request must be a JSON object");
  WireRequest r;
  try {
    if (j.contains("id")) r.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    if (!j.contains("tasks") || !j["tasks"].is_array()) throw bad_request("request needs a \"tasks\" array");
    for (const auto& t : j["tasks"]) {
      WireTask wt;
      wt.name = t.value("name", std::string("*"));
      if (!t.contains("user_embedding") || !t["user_embedding"].is_array()) throw bad_request("task needs user_embedding");
      for (const auto& v : t["user_embedding"]) {
        if (!v.is_number()) throw bad_request("user_embedding values must be numbers");
        wt.user_embedding.push_back(static_cast<float>(v.get<double>()));
      }
      r.tasks.push_back(std::move(wt));
    }
    if (j.contains("filter") && !j["filter"].is_null()) {
      if (!j["filter"].is_string()) throw bad_request("filter must be a string");
      r.filter = j["filter"].get<std::string>();
    }
    if (j.contains("nprobe")) r.nprobe = get_count(j, "nprobe");
    if (j.contains("k0")) r.k0 = get_count(j, "k0");
    if (j.contains("topk")) r.topk = get_count(j, "topk");
    if (j.contains("merge")) {
      const std::string m = j["merge"];
      if (m == "union") r.merge = MergeMode::kUnion;
      else if (m == "intersection") r.merge = MergeMode::kIntersection;
      else throw bad_request("merge must be union or intersection");
    }
    if (j.contains("value_model")) r.value_model = j["value_model"];
    if (j.contains("mode")) {
      const std::string m = j["mode"];
      if (m == "retrieve") r.mode = RequestMode::kRetrieve;
      else if (m == "esr") r.mode = RequestMode::kEsr;
      else throw bad_request("mode must be retrieve or esr");
    }
    if (j.contains("item_ids")) r.item_ids = j["item_ids"].get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw bad_request(e.what());
  }
  if (r.mode == RequestMode::kEsr && !j.contains("item_ids")) throw bad_request("esr mode needs item_ids");
  return r;
}

json to_json(const WireRequest& req) {
  json j;
  j["id"] = req.id;
  j["tasks"] = json::array();
  for (const auto& t : req.tasks) j["tasks"].push_back({{"name", t.name}, {"user_embedding", t.user_embedding}});
  if (req.filter) j["filter"] = *req.filter;
  if (req.nprobe) j["nprobe"] = *req.nprobe;
  if (req.k0) j["k0"] = *req.k0;
  if (req.topk) j["topk"] = *req.topk;
  if (req.merge) j["merge"] = *req.merge == MergeMode::kUnion ? "union" : "intersection";
  if (req.value_model) j["value_model"] = *req.value_model;
  j["mode"] = req.mode == RequestMode::kRetrieve ? "retrieve" : "esr";
  if (req.mode == RequestMode::kEsr) j["item_ids"] = req.item_ids;
  return j;
}

json handle_request(const Engine& engine, const json& request, const ServeDefaults& defaults) {
  const auto t0 = Clock::now();
  try {
    const WireRequest wire = parse_wire_request(request);
    RetrievalRequest req;
    std::vector<std::string> names;
    for (const auto& t : wire.tasks) {
      req.tasks.push_back({t.name, t.user_embedding});
      names.push_back(t.name);
    }
    req.nprobe = wire.nprobe.value_or(defaults.nprobe);
    req.k0 = wire.k0.value_or(std::max(defaults.k0, wire.topk.value_or(0)));
    req.topk = wire.topk.value_or(std::min(defaults.topk, req.k0));
    req.merge = wire.merge.value_or(MergeMode::kUnion);
    if (wire.value_model) req.value_model = value_model_from_json(*wire.value_model);
    if (wire.filter) req.filter = parse_filter(*wire.filter, engine.schema);

    json out;
    out["id"] = wire.id;
    out["snapshot_version"] = engine.snapshot_version;
    if (wire.mode == RequestMode::kRetrieve) {
      const auto result = retrieve(engine, req);
      out["items"] = items_json(result.items, names);
      out["stats"] = stats_json(result.timings);
    } else {
      if (req.tasks.empty()) throw bad_request("request needs at least one task");
      const ValueModel vm = req.value_model ? ValueModel(*req.value_model) : engine.value_model;
      validate_value_model(vm.root(), names);
      const std::size_t topk = wire.topk.value_or(wire.item_ids.size());
      const auto t_rank = Clock::now();
      const auto items = rank_candidates(engine.overarch, vm, engine.cache, req.tasks, wire.item_ids, topk);
      StageTimings timings;
      timings.overarch_us = std::chrono::duration<double, std::micro>(Clock::now() - t_rank).count();
      timings.total_us = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
      out["items"] = items_json(items, names);
      out["stats"] = stats_json(timings);
    }
    return out;
  } catch (const Error& e) {
    return error_response(request, to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response(request, to_string(ErrorCode::kInvalidRequest), e.what());
  }
}

std::vector<json> handle_batch(const Engine& engine, const std::vector<json>& requests, const ServeDefaults& defaults) {
  std::vector<json> out(requests.size());
  const auto n = static_cast<std::int64_t>(requests.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = handle_request(engine, requests[static_cast<std::size_t>(i)], defaults);
  }
  return out;
}

json strip_stats(json response) {
  response.erase("stats");
  return response;
}

ShardedEngine::ShardedEngine(std::vector<std::shared_ptr<const Engine>> shards) : shards_(std::move(shards)) {
  if (shards_.empty()) throw Error(ErrorCode::kInvalidConfig, "sharded engine needs at least one shard");
  for (const auto& s : shards_) {
    if (s->ivf.dim() != shards_[0]->ivf.dim()) throw Error(ErrorCode::kDimMismatch, "shard dimensions differ");
    if (!(s->ivf.quant_params() == shards_[0]->ivf.quant_params())) {
      throw Error(ErrorCode::kInvalidConfig, "shards must share quantization params");
    }
  }
}

std::span<const float> ShardedEngine::lookup(std::uint64_t id) const {
  for (const auto& s : shards_) {
    if (s->cache.contains(id)) return s->cache.lookup(id);
  }
  throw Error(ErrorCode::kMissingItem, "item " + std::to_string(id), {static_cast<std::int64_t>(id)});
}

TopkResult ShardedEngine::search_compiled(const std::vector<std::optional<CompiledFilter>>& filters,
                                          std::span<const float> query, std::size_t nprobe, std::size_t k,
                                          StageTimings* timings) const {
  TopkCollector global(k);
  for (std::size_t s = 0; s < shards_.size(); ++s) {
    CodesignStats cs;
    const auto local = codesigned_search(shards_[s]->ivf, shards_[s]->bloom, filters[s] ? &*filters[s] : nullptr, query,
                                         nprobe, k, &cs);
    for (const auto& h : local.entries) global.push(h);
    if (timings) {
      timings->probe_us += cs.probe_us;
      timings->filter_us += cs.filter_us;
      timings->scan_us += cs.scan_us;
    }
  }
  return global.take();
}

TopkResult ShardedEngine::search(std::span<const float> query, std::size_t nprobe, std::size_t k,
                                 const FilterExpr* filter) const {
  std::vector<std::optional<CompiledFilter>> filters(shards_.size());
  if (filter) {
    for (std::size_t s = 0; s < shards_.size(); ++s) filters[s] = compile_filter(*filter, shards_[s]->bloom.params);
  }
  return search_compiled(filters, query, nprobe, k, nullptr);
}

RetrievalResult ShardedEngine::retrieve(const RetrievalRequest& req) const {
  const auto t_start = Clock::now();
  for (const auto& s : shards_) validate_request(*s, req);
  RetrievalResult out;

  std::vector<std::optional<CompiledFilter>> filters(shards_.size());
  if (req.filter) {
    for (std::size_t s = 0; s < shards_.size(); ++s) filters[s] = compile_filter(*req.filter, shards_[s]->bloom.params);
  }

  std::vector<TopkResult> per_task;
  for (const auto& task : req.tasks) {
    per_task.push_back(search_compiled(filters, task.user_embedding, req.nprobe, req.k0, &out.timings));
  }

  const auto t_rank = Clock::now();
  const auto merged = merge_candidates(per_task, req.merge);
  FloatMatrix gathered(merged.size(), shards_[0]->cache.dim());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const auto emb = lookup(merged[i]);
    std::copy(emb.begin(), emb.end(), gathered.row(i).begin());
  }
  const EmbeddingCache gathered_cache(merged, std::move(gathered));
  const Engine& coordinator = *shards_[next_coordinator_.fetch_add(1) % shards_.size()];
  const ValueModel vm = req.value_model ? ValueModel(*req.value_model) : coordinator.value_model;
  out.items = rank_candidates(coordinator.overarch, vm, gathered_cache, req.tasks, merged, req.topk);
  out.timings.overarch_us = std::chrono::duration<double, std::micro>(Clock::now() - t_rank).count();
  out.timings.total_us = std::chrono::duration<double, std::micro>(Clock::now() - t_start).count();
  return out;
}

std::vector<std::shared_ptr<const Engine>> build_shards(const Catalog& catalog, std::size_t n_shards,
                                                        const PublishConfig& config, std::uint64_t version,
                                                        std::uint64_t partition_seed) {
  if (n_shards == 0 || n_shards > catalog.size()) throw Error(ErrorCode::kInvalidConfig, "bad shard count");
  std::vector<std::size_t> order(catalog.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(partition_seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);

  std::vector<Catalog> parts(n_shards);
  for (auto& p : parts) {
    p.dim = catalog.dim;
    p.schema = catalog.schema;
  }
  // Shuffled assignment, catalog order within a shard, so one shard is the catalog itself.
  std::vector<std::size_t> shard_of(catalog.size());
  for (std::size_t i = 0; i < order.size(); ++i) shard_of[order[i]] = i % n_shards;
  for (std::size_t i = 0; i < catalog.size(); ++i) parts[shard_of[i]].items.push_back(catalog.items[i]);

  PublishConfig shared = config;
  if (!shared.quant_params) shared.quant_params = compute_quant_params(catalog.embeddings());
  std::vector<std::shared_ptr<const Engine>> out;
  for (const auto& p : parts) {
    PublishConfig c = shared;
    if (c.n_clusters > p.size()) c.n_clusters = p.size();
    out.push_back(std::make_shared<const Engine>(build_engine(p, c, version)));
  }
  return out;
}

bool BatchQueue::push(Pending p) {
  std::unique_lock lock(mu_);
  not_full_.wait(lock, [&] { return closed_ || items_.size() < policy_.queue_capacity; });
  if (closed_) return false;
  items_.push_back(std::move(p));
  not_empty_.notify_one();
  return true;
}

std::vector<BatchQueue::Pending> BatchQueue::pop_batch() {
  std::unique_lock lock(mu_);
  not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
  if (items_.empty()) return {};
  if (items_.size() < policy_.max_batch && !closed_) {
    const auto deadline = items_.front().arrived + policy_.timeout;
    not_empty_.wait_until(lock, deadline, [&] { return closed_ || items_.size() >= policy_.max_batch; });
  }
  const std::size_t n = std::min(items_.size(), policy_.max_batch);
  std::vector<Pending> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    batch.push_back(std::move(items_.front()));
    items_.pop_front();
  }
  not_full_.notify_all();
  if (!items_.empty()) not_empty_.notify_one();
  return batch;
}

void BatchQueue::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  not_empty_.notify_all();
  not_full_.notify_all();
}

Server::Server(std::shared_ptr<const Engine> engine, BatchPolicy policy, ServeDefaults defaults)
    : holder_(std::move(engine)), policy_(policy), defaults_(defaults), queue_(policy) {
  if (policy_.max_batch == 0) throw Error(ErrorCode::kInvalidConfig, "batch size must be at least 1");
  for (std::size_t i = 0; i < std::max<std::size_t>(1, policy_.workers); ++i) workers_.emplace_back([this] { worker_loop(); });
}

Server::~Server() {
  stop();
  queue_.close();
  for (auto& w : workers_) w.join();
}

void Server::worker_loop() {
  while (true) {
    auto batch = queue_.pop_batch();
    if (batch.empty()) return;
    // One engine reference per batch: every response in it reports the same
    // snapshot version.
    const auto engine = holder_.get();
    std::vector<json> requests;
    requests.reserve(batch.size());
    for (auto& p : batch) requests.push_back(std::move(p.request));
    auto responses = handle_batch(*engine, requests, defaults_);
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i].reply(std::move(responses[i]));
  }
}

void Server::submit(const std::string& line, std::function<void(std::string)> reply) {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::parse_error& e) {
    reply(error_response(json(), to_string(ErrorCode::kInvalidRequest), e.what()).dump());
    return;
  }
  if (request.is_object() && request.value("op", std::string()) == "reload") {
    try {
      auto engine = load_shared(request.at("snapshot").get<std::string>());
      const auto version = engine->snapshot_version;
      holder_.replace(std::move(engine));
      reply(json{{"ok", true}, {"snapshot_version", version}}.dump());
    } catch (const Error& e) {
      reply(error_response(request, to_string(e.code()), e.what()).dump());
    } catch (const json::exception& e) {
      reply(error_response(request, to_string(ErrorCode::kInvalidRequest), e.what()).dump());
    }
    return;
  }
  BatchQueue::Pending p{std::move(request), [reply = std::move(reply)](json r) { reply(r.dump()); }, Clock::now()};
  if (!queue_.push(std::move(p))) reply(error_response(json(), "Unavailable", "server is shutting down").dump());
}

void Server::serve_stream(std::istream& in, std::ostream& out) {
  std::mutex out_mu;
  std::mutex done_mu;
  std::condition_variable done_cv;
  std::size_t pending = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    {
      std::lock_guard lock(done_mu);
      ++pending;
    }
    submit(line, [&](std::string response) {
      {
        std::lock_guard lock(out_mu);
        out << response << '\n';
        out.flush();
      }
      std::lock_guard lock(done_mu);
      --pending;
      done_cv.notify_all();
    });
  }
  std::unique_lock lock(done_mu);
  done_cv.wait(lock, [&] { return pending == 0; });
}

namespace {

struct Connection {
  explicit Connection(int fd_) : fd(fd_) {}
  ~Connection() { ::close(fd); }
  void send_line(const std::string& s) {
    std::lock_guard lock(mu);
    std::string buf = s + "\n";
    std::size_t off = 0;
    while (off < buf.size()) {
      const auto n = ::send(fd, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
      if (n <= 0) return;
      off += static_cast<std::size_t>(n);
    }
  }
  int fd;
  std::mutex mu;
};

}  // namespace

std::uint16_t Server::listen(std::uint16_t port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::kIoError, std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 64) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::kIoError, "bind/listen on port " + std::to_string(port) + ": " + msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  acceptor_ = std::thread([this, fd = listen_fd_] { accept_loop(fd); });
  return ntohs(addr.sin_port);
}

void Server::accept_loop(int listen_fd) {
  while (!stopping_) {
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) return;
      continue;
    }
    std::lock_guard lock(conn_mu_);
    connections_.emplace_back([this, fd] { connection_loop(fd); });
  }
}

void Server::connection_loop(int fd) {
  auto conn = std::make_shared<Connection>(fd);
  std::string buffer;
  char chunk[4096];
  while (!stopping_) {
    const auto n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      submit(line, [conn](std::string response) { conn->send_line(response); });
    }
  }
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
  }
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> conns;
  {
    std::lock_guard lock(conn_mu_);
    conns.swap(connections_);
  }
  for (auto& c : conns) c.detach();
}

}  // namespace filtra
