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

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "filtra/error.hpp"
#include "filtra/rng.hpp"
#include "filtra/eval.hpp"
#include "filtra/serve.hpp"
#include "filtra/snapshot.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("filtra");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("FILTRA_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

json read_json_file(const std::string& path) {
  std::ifstream in;
  std::istream* src = &std::cin;
  if (path != "-") {
    in.open(path);
    if (!in) throw filtra::Error(filtra::ErrorCode::kIoError, "cannot open " + path);
    src = &in;
  }
  try {
    return json::parse(*src);
  } catch (const json::parse_error& e) {
    throw filtra::Error(filtra::ErrorCode::kParseError, path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw filtra::Error(filtra::ErrorCode::kWriteError, "cannot write " + path);
  out << text;
}

filtra::Catalog open_catalog(const std::string& path, const std::string& schema, bool normalize) {
  filtra::LoadOptions opts;
  opts.normalize = normalize;
  if (!schema.empty()) opts.schema_path = schema;
  return filtra::load_catalog(path, filtra::format_from_path(path), opts);
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoul(tok));
  return out;
}

// Catalog index for every slot of the engine's layout, or SIZE_MAX for padding.
std::vector<std::size_t> slot_to_catalog(const filtra::Engine& engine, const filtra::Catalog& catalog) {
  std::unordered_map<std::uint64_t, std::size_t> pos;
  for (std::size_t i = 0; i < catalog.size(); ++i) pos.emplace(catalog.items[i].item_id, i);
  std::vector<std::size_t> out(engine.ivf.n_slots(), SIZE_MAX);
  for (std::size_t s = 0; s < out.size(); ++s) {
    if (!engine.ivf.valid_mask.test(s)) continue;
    const auto it = pos.find(engine.ivf.item_ids[s]);
    if (it == pos.end()) {
      throw filtra::Error(filtra::ErrorCode::kMissingItem, "snapshot item not in catalog",
                          {static_cast<std::int64_t>(engine.ivf.item_ids[s])});
    }
    out[s] = it->second;
  }
  return out;
}

struct WorkloadOptions {
  std::size_t queries = 1000;
  std::size_t nprobe = 32;
  std::size_t k0 = 1000;
  std::size_t topk = 100;
  double filter_rate = 0.5;
  double noise = 0.2;
  std::uint64_t seed = 1;
};

filtra::eval::Workload make_workload(const filtra::Engine& engine, const filtra::Catalog& catalog,
                                     const WorkloadOptions& o) {
  filtra::eval::Workload w;
  const auto queries = filtra::eval::random_queries(catalog, o.queries, o.noise, o.seed);
  const auto slots = slot_to_catalog(engine, catalog);
  filtra::Rng rng(o.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    filtra::RetrievalRequest req;
    req.tasks.push_back({"*", queries[i]});
    req.nprobe = o.nprobe;
    req.k0 = o.k0;
    req.topk = o.topk;
    std::optional<filtra::Bitmask> exact;
    if (rng.uniform() < o.filter_rate) {
      req.filter = filtra::eval::random_filter(catalog, o.seed * 7919 + i, false, 2);
      exact = filtra::eval::naive_filter(catalog, *req.filter);
    }
    const auto truth = filtra::eval::brute_force_topk(catalog, queries[i], o.topk, exact ? &*exact : nullptr);
    filtra::eval::GroundTruth gt;
    for (const auto& h : truth.entries) gt.ids.push_back(h.item_id);
    w.truth.push_back(std::move(gt));
    filtra::Bitmask slot_mask(engine.ivf.n_slots());
    if (exact) {
      for (std::size_t s = 0; s < slots.size(); ++s) {
        if (slots[s] != SIZE_MAX && exact->test(slots[s])) slot_mask.set(s);
      }
    }
    w.exact_masks.push_back(std::move(slot_mask));
    w.requests.push_back(std::move(req));
  }
  return w;
}

filtra::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"filtra: filtered int8 IVF retrieval engine"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic clustered catalog");
  std::string synth_out, synth_schema;
  filtra::SynthSpec spec;
  spec.n_items = 10000;
  spec.dim = 32;
  spec.n_clusters = 100;
  synth->add_option("--out", synth_out, "Catalog path (.jsonl or .tsv)")->required();
  synth->add_option("--schema-out", synth_schema, "Also write the feature schema sidecar");
  synth->add_option("-n,--items", spec.n_items)->check(CLI::PositiveNumber);
  synth->add_option("--dim", spec.dim)->check(CLI::PositiveNumber);
  synth->add_option("--blobs", spec.n_clusters, "Number of generating clusters")->check(CLI::PositiveNumber);
  synth->add_option("--spread", spec.cluster_spread);
  synth->add_option("--seed", spec.seed);

  // build
  auto* build = app.add_subcommand("build", "Publish a catalog into a snapshot");
  std::string b_catalog, b_schema, b_out, b_overarch, b_value_model;
  filtra::PublishConfig pc;
  std::uint64_t b_version = 1;
  bool b_no_normalize = false;
  build->add_option("--catalog", b_catalog)->required()->check(CLI::ExistingFile);
  build->add_option("--schema", b_schema)->check(CLI::ExistingFile);
  build->add_option("--out", b_out)->required();
  build->add_option("--clusters", pc.n_clusters, "0 = ceil(sqrt(n))");
  build->add_option("--bloom-m", pc.bloom.m_bits);
  build->add_option("--bloom-k", pc.bloom.k_hashes);
  build->add_option("--seed", pc.seed);
  build->add_option("--kmeans-iters", pc.kmeans_iters);
  build->add_option("--kmeans-tol", pc.kmeans_tol);
  build->add_option("--version", b_version, "Snapshot version");
  build->add_option("--overarch", b_overarch, "OverArch weights JSON")->check(CLI::ExistingFile);
  build->add_option("--value-model", b_value_model, "Value model JSON")->check(CLI::ExistingFile);
  build->add_flag("--no-normalize", b_no_normalize, "Keep embeddings as given");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve NDJSON requests over TCP and/or stdin");
  std::string s_snapshot;
  int s_port = -1;
  bool s_stdin = false;
  filtra::BatchPolicy policy;
  std::size_t s_timeout_ms = 10;
  filtra::ServeDefaults defaults;
  serve->add_option("--snapshot", s_snapshot)->required()->check(CLI::ExistingFile);
  serve->add_option("--port", s_port, "TCP port (0 = any free port)")->check(CLI::Range(0, 65535));
  serve->add_flag("--stdin", s_stdin, "Read requests from stdin");
  serve->add_option("--batch", policy.max_batch)->check(CLI::PositiveNumber);
  serve->add_option("--batch-timeout-ms", s_timeout_ms);
  serve->add_option("--workers", policy.workers)->check(CLI::PositiveNumber);
  serve->add_option("--queue", policy.queue_capacity)->check(CLI::PositiveNumber);
  serve->add_option("--nprobe", defaults.nprobe);
  serve->add_option("--k0", defaults.k0);
  serve->add_option("--topk", defaults.topk);

  // query
  auto* query = app.add_subcommand("query", "Answer one request");
  std::string q_snapshot, q_req;
  query->add_option("--snapshot", q_snapshot)->required()->check(CLI::ExistingFile);
  query->add_option("--req", q_req, "Request JSON file, - for stdin")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "Benchmark a snapshot against a generated workload");
  std::string bn_snapshot, bn_catalog, bn_schema, bn_json, bn_csv;
  WorkloadOptions wo;
  filtra::eval::BenchConfig bc;
  bool bn_no_codesign = false;
  bench->add_option("--snapshot", bn_snapshot)->required()->check(CLI::ExistingFile);
  bench->add_option("--catalog", bn_catalog, "Catalog the snapshot was built from")->required()->check(CLI::ExistingFile);
  bench->add_option("--schema", bn_schema)->check(CLI::ExistingFile);
  bench->add_option("--queries", wo.queries)->check(CLI::PositiveNumber);
  bench->add_option("--nprobe", wo.nprobe)->check(CLI::PositiveNumber);
  bench->add_option("--k0", wo.k0)->check(CLI::PositiveNumber);
  bench->add_option("--topk", wo.topk)->check(CLI::PositiveNumber);
  bench->add_option("--filter-rate", wo.filter_rate)->check(CLI::Range(0.0, 1.0));
  bench->add_option("--noise", wo.noise);
  bench->add_option("--seed", wo.seed);
  bench->add_option("--batch", bc.batch_size)->check(CLI::PositiveNumber);
  bench->add_option("--clients", bc.clients)->check(CLI::PositiveNumber);
  bench->add_option("--warmup", bc.warmup_batches);
  bench->add_option("--timed", bc.timed_batches);
  bench->add_option("--workload-id", bc.workload_id);
  bench->add_flag("--no-codesign", bn_no_codesign, "Evaluate filters over every slot");
  bench->add_option("--json", bn_json, "Write the JSON report here");
  bench->add_option("--csv", bn_csv, "Append a CSV row here");

  // eval
  auto* ev = app.add_subcommand("eval", "Measure recall or false positive rates");
  ev->require_subcommand(1);
  auto* ev_recall = ev->add_subcommand("recall", "Recall@k against brute force over an nprobe sweep");
  std::string er_snapshot, er_catalog;
  std::string er_nprobe = "1,2,4,8,16,32,64";
  std::size_t er_k = 100;
  std::size_t er_queries = 200;
  std::uint64_t er_seed = 1;
  double er_noise = 0.2;
  ev_recall->add_option("--snapshot", er_snapshot)->required()->check(CLI::ExistingFile);
  ev_recall->add_option("--catalog", er_catalog)->required()->check(CLI::ExistingFile);
  ev_recall->add_option("--nprobe", er_nprobe, "Comma separated list");
  ev_recall->add_option("--k", er_k)->check(CLI::PositiveNumber);
  ev_recall->add_option("--queries", er_queries)->check(CLI::PositiveNumber);
  ev_recall->add_option("--noise", er_noise);
  ev_recall->add_option("--seed", er_seed);
  auto* ev_fpr = ev->add_subcommand("fpr", "Per-leaf bloom false positive rate over an M sweep");
  std::string ef_catalog;
  std::string ef_m = "512,1024,2048";
  std::uint32_t ef_k = 5;
  std::size_t ef_leaves = 2000;
  std::uint64_t ef_seed = 1;
  ev_fpr->add_option("--catalog", ef_catalog)->required()->check(CLI::ExistingFile);
  ev_fpr->add_option("--m", ef_m, "Comma separated list of plane counts");
  ev_fpr->add_option("--k", ef_k)->check(CLI::PositiveNumber);
  ev_fpr->add_option("--leaves", ef_leaves)->check(CLI::PositiveNumber);
  ev_fpr->add_option("--seed", ef_seed);

  // describe
  auto* describe = app.add_subcommand("describe", "Print a snapshot header");
  std::string d_snapshot;
  describe->add_option("--snapshot", d_snapshot)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) {
      spec.features = filtra::default_feature_specs();
      const auto cat = filtra::synth_catalog(spec);
      filtra::save_catalog(cat, synth_out, filtra::format_from_path(synth_out));
      if (!synth_schema.empty()) filtra::save_schema(cat.schema, synth_schema);
      spdlog::info("wrote {} items to {}", cat.size(), synth_out);
    } else if (*build) {
      const auto cat = open_catalog(b_catalog, b_schema, !b_no_normalize);
      if (!b_overarch.empty()) pc.overarch = filtra::overarch_from_json(read_json_file(b_overarch));
      if (!b_value_model.empty()) pc.value_model = filtra::value_model_from_json(read_json_file(b_value_model));
      filtra::publish(cat, pc, b_version, b_out);
      spdlog::info("published version {} ({} items) to {}", b_version, cat.size(), b_out);
    } else if (*serve) {
      if (s_port < 0 && !s_stdin) s_stdin = true;
      policy.timeout = std::chrono::milliseconds(s_timeout_ms);
      filtra::Server server(filtra::load_shared(s_snapshot), policy, defaults);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      if (s_port >= 0) {
        const auto port = server.listen(static_cast<std::uint16_t>(s_port));
        std::cerr << json{{"listening", port}}.dump() << std::endl;
      }
      if (s_stdin) {
        server.serve_stream(std::cin, std::cout);
      } else {
        sigset_t set;
        sigemptyset(&set);
        sigaddset(&set, SIGINT);
        sigaddset(&set, SIGTERM);
        int sig = 0;
        pthread_sigmask(SIG_BLOCK, &set, nullptr);
        sigwait(&set, &sig);
      }
      server.stop();
      g_server = nullptr;
    } else if (*query) {
      const auto engine = filtra::load_snapshot(q_snapshot);
      const auto resp = filtra::handle_request(engine, read_json_file(q_req));
      if (resp.contains("error")) {
        std::cerr << resp.dump() << std::endl;
        return 1;
      }
      std::cout << resp.dump() << std::endl;
    } else if (*bench) {
      const auto engine = filtra::load_snapshot(bn_snapshot);
      const auto cat = open_catalog(bn_catalog, bn_schema, true);
      const auto workload = make_workload(engine, cat, wo);
      bc.codesign = !bn_no_codesign;
      const auto report = filtra::eval::bench(engine, workload, bc);
      const auto j = filtra::eval::to_json(report);
      std::cout << j.dump(2) << std::endl;
      if (!bn_json.empty()) write_text(bn_json, j.dump(2) + "\n");
      if (!bn_csv.empty()) {
        const bool fresh = !fs::exists(bn_csv) || fs::file_size(bn_csv) == 0;
        std::ofstream out(bn_csv, std::ios::app);
        if (!out) throw filtra::Error(filtra::ErrorCode::kWriteError, "cannot write " + bn_csv);
        if (fresh) out << filtra::eval::csv_header() << '\n';
        out << filtra::eval::to_csv_row(report) << '\n';
      }
    } else if (*ev_recall) {
      const auto engine = filtra::load_snapshot(er_snapshot);
      const auto cat = open_catalog(er_catalog, "", true);
      const auto queries = filtra::eval::random_queries(cat, er_queries, er_noise, er_seed);
      std::vector<filtra::eval::GroundTruth> truth;
      for (const auto& q : queries) {
        filtra::eval::GroundTruth gt;
        for (const auto& h : filtra::eval::brute_force_topk(cat, q, er_k).entries) gt.ids.push_back(h.item_id);
        truth.push_back(std::move(gt));
      }
      json rows = json::array();
      for (auto np : parse_list(er_nprobe)) {
        double sum = 0;
        for (std::size_t i = 0; i < queries.size(); ++i) {
          const auto r = filtra::search(engine.ivf, queries[i], np, er_k);
          sum += filtra::eval::recall_at_k(r, truth[i], std::min(er_k, truth[i].ids.size()));
        }
        rows.push_back({{"nprobe", np}, {"k", er_k}, {"recall", sum / static_cast<double>(queries.size())}});
      }
      std::cout << rows.dump(2) << std::endl;
    } else if (*ev_fpr) {
      const auto cat = open_catalog(ef_catalog, "", true);
      const auto slots = filtra::identity_slots(cat);
      const auto exact = filtra::build_inverted_index(slots);
      filtra::Bitmask valid(cat.size(), true);
      std::size_t mean_values = 0;
      for (const auto& it : cat.items) mean_values += it.features.size();
      filtra::Rng rng(ef_seed);
      std::vector<filtra::FeatureValue> leaves;
      for (std::size_t i = 0; i < ef_leaves; ++i) leaves.push_back({rng.next_u64() >> 1, rng.next_u64() >> 1});
      json rows = json::array();
      for (auto m : parse_list(ef_m)) {
        filtra::BloomParams bp;
        bp.m_bits = static_cast<std::uint32_t>(m);
        bp.k_hashes = ef_k;
        const auto bloom = filtra::build_bloom(slots, bp);
        const auto r = filtra::eval::fpr_measure(bloom, valid, exact, leaves);
        const auto n = cat.size() ? mean_values / cat.size() : 0;
        rows.push_back({{"M", m}, {"K", ef_k}, {"trials", r.negatives}, {"false_positives", r.false_positives},
                        {"fpr", r.leaf_fpr}, {"theoretical", filtra::bloom_fpr_theoretical(bp, n)}});
      }
      std::cout << rows.dump(2) << std::endl;
    } else if (*describe) {
      const auto h = filtra::read_header(fs::path(d_snapshot));
      json sections = json::array();
      for (const auto& s : h.sections) {
        sections.push_back({{"id", s.section_id}, {"name", filtra::section_name(s.section_id)}, {"offset", s.offset},
                            {"length", s.length}, {"checksum", s.checksum}});
      }
      std::cout << json{{"format_version", h.format_version}, {"snapshot_version", h.snapshot_version},
                        {"dim", h.dim}, {"n_items", h.n_items}, {"n_slots", h.n_slots},
                        {"n_clusters", h.n_clusters}, {"bloom_m", h.bloom_m}, {"bloom_k", h.bloom_k},
                        {"hash_scheme_id", h.hash_scheme_id}, {"sections", sections}}
                       .dump(2)
                << std::endl;
    }
  } catch (const filtra::Error& e) {
    std::cerr << json{{"error", {{"code", filtra::to_string(e.code())}, {"message", e.what()}, {"args", e.args()}}}}.dump()
              << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump() << std::endl;
    return 1;
  }
  return 0;
}
