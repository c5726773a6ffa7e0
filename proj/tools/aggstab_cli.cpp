// Copyright 2026 The aggstab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// aggstab command-line front end. Links only the C API.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aggstab/aggstab.h"
#include "json.hpp"

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitData = 3;

class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

[[noreturn]] void InputError(const std::string& what) { throw CliError(kExitInput, what); }

void Check(aggstab_status status) {
  if (status != AGGSTAB_OK) throw CliError(static_cast<int>(status), aggstab_last_error());
}

std::string TakeString(char* s) {
  std::string out = s ? s : "";
  aggstab_string_free(s);
  return out;
}

struct GraphDeleter {
  void operator()(aggstab_graph* p) const { aggstab_graph_free(p); }
};
struct RatingsDeleter {
  void operator()(aggstab_ratings* p) const { aggstab_ratings_free(p); }
};
struct TaskDeleter {
  void operator()(aggstab_task* p) const { aggstab_task_free(p); }
};
struct ModelDeleter {
  void operator()(aggstab_model* p) const { aggstab_model_free(p); }
};
using GraphPtr = std::unique_ptr<aggstab_graph, GraphDeleter>;
using RatingsPtr = std::unique_ptr<aggstab_ratings, RatingsDeleter>;
using TaskPtr = std::unique_ptr<aggstab_task, TaskDeleter>;
using ModelPtr = std::unique_ptr<aggstab_model, ModelDeleter>;

void WriteFile(const fs::path& path, const std::string& body) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) InputError("cannot write '" + path.string() + "'");
  out << body;
  if (!out) InputError("write failed for '" + path.string() + "'");
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) InputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int NormalizationCode(const std::string& name) {
  if (name == "none") return 0;
  if (name == "symmetric_degree" || name == "degree") return 1;
  InputError("unknown normalization '" + name + "' (none, symmetric_degree)");
}

// ---- seeds -------------------------------------------------------------------

std::optional<std::uint64_t> EnvSeed() {
  const char* env = std::getenv("AGGSTAB_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0') InputError("AGGSTAB_SEED must be a nonnegative integer");
  return v;
}

std::uint64_t ResolveSeed(const std::optional<std::uint64_t>& flag, const std::optional<std::uint64_t>& config) {
  if (flag) return *flag;
  if (auto env = EnvSeed()) return *env;
  if (config) return *config;
  InputError("no seed given (use --seed, AGGSTAB_SEED or the config 'seed')");
}

enum SeedStream : std::uint64_t { kGraphSeed = 0, kDatasetSeed = 1, kModelSeed = 2, kTrainSeed = 3, kSweepSeed = 4 };

// ---- run config ----------------------------------------------------------------

void RejectUnknown(const Json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) InputError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) InputError("unknown key '" + it.key() + "' in " + where);
  }
}

void RequireFile(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) InputError(what + " '" + path.string() + "' does not exist");
}

struct RunConfig {
  fs::path base_dir;
  Json graph = Json::object();
  Json dataset = Json::object();
  Json model = Json::object();
  Json loss = Json::object();
  Json optimizer = Json::object();
  Json sweep = Json::object();
  std::string output_dir = "out";
  std::optional<std::uint64_t> seed;

  fs::path Resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

RunConfig LoadRunConfig(const std::string& path) {
  RequireFile(path, "config");
  Json j;
  try {
    j = Json::parse(ReadFile(path));
  } catch (const nlohmann::json::exception& e) {
    InputError("config '" + path + "' is not valid JSON: " + e.what());
  }
  RejectUnknown(j, {"graph", "dataset", "model", "loss", "optimizer", "sweep", "output_dir", "seed"}, "config");
  RunConfig cfg;
  cfg.base_dir = fs::path(path).parent_path();
  try {
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    InputError(std::string("config: ") + e.what());
  }
  for (auto [key, slot] : {std::pair{"graph", &cfg.graph}, {"dataset", &cfg.dataset}, {"model", &cfg.model},
                           {"loss", &cfg.loss}, {"optimizer", &cfg.optimizer}, {"sweep", &cfg.sweep}}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_object()) InputError(std::string("config section '") + key + "' must be an object");
    *slot = j[key];
  }
  RejectUnknown(cfg.graph, {"file", "model", "n", "p", "blocks", "p_in", "p_out", "normalization"}, "graph");
  RejectUnknown(cfg.dataset,
                {"kind", "file", "ratings", "movies", "top", "target", "min_common", "top_k",
                 "negative_policy", "normalization", "min_ratings", "diffusion_steps", "samples"},
                "dataset");
  RejectUnknown(cfg.model,
                {"file", "a", "nodes", "first_layer_mode", "layers", "readout", "readout_weights"}, "model");
  RejectUnknown(cfg.optimizer, {"lr", "beta1", "beta2", "eps", "epochs", "batch_size"}, "optimizer");
  for (const auto* section : {&cfg.graph, &cfg.dataset, &cfg.model}) {
    for (const char* key : {"file", "ratings"}) {
      if (section->contains(key)) {
        if (!(*section)[key].is_string()) InputError(std::string("'") + key + "' must be a path string");
        RequireFile(cfg.Resolve((*section)[key].get<std::string>()), key);
      }
    }
  }
  return cfg;
}

template <typename T>
T Get(const Json& j, const char* key, T fallback, const std::string& where) {
  try {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
  } catch (const nlohmann::json::exception& e) {
    InputError(where + "." + key + ": " + e.what());
  }
}

// ---- graph construction ---------------------------------------------------------

struct GraphFlags {
  std::string model = "er";
  int n = 16;
  double p = 0.3;
  int blocks = 2;
  double p_in = 0.5;
  double p_out = 0.05;
  std::string normalization = "none";
};

GraphPtr MakeRandomGraph(const GraphFlags& f, std::uint64_t seed) {
  if (f.n < 1) InputError("--n must be >= 1");
  auto check_p = [](double p, const char* flag) {
    if (!(p >= 0.0 && p <= 1.0)) InputError(std::string(flag) + " must lie in [0, 1], got " + std::to_string(p));
  };
  aggstab_graph* g = nullptr;
  const int norm = NormalizationCode(f.normalization);
  if (f.model == "er") {
    check_p(f.p, "--p");
    Check(aggstab_graph_random_er(f.n, f.p, seed, norm, &g));
  } else if (f.model == "sbm") {
    check_p(f.p_in, "--p-in");
    check_p(f.p_out, "--p-out");
    if (f.blocks < 1) InputError("--blocks must be >= 1");
    Check(aggstab_graph_random_sbm(f.n, f.blocks, f.p_in, f.p_out, seed, norm, &g));
  } else {
    InputError("--model must be 'er' or 'sbm', got '" + f.model + "'");
  }
  return GraphPtr(g);
}

GraphFlags GraphFlagsFromJson(const Json& j) {
  GraphFlags f;
  f.model = Get<std::string>(j, "model", f.model, "graph");
  f.n = Get<int>(j, "n", f.n, "graph");
  f.p = Get<double>(j, "p", f.p, "graph");
  f.blocks = Get<int>(j, "blocks", f.blocks, "graph");
  f.p_in = Get<double>(j, "p_in", f.p_in, "graph");
  f.p_out = Get<double>(j, "p_out", f.p_out, "graph");
  f.normalization = Get<std::string>(j, "normalization", f.normalization, "graph");
  return f;
}

// ---- MovieLens ingestion ---------------------------------------------------------

struct IngestFlags {
  std::string ratings;
  std::vector<std::int64_t> movies;
  int top = 0;
  std::optional<std::int64_t> target;
  int min_common = 2;
  int top_k = 40;
  std::string negative_policy = "zero";
  std::string normalization = "none";
  int min_ratings = 0;
};

struct Ingested {
  GraphPtr graph;
  TaskPtr task;
};

Ingested Ingest(const IngestFlags& f, std::uint64_t seed) {
  aggstab_ratings* raw = nullptr;
  Check(aggstab_ratings_load(f.ratings.c_str(), &raw));
  RatingsPtr ratings(raw);
  std::vector<std::int64_t> movies = f.movies;
  if (movies.empty()) {
    const int top = f.top > 0 ? f.top : 20;
    movies.resize(top);
    int written = 0;
    Check(aggstab_ratings_most_rated(ratings.get(), top, movies.data(), &written));
    movies.resize(written);
  }
  if (movies.empty()) throw CliError(kExitData, "ratings file has no items");
  if (f.negative_policy != "zero" && f.negative_policy != "absolute") {
    InputError("negative policy must be 'zero' or 'absolute'");
  }
  aggstab_graph* g = nullptr;
  Check(aggstab_similarity_graph(ratings.get(), movies.data(), static_cast<int>(movies.size()), f.min_common,
                                 f.top_k, f.negative_policy == "absolute", NormalizationCode(f.normalization), &g));
  Ingested out{GraphPtr(g), nullptr};
  aggstab_task* t = nullptr;
  Check(aggstab_task_rating(ratings.get(), g, f.target.value_or(movies.front()), f.min_ratings, seed, &t));
  out.task.reset(t);
  return out;
}

IngestFlags IngestFlagsFromJson(const Json& j, const RunConfig& cfg) {
  IngestFlags f;
  f.ratings = cfg.Resolve(Get<std::string>(j, "ratings", "", "dataset")).string();
  f.movies = Get<std::vector<std::int64_t>>(j, "movies", {}, "dataset");
  f.top = Get<int>(j, "top", 0, "dataset");
  if (j.contains("target")) f.target = Get<std::int64_t>(j, "target", 0, "dataset");
  f.min_common = Get<int>(j, "min_common", f.min_common, "dataset");
  f.top_k = Get<int>(j, "top_k", f.top_k, "dataset");
  f.negative_policy = Get<std::string>(j, "negative_policy", f.negative_policy, "dataset");
  f.normalization = Get<std::string>(j, "normalization", f.normalization, "dataset");
  f.min_ratings = Get<int>(j, "min_ratings", f.min_ratings, "dataset");
  return f;
}

// ---- pipeline pieces shared by train and sweep -----------------------------------

struct Pipeline {
  GraphPtr graph;
  TaskPtr task;
};

Pipeline BuildPipeline(const RunConfig& cfg, std::uint64_t seed, bool need_task) {
  Pipeline p;
  const std::string kind = Get<std::string>(cfg.dataset, "kind", cfg.dataset.empty() ? "" : "source_localization",
                                            "dataset");
  if (kind == "movielens") {
    if (!cfg.dataset.contains("ratings")) InputError("dataset.ratings is required for kind 'movielens'");
    Ingested in = Ingest(IngestFlagsFromJson(cfg.dataset, cfg), seed + kDatasetSeed);
    p.graph = std::move(in.graph);
    p.task = std::move(in.task);
    return p;
  }
  if (kind == "task_file" || (kind.empty() && cfg.dataset.contains("file")) ||
      (kind == "source_localization" && cfg.dataset.contains("file"))) {
    aggstab_task* t = nullptr;
    Check(aggstab_task_load(cfg.Resolve(cfg.dataset["file"].get<std::string>()).string().c_str(), &t));
    p.task.reset(t);
  }
  if (cfg.graph.contains("file")) {
    aggstab_graph* g = nullptr;
    Check(aggstab_graph_load(cfg.Resolve(cfg.graph["file"].get<std::string>()).string().c_str(), &g));
    p.graph.reset(g);
  } else if (p.task) {
    aggstab_graph* g = nullptr;
    Check(aggstab_task_graph(p.task.get(), &g));
    p.graph.reset(g);
  } else {
    p.graph = MakeRandomGraph(GraphFlagsFromJson(cfg.graph), seed + kGraphSeed);
  }
  if (!p.task && need_task) {
    if (!kind.empty() && kind != "source_localization") InputError("unknown dataset kind '" + kind + "'");
    aggstab_task* t = nullptr;
    Check(aggstab_task_source_localization(p.graph.get(), Get<int>(cfg.dataset, "diffusion_steps", 3, "dataset"),
                                           Get<int>(cfg.dataset, "samples", 200, "dataset"), seed + kDatasetSeed,
                                           &t));
    p.task.reset(t);
  }
  return p;
}

ModelPtr BuildModel(const RunConfig& cfg, const aggstab_graph* graph, std::uint64_t seed) {
  aggstab_model* m = nullptr;
  if (cfg.model.contains("file")) {
    Check(aggstab_model_load(cfg.Resolve(cfg.model["file"].get<std::string>()).string().c_str(), &m));
    return ModelPtr(m);
  }
  if (cfg.model.empty()) InputError("config needs a 'model' section");
  Json arch = cfg.model;
  if (!arch.contains("nodes")) arch["nodes"] = aggstab_graph_node_count(graph);
  Check(aggstab_model_init(arch.dump().c_str(), seed + kModelSeed, &m));
  return ModelPtr(m);
}

// ---- subcommands -----------------------------------------------------------------

int CmdGenGraph(const GraphFlags& flags, std::optional<std::uint64_t> seed_flag, const std::string& out) {
  GraphPtr g = MakeRandomGraph(flags, ResolveSeed(seed_flag, 0));
  char* text = nullptr;
  Check(aggstab_graph_to_json(g.get(), &text));
  const std::string body = TakeString(text);
  if (out.empty() || out == "-") {
    std::cout << body;
  } else {
    WriteFile(out, body);
  }
  return 0;
}

int CmdIngest(const IngestFlags& flags, std::optional<std::uint64_t> seed_flag, const std::string& graph_out,
              const std::string& task_out) {
  if (flags.ratings.empty()) InputError("--ratings is required");
  Ingested in = Ingest(flags, ResolveSeed(seed_flag, 0));
  char* text = nullptr;
  Check(aggstab_graph_to_json(in.graph.get(), &text));
  WriteFile(graph_out, TakeString(text));
  Check(aggstab_task_save(in.task.get(), task_out.c_str()));
  std::cout << "graph: " << aggstab_graph_node_count(in.graph.get()) << " nodes -> " << graph_out << "\n"
            << "task: " << aggstab_task_sample_count(in.task.get()) << " samples ("
            << aggstab_task_train_count(in.task.get()) << " train) -> " << task_out << "\n";
  return 0;
}

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::optional<int> epochs;
  std::optional<int> threads;
};

int CmdTrain(const RunFlags& flags) {
  const RunConfig cfg = LoadRunConfig(flags.config);
  const std::uint64_t seed = ResolveSeed(flags.seed, cfg.seed);
  const fs::path out_dir = flags.output_dir.empty() ? cfg.Resolve(cfg.output_dir) : fs::path(flags.output_dir);
  Pipeline p = BuildPipeline(cfg, seed, true);
  ModelPtr model = BuildModel(cfg, p.graph.get(), seed);
  Json opt = cfg.optimizer;
  const int epochs = flags.epochs.value_or(Get<int>(opt, "epochs", 50, "optimizer"));
  const int batch = Get<int>(opt, "batch_size", 10, "optimizer");
  if (epochs < 0) InputError("epochs must be >= 0");
  if (batch < 1) InputError("batch_size must be >= 1");
  opt.erase("epochs");
  opt.erase("batch_size");
  char* history = nullptr;
  Check(aggstab_train(model.get(), p.task.get(), cfg.loss.dump().c_str(), opt.dump().c_str(), epochs, batch,
                      seed + kTrainSeed, &history));
  const std::string csv = TakeString(history);
  char* model_json = nullptr;
  Check(aggstab_model_to_json(model.get(), &model_json));
  WriteFile(out_dir / "model.json", TakeString(model_json));
  WriteFile(out_dir / "history.csv", csv);
  std::cout << "model -> " << (out_dir / "model.json").string() << "\n"
            << "history -> " << (out_dir / "history.csv").string() << "\n";
  return 0;
}

int CmdSweep(const RunFlags& flags) {
  const RunConfig cfg = LoadRunConfig(flags.config);
  const std::uint64_t seed = ResolveSeed(flags.seed, cfg.seed);
  const fs::path out_dir = flags.output_dir.empty() ? cfg.Resolve(cfg.output_dir) : fs::path(flags.output_dir);
  Pipeline p = BuildPipeline(cfg, seed, false);
  ModelPtr model = BuildModel(cfg, p.graph.get(), seed);
  Json sweep = cfg.sweep;
  if (!sweep.contains("seed")) sweep["seed"] = seed + kSweepSeed;
  if (flags.threads) sweep["threads"] = *flags.threads;
  char *records = nullptr, *summary = nullptr, *dat = nullptr;
  Check(aggstab_sweep(model.get(), p.graph.get(), sweep.dump().c_str(), &records, &summary, &dat));
  const std::string csv = TakeString(records);
  const std::string summary_text = TakeString(summary);
  WriteFile(out_dir / "sweep.csv", csv);
  WriteFile(out_dir / "sweep.summary.json", summary_text);
  WriteFile(out_dir / "sweep.dat", TakeString(dat));
  char *s2 = nullptr, *d2 = nullptr, *svg = nullptr;
  Check(aggstab_report(csv.c_str(), Get<double>(cfg.sweep, "slack", 1.1, "sweep"), &s2, &d2, &svg));
  TakeString(s2);
  TakeString(d2);
  WriteFile(out_dir / "sweep.svg", TakeString(svg));
  const Json s = Json::parse(summary_text);
  std::cout << "records: " << s["count"] << ", violations: " << s.value("violations", 0) << " -> "
            << (out_dir / "sweep.csv").string() << "\n";
  return 0;
}

struct CertifyFlags {
  std::string model;
  std::string graph;
  std::optional<double> lo, hi;
  int grid = 2048;
  double l0_max = 1.0;
  double l1_max = 1.0;
  int nodes = 0;
};

int CmdCertify(const CertifyFlags& f) {
  aggstab_model* raw = nullptr;
  Check(aggstab_model_load(f.model.c_str(), &raw));
  ModelPtr model(raw);
  double lo = -1.0, hi = 1.0;
  int nodes = f.nodes;
  if (!f.graph.empty()) {
    aggstab_graph* g = nullptr;
    Check(aggstab_graph_load(f.graph.c_str(), &g));
    GraphPtr graph(g);
    double norm = 0.0;
    Check(aggstab_graph_spectral_norm(g, &norm));
    if (norm > 0.0) hi = 1.05 * norm, lo = -hi;
    if (nodes <= 0) nodes = aggstab_graph_node_count(g);
  }
  if (f.lo) lo = *f.lo;
  if (f.hi) hi = *f.hi;
  char* json = nullptr;
  Check(aggstab_certify(model.get(), lo, hi, f.grid, f.l0_max, f.l1_max, nodes, &json));
  std::cout << TakeString(json);
  return 0;
}

int CmdReport(const std::string& records, double slack, const std::string& prefix) {
  const std::string csv = ReadFile(records);
  char *summary = nullptr, *dat = nullptr, *svg = nullptr;
  Check(aggstab_report(csv.c_str(), slack, &summary, &dat, &svg));
  const std::string base = prefix.empty() ? fs::path(records).replace_extension().string() : prefix;
  const std::string summary_text = TakeString(summary);
  WriteFile(base + ".summary.json", summary_text);
  WriteFile(base + ".dat", TakeString(dat));
  WriteFile(base + ".svg", TakeString(svg));
  std::cout << summary_text;
  return 0;
}

std::vector<std::int64_t> ParseIdList(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      InputError("--movies: '" + item + "' is not an integer id");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aggregation GNN stability toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(aggstab_version()));

  GraphFlags gflags;
  std::optional<std::uint64_t> gseed;
  std::string gout;
  auto* gen = app.add_subcommand("gen-graph", "Generate a random graph and write its JSON");
  gen->add_option("--model", gflags.model, "er or sbm")->capture_default_str();
  gen->add_option("--n", gflags.n, "Node count")->capture_default_str();
  gen->add_option("--p", gflags.p, "Edge probability (er)")->capture_default_str();
  gen->add_option("--blocks", gflags.blocks, "Block count (sbm)")->capture_default_str();
  gen->add_option("--p-in", gflags.p_in, "Within-block probability (sbm)")->capture_default_str();
  gen->add_option("--p-out", gflags.p_out, "Across-block probability (sbm)")->capture_default_str();
  gen->add_option("--normalization", gflags.normalization, "none or symmetric_degree")->capture_default_str();
  gen->add_option("--seed", gseed, "RNG seed (else AGGSTAB_SEED, else 0)");
  gen->add_option("--out", gout, "Output path (default stdout)");

  IngestFlags iflags;
  std::string movies, graph_out = "graph.json", task_out = "task.json";
  std::optional<std::uint64_t> iseed;
  auto* ingest = app.add_subcommand("ingest", "Build a similarity graph and rating task from MovieLens data");
  ingest->add_option("--ratings", iflags.ratings, "u.data file")->required();
  ingest->add_option("--movies", movies, "Comma-separated item ids (default: most rated)");
  ingest->add_option("--top", iflags.top, "Number of most rated items when --movies is absent");
  ingest->add_option("--target", iflags.target, "Target item (default: first movie)");
  ingest->add_option("--min-common", iflags.min_common, "Minimum co-raters")->capture_default_str();
  ingest->add_option("--top-k", iflags.top_k, "Edges kept per node (0 keeps all)")->capture_default_str();
  ingest->add_option("--negatives", iflags.negative_policy, "zero or absolute")->capture_default_str();
  ingest->add_option("--normalization", iflags.normalization, "none or symmetric_degree")->capture_default_str();
  ingest->add_option("--min-ratings", iflags.min_ratings, "Minimum ratings per user")->capture_default_str();
  ingest->add_option("--seed", iseed, "Split seed");
  ingest->add_option("--graph-out", graph_out, "Graph JSON path")->capture_default_str();
  ingest->add_option("--task-out", task_out, "Task JSON path")->capture_default_str();

  RunFlags tflags;
  auto* train = app.add_subcommand("train", "Train a model from a run config");
  train->add_option("--config", tflags.config, "Run config JSON")->required();
  train->add_option("--seed", tflags.seed, "Overrides AGGSTAB_SEED and the config seed");
  train->add_option("--output-dir", tflags.output_dir, "Overrides output_dir");
  train->add_option("--epochs", tflags.epochs, "Overrides optimizer.epochs");

  CertifyFlags cflags;
  auto* certify = app.add_subcommand("certify", "Estimate first-layer Lipschitz constants");
  certify->add_option("--model", cflags.model, "Model checkpoint")->required();
  certify->add_option("--graph", cflags.graph, "Graph JSON (sets a covering omega and N)");
  certify->add_option("--omega-lo", cflags.lo, "Lower end of omega");
  certify->add_option("--omega-hi", cflags.hi, "Upper end of omega");
  certify->add_option("--grid", cflags.grid, "Grid cells over omega")->capture_default_str();
  certify->add_option("--l0-max", cflags.l0_max, "Lipschitz target")->capture_default_str();
  certify->add_option("--l1-max", cflags.l1_max, "Integral Lipschitz target")->capture_default_str();
  certify->add_option("--nodes", cflags.nodes, "Node count for C0 and C1");

  RunFlags sflags;
  auto* sweep = app.add_subcommand("sweep", "Run a perturbation sweep from a run config");
  sweep->add_option("--config", sflags.config, "Run config JSON")->required();
  sweep->add_option("--seed", sflags.seed, "Overrides AGGSTAB_SEED and the config seed");
  sweep->add_option("--output-dir", sflags.output_dir, "Overrides output_dir");
  sweep->add_option("--threads", sflags.threads, "Worker threads for trials");

  std::string records, prefix;
  double slack = 1.1;
  auto* report = app.add_subcommand("report", "Summarize a records CSV");
  report->add_option("--records", records, "Records CSV")->required();
  report->add_option("--slack", slack, "Bound slack")->capture_default_str();
  report->add_option("--out-prefix", prefix, "Output prefix (default: CSV path without extension)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*gen) return CmdGenGraph(gflags, gseed, gout);
    if (*ingest) {
      if (!movies.empty()) iflags.movies = ParseIdList(movies);
      return CmdIngest(iflags, iseed, graph_out, task_out);
    }
    if (*train) return CmdTrain(tflags);
    if (*certify) return CmdCertify(cflags);
    if (*sweep) {
      if (sflags.threads && *sflags.threads < 1) InputError("--threads must be >= 1");
      return CmdSweep(sflags);
    }
    if (*report) return CmdReport(records, slack, prefix);
  } catch (const CliError& e) {
    std::cerr << "aggstab: " << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "aggstab: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInput;
}
