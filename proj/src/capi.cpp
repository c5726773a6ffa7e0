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

#include "aggstab/aggstab.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "aggstab/agg_gnn.hpp"
#include "aggstab/datasets.hpp"
#include "aggstab/error.hpp"
#include "aggstab/filters.hpp"
#include "aggstab/graph.hpp"
#include "aggstab/serialize.hpp"
#include "aggstab/stability.hpp"
#include "aggstab/training.hpp"

struct aggstab_graph {
  aggstab::Graph graph;
};
struct aggstab_ratings {
  aggstab::RatingsTable table;
};
struct aggstab_task {
  aggstab::RegressionTask task;
};
struct aggstab_model {
  aggstab::AggGnnModel model;
};

namespace {

using aggstab::Json;

thread_local std::string g_last_error;

template <typename F>
aggstab_status Call(F&& body) {
  try {
    body();
    g_last_error.clear();
    return AGGSTAB_OK;
  } catch (const aggstab::Error& e) {
    g_last_error = e.what();
    return static_cast<aggstab_status>(static_cast<int>(e.kind()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return AGGSTAB_ERR_INTERNAL;
}

void RequireHandle(const void* p, const char* what) {
  if (p == nullptr) aggstab::Fail(std::string("null ") + what);
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void SetString(char** out, const std::string& s) {
  if (out != nullptr) *out = CopyString(s);
}

Json ParseJsonArg(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return Json::object();
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    aggstab::Fail(std::string(what) + " is not valid JSON: " + e.what());
  }
}

aggstab::Normalization ToNormalization(int code) {
  if (code == 0) return aggstab::Normalization::kNone;
  if (code == 1) return aggstab::Normalization::kSymmetricDegree;
  aggstab::Fail("unknown normalization code " + std::to_string(code));
}

aggstab::Omega OmegaFromJson(const Json& j, aggstab::Omega fallback) {
  aggstab::Omega omega = fallback;
  omega.lo = j.value("lo", omega.lo);
  omega.hi = j.value("hi", omega.hi);
  omega.grid_points = j.value("grid_points", omega.grid_points);
  omega.Validate();
  return omega;
}

void RejectUnknown(const Json& j, std::initializer_list<const char*> keys, const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) aggstab::Fail(std::string("unknown key '") + it.key() + "' in " + what);
  }
}

}  // namespace

extern "C" {

const char* aggstab_version(void) { return "1.0.0"; }

const char* aggstab_last_error(void) { return g_last_error.c_str(); }

void aggstab_string_free(char* s) { std::free(s); }

// ---- graphs ----------------------------------------------------------------

aggstab_status aggstab_graph_random_er(int n, double p, uint64_t seed, int normalization,
                                       aggstab_graph** out) {
  return Call([&] {
    RequireHandle(out, "output pointer");
    auto g = aggstab::RandomGraph(aggstab::ErdosRenyi{p}, n, seed);
    g = aggstab::BuildShiftFromAdjacency(g.shift(), ToNormalization(normalization));
    *out = new aggstab_graph{std::move(g)};
  });
}

aggstab_status aggstab_graph_random_sbm(int n, int blocks, double p_in, double p_out, uint64_t seed,
                                        int normalization, aggstab_graph** out) {
  return Call([&] {
    RequireHandle(out, "output pointer");
    auto g = aggstab::RandomGraph(aggstab::StochasticBlock{blocks, p_in, p_out}, n, seed);
    g = aggstab::BuildShiftFromAdjacency(g.shift(), ToNormalization(normalization));
    *out = new aggstab_graph{std::move(g)};
  });
}

aggstab_status aggstab_graph_from_adjacency(const double* adjacency, int n, int normalization,
                                            aggstab_graph** out) {
  return Call([&] {
    RequireHandle(out, "output pointer");
    RequireHandle(adjacency, "adjacency");
    if (n < 1) aggstab::Fail("node count must be positive");
    aggstab::Matrix w(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) w(i, k) = adjacency[static_cast<std::size_t>(i) * n + k];
    *out = new aggstab_graph{aggstab::BuildShiftFromAdjacency(w, ToNormalization(normalization))};
  });
}

aggstab_status aggstab_graph_from_json(const char* json, aggstab_graph** out) {
  return Call([&] {
    RequireHandle(out, "output pointer");
    RequireHandle(json, "json");
    *out = new aggstab_graph{aggstab::GraphFromJson(ParseJsonArg(json, "graph"))};
  });
}

aggstab_status aggstab_graph_load(const char* path, aggstab_graph** out) {
  return Call([&] {
    RequireHandle(out, "output pointer");
    RequireHandle(path, "path");
    *out = new aggstab_graph{aggstab::GraphFromJson(aggstab::ReadJsonFile(path))};
  });
}

aggstab_status aggstab_graph_to_json(const aggstab_graph* g, char** json_out) {
  return Call([&] {
    RequireHandle(g, "graph");
    RequireHandle(json_out, "output pointer");
    *json_out = CopyString(aggstab::DumpJson(aggstab::GraphToJson(g->graph)));
  });
}

aggstab_status aggstab_graph_save(const aggstab_graph* g, const char* path) {
  return Call([&] {
    RequireHandle(g, "graph");
    RequireHandle(path, "path");
    aggstab::WriteTextFile(path, aggstab::DumpJson(aggstab::GraphToJson(g->graph)));
  });
}

int aggstab_graph_node_count(const aggstab_graph* g) { return g ? g->graph.n() : 0; }

aggstab_status aggstab_graph_shift(const aggstab_graph* g, double* shift_out) {
  return Call([&] {
    RequireHandle(g, "graph");
    RequireHandle(shift_out, "output buffer");
    const int n = g->graph.n();
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) shift_out[static_cast<std::size_t>(i) * n + k] = g->graph.shift()(i, k);
  });
}

aggstab_status aggstab_graph_spectral_norm(const aggstab_graph* g, double* out) {
  return Call([&] {
    RequireHandle(g, "graph");
    RequireHandle(out, "output pointer");
    *out = aggstab::SpectralNorm(g->graph.shift());
  });
}

void aggstab_graph_free(aggstab_graph* g) { delete g; }

// ---- ratings and tasks -------------------------------------------------------

aggstab_status aggstab_ratings_load(const char* path, aggstab_ratings** out) {
  return Call([&] {
    RequireHandle(out, "output pointer");
    RequireHandle(path, "path");
    *out = new aggstab_ratings{aggstab::ParseMovieLens(path)};
  });
}

int aggstab_ratings_entry_count(const aggstab_ratings* r) {
  return r ? static_cast<int>(r->table.entries().size()) : 0;
}
int aggstab_ratings_user_count(const aggstab_ratings* r) { return r ? r->table.user_count() : 0; }
int aggstab_ratings_item_count(const aggstab_ratings* r) { return r ? r->table.item_count() : 0; }

aggstab_status aggstab_ratings_most_rated(const aggstab_ratings* r, int count, int64_t* ids_out,
                                          int* written) {
  return Call([&] {
    RequireHandle(r, "ratings");
    RequireHandle(ids_out, "output buffer");
    const auto ids = aggstab::MostRatedItems(r->table, count);
    for (std::size_t k = 0; k < ids.size(); ++k) ids_out[k] = ids[k];
    if (written) *written = static_cast<int>(ids.size());
  });
}

void aggstab_ratings_free(aggstab_ratings* r) { delete r; }

aggstab_status aggstab_similarity_graph(const aggstab_ratings* r, const int64_t* movies, int count,
                                        int min_common, int top_k, int absolute_negatives,
                                        int normalization, aggstab_graph** out) {
  return Call([&] {
    RequireHandle(r, "ratings");
    RequireHandle(movies, "movie list");
    RequireHandle(out, "output pointer");
    if (count < 1) aggstab::Fail("movie list is empty");
    aggstab::SimilarityGraphConfig cfg;
    cfg.min_common = min_common;
    cfg.top_k = top_k > 0 ? std::optional<int>(top_k) : std::nullopt;
    cfg.negative_policy =
        absolute_negatives ? aggstab::NegativePolicy::kAbsolute : aggstab::NegativePolicy::kZero;
    const std::vector<std::int64_t> ids(movies, movies + count);
    auto g = aggstab::PearsonSimilarityGraph(r->table, ids, cfg);
    g = aggstab::BuildShiftFromAdjacency(g.shift(), ToNormalization(normalization), g.labels());
    *out = new aggstab_graph{std::move(g)};
  });
}

aggstab_status aggstab_task_rating(const aggstab_ratings* r, const aggstab_graph* g,
                                   int64_t target_item, int min_ratings_per_user, uint64_t seed,
                                   aggstab_task** out) {
  return Call([&] {
    RequireHandle(r, "ratings");
    RequireHandle(g, "graph");
    RequireHandle(out, "output pointer");
    *out = new aggstab_task{
        aggstab::BuildRatingTask(r->table, g->graph, target_item, min_ratings_per_user, seed)};
  });
}

aggstab_status aggstab_task_source_localization(const aggstab_graph* g, int diffusion_steps,
                                                int samples, uint64_t seed, aggstab_task** out) {
  return Call([&] {
    RequireHandle(g, "graph");
    RequireHandle(out, "output pointer");
    *out = new aggstab_task{aggstab::SyntheticSourceLocalization(g->graph, diffusion_steps, samples, seed)};
  });
}

aggstab_status aggstab_task_load(const char* path, aggstab_task** out) {
  return Call([&] {
    RequireHandle(path, "path");
    RequireHandle(out, "output pointer");
    *out = new aggstab_task{aggstab::TaskFromJson(aggstab::ReadJsonFile(path))};
  });
}

aggstab_status aggstab_task_save(const aggstab_task* t, const char* path) {
  return Call([&] {
    RequireHandle(t, "task");
    RequireHandle(path, "path");
    aggstab::WriteTextFile(path, aggstab::DumpJson(aggstab::TaskToJson(t->task)));
  });
}

int aggstab_task_sample_count(const aggstab_task* t) {
  return t ? static_cast<int>(t->task.samples.size()) : 0;
}
int aggstab_task_train_count(const aggstab_task* t) {
  return t ? static_cast<int>(t->task.train.size()) : 0;
}

aggstab_status aggstab_task_graph(const aggstab_task* t, aggstab_graph** out) {
  return Call([&] {
    RequireHandle(t, "task");
    RequireHandle(out, "output pointer");
    *out = new aggstab_graph{t->task.graph};
  });
}

void aggstab_task_free(aggstab_task* t) { delete t; }

// ---- models ------------------------------------------------------------------

aggstab_status aggstab_model_init(const char* architecture_json, uint64_t seed, aggstab_model** out) {
  return Call([&] {
    RequireHandle(architecture_json, "architecture");
    RequireHandle(out, "output pointer");
    const auto cfg = aggstab::ModelConfigFromJson(ParseJsonArg(architecture_json, "architecture"));
    *out = new aggstab_model{aggstab::AggGnnModel::Initialize(cfg, seed)};
  });
}

aggstab_status aggstab_model_from_json(const char* json, aggstab_model** out) {
  return Call([&] {
    RequireHandle(json, "json");
    RequireHandle(out, "output pointer");
    *out = new aggstab_model{aggstab::ModelFromJson(ParseJsonArg(json, "model"))};
  });
}

aggstab_status aggstab_model_load(const char* path, aggstab_model** out) {
  return Call([&] {
    RequireHandle(path, "path");
    RequireHandle(out, "output pointer");
    *out = new aggstab_model{aggstab::ModelFromJson(aggstab::ReadJsonFile(path))};
  });
}

aggstab_status aggstab_model_to_json(const aggstab_model* m, char** json_out) {
  return Call([&] {
    RequireHandle(m, "model");
    RequireHandle(json_out, "output pointer");
    *json_out = CopyString(aggstab::DumpJson(aggstab::ModelToJson(m->model)));
  });
}

aggstab_status aggstab_model_save(const aggstab_model* m, const char* path) {
  return Call([&] {
    RequireHandle(m, "model");
    RequireHandle(path, "path");
    aggstab::WriteTextFile(path, aggstab::DumpJson(aggstab::ModelToJson(m->model)));
  });
}

int aggstab_model_order(const aggstab_model* m) { return m ? m->model.a() : -1; }

aggstab_status aggstab_model_forward(const aggstab_model* m, const aggstab_graph* g, const double* signal,
                                     double* readout_out) {
  return Call([&] {
    RequireHandle(m, "model");
    RequireHandle(g, "graph");
    RequireHandle(signal, "signal");
    RequireHandle(readout_out, "output pointer");
    const aggstab::Signal x = Eigen::Map<const aggstab::Vector>(signal, g->graph.n());
    *readout_out = m->model.Forward(g->graph.shift(), x).readout;
  });
}

void aggstab_model_free(aggstab_model* m) { delete m; }

// ---- training, certification, sweeps -----------------------------------------

aggstab_status aggstab_train(aggstab_model* m, const aggstab_task* t, const char* loss_json,
                             const char* optimizer_json, int epochs, int batch_size, uint64_t seed,
                             char** history_csv_out) {
  return Call([&] {
    RequireHandle(m, "model");
    RequireHandle(t, "task");
    const Json lj = ParseJsonArg(loss_json, "loss");
    RejectUnknown(lj,
                  {"smooth_l1_beta", "penalty_l0_weight", "penalty_l1_weight", "l0_target",
                   "l1_target", "omega"},
                  "loss");
    aggstab::LossSpec loss;
    loss.smooth_l1_beta = lj.value("smooth_l1_beta", loss.smooth_l1_beta);
    loss.penalty_l0_weight = lj.value("penalty_l0_weight", loss.penalty_l0_weight);
    loss.penalty_l1_weight = lj.value("penalty_l1_weight", loss.penalty_l1_weight);
    loss.l0_target = lj.value("l0_target", loss.l0_target);
    loss.l1_target = lj.value("l1_target", loss.l1_target);
    const aggstab::Omega covering =
        aggstab::SymmetricOmega(aggstab::SpectralNorm(t->task.graph.shift()), 0.05, 256);
    loss.omega = OmegaFromJson(lj.value("omega", Json::object()), covering);

    const Json oj = ParseJsonArg(optimizer_json, "optimizer");
    RejectUnknown(oj, {"lr", "beta1", "beta2", "eps"}, "optimizer");
    aggstab::OptimizerState opt;
    opt.lr = oj.value("lr", opt.lr);
    opt.beta1 = oj.value("beta1", opt.beta1);
    opt.beta2 = oj.value("beta2", opt.beta2);
    opt.eps = oj.value("eps", opt.eps);

    auto result = aggstab::Train(m->model, t->task, loss, opt, epochs, batch_size, seed);
    m->model = std::move(result.model);
    SetString(history_csv_out, aggstab::HistoryCsv(result.history));
  });
}

aggstab_status aggstab_certify(const aggstab_model* m, double omega_lo, double omega_hi, int grid_points,
                               double l0_max, double l1_max, int nodes, char** json_out) {
  return Call([&] {
    RequireHandle(m, "model");
    RequireHandle(json_out, "output pointer");
    const aggstab::Omega omega{omega_lo, omega_hi, grid_points};
    omega.Validate();
    if (!(l0_max >= 0.0) || !(l1_max >= 0.0)) aggstab::Fail("certification targets must be >= 0");
    const int n = nodes > 0 ? nodes : m->model.config().nodes;
    if (n < 1) aggstab::Fail("node count unknown: pass it explicitly");
    aggstab::Certification c;
    c.estimate = aggstab::EstimateLipschitz(m->model.FirstLayerFilters(), omega);
    c.pass = c.estimate.l0 <= l0_max && c.estimate.l1 <= l1_max;
    Json j = aggstab::CertificationToJson(c);
    const auto bound = aggstab::ComputeStabilityBound(n, m->model.a(), c.estimate.l0, c.estimate.l1, 0, 0);
    j["C0"] = bound.c0;
    j["C1"] = bound.c1;
    j["nodes"] = n;
    j["a"] = m->model.a();
    j["grid_points"] = grid_points;
    *json_out = CopyString(aggstab::DumpJson(j));
  });
}

aggstab_status aggstab_sweep(const aggstab_model* m, const aggstab_graph* g, const char* sweep_json,
                             char** records_csv_out, char** summary_json_out, char** dat_out) {
  return Call([&] {
    RequireHandle(m, "model");
    RequireHandle(g, "graph");
    const Json j = ParseJsonArg(sweep_json, "sweep");
    RejectUnknown(j,
                  {"epsilons", "trials", "kind", "probe_signals", "seed", "bound_layer", "threads",
                   "slack", "omega"},
                  "sweep");
    aggstab::SweepConfig cfg;
    try {
      cfg.epsilons = j.value("epsilons", std::vector<double>{1e-3, 1e-2, 1e-1});
      cfg.trials = j.value("trials", cfg.trials);
      cfg.kind = aggstab::ParsePerturbationKind(j.value("kind", std::string("multiplicative")));
      cfg.probe_signals = j.value("probe_signals", cfg.probe_signals);
      cfg.seed = j.value("seed", cfg.seed);
      cfg.bound_layer = aggstab::ParseBoundLayer(j.value("bound_layer", std::string("first_layer")));
      cfg.threads = j.value("threads", cfg.threads);
    } catch (const nlohmann::json::exception& e) {
      aggstab::Fail(std::string("invalid sweep JSON: ") + e.what());
    }
    const double slack = j.value("slack", 1.1);
    cfg.Validate();
    double max_t0 = 0.0, max_t1 = 0.0;
    for (double eps : cfg.epsilons) {
      const auto [t0, t1] = aggstab::SplitEpsilon(cfg.kind, eps);
      max_t0 = std::max(max_t0, t0);
      max_t1 = std::max(max_t1, t1);
    }
    const aggstab::Omega covering = aggstab::CoveringOmega(g->graph.shift(), max_t0, max_t1);
    const aggstab::Omega omega = OmegaFromJson(j.value("omega", Json::object()), covering);
    const auto estimate = aggstab::EstimateLipschitz(m->model.FirstLayerFilters(), omega);
    const auto records = aggstab::RunSweep(m->model, g->graph, cfg, estimate);
    SetString(records_csv_out, aggstab::RecordsCsv(records));
    SetString(summary_json_out, aggstab::SummaryJson(records, slack));
    SetString(dat_out, aggstab::MediansDat(records));
  });
}

aggstab_status aggstab_report(const char* records_csv, double slack, char** summary_json_out,
                              char** dat_out, char** svg_out) {
  return Call([&] {
    RequireHandle(records_csv, "records");
    const auto records = aggstab::ParseRecordsCsv(records_csv);
    SetString(summary_json_out, aggstab::SummaryJson(records, slack));
    SetString(dat_out, aggstab::MediansDat(records));
    SetString(svg_out, aggstab::MediansSvg(records));
  });
}

}  // extern "C"
