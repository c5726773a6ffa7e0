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

/*
 * C interface to the aggstab library.
 *
 * Objects are opaque handles created by aggstab_*_create/load functions and
 * released with the matching aggstab_*_free. Every fallible call returns an
 * aggstab_status; on failure aggstab_last_error() describes the problem (the
 * message is thread-local and valid until the next call on the same thread).
 * Strings returned through char** out-parameters are owned by the caller and
 * must be released with aggstab_string_free.
 */
#ifndef AGGSTAB_AGGSTAB_H_
#define AGGSTAB_AGGSTAB_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(AGGSTAB_BUILDING_LIBRARY)
#define AGGSTAB_API __declspec(dllexport)
#else
#define AGGSTAB_API __declspec(dllimport)
#endif
#else
#define AGGSTAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aggstab_status {
  AGGSTAB_OK = 0,
  AGGSTAB_ERR_INTERNAL = 1,
  AGGSTAB_ERR_INPUT = 2,   /* usage or malformed input */
  AGGSTAB_ERR_DATA = 3,    /* data cannot support the request */
  AGGSTAB_ERR_NUMERIC = 4  /* numeric-domain precondition failed */
} aggstab_status;

typedef struct aggstab_graph aggstab_graph;
typedef struct aggstab_ratings aggstab_ratings;
typedef struct aggstab_task aggstab_task;
typedef struct aggstab_model aggstab_model;

AGGSTAB_API const char* aggstab_version(void);
AGGSTAB_API const char* aggstab_last_error(void);
AGGSTAB_API void aggstab_string_free(char* s);

/* ---- graphs ------------------------------------------------------------ */

/* normalization: 0 = none, 1 = symmetric degree D^-1/2 W D^-1/2 */
AGGSTAB_API aggstab_status aggstab_graph_random_er(int n, double p, uint64_t seed, int normalization,
                                                   aggstab_graph** out);
AGGSTAB_API aggstab_status aggstab_graph_random_sbm(int n, int blocks, double p_in, double p_out,
                                                    uint64_t seed, int normalization,
                                                    aggstab_graph** out);
/* Builds a shift from a row-major n x n adjacency. */
AGGSTAB_API aggstab_status aggstab_graph_from_adjacency(const double* adjacency, int n,
                                                        int normalization, aggstab_graph** out);
AGGSTAB_API aggstab_status aggstab_graph_from_json(const char* json, aggstab_graph** out);
AGGSTAB_API aggstab_status aggstab_graph_load(const char* path, aggstab_graph** out);
AGGSTAB_API aggstab_status aggstab_graph_to_json(const aggstab_graph* g, char** json_out);
AGGSTAB_API aggstab_status aggstab_graph_save(const aggstab_graph* g, const char* path);
AGGSTAB_API int aggstab_graph_node_count(const aggstab_graph* g);
/* Copies the row-major shift into `shift_out` (n*n doubles). */
AGGSTAB_API aggstab_status aggstab_graph_shift(const aggstab_graph* g, double* shift_out);
/* Largest singular value of the shift. */
AGGSTAB_API aggstab_status aggstab_graph_spectral_norm(const aggstab_graph* g, double* out);
AGGSTAB_API void aggstab_graph_free(aggstab_graph* g);

/* ---- ratings and tasks ------------------------------------------------- */

AGGSTAB_API aggstab_status aggstab_ratings_load(const char* path, aggstab_ratings** out);
AGGSTAB_API int aggstab_ratings_entry_count(const aggstab_ratings* r);
AGGSTAB_API int aggstab_ratings_user_count(const aggstab_ratings* r);
AGGSTAB_API int aggstab_ratings_item_count(const aggstab_ratings* r);
/* Writes up to `count` item ids ordered by descending rating count. */
AGGSTAB_API aggstab_status aggstab_ratings_most_rated(const aggstab_ratings* r, int count,
                                                      int64_t* ids_out, int* written);
AGGSTAB_API void aggstab_ratings_free(aggstab_ratings* r);

/* top_k <= 0 disables sparsification; absolute_negatives selects |r| over max(r, 0). */
AGGSTAB_API aggstab_status aggstab_similarity_graph(const aggstab_ratings* r, const int64_t* movies,
                                                    int count, int min_common, int top_k,
                                                    int absolute_negatives, int normalization,
                                                    aggstab_graph** out);

AGGSTAB_API aggstab_status aggstab_task_rating(const aggstab_ratings* r, const aggstab_graph* g,
                                               int64_t target_item, int min_ratings_per_user,
                                               uint64_t seed, aggstab_task** out);
AGGSTAB_API aggstab_status aggstab_task_source_localization(const aggstab_graph* g,
                                                            int diffusion_steps, int samples,
                                                            uint64_t seed, aggstab_task** out);
AGGSTAB_API aggstab_status aggstab_task_load(const char* path, aggstab_task** out);
AGGSTAB_API aggstab_status aggstab_task_save(const aggstab_task* t, const char* path);
AGGSTAB_API int aggstab_task_sample_count(const aggstab_task* t);
AGGSTAB_API int aggstab_task_train_count(const aggstab_task* t);
/* New graph handle holding a copy of the task's graph. */
AGGSTAB_API aggstab_status aggstab_task_graph(const aggstab_task* t, aggstab_graph** out);
AGGSTAB_API void aggstab_task_free(aggstab_task* t);

/* ---- models ------------------------------------------------------------ */

/* Architecture JSON: the model document without "weights". */
AGGSTAB_API aggstab_status aggstab_model_init(const char* architecture_json, uint64_t seed,
                                              aggstab_model** out);
AGGSTAB_API aggstab_status aggstab_model_from_json(const char* json, aggstab_model** out);
AGGSTAB_API aggstab_status aggstab_model_load(const char* path, aggstab_model** out);
AGGSTAB_API aggstab_status aggstab_model_to_json(const aggstab_model* m, char** json_out);
AGGSTAB_API aggstab_status aggstab_model_save(const aggstab_model* m, const char* path);
AGGSTAB_API int aggstab_model_order(const aggstab_model* m);
/* Readout of the model for one signal on a graph. */
AGGSTAB_API aggstab_status aggstab_model_forward(const aggstab_model* m, const aggstab_graph* g,
                                                 const double* signal, double* readout_out);
AGGSTAB_API void aggstab_model_free(aggstab_model* m);

/* ---- training, certification, sweeps ----------------------------------- */

/*
 * Trains `m` in place. loss_json keys: smooth_l1_beta, penalty_l0_weight,
 * penalty_l1_weight, l0_target, l1_target, omega {lo, hi, grid_points}.
 * optimizer_json keys: lr, beta1, beta2, eps. Either may be NULL for
 * defaults. history_csv_out (optional) receives "epoch,train_loss,penalty,test_loss".
 */
AGGSTAB_API aggstab_status aggstab_train(aggstab_model* m, const aggstab_task* t,
                                         const char* loss_json, const char* optimizer_json,
                                         int epochs, int batch_size, uint64_t seed,
                                         char** history_csv_out);

/*
 * Certification report {"L0", "L1", "pass", "omega", "C0", "C1", "nodes", "a"}
 * for the model's first-layer filters (all cyclic shifts). nodes <= 0 uses
 * the model's own node count when it has one.
 */
AGGSTAB_API aggstab_status aggstab_certify(const aggstab_model* m, double omega_lo, double omega_hi,
                                           int grid_points, double l0_max, double l1_max,
                                           int nodes, char** json_out);

/*
 * Perturbation sweep. sweep_json keys: epsilons, trials, kind, probe_signals,
 * seed, bound_layer, threads, slack, omega {lo, hi, grid_points} (default:
 * an interval covering every perturbed spectrum). Outputs the records CSV,
 * the summary JSON and the gnuplot .dat text; any out-pointer may be NULL.
 */
AGGSTAB_API aggstab_status aggstab_sweep(const aggstab_model* m, const aggstab_graph* g,
                                         const char* sweep_json, char** records_csv_out,
                                         char** summary_json_out, char** dat_out);

/* Summary JSON, .dat and SVG chart from a records CSV. */
AGGSTAB_API aggstab_status aggstab_report(const char* records_csv, double slack,
                                          char** summary_json_out, char** dat_out,
                                          char** svg_out);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* AGGSTAB_AGGSTAB_H_ */
