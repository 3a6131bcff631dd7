/*
 * crygcn C API.
 *
 * Every function returns a crygcn_status; on failure crygcn_last_error()
 * holds a message for the calling thread. Strings returned through char**
 * out-parameters are owned by the caller and released with
 * crygcn_string_free(). Handles are released with their *_free function;
 * passing NULL to a *_free function is a no-op.
 *
 * Configuration is passed as a JSON document (see README for the schema).
 * NULL or "" selects all defaults.
 */
#ifndef CRYGCN_H
#define CRYGCN_H

#include <stddef.h>
#include <stdint.h>

#if defined(CRYGCN_BUILDING_LIBRARY)
#define CRYGCN_API __attribute__((visibility("default")))
#else
#define CRYGCN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum crygcn_status {
  CRYGCN_OK = 0,
  CRYGCN_PARSE_ERROR = 1,
  CRYGCN_EMPTY_INPUT = 2,
  CRYGCN_DEGENERATE_LABELS = 3,
  CRYGCN_INSUFFICIENT_CLASS_SIZE = 4,
  CRYGCN_INVALID_CONFIG = 5,
  CRYGCN_DEGENERATE_GEOMETRY = 6,
  CRYGCN_DEGENERATE_GRAPH = 7,
  CRYGCN_SHAPE_ERROR = 8,
  CRYGCN_EMPTY_MASK = 9,
  CRYGCN_EMPTY_EVALUATION = 10,
  CRYGCN_INVALID_SPLIT = 11,
  CRYGCN_DIVERGENCE = 12,
  CRYGCN_IO_ERROR = 13,
  CRYGCN_INVALID_ARGUMENT = 14,
  CRYGCN_INTERNAL_ERROR = 15
} crygcn_status;

typedef struct crygcn_dataset crygcn_dataset;
typedef struct crygcn_graph crygcn_graph;
typedef struct crygcn_model crygcn_model;

CRYGCN_API const char* crygcn_version(void);
/* Structured error name, e.g. "ParseError". */
CRYGCN_API const char* crygcn_status_name(crygcn_status status);
CRYGCN_API const char* crygcn_last_error(void);
CRYGCN_API void crygcn_string_free(char* s);

/* Fills every default and validates; writes the canonical JSON. */
CRYGCN_API crygcn_status crygcn_config_resolve(const char* config_json, char** resolved_json);

/* ---- datasets ---------------------------------------------------------- */

CRYGCN_API crygcn_status crygcn_dataset_load(const char* features_path, const char* labels_path,
                                             crygcn_dataset** out);
/* spec_json: {"classes", "per_class", "dims", "center_distance", "noise_std", "seed"} */
CRYGCN_API crygcn_status crygcn_dataset_synth(const char* spec_json, crygcn_dataset** out);
/* Loads data.features/data.labels, or generates data.synth. */
CRYGCN_API crygcn_status crygcn_dataset_from_config(const char* config_json, crygcn_dataset** out);
CRYGCN_API crygcn_status crygcn_dataset_save(const crygcn_dataset* dataset, const char* features_path,
                                             const char* labels_path);
CRYGCN_API size_t crygcn_dataset_rows(const crygcn_dataset* dataset);
CRYGCN_API size_t crygcn_dataset_cols(const crygcn_dataset* dataset);
CRYGCN_API size_t crygcn_dataset_classes(const crygcn_dataset* dataset);
CRYGCN_API void crygcn_dataset_free(crygcn_dataset* dataset);

/* {"seed", "fold_count", "assignments"} */
CRYGCN_API crygcn_status crygcn_make_folds(const crygcn_dataset* dataset, int fold_count, uint64_t seed,
                                           char** split_json);
/* {"seed", "fraction", "mask"} */
CRYGCN_API crygcn_status crygcn_make_mask(const crygcn_dataset* dataset, double fraction, uint64_t seed,
                                          char** mask_json);

/* ---- graphs ------------------------------------------------------------ */

/* subset == NULL builds the semi-supervised graph over every node; otherwise
 * a supervised graph over the listed dataset indices. */
CRYGCN_API crygcn_status crygcn_graph_build(const crygcn_dataset* dataset, const char* config_json,
                                            const size_t* subset, size_t subset_len, crygcn_graph** out);
CRYGCN_API crygcn_status crygcn_graph_to_json(const crygcn_graph* graph, char** graph_json);
CRYGCN_API size_t crygcn_graph_nodes(const crygcn_graph* graph);
CRYGCN_API size_t crygcn_graph_edges(const crygcn_graph* graph);
CRYGCN_API void crygcn_graph_free(crygcn_graph* graph);

/* ---- models ------------------------------------------------------------ */

/* Trains on the graph over the whole dataset. The loss mask is mask_json when
 * given, else a labeled_fraction mask when the config selects one, else every
 * node. trace_json may be NULL. */
CRYGCN_API crygcn_status crygcn_train(const crygcn_dataset* dataset, const char* config_json, const char* mask_json,
                                      crygcn_model** out, char** trace_json);
CRYGCN_API crygcn_status crygcn_model_from_json(const char* model_json, crygcn_model** out);
CRYGCN_API crygcn_status crygcn_model_to_json(const crygcn_model* model, char** model_json);
CRYGCN_API void crygcn_model_free(crygcn_model* model);

/* Frozen-weight inference on a graph built over the dataset; classes must
 * hold crygcn_dataset_rows() entries. */
CRYGCN_API crygcn_status crygcn_predict(const crygcn_model* model, const crygcn_dataset* dataset,
                                        const char* config_json, int* classes);
/* Scores every node, or only the unlabeled nodes of mask_json when given. */
CRYGCN_API crygcn_status crygcn_evaluate(const crygcn_model* model, const crygcn_dataset* dataset,
                                         const char* config_json, const char* mask_json, char** report_json,
                                         char** table_text);

/* ---- experiments ------------------------------------------------------- */

/* mask_json NULL: stratified mask at the config's labeled_fraction (0.2 when
 * the config selects cross validation instead). */
CRYGCN_API crygcn_status crygcn_run_semi_supervised(const crygcn_dataset* dataset, const char* config_json,
                                                    const char* mask_json, char** report_json, char** table_text);
CRYGCN_API crygcn_status crygcn_run_supervised(const crygcn_dataset* dataset, const char* config_json,
                                               const size_t* train, size_t train_len, const size_t* test,
                                               size_t test_len, char** report_json, char** table_text);
CRYGCN_API crygcn_status crygcn_cross_validate(const crygcn_dataset* dataset, const char* config_json,
                                               char** report_json, char** table_text);
CRYGCN_API crygcn_status crygcn_ratio_sweep(const crygcn_dataset* dataset, const char* config_json,
                                            char** report_json, char** table_text);

/* ---- verification ------------------------------------------------------ */

typedef struct crygcn_gradcheck_options {
  size_t nodes;
  size_t features;
  size_t hidden;
  size_t classes;
  int k;
  uint64_t seed;
  double step;
  double weight_decay;
  int corrupt; /* test hook: perturb the analytic gradient */
} crygcn_gradcheck_options;

CRYGCN_API void crygcn_gradcheck_defaults(crygcn_gradcheck_options* options);
/* Random instance, analytic vs central-difference gradients. detail_json may
 * be NULL. */
CRYGCN_API crygcn_status crygcn_gradcheck(const crygcn_gradcheck_options* options, double* max_relative_error,
                                          char** detail_json);

#ifdef __cplusplus
}
#endif

#endif /* CRYGCN_H */
