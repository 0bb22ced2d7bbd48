/* C interface to the nrelaggs library.
 *
 * Every fallible call returns an nrg_status. On failure the thread-local
 * message returned by nrg_last_error() describes the problem. Strings handed
 * out through char** parameters are owned by the caller and released with
 * nrg_string_free(). Handles are released with their *_free function;
 * passing NULL to any *_free function is a no-op.
 */
#ifndef NRELAGGS_H
#define NRELAGGS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define NRG_API __declspec(dllexport)
#else
#  define NRG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nrg_status {
    NRG_OK = 0,
    NRG_MISSING_TABLE_FILE = 1,
    NRG_HEADER_MISMATCH = 2,
    NRG_DANGLING_FOREIGN_KEY = 3,
    NRG_CYCLIC_JOIN_GRAPH = 4,
    NRG_TARGET_NOT_CATEGORICAL = 5,
    NRG_UNKNOWN_TABLE = 6,
    NRG_SCHEMA_INVALID = 7,
    NRG_PARSE_ERROR = 8,
    NRG_EMPTY_TRAIN_SET = 9,
    NRG_UNKNOWN_INSTANCE_KEY = 10,
    NRG_INCOMPATIBLE_WIDTHS = 11,
    NRG_PLAN_MISMATCH = 12,
    NRG_SHAPE_MISMATCH = 13,
    NRG_BAD_SEGMENT_INDEX = 14,
    NRG_LABEL_DOMAIN = 15,
    NRG_WIDTH_CHAIN_BROKEN = 16,
    NRG_OVERSIZE_BATCH = 17,
    NRG_NON_FINITE_LOSS = 18,
    NRG_UNKNOWN_LAYER = 19,
    NRG_TOO_FEW_INSTANCES = 20,
    NRG_LENGTH_MISMATCH = 21,
    NRG_SINGLE_CLASS = 22,
    NRG_MISSING_CHECKPOINT = 23,
    NRG_CHECKPOINT_INVALID = 24,
    NRG_IO_ERROR = 25,
    NRG_INVALID_ARGUMENT = 26,
    NRG_INTERNAL = 99
} nrg_status;

typedef struct nrg_database nrg_database;
typedef struct nrg_model nrg_model;
typedef struct nrg_report nrg_report;

NRG_API const char* nrg_version(void);
/* CamelCase name such as "MissingTableFile". Never NULL. */
NRG_API const char* nrg_status_name(nrg_status status);
/* Message of the last failed call on this thread, "" if none. */
NRG_API const char* nrg_last_error(void);
NRG_API void nrg_string_free(char* text);

/* ---- database ---------------------------------------------------------- */

NRG_API nrg_status nrg_database_load(const char* schema_path, const char* data_dir, nrg_database** out);
NRG_API void nrg_database_free(nrg_database* db);
NRG_API nrg_status nrg_database_instance_count(const nrg_database* db, size_t* out);
/* Per-table column and row counts plus the target class distribution. */
NRG_API nrg_status nrg_database_stats(const nrg_database* db, char** out);
/* Aggregation plan rendered as "[([children], parent), ...]". */
NRG_API nrg_status nrg_database_plan(const nrg_database* db, char** out);
/* Share of the most frequent target class. */
NRG_API nrg_status nrg_database_majority_accuracy(const nrg_database* db, double* out);

/* Encodes every instance (encoders fitted on all of them) and writes the
 * binary bundle archive. The fitted encoder state is returned as JSON when
 * preprocessor_json is not NULL. */
NRG_API nrg_status nrg_ingest(const nrg_database* db, const char* bundle_path, char** preprocessor_json);

/* ---- propositionalization --------------------------------------------- */

/* Writes an n x (D + 1) CSV with header f0..fD-1,target, rows in target table
 * order. RELAGGS column provenance goes to a sidecar <stem>.columns.txt.
 * engine is "relaggs" or "nrelaggs"; the latter needs checkpoint_path
 * (NRG_MISSING_CHECKPOINT otherwise) and exports the pre-predictor layer. */
NRG_API nrg_status nrg_propositionalize(const nrg_database* db, const char* engine, const char* checkpoint_path,
                                        const char* csv_path, size_t* rows, size_t* feature_cols);

/* ---- training ----------------------------------------------------------- */

/* Trains "nrelaggs" or "fix_nrelaggs" on every instance. config_json may be
 * NULL (defaults). history_json may be NULL. */
NRG_API nrg_status nrg_train(const nrg_database* db, const char* engine, const char* config_json, uint64_t seed,
                             nrg_model** out, char** history_json);
/* Also writes the training bundle archive when bundle_path is not NULL. */
NRG_API nrg_status nrg_train_dump_bundles(const nrg_database* db, const nrg_model* model, const char* bundle_path);
NRG_API nrg_status nrg_model_save(const nrg_model* model, const char* path);
NRG_API nrg_status nrg_model_load(const char* path, nrg_model** out);
NRG_API void nrg_model_free(nrg_model* model);
NRG_API nrg_status nrg_model_config(const nrg_model* model, char** config_json);
NRG_API nrg_status nrg_model_parameter_count(const nrg_model* model, size_t* out);
/* Training accuracy style check: fraction of instances of db classified
 * correctly by the model. */
NRG_API nrg_status nrg_model_accuracy(const nrg_model* model, const nrg_database* db, double* out);

/* layer: "pre_predictor" or "predictor_hidden:<i>". Same CSV layout as
 * nrg_propositionalize but with header e0..ed-1,target. */
NRG_API nrg_status nrg_extract_features(const nrg_model* model, const nrg_database* db, const char* layer,
                                        const char* csv_path, size_t* rows, size_t* feature_cols);

/* ---- evaluation ---------------------------------------------------------- */

typedef struct nrg_protocol {
    size_t folds;
    size_t repeats;
    size_t inner_folds;
    uint64_t seed;
    size_t jobs;
    const char* base_config_json;  /* training settings for every grid entry, may be NULL */
    const char* fixed_config_json; /* skips the grid search when not NULL */
} nrg_protocol;

/* 10 folds, 2 repeats, 3 inner folds, seed 0, 1 job, no configs. */
NRG_API void nrg_protocol_init(nrg_protocol* protocol);

/* Called after each outer fold with repetition, fold, accuracy, AUROC. */
typedef void (*nrg_progress_fn)(void* user, size_t repetition, size_t fold, double accuracy, double auroc);

/* engine: relaggs, nrelaggs, fix_nrelaggs or majority. */
NRG_API nrg_status nrg_evaluate(const nrg_database* db, const char* dataset, const char* engine,
                                const nrg_protocol* protocol, nrg_progress_fn progress, void* user,
                                nrg_report** out);
NRG_API void nrg_report_free(nrg_report* report);
NRG_API nrg_status nrg_report_json(const nrg_report* report, char** out);
NRG_API nrg_status nrg_report_timing_json(const nrg_report* report, char** out);
/* Header line and one summary row, newline terminated. */
NRG_API nrg_status nrg_report_csv(const nrg_report* report, char** out);
NRG_API nrg_status nrg_report_summary(const nrg_report* report, double* accuracy_mean, double* accuracy_std,
                                      double* auroc_mean, double* auroc_std);

#ifdef __cplusplus
}
#endif

#endif
