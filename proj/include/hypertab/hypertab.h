/* C interface to the hypertab library.
 *
 * Every function returns an ht_status. On failure the message for the calling
 * thread is available from ht_last_error() until the next call on that thread.
 * Objects are opaque handles released with their *_free function; strings
 * returned through char** are released with ht_string_free. */
#ifndef HYPERTAB_H
#define HYPERTAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HT_API __declspec(dllexport)
#else
#define HT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  HT_OK = 0,
  HT_ERR_PARSE = 1,
  HT_ERR_EMPTY_INPUT = 2,
  HT_ERR_INVALID_ARGUMENT = 3,
  HT_ERR_SHAPE = 4,
  HT_ERR_IO = 5,
  HT_ERR_CHECKPOINT = 6,
  HT_ERR_NUMERIC = 7,
  HT_ERR_INTERNAL = 99
} ht_status;

typedef enum { HT_FORMAT_DELIMITED = 0, HT_FORMAT_NESTED = 1 } ht_format;
typedef enum { HT_MODE_WITH_STRUCTURE = 0, HT_MODE_TEXT_ONLY = 1 } ht_mode;

typedef struct ht_table ht_table;
typedef struct ht_hypergraph ht_hypergraph;
typedef struct ht_model ht_model;
typedef struct ht_args ht_args;

HT_API const char* ht_version(void);
HT_API const char* ht_last_error(void);
HT_API const char* ht_status_name(ht_status status);
HT_API void ht_string_free(char* s);

/* Tables */
HT_API ht_status ht_table_parse(const char* source, size_t length, ht_format format, ht_table** out);
/* ".csv"/".tsv" files are delimited grids, anything else a nested document. */
HT_API ht_status ht_table_load(const char* path, ht_table** out);
HT_API void ht_table_free(ht_table* table);
HT_API ht_status ht_table_shape(const ht_table* table, size_t* n_rows, size_t* n_cols);
HT_API ht_status ht_table_serialize(const ht_table* table, char** out);
/* Gather form: row i of the result is row row_perm[i] of the input. */
HT_API ht_status ht_table_permute(const ht_table* table, const size_t* row_perm, size_t n_rows,
                                  const size_t* col_perm, size_t n_cols, ht_table** out);
/* Uniform allowed permutation drawn from `seed`; the permutation is written to
 * row_perm/col_perm when they are non-null (sized n_rows / n_cols). */
HT_API ht_status ht_table_random_permute(const ht_table* table, uint64_t seed, ht_table** out, size_t* row_perm,
                                         size_t* col_perm);

/* Hypergraphs */
HT_API ht_status ht_hypergraph_build(const ht_table* table, ht_hypergraph** out);
HT_API void ht_hypergraph_free(ht_hypergraph* graph);
HT_API ht_status ht_hypergraph_counts(const ht_hypergraph* graph, size_t* n_nodes, size_t* n_edges);
HT_API ht_status ht_hypergraph_canonical_form(const ht_hypergraph* graph, char** out);
HT_API ht_status ht_hypergraph_dump(const ht_hypergraph* graph, char** out);

/* Trained models (a `train` output directory or its model/ subdirectory) */
HT_API ht_status ht_model_load(const char* dir, ht_model** out);
HT_API void ht_model_free(ht_model* model);
/* Structure tokens of `table`. Writes rows*cols values into `values` when
 * capacity allows; rows/cols are always reported. */
HT_API ht_status ht_model_structure(const ht_model* model, const ht_table* table, double* values, size_t capacity,
                                    size_t* rows, size_t* cols);
HT_API ht_status ht_model_answer(const ht_model* model, const ht_table* table, const char* question, ht_mode mode,
                                 char** out);

/* Commands. Arguments are key/value pairs named like the CLI long options
 * (without dashes); "set" may repeat. Each command writes an output
 * directory with a manifest and returns a JSON summary in `summary`. */
HT_API ht_status ht_args_new(ht_args** out);
HT_API void ht_args_free(ht_args* args);
HT_API ht_status ht_args_add(ht_args* args, const char* key, const char* value);

HT_API ht_status ht_run(const char* command, const ht_args* args, char** summary);
HT_API ht_status ht_gen(const ht_args* args, char** summary);
HT_API ht_status ht_permute(const ht_args* args, char** summary);
HT_API ht_status ht_train(const ht_args* args, char** summary);
HT_API ht_status ht_encode(const ht_args* args, char** summary);
HT_API ht_status ht_eval(const ht_args* args, char** summary);
HT_API ht_status ht_probe(const ht_args* args, char** summary);
HT_API ht_status ht_saliency(const ht_args* args, char** summary);
HT_API ht_status ht_gradcheck(const ht_args* args, char** summary);

/* Canonical text of a built-in preset ("desk", "tiny", "paper"). */
HT_API ht_status ht_preset_text(const char* name, char** out);

#ifdef __cplusplus
}
#endif

#endif
