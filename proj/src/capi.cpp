#include "hypertab/hypertab.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>

#include "hypertab/commands.hpp"
#include "hypertab/error.hpp"
#include "hypertab/hypergraph.hpp"
#include "hypertab/model.hpp"
#include "hypertab/table.hpp"

struct ht_table {
  hypertab::table::Table value;
};
struct ht_hypergraph {
  hypertab::graph::Hypergraph value;
};
struct ht_model {
  std::unique_ptr<hypertab::Model> value;
};
struct ht_args {
  hypertab::cmd::Args value;
};

namespace {

thread_local std::string last_error;

ht_status to_status(hypertab::ErrorCode code) {
  using hypertab::ErrorCode;
  switch (code) {
    case ErrorCode::kParse: return HT_ERR_PARSE;
    case ErrorCode::kEmptyInput: return HT_ERR_EMPTY_INPUT;
    case ErrorCode::kInvalidArgument: return HT_ERR_INVALID_ARGUMENT;
    case ErrorCode::kShape: return HT_ERR_SHAPE;
    case ErrorCode::kIo: return HT_ERR_IO;
    case ErrorCode::kCheckpoint: return HT_ERR_CHECKPOINT;
    case ErrorCode::kNumeric: return HT_ERR_NUMERIC;
  }
  return HT_ERR_INTERNAL;
}

template <typename F>
ht_status guard(F&& f) {
  last_error.clear();
  try {
    f();
    return HT_OK;
  } catch (const hypertab::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return HT_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) hypertab::fail(hypertab::ErrorCode::kInvalidArgument, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

ht_status run_command(const char* command, const ht_args* args, char** summary) {
  return guard([&] {
    require(command, "command");
    require(args, "args");
    require(summary, "summary");
    *summary = nullptr;
    *summary = dup_string(hypertab::cmd::run(command, args->value));
  });
}

}  // namespace

extern "C" {

const char* ht_version(void) { return "0.1.0"; }

const char* ht_last_error(void) { return last_error.c_str(); }

const char* ht_status_name(ht_status status) {
  switch (status) {
    case HT_OK: return "ok";
    case HT_ERR_PARSE: return "parse error";
    case HT_ERR_EMPTY_INPUT: return "empty input";
    case HT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case HT_ERR_SHAPE: return "shape error";
    case HT_ERR_IO: return "i/o error";
    case HT_ERR_CHECKPOINT: return "checkpoint error";
    case HT_ERR_NUMERIC: return "numeric error";
    case HT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void ht_string_free(char* s) { std::free(s); }

ht_status ht_table_parse(const char* source, size_t length, ht_format format, ht_table** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    require(source, "source");
    const auto fmt = format == HT_FORMAT_NESTED ? hypertab::table::Format::kNestedHeader
                                                : hypertab::table::Format::kDelimitedGrid;
    *out = new ht_table{hypertab::table::parse_table(std::string_view(source, length), fmt)};
  });
}

ht_status ht_table_load(const char* path, ht_table** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    require(path, "path");
    std::ifstream in(path, std::ios::binary);
    if (!in) hypertab::fail(hypertab::ErrorCode::kIo, std::string("cannot open ") + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string ext = std::filesystem::path(path).extension().string();
    const auto fmt = ext == ".csv" || ext == ".tsv" ? hypertab::table::Format::kDelimitedGrid
                                                    : hypertab::table::Format::kNestedHeader;
    *out = new ht_table{hypertab::table::parse_table(ss.str(), fmt)};
  });
}

void ht_table_free(ht_table* table) { delete table; }

ht_status ht_table_shape(const ht_table* table, size_t* n_rows, size_t* n_cols) {
  return guard([&] {
    require(table, "table");
    if (n_rows) *n_rows = table->value.n_rows();
    if (n_cols) *n_cols = table->value.n_cols();
  });
}

ht_status ht_table_serialize(const ht_table* table, char** out) {
  return guard([&] {
    require(table, "table");
    require(out, "out");
    *out = dup_string(hypertab::table::serialize_table(table->value));
  });
}

ht_status ht_table_permute(const ht_table* table, const size_t* row_perm, size_t n_rows, const size_t* col_perm,
                           size_t n_cols, ht_table** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    require(table, "table");
    if (n_rows) require(row_perm, "row_perm");
    if (n_cols) require(col_perm, "col_perm");
    hypertab::table::Permutation p;
    p.row_perm.assign(row_perm, row_perm + n_rows);
    p.col_perm.assign(col_perm, col_perm + n_cols);
    *out = new ht_table{hypertab::table::permute_table(table->value, p)};
  });
}

ht_status ht_table_random_permute(const ht_table* table, uint64_t seed, ht_table** out, size_t* row_perm,
                                  size_t* col_perm) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    require(table, "table");
    std::mt19937_64 rng(seed);
    const auto p = hypertab::table::random_permutation(table->value, rng);
    auto result = std::make_unique<ht_table>(ht_table{hypertab::table::permute_table(table->value, p)});
    if (row_perm) std::copy(p.row_perm.begin(), p.row_perm.end(), row_perm);
    if (col_perm) std::copy(p.col_perm.begin(), p.col_perm.end(), col_perm);
    *out = result.release();
  });
}

ht_status ht_hypergraph_build(const ht_table* table, ht_hypergraph** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    require(table, "table");
    *out = new ht_hypergraph{hypertab::graph::build_hypergraph(table->value)};
  });
}

void ht_hypergraph_free(ht_hypergraph* graph) { delete graph; }

ht_status ht_hypergraph_counts(const ht_hypergraph* graph, size_t* n_nodes, size_t* n_edges) {
  return guard([&] {
    require(graph, "graph");
    if (n_nodes) *n_nodes = graph->value.nodes.size();
    if (n_edges) *n_edges = graph->value.edges.size();
  });
}

ht_status ht_hypergraph_canonical_form(const ht_hypergraph* graph, char** out) {
  return guard([&] {
    require(graph, "graph");
    require(out, "out");
    *out = dup_string(hypertab::graph::canonical_form(graph->value).digest);
  });
}

ht_status ht_hypergraph_dump(const ht_hypergraph* graph, char** out) {
  return guard([&] {
    require(graph, "graph");
    require(out, "out");
    *out = dup_string(hypertab::graph::dump(graph->value));
  });
}

ht_status ht_model_load(const char* dir, ht_model** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    require(dir, "dir");
    std::filesystem::path p(dir);
    if (std::filesystem::exists(p / "model" / "config.cfg")) p /= "model";
    *out = new ht_model{hypertab::Model::load(p)};
  });
}

void ht_model_free(ht_model* model) { delete model; }

ht_status ht_model_structure(const ht_model* model, const ht_table* table, double* values, size_t capacity,
                             size_t* rows, size_t* cols) {
  return guard([&] {
    require(model, "model");
    require(table, "table");
    hypertab::num::NoGradGuard no_grad;
    const auto s = model->value->structure(table->value);
    if (rows) *rows = s.rows();
    if (cols) *cols = s.cols();
    if (values && capacity >= s.size()) std::copy(s.data().begin(), s.data().end(), values);
  });
}

ht_status ht_model_answer(const ht_model* model, const ht_table* table, const char* question, ht_mode mode,
                          char** out) {
  return guard([&] {
    require(model, "model");
    require(table, "table");
    require(question, "question");
    require(out, "out");
    const auto m = mode == HT_MODE_TEXT_ONLY ? hypertab::dec::Mode::kTextOnly : hypertab::dec::Mode::kWithStructure;
    *out = dup_string(model->value->answer(table->value, question, m));
  });
}

ht_status ht_args_new(ht_args** out) {
  return guard([&] {
    require(out, "out");
    *out = new ht_args{};
  });
}

void ht_args_free(ht_args* args) { delete args; }

ht_status ht_args_add(ht_args* args, const char* key, const char* value) {
  return guard([&] {
    require(args, "args");
    require(key, "key");
    args->value.add(key, value ? value : "");
  });
}

ht_status ht_run(const char* command, const ht_args* args, char** summary) {
  return run_command(command, args, summary);
}
ht_status ht_gen(const ht_args* args, char** summary) { return run_command("gen", args, summary); }
ht_status ht_permute(const ht_args* args, char** summary) { return run_command("permute", args, summary); }
ht_status ht_train(const ht_args* args, char** summary) { return run_command("train", args, summary); }
ht_status ht_encode(const ht_args* args, char** summary) { return run_command("encode", args, summary); }
ht_status ht_eval(const ht_args* args, char** summary) { return run_command("eval", args, summary); }
ht_status ht_probe(const ht_args* args, char** summary) { return run_command("probe", args, summary); }
ht_status ht_saliency(const ht_args* args, char** summary) { return run_command("saliency", args, summary); }
ht_status ht_gradcheck(const ht_args* args, char** summary) { return run_command("gradcheck", args, summary); }

ht_status ht_preset_text(const char* name, char** out) {
  return guard([&] {
    require(name, "name");
    require(out, "out");
    *out = dup_string(hypertab::preset(name).to_text());
  });
}

}  // extern "C"
