#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hypertab/table.hpp"

namespace hypertab::qa {

enum class Task { kCellLocation, kColumnLookup, kRowLookup, kColumnComprehension, kRowComprehension };
inline constexpr Task kAllTasks[] = {Task::kCellLocation, Task::kColumnLookup, Task::kRowLookup,
                                     Task::kColumnComprehension, Task::kRowComprehension};

const char* task_name(Task t);
Task parse_task(const std::string& s);
// Answers of these tasks are lists of items.
bool is_multi_valued(Task t);

enum class Split { kTrain, kValid, kTest };
const char* split_name(Split s);
Split parse_split(const std::string& s);

// The three question templates of a task; {row number}, {column name} and
// {cell value} are the slots.
const std::vector<std::string>& templates(Task t);

// Slot values a question was instantiated with. `row` and `col` are positions
// in the table the question is asked about; `value` is a cell text.
struct Slots {
  std::size_t row = 0;
  std::size_t col = 0;
  std::string value;
  bool operator==(const Slots&) const = default;
};

struct Sample {
  std::string sample_id;
  std::string table_id;
  Task task = Task::kCellLocation;
  int template_id = 0;
  std::string question;
  std::vector<std::string> answer;  // one item for scalar tasks
  Split split = Split::kTrain;
  Slots slots;

  // Items joined by ", ".
  std::string answer_text() const;
  bool operator==(const Sample&) const = default;
};

struct NamedTable {
  std::string id;
  table::Table table;
};
using Corpus = std::vector<NamedTable>;

std::string render_question(const table::Table& t, Task task, int template_id, const Slots& slots);
// Task oracles. Lists follow table order: columns left to right, rows top to
// bottom, distinct values by first occurrence.
std::vector<std::string> answer_for(const table::Table& t, Task task, const Slots& slots);

struct Dataset {
  std::uint64_t seed = 0;
  std::vector<Sample> samples;          // corpus order, then task, then template
  std::map<std::string, Split> splits;  // table id -> split

  std::vector<Sample> select(Split s) const;
};

// Per table, 5 tasks x 3 templates. Tables are split 60/20/20 by a seeded
// shuffle (floor, floor, remainder). Throws on an empty corpus.
Dataset generate_dataset(const Corpus& corpus, std::uint64_t seed);

struct PermutationRecord {
  std::string table_id;
  table::Permutation perm;
  std::uint64_t seed = 0;
};

struct PermutedTestSet {
  bool remap = true;  // positional slots follow the permutation
  std::vector<PermutationRecord> records;
  std::vector<NamedTable> tables;  // permuted test tables, same order as records
  std::vector<Sample> samples;     // same sample ids as the originals

  const PermutationRecord* record(const std::string& table_id) const;
};

// One seeded permutation per test table; questions are re-instantiated on the
// permuted table. With `remap` the row slot maps through the permutation so
// the question refers to the same cells; without it the original row number
// is kept and the answer recomputed for whatever now sits there.
PermutedTestSet permute_test_set(const Dataset& ds, const Corpus& corpus, std::uint64_t seed, bool remap = true);

// Lowercase, trim and collapse whitespace. Multi-valued tasks split on ',' and
// '|' and drop empty items.
std::vector<std::string> normalize_answer(const std::string& raw, Task task);
// Set equality for lookups and column comprehension; ordered for row
// comprehension; string equality for cell location.
bool answers_match(const std::string& a, const std::string& b, Task task);

using Predictions = std::map<std::string, std::string>;  // sample id -> raw answer

struct TaskScore {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t perm_total = 0;
  std::size_t perm_correct = 0;
  std::size_t pairs = 0;
  std::size_t consistent = 0;
};

struct Scores {
  double direct = 0.0;
  double permutation = 0.0;
  double robustness = 0.0;
  bool has_permutation = false;
  std::map<std::string, TaskScore> per_task;
  std::vector<std::string> missing;  // sample ids without a prediction
};

// Robustness compares each permuted-side prediction, mapped back to the
// original coordinates (row indices through the row permutation; a full-row
// listing through the column permutation), against the original prediction.
// A pair with a missing prediction on either side counts as inconsistent.
Scores score(const std::vector<Sample>& test, const Predictions& preds, const PermutedTestSet* permuted = nullptr,
             const Predictions* permuted_preds = nullptr);

// Map a prediction made on the permuted table back into original coordinates.
std::string map_prediction_back(const std::string& raw, Task task, const table::Permutation& perm);

// --- files ------------------------------------------------------------------

void write_samples(const std::vector<Sample>& samples, const std::filesystem::path& path);
std::vector<Sample> read_samples(const std::filesystem::path& path);
void write_permutations(const std::vector<PermutationRecord>& records, const std::filesystem::path& path);
std::vector<PermutationRecord> read_permutations(const std::filesystem::path& path);
void write_predictions(const Predictions& preds, const std::filesystem::path& path);
Predictions read_predictions(const std::filesystem::path& path);

// Corpus directory: one file per table, "<id>.csv" (delimited grid) or
// "<id>.tbl" (nested header document). Loaded in id order.
Corpus load_corpus(const std::filesystem::path& dir);
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// --- synthetic corpus ---------------------------------------------------------

struct CorpusOptions {
  std::size_t tables = 100;
  std::size_t min_rows = 2;
  std::size_t max_rows = 5;
  std::size_t min_cols = 2;
  std::size_t max_cols = 4;
  double nested_fraction = 0.2;  // tables with a two-level column header
  bool typed_columns = false;    // true: each column draws from its own value pool
};

Corpus generate_corpus(const CorpusOptions& opt, std::uint64_t seed);

}  // namespace hypertab::qa
