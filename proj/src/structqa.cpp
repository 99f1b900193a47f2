#include "hypertab/structqa.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "hypertab/error.hpp"
#include "hypertab/random.hpp"

namespace hypertab::qa {

namespace {

using Json = nlohmann::ordered_json;

std::uint64_t table_seed(std::uint64_t seed, const std::string& id, std::uint64_t salt) {
  const std::uint64_t h = fnv1a(id.data(), id.size());
  return fnv1a(&salt, sizeof salt, h ^ seed);
}

std::string lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

std::string collapse(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending = !out.empty();
    } else {
      if (pending) out += ' ';
      pending = false;
      out += c;
    }
  }
  return out;
}

std::vector<std::string> split_items(const std::string& raw) {
  std::vector<std::string> items;
  std::string cur;
  for (char c : raw) {
    if (c == ',' || c == '|') {
      items.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  items.push_back(cur);
  return items;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

void replace_all(std::string& s, std::string_view what, const std::string& with) {
  std::size_t pos = 0;
  while ((pos = s.find(what, pos)) != std::string::npos) {
    s.replace(pos, what.size(), with);
    pos += with.size();
  }
}

const std::vector<std::string> kTemplates[] = {
    {"What is the value in the column {column name} of sample row {row number}?",
     "Can you tell me the value of the column {column name} in sample row {row number}?",
     "In sample row {row number}, what is the value for the column {column name}?"},
    {"In sample row {row number}, which columns contain the value {cell value}?",
     "Can you identify the columns in sample row {row number} that have the value {cell value}?",
     "Which columns in sample row {row number} are associated with the value {cell value}?"},
    {"Which rows in the column {column name} have a value of {cell value}?",
     "Can you identify the sample rows where the column {column name} equals {cell value}?",
     "In the column {column name}, which rows contain the value {cell value}?"},
    {"What are the distinct values in the column {column name}?",
     "Could you list the unique values present in the column {column name}?",
     "In the column {column name}, what various values can be found?"},
    {"What are the values of each cell in row {row number} of the sample?",
     "Could you provide the cell values for each column in sample row {row number}?",
     "In sample row {row number}, what are the respective cell values?"},
};

Slots draw_slots(const table::Table& t, Task task, std::mt19937_64& rng) {
  Slots s;
  switch (task) {
    case Task::kCellLocation:
      s.row = uniform_index(rng, t.n_rows());
      s.col = uniform_index(rng, t.n_cols());
      break;
    case Task::kColumnLookup:
      s.row = uniform_index(rng, t.n_rows());
      s.value = t.body_text(s.row, uniform_index(rng, t.n_cols()));
      break;
    case Task::kRowLookup:
      s.col = uniform_index(rng, t.n_cols());
      s.value = t.body_text(uniform_index(rng, t.n_rows()), s.col);
      break;
    case Task::kColumnComprehension:
      s.col = uniform_index(rng, t.n_cols());
      break;
    case Task::kRowComprehension:
      s.row = uniform_index(rng, t.n_rows());
      break;
  }
  return s;
}

Sample make_sample(const NamedTable& nt, Task task, int tmpl, const Slots& slots, Split split) {
  Sample s;
  s.sample_id = nt.id + "/" + task_name(task) + "/" + std::to_string(tmpl);
  s.table_id = nt.id;
  s.task = task;
  s.template_id = tmpl;
  s.question = render_question(nt.table, task, tmpl, slots);
  s.answer = answer_for(nt.table, task, slots);
  s.split = split;
  s.slots = slots;
  return s;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

template <typename F>
void for_each_record(const std::filesystem::path& path, F&& f) {
  auto in = open_in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
      f(j);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

std::string read_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const char* task_name(Task t) {
  switch (t) {
    case Task::kCellLocation: return "cell_location";
    case Task::kColumnLookup: return "column_lookup";
    case Task::kRowLookup: return "row_lookup";
    case Task::kColumnComprehension: return "column_comprehension";
    case Task::kRowComprehension: return "row_comprehension";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  for (Task t : kAllTasks) {
    if (s == task_name(t)) return t;
  }
  fail(ErrorCode::kInvalidArgument, "unknown task '" + s + "'");
}

bool is_multi_valued(Task t) { return t != Task::kCellLocation; }

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  fail(ErrorCode::kInvalidArgument, "unknown split '" + s + "'");
}

const std::vector<std::string>& templates(Task t) { return kTemplates[static_cast<int>(t)]; }

std::string Sample::answer_text() const { return join(answer, ", "); }

std::string render_question(const table::Table& t, Task task, int template_id, const Slots& slots) {
  const auto& ts = templates(task);
  if (template_id < 0 || template_id >= static_cast<int>(ts.size())) {
    fail(ErrorCode::kInvalidArgument, "template id " + std::to_string(template_id) + " out of range");
  }
  std::string q = ts[static_cast<std::size_t>(template_id)];
  replace_all(q, "{row number}", std::to_string(slots.row));
  if (q.find("{column name}") != std::string::npos) replace_all(q, "{column name}", t.column_name(slots.col));
  replace_all(q, "{cell value}", slots.value);
  return q;
}

std::vector<std::string> answer_for(const table::Table& t, Task task, const Slots& s) {
  std::vector<std::string> out;
  switch (task) {
    case Task::kCellLocation:
      out.push_back(t.body_text(s.row, s.col));
      break;
    case Task::kColumnLookup:
      for (std::size_t c = 0; c < t.n_cols(); ++c) {
        if (t.body_text(s.row, c) == s.value) out.push_back(t.column_name(c));
      }
      break;
    case Task::kRowLookup:
      for (std::size_t r = 0; r < t.n_rows(); ++r) {
        if (t.body_text(r, s.col) == s.value) out.push_back(std::to_string(r));
      }
      break;
    case Task::kColumnComprehension: {
      std::set<std::string> seen;
      for (std::size_t r = 0; r < t.n_rows(); ++r) {
        const auto& v = t.body_text(r, s.col);
        if (seen.insert(v).second) out.push_back(v);
      }
      break;
    }
    case Task::kRowComprehension:
      for (std::size_t c = 0; c < t.n_cols(); ++c) out.push_back(t.body_text(s.row, c));
      break;
  }
  return out;
}

std::vector<Sample> Dataset::select(Split s) const {
  std::vector<Sample> out;
  for (const auto& x : samples) {
    if (x.split == s) out.push_back(x);
  }
  return out;
}

Dataset generate_dataset(const Corpus& corpus, std::uint64_t seed) {
  if (corpus.empty()) fail(ErrorCode::kEmptyInput, "generate_dataset: empty corpus");
  Dataset ds;
  ds.seed = seed;
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 split_rng(seed);
  shuffle(std::span(order), split_rng);
  const std::size_t n = corpus.size();
  const std::size_t n_train = n * 6 / 10;
  const std::size_t n_valid = n * 2 / 10;
  for (std::size_t k = 0; k < n; ++k) {
    const Split s = k < n_train ? Split::kTrain : k < n_train + n_valid ? Split::kValid : Split::kTest;
    if (!ds.splits.emplace(corpus[order[k]].id, s).second) {
      fail(ErrorCode::kInvalidArgument, "generate_dataset: duplicate table id '" + corpus[order[k]].id + "'");
    }
  }
  for (const auto& nt : corpus) {
    if (nt.table.n_rows() == 0 || nt.table.n_cols() == 0) {
      fail(ErrorCode::kInvalidArgument, "generate_dataset: table '" + nt.id + "' is empty");
    }
    std::mt19937_64 rng(table_seed(seed, nt.id, 1));
    for (Task task : kAllTasks) {
      for (int tmpl = 0; tmpl < 3; ++tmpl) {
        ds.samples.push_back(make_sample(nt, task, tmpl, draw_slots(nt.table, task, rng), ds.splits.at(nt.id)));
      }
    }
  }
  return ds;
}

const PermutationRecord* PermutedTestSet::record(const std::string& table_id) const {
  for (const auto& r : records) {
    if (r.table_id == table_id) return &r;
  }
  return nullptr;
}

PermutedTestSet permute_test_set(const Dataset& ds, const Corpus& corpus, std::uint64_t seed, bool remap) {
  PermutedTestSet out;
  out.remap = remap;
  std::map<std::string, std::size_t> index;
  for (const auto& nt : corpus) {
    const auto it = ds.splits.find(nt.id);
    if (it == ds.splits.end() || it->second != Split::kTest) continue;
    const std::uint64_t s = table_seed(seed, nt.id, 2);
    std::mt19937_64 rng(s);
    PermutationRecord rec{nt.id, table::random_permutation(nt.table, rng), s};
    index[nt.id] = out.tables.size();
    out.tables.push_back(NamedTable{nt.id, table::permute_table(nt.table, rec.perm)});
    out.records.push_back(std::move(rec));
  }
  for (const auto& x : ds.samples) {
    if (x.split != Split::kTest) continue;
    const auto it = index.find(x.table_id);
    if (it == index.end()) fail(ErrorCode::kInvalidArgument, "permute_test_set: table '" + x.table_id + "' not in corpus");
    const auto& perm = out.records[it->second].perm;
    const auto inv = perm.inverse();
    Slots slots = x.slots;
    if (remap) slots.row = inv.row_perm[slots.row];
    // Column slots always follow their header: the name does not change.
    slots.col = inv.col_perm[slots.col];
    Sample p = make_sample(out.tables[it->second], x.task, x.template_id, slots, Split::kTest);
    p.sample_id = x.sample_id;
    out.samples.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> normalize_answer(const std::string& raw, Task task) {
  if (!is_multi_valued(task)) return {collapse(lower(raw))};
  std::vector<std::string> items;
  for (const auto& it : split_items(raw)) {
    auto n = collapse(lower(it));
    if (!n.empty()) items.push_back(std::move(n));
  }
  return items;
}

bool answers_match(const std::string& a, const std::string& b, Task task) {
  auto x = normalize_answer(a, task);
  auto y = normalize_answer(b, task);
  if (task == Task::kCellLocation || task == Task::kRowComprehension) return x == y;
  const std::set<std::string> sx(x.begin(), x.end());
  const std::set<std::string> sy(y.begin(), y.end());
  return sx == sy;
}

std::string map_prediction_back(const std::string& raw, Task task, const table::Permutation& perm) {
  if (task == Task::kRowLookup) {
    auto items = split_items(raw);
    for (auto& it : items) {
      const auto n = collapse(it);
      std::size_t r = 0;
      const auto [p, ec] = std::from_chars(n.data(), n.data() + n.size(), r);
      if (ec == std::errc() && p == n.data() + n.size() && !n.empty() && r < perm.row_perm.size()) {
        it = std::to_string(perm.row_perm[r]);
      }
    }
    return join(items, ", ");
  }
  if (task == Task::kRowComprehension) {
    auto items = split_items(raw);
    if (items.size() != perm.col_perm.size()) return raw;
    std::vector<std::string> back(items.size());
    for (std::size_t j = 0; j < items.size(); ++j) back[perm.col_perm[j]] = collapse(items[j]);
    return join(back, ", ");
  }
  return raw;
}

Scores score(const std::vector<Sample>& test, const Predictions& preds, const PermutedTestSet* permuted,
             const Predictions* permuted_preds) {
  Scores sc;
  std::size_t total = 0, correct = 0;
  for (const auto& s : test) {
    auto& ts = sc.per_task[task_name(s.task)];
    ++ts.total;
    ++total;
    const auto it = preds.find(s.sample_id);
    if (it == preds.end()) {
      sc.missing.push_back(s.sample_id);
      continue;
    }
    if (answers_match(it->second, s.answer_text(), s.task)) {
      ++ts.correct;
      ++correct;
    }
  }
  sc.direct = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  if (permuted == nullptr || permuted_preds == nullptr) return sc;
  sc.has_permutation = true;
  std::map<std::string, const Sample*> originals;
  for (const auto& s : test) originals[s.sample_id] = &s;
  std::size_t ptotal = 0, pcorrect = 0, pairs = 0, consistent = 0;
  for (const auto& s : permuted->samples) {
    auto& ts = sc.per_task[task_name(s.task)];
    ++ts.perm_total;
    ++ptotal;
    const auto pit = permuted_preds->find(s.sample_id);
    if (pit == permuted_preds->end()) {
      sc.missing.push_back("permuted:" + s.sample_id);
    } else if (answers_match(pit->second, s.answer_text(), s.task)) {
      ++ts.perm_correct;
      ++pcorrect;
    }
    const auto oit = originals.find(s.sample_id);
    if (oit == originals.end()) continue;
    ++ts.pairs;
    ++pairs;
    const auto orig = preds.find(s.sample_id);
    if (orig == preds.end() || pit == permuted_preds->end()) continue;
    std::string mapped = pit->second;
    if (permuted->remap) {
      if (const auto* rec = permuted->record(s.table_id)) mapped = map_prediction_back(pit->second, s.task, rec->perm);
    }
    if (answers_match(orig->second, mapped, s.task)) {
      ++ts.consistent;
      ++consistent;
    }
  }
  sc.permutation = ptotal ? static_cast<double>(pcorrect) / static_cast<double>(ptotal) : 0.0;
  sc.robustness = pairs ? static_cast<double>(consistent) / static_cast<double>(pairs) : 0.0;
  return sc;
}

// --- files ------------------------------------------------------------------

void write_samples(const std::vector<Sample>& samples, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& s : samples) {
    Json j;
    j["sample_id"] = s.sample_id;
    j["table_id"] = s.table_id;
    j["task"] = task_name(s.task);
    j["template_id"] = s.template_id;
    j["question"] = s.question;
    j["answer"] = s.answer_text();
    j["answer_items"] = s.answer;
    j["split"] = split_name(s.split);
    j["slots"] = Json{{"row", s.slots.row}, {"col", s.slots.col}, {"value", s.slots.value}};
    out << j.dump() << '\n';
  }
}

std::vector<Sample> read_samples(const std::filesystem::path& path) {
  std::vector<Sample> out;
  for_each_record(path, [&](const Json& j) {
    Sample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.table_id = j.at("table_id").get<std::string>();
    s.task = parse_task(j.at("task").get<std::string>());
    s.template_id = j.at("template_id").get<int>();
    s.question = j.at("question").get<std::string>();
    s.answer = j.at("answer_items").get<std::vector<std::string>>();
    s.split = parse_split(j.at("split").get<std::string>());
    const auto& sl = j.at("slots");
    s.slots = Slots{sl.at("row").get<std::size_t>(), sl.at("col").get<std::size_t>(), sl.at("value").get<std::string>()};
    out.push_back(std::move(s));
  });
  return out;
}

void write_permutations(const std::vector<PermutationRecord>& records, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& r : records) {
    Json j;
    j["table_id"] = r.table_id;
    j["row_perm"] = r.perm.row_perm;
    j["col_perm"] = r.perm.col_perm;
    j["seed"] = r.seed;
    out << j.dump() << '\n';
  }
}

std::vector<PermutationRecord> read_permutations(const std::filesystem::path& path) {
  std::vector<PermutationRecord> out;
  for_each_record(path, [&](const Json& j) {
    PermutationRecord r;
    r.table_id = j.at("table_id").get<std::string>();
    r.perm.row_perm = j.at("row_perm").get<std::vector<std::size_t>>();
    r.perm.col_perm = j.at("col_perm").get<std::vector<std::size_t>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    out.push_back(std::move(r));
  });
  return out;
}

void write_predictions(const Predictions& preds, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& [id, p] : preds) out << Json{{"sample_id", id}, {"prediction", p}}.dump() << '\n';
}

Predictions read_predictions(const std::filesystem::path& path) {
  Predictions out;
  for_each_record(path, [&](const Json& j) {
    out[j.at("sample_id").get<std::string>()] = j.at("prediction").get<std::string>();
  });
  return out;
}

Corpus load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::kIo, "corpus directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".csv" || ext == ".tsv" || ext == ".tbl")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Corpus corpus;
  for (const auto& f : files) {
    const auto fmt = f.extension() == ".tbl" ? table::Format::kNestedHeader : table::Format::kDelimitedGrid;
    try {
      corpus.push_back(NamedTable{f.stem().string(), table::parse_table(read_file(f), fmt)});
    } catch (const Error& e) {
      fail(e.code(), f.string() + ": " + e.what());
    }
  }
  if (corpus.empty()) fail(ErrorCode::kEmptyInput, "no table files in " + dir.string());
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& nt : corpus) {
    const bool flat = !nt.table.is_hierarchical();
    auto out = open_out(dir / (nt.id + (flat ? ".csv" : ".tbl")));
    out << (flat ? table::write_delimited(nt.table) : table::write_nested(nt.table));
  }
}

// --- synthetic corpus ---------------------------------------------------------

namespace {

struct ColumnKind {
  const char* name;
  std::vector<std::string> values;
};

const std::vector<ColumnKind>& column_kinds() {
  static const std::vector<ColumnKind> kinds{
      {"name", {"Bob", "Ann", "Carl", "Dina", "Eve", "Finn", "Gia", "Hugo"}},
      {"country", {"Canada", "Peru", "Kenya", "Norway", "Chile", "Japan", "Egypt", "Spain"}},
      {"city", {"Oslo", "Lima", "Cairo", "Tokyo", "Paris", "Quito", "Dakar", "Perth"}},
      {"color", {"red", "blue", "green", "amber", "ivory", "teal", "coral", "slate"}},
      {"animal", {"otter", "heron", "lynx", "bison", "gecko", "ibis", "moose", "tapir"}},
      {"fruit", {"apple", "mango", "plum", "lemon", "guava", "kiwi", "peach", "fig"}},
      {"sport", {"rugby", "tennis", "polo", "golf", "hockey", "rowing", "judo", "cricket"}},
      {"team", {"Lions", "Hawks", "Bears", "Sharks", "Wolves", "Eagles", "Foxes", "Owls"}},
      {"year", {"1998", "2001", "2004", "2007", "2010", "2013", "2016", "2019"}},
      {"score", {"12", "27", "35", "48", "56", "63", "79", "94"}},
      {"metal", {"iron", "zinc", "gold", "tin", "lead", "nickel", "cobalt", "copper"}},
      {"planet", {"Mars", "Venus", "Saturn", "Jupiter", "Neptune", "Uranus", "Mercury", "Pluto"}},
  };
  return kinds;
}

const std::vector<std::string>& group_labels() {
  static const std::vector<std::string> labels{"north", "south", "east", "west", "early", "late", "home", "away"};
  return labels;
}

}  // namespace

Corpus generate_corpus(const CorpusOptions& opt, std::uint64_t seed) {
  if (opt.tables == 0) fail(ErrorCode::kInvalidArgument, "generate_corpus: zero tables requested");
  const auto& kinds = column_kinds();
  if (opt.min_rows == 0 || opt.min_cols == 0 || opt.min_rows > opt.max_rows || opt.min_cols > opt.max_cols ||
      opt.max_cols > kinds.size()) {
    fail(ErrorCode::kInvalidArgument, "generate_corpus: invalid size range");
  }
  std::vector<std::string> shared;
  for (const auto& k : kinds) shared.insert(shared.end(), k.values.begin(), k.values.end());
  std::mt19937_64 rng(seed);
  Corpus corpus;
  const std::size_t width = std::max<std::size_t>(4, std::to_string(opt.tables - 1).size());
  for (std::size_t i = 0; i < opt.tables; ++i) {
    const std::size_t rows = opt.min_rows + uniform_index(rng, opt.max_rows - opt.min_rows + 1);
    const std::size_t cols = opt.min_cols + uniform_index(rng, opt.max_cols - opt.min_cols + 1);
    std::vector<std::size_t> pick(kinds.size());
    for (std::size_t k = 0; k < pick.size(); ++k) pick[k] = k;
    shuffle(std::span(pick), rng);
    pick.resize(cols);
    std::vector<std::vector<std::string>> body(rows, std::vector<std::string>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const auto& pool = opt.typed_columns ? kinds[pick[c]].values : shared;
        body[r][c] = pool[uniform_index(rng, pool.size())];
      }
    }
    const bool nested = cols >= 2 && uniform_unit(rng) < opt.nested_fraction;
    std::string id = std::to_string(i);
    id = "t" + std::string(width - id.size(), '0') + id;
    if (!nested) {
      std::vector<std::string> header;
      for (std::size_t c : pick) header.push_back(kinds[c].name);
      corpus.push_back(NamedTable{id, table::Table::flat(header, body)});
      continue;
    }
    // Two groups of adjacent columns under distinct labels.
    const std::size_t cut = 1 + uniform_index(rng, cols - 1);
    std::vector<std::string> labels = group_labels();
    shuffle(std::span(labels), rng);
    std::vector<table::HeaderNode> roots(2);
    roots[0].text = labels[0];
    roots[1].text = labels[1];
    for (std::size_t c = 0; c < cols; ++c) roots[c < cut ? 0 : 1].children.push_back({kinds[pick[c]].name, {}});
    corpus.push_back(NamedTable{id, table::TableBuilder::build(roots, {}, body, std::nullopt)});
  }
  return corpus;
}

}  // namespace hypertab::qa
