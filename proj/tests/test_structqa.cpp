#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hypertab/error.hpp"
#include "hypertab/structqa.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

namespace hypertab::qa {
namespace {

namespace fs = std::filesystem;
using table::Table;
using testing::oracle_agrees;

Table demo() { return table::parse_table("name,country\nBob,Canada\nAnn,US\n", table::Format::kDelimitedGrid); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("hypertab_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST(Templates, ThreePerTask) {
  for (Task t : kAllTasks) {
    EXPECT_EQ(templates(t).size(), 3u);
    EXPECT_EQ(parse_task(task_name(t)), t);
  }
  EXPECT_EQ(testing::error_code_of([] { parse_task("cell"); }), ErrorCode::kInvalidArgument);
  EXPECT_TRUE(is_multi_valued(Task::kRowLookup));
  EXPECT_FALSE(is_multi_valued(Task::kCellLocation));
}

TEST(RenderQuestion, DemoCellLocation) {
  const Table t = demo();
  EXPECT_EQ(render_question(t, Task::kCellLocation, 0, {1, 1, ""}),
            "What is the value in the column country of sample row 1?");
  EXPECT_EQ(answer_for(t, Task::kCellLocation, {1, 1, ""}), std::vector<std::string>{"US"});
}

TEST(AnswerFor, Oracles) {
  const Table t = Table::flat({"name", "country", "home"},
                              {{"Bob", "Canada", "Canada"}, {"Ann", "US", "Peru"}, {"Cy", "Canada", "US"}});
  EXPECT_EQ(answer_for(t, Task::kColumnComprehension, {0, 1, ""}), (std::vector<std::string>{"Canada", "US"}));
  EXPECT_EQ(answer_for(t, Task::kColumnLookup, {0, 0, "Canada"}), (std::vector<std::string>{"country", "home"}));
  EXPECT_EQ(answer_for(t, Task::kRowLookup, {0, 1, "Canada"}), (std::vector<std::string>{"0", "2"}));
  EXPECT_EQ(answer_for(t, Task::kRowComprehension, {1, 0, ""}), (std::vector<std::string>{"Ann", "US", "Peru"}));
  Sample s;
  s.answer = {"0", "2"};
  EXPECT_EQ(s.answer_text(), "0, 2");
}

TEST(AnswerFor, HierarchicalColumnNamesUsePaths) {
  const Table t = table::parse_table("columns:\n  2020\n    Q1\n    Q2\n---\n1,2\n3,1\n", table::Format::kNestedHeader);
  EXPECT_EQ(answer_for(t, Task::kColumnLookup, {1, 0, "1"}), std::vector<std::string>{"2020 > Q2"});
  EXPECT_EQ(render_question(t, Task::kColumnComprehension, 0, {0, 0, ""}),
            "What are the distinct values in the column 2020 > Q1?");
}

Corpus corpus_of(std::size_t n, std::uint64_t seed = 5) {
  CorpusOptions opt;
  opt.tables = n;
  return generate_corpus(opt, seed);
}

TEST(GenerateDataset, FiveHundredTables) {
  const Corpus corpus = corpus_of(500);
  const Dataset ds = generate_dataset(corpus, 7);
  EXPECT_EQ(ds.samples.size(), 7500u);
  std::map<Task, std::size_t> per_task;
  for (const auto& s : ds.samples) ++per_task[s.task];
  for (Task t : kAllTasks) EXPECT_EQ(per_task[t], 1500u);
  EXPECT_EQ(ds.select(Split::kTrain).size(), 4500u);
  EXPECT_EQ(ds.select(Split::kValid).size(), 1500u);
  EXPECT_EQ(ds.select(Split::kTest).size(), 1500u);
}

TEST(GenerateDataset, EveryAnswerPassesTheIndependentOracle) {
  const Corpus corpus = corpus_of(200, 9);
  const Dataset ds = generate_dataset(corpus, 3);
  std::map<std::string, const Table*> by_id;
  for (const auto& nt : corpus) by_id[nt.id] = &nt.table;
  for (const auto& s : ds.samples) {
    std::string why;
    EXPECT_TRUE(oracle_agrees(*by_id.at(s.table_id), s, &why)) << s.sample_id << ": " << why;
  }
}

TEST(GenerateDataset, SplitIntegrity) {
  for (std::size_t n : {1u, 2u, 7u, 10u, 101u}) {
    const Corpus corpus = corpus_of(n, n);
    const Dataset ds = generate_dataset(corpus, 11);
    std::map<Split, std::size_t> tables;
    for (const auto& [id, split] : ds.splits) ++tables[split];
    EXPECT_EQ(ds.splits.size(), n);
    EXPECT_EQ(tables[Split::kTrain], n * 6 / 10) << n;
    EXPECT_EQ(tables[Split::kValid], n * 2 / 10) << n;
    EXPECT_EQ(tables[Split::kTest], n - n * 6 / 10 - n * 2 / 10) << n;
    std::map<std::string, std::set<Split>> seen;
    std::map<std::string, std::size_t> count;
    for (const auto& s : ds.samples) {
      seen[s.table_id].insert(s.split);
      ++count[s.table_id];
      EXPECT_EQ(s.split, ds.splits.at(s.table_id));
    }
    for (const auto& [id, splits] : seen) EXPECT_EQ(splits.size(), 1u) << id;
    for (const auto& [id, c] : count) EXPECT_EQ(c, 15u) << id;
  }
}

TEST(GenerateDataset, ByteDeterministic) {
  TempDir dir("structqa_det");
  const Corpus corpus = corpus_of(50);
  write_samples(generate_dataset(corpus, 4).samples, dir.path / "a.jsonl");
  write_samples(generate_dataset(corpus_of(50), 4).samples, dir.path / "b.jsonl");
  write_samples(generate_dataset(corpus, 5).samples, dir.path / "c.jsonl");
  EXPECT_EQ(slurp(dir.path / "a.jsonl"), slurp(dir.path / "b.jsonl"));
  EXPECT_NE(slurp(dir.path / "a.jsonl"), slurp(dir.path / "c.jsonl"));
}

TEST(GenerateDataset, EmptyCorpusIsAnError) {
  EXPECT_EQ(testing::error_code_of([] { generate_dataset({}, 1); }), ErrorCode::kEmptyInput);
}

TEST(GenerateDataset, LookupValuesComeFromTheTable) {
  const Corpus corpus = corpus_of(30);
  for (const auto& s : generate_dataset(corpus, 2).samples) {
    if (s.task == Task::kColumnLookup || s.task == Task::kRowLookup) {
      EXPECT_FALSE(s.answer.empty());
    }
  }
}

TEST(Corpus, DirectoryRoundTrip) {
  TempDir dir("structqa_corpus");
  CorpusOptions opt;
  opt.tables = 12;
  opt.nested_fraction = 0.5;
  const Corpus corpus = generate_corpus(opt, 8);
  write_corpus(corpus, dir.path);
  const Corpus back = load_corpus(dir.path);
  ASSERT_EQ(back.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(back[i].id, corpus[i].id);
    EXPECT_EQ(table::serialize_table(back[i].table), table::serialize_table(corpus[i].table));
  }
  EXPECT_THROW(load_corpus(dir.path / "missing"), Error);
}

// --- permuted test set ------------------------------------------------------------

Dataset single_table_dataset(const Table& t) {
  const Corpus corpus{{"t0", t}};
  Dataset ds = generate_dataset(corpus, 1);
  for (auto& s : ds.samples) s.split = Split::kTest;
  ds.splits["t0"] = Split::kTest;
  return ds;
}

TEST(PermuteTestSet, IdentityDrawReproducesSamples) {
  // A 1x1 table admits only the identity permutation.
  const Table t = Table::flat({"x"}, {{"7"}});
  const Dataset ds = single_table_dataset(t);
  const PermutedTestSet p = permute_test_set(ds, {{"t0", t}}, 3);
  ASSERT_EQ(p.records.size(), 1u);
  EXPECT_TRUE(p.records[0].perm.is_identity());
  EXPECT_EQ(p.samples, ds.samples);
}

TEST(PermuteTestSet, RowSwapOnDemoTable) {
  const Table t = demo();
  Dataset ds = single_table_dataset(t);
  Sample us;
  us.sample_id = "us";
  us.table_id = "t0";
  us.question = render_question(t, Task::kCellLocation, 0, {1, 1, ""});
  us.answer = {"US"};
  us.split = Split::kTest;
  us.slots = {1, 1, ""};
  ds.samples.push_back(us);
  // Find a seed whose draw swaps the rows and keeps the columns.
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const PermutedTestSet p = permute_test_set(ds, {{"t0", t}}, seed);
    if (p.records[0].perm != table::Permutation{{1, 0}, {0, 1}}) continue;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      const Sample& a = ds.samples[i];
      const Sample& b = p.samples[i];
      EXPECT_EQ(a.sample_id, b.sample_id);
      if (a.sample_id == "us") {
        EXPECT_EQ(b.question, "What is the value in the column country of sample row 0?");
        EXPECT_EQ(b.slots.row, 0u);
        EXPECT_EQ(b.answer, std::vector<std::string>{"US"});
        EXPECT_EQ(b.question, render_question(p.tables[0].table, Task::kCellLocation, a.template_id, {0, 1, ""}));
      }
      if (a.task == Task::kCellLocation || a.task == Task::kRowComprehension) {
        EXPECT_EQ(a.answer, b.answer);
      }
    }
    return;
  }
  FAIL() << "no seed drew the row swap";
}

TEST(PermuteTestSetProperty, RowLookupAnswersMapThroughRowPerm) {
  const Corpus corpus = corpus_of(120, 21);
  const Dataset ds = generate_dataset(corpus, 6);
  const PermutedTestSet p = permute_test_set(ds, corpus, 9);
  std::map<std::string, Sample> original;
  for (const auto& s : ds.select(Split::kTest)) original[s.sample_id] = s;
  std::map<std::string, const Table*> tables;
  for (const auto& nt : p.tables) tables[nt.id] = &nt.table;
  ASSERT_EQ(p.samples.size(), original.size());
  std::size_t checked = 0;
  for (const auto& s : p.samples) {
    const Sample& o = original.at(s.sample_id);
    const auto& perm = p.record(s.table_id)->perm;
    std::string why;
    EXPECT_TRUE(oracle_agrees(*tables.at(s.table_id), s, &why)) << why;
    if (s.task == Task::kCellLocation) {
      EXPECT_EQ(s.answer, o.answer);
    }
    if (s.task != Task::kRowLookup) continue;
    // Permuted row r holds original row row_perm[r].
    std::set<std::string> back;
    for (const auto& r : s.answer) back.insert(std::to_string(perm.row_perm[std::stoul(r)]));
    EXPECT_EQ(back, std::set<std::string>(o.answer.begin(), o.answer.end()));
    ++checked;
  }
  EXPECT_GT(checked, 50u);
}

TEST(PermuteTestSet, WithoutRemapRowNumbersStay) {
  const Corpus corpus = corpus_of(40, 22);
  const Dataset ds = generate_dataset(corpus, 6);
  const PermutedTestSet p = permute_test_set(ds, corpus, 9, false);
  EXPECT_FALSE(p.remap);
  std::map<std::string, Sample> original;
  for (const auto& s : ds.select(Split::kTest)) original[s.sample_id] = s;
  for (const auto& s : p.samples) {
    if (s.task == Task::kCellLocation || s.task == Task::kRowComprehension) {
      EXPECT_EQ(s.slots.row, original.at(s.sample_id).slots.row);
    }
  }
}

TEST(PermuteTestSet, RecordsAreSeeded) {
  const Corpus corpus = corpus_of(40, 23);
  const Dataset ds = generate_dataset(corpus, 6);
  const auto a = permute_test_set(ds, corpus, 4);
  const auto b = permute_test_set(ds, corpus, 4);
  ASSERT_EQ(a.records.size(), b.records.size());
  std::map<std::string, const Table*> tables;
  for (const auto& nt : corpus) tables[nt.id] = &nt.table;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].perm, b.records[i].perm);
    EXPECT_TRUE(table::is_allowed_permutation(*tables.at(a.records[i].table_id), a.records[i].perm));
  }
  EXPECT_EQ(a.samples, b.samples);
}

// --- normalization and scoring ------------------------------------------------------

TEST(NormalizeAnswer, Examples) {
  EXPECT_EQ(normalize_answer(" Canada ", Task::kCellLocation), std::vector<std::string>{"canada"});
  EXPECT_EQ(normalize_answer("New   York", Task::kCellLocation), std::vector<std::string>{"new york"});
  EXPECT_TRUE(answers_match("US, Canada", "canada, us", Task::kColumnComprehension));
  EXPECT_TRUE(answers_match("Bob | Canada", "bob, canada", Task::kRowComprehension));
  EXPECT_FALSE(answers_match("Canada, Bob", "bob, canada", Task::kRowComprehension));
  EXPECT_TRUE(answers_match("2, 0", "0,2", Task::kRowLookup));
  EXPECT_EQ(normalize_answer("a,, b,", Task::kColumnLookup), (std::vector<std::string>{"a", "b"}));
}

// Predictions straight from the gold answers.
Predictions oracle_predictions(const std::vector<Sample>& samples) {
  Predictions p;
  for (const auto& s : samples) p[s.sample_id] = s.answer_text();
  return p;
}

struct Bench {
  Corpus corpus;
  Dataset ds;
  std::vector<Sample> test;
  PermutedTestSet permuted;
};

Bench bench() {
  Bench b;
  b.corpus = corpus_of(60, 31);
  b.ds = generate_dataset(b.corpus, 7);
  b.test = b.ds.select(Split::kTest);
  b.permuted = permute_test_set(b.ds, b.corpus, 8);
  return b;
}

TEST(Score, OraclePredictorIsPerfect) {
  const Bench b = bench();
  const Predictions direct = oracle_predictions(b.test);
  const Predictions perm = oracle_predictions(b.permuted.samples);
  const Scores s = score(b.test, direct, &b.permuted, &perm);
  EXPECT_TRUE(s.has_permutation);
  EXPECT_EQ(s.direct, 1.0);
  EXPECT_EQ(s.permutation, 1.0);
  EXPECT_EQ(s.robustness, 1.0);
  EXPECT_TRUE(s.missing.empty());
}

TEST(Score, ConstantPredictorIsRobustButWrong) {
  const Bench b = bench();
  Predictions direct, perm;
  for (const auto& s : b.test) direct[s.sample_id] = "x";
  for (const auto& s : b.permuted.samples) perm[s.sample_id] = "x";
  const Scores s = score(b.test, direct, &b.permuted, &perm);
  EXPECT_EQ(s.robustness, 1.0);
  EXPECT_LT(s.direct, 0.01);
  EXPECT_LT(s.permutation, 0.01);
}

TEST(Score, IndexEchoAdversary) {
  // Correct on the original tables; on the permuted side it repeats the
  // original answers, so its accuracy there equals the fraction of samples
  // whose gold answer did not change.
  const Bench b = bench();
  const Predictions direct = oracle_predictions(b.test);
  Predictions echo;
  std::size_t unchanged = 0;
  std::map<std::string, const Sample*> permuted;
  for (const auto& s : b.permuted.samples) permuted[s.sample_id] = &s;
  for (const auto& s : b.test) {
    echo[s.sample_id] = s.answer_text();
    if (answers_match(s.answer_text(), permuted.at(s.sample_id)->answer_text(), s.task)) ++unchanged;
  }
  const Scores s = score(b.test, direct, &b.permuted, &echo);
  EXPECT_EQ(s.direct, 1.0);
  EXPECT_DOUBLE_EQ(s.permutation, static_cast<double>(unchanged) / static_cast<double>(b.test.size()));
  EXPECT_LT(s.permutation, s.direct);
}

TEST(Score, MissingPredictionsCountAsWrong) {
  const Bench b = bench();
  Predictions direct = oracle_predictions(b.test);
  direct.erase(b.test[0].sample_id);
  const Scores s = score(b.test, direct);
  EXPECT_FALSE(s.has_permutation);
  EXPECT_EQ(s.missing, std::vector<std::string>{b.test[0].sample_id});
  EXPECT_DOUBLE_EQ(s.direct, 1.0 - 1.0 / static_cast<double>(b.test.size()));
  std::size_t total = 0;
  for (const auto& [task, ts] : s.per_task) total += ts.total;
  EXPECT_EQ(total, b.test.size());
}

TEST(Score, RobustnessPairsMissingSideAsInconsistent) {
  const Bench b = bench();
  const Predictions direct = oracle_predictions(b.test);
  Predictions perm = oracle_predictions(b.permuted.samples);
  perm.erase(b.test[0].sample_id);
  const Scores s = score(b.test, direct, &b.permuted, &perm);
  EXPECT_DOUBLE_EQ(s.robustness, 1.0 - 1.0 / static_cast<double>(b.test.size()));
}

TEST(MapPredictionBack, RowIndicesAndRowListings) {
  const table::Permutation p{{2, 0, 1}, {1, 0}};
  // New row 0 holds old row 2.
  EXPECT_EQ(map_prediction_back("0, 2", Task::kRowLookup, p), "2, 1");
  EXPECT_EQ(map_prediction_back("b, a", Task::kRowComprehension, p), "a, b");
  EXPECT_EQ(map_prediction_back("Oslo", Task::kCellLocation, p), "Oslo");
  EXPECT_EQ(map_prediction_back("zero", Task::kRowLookup, p), "zero");
}

// --- files --------------------------------------------------------------------------

TEST(Files, SamplesRoundTrip) {
  TempDir dir("structqa_files");
  const Bench b = bench();
  write_samples(b.ds.samples, dir.path / "s.jsonl");
  EXPECT_EQ(read_samples(dir.path / "s.jsonl"), b.ds.samples);
  write_permutations(b.permuted.records, dir.path / "p.jsonl");
  const auto recs = read_permutations(dir.path / "p.jsonl");
  ASSERT_EQ(recs.size(), b.permuted.records.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].table_id, b.permuted.records[i].table_id);
    EXPECT_EQ(recs[i].perm, b.permuted.records[i].perm);
    EXPECT_EQ(recs[i].seed, b.permuted.records[i].seed);
  }
  const Predictions preds{{"a", "x, y"}, {"b", "\"quoted\"\n"}};
  write_predictions(preds, dir.path / "pred.jsonl");
  EXPECT_EQ(read_predictions(dir.path / "pred.jsonl"), preds);
}

TEST(Files, SampleRecordFields) {
  TempDir dir("structqa_fields");
  write_samples({generate_dataset({{"t0", demo()}}, 1).samples[0]}, dir.path / "s.jsonl");
  const std::string line = slurp(dir.path / "s.jsonl");
  for (const char* field : {"\"sample_id\"", "\"table_id\"", "\"task\"", "\"template_id\"", "\"question\"",
                            "\"answer\"", "\"split\""}) {
    EXPECT_NE(line.find(field), std::string::npos) << field;
  }
}

TEST(Files, MalformedRecordsAreParseErrors) {
  TempDir dir("structqa_bad");
  std::ofstream(dir.path / "bad.jsonl") << "{\"sample_id\": 3}\n";
  EXPECT_EQ(testing::error_code_of([&] { read_samples(dir.path / "bad.jsonl"); }), ErrorCode::kParse);
  std::ofstream(dir.path / "junk.jsonl") << "not json\n";
  EXPECT_EQ(testing::error_code_of([&] { read_predictions(dir.path / "junk.jsonl"); }), ErrorCode::kParse);
  EXPECT_EQ(testing::error_code_of([&] { read_samples(dir.path / "none.jsonl"); }), ErrorCode::kIo);
}

}  // namespace
}  // namespace hypertab::qa
