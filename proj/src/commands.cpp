#include "hypertab/commands.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hypertab/error.hpp"
#include "hypertab/model.hpp"
#include "hypertab/pipeline.hpp"
#include "hypertab/probe.hpp"

namespace hypertab::cmd {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

const std::string& Args::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) fail(ErrorCode::kInvalidArgument, "missing required option --" + key);
  return it->second.back();
}

std::string Args::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

std::uint64_t Args::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const auto& v = get(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    fail(ErrorCode::kInvalidArgument, "--" + key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double Args::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const auto& v = get(key);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') fail(ErrorCode::kInvalidArgument, "--" + key + ": expected a number, got '" + v + "'");
  return out;
}

bool Args::flag(const std::string& key) const {
  if (!has(key)) return false;
  const auto& v = get(key);
  if (v.empty() || v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  fail(ErrorCode::kInvalidArgument, "--" + key + ": expected true or false, got '" + v + "'");
}

const std::vector<std::string>& Args::all(const std::string& key) const {
  static const std::vector<std::string> none;
  const auto it = values_.find(key);
  return it == values_.end() ? none : it->second;
}

RunConfig resolve_config(const Args& args) {
  RunConfig c = preset(args.get_or("preset", "desk"));
  if (args.has("config")) c = RunConfig::load(args.get("config"));
  for (const auto& kv : args.all("set")) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kInvalidArgument, "--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.has("seed")) c.seed = args.get_u64("seed", c.seed);
  c.encoder.validate();
  c.decoder.validate();
  c.projector().validate();
  return c;
}

fs::path output_dir(const Args& args, const std::string& command) {
  if (args.has("out")) return args.get("out");
  const char* root = std::getenv("HYPERTAB_OUT_ROOT");
  return fs::path(root && *root ? root : "runs") / command;
}

namespace {

void write_json(const Json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

// Claims an output directory. A directory left by an earlier run of the same
// command is cleared; any other non-empty directory is refused, so an output
// path can never wipe an input dataset or model.
class Output {
 public:
  Output(fs::path dir, std::string command, const RunConfig& config)
      : dir_(std::move(dir)), command_(std::move(command)), seed_(config.seed), hash_(config.hash()) {
    if (fs::exists(dir_)) {
      if (!fs::is_directory(dir_)) fail(ErrorCode::kIo, dir_.string() + " exists and is not a directory");
      if (!fs::is_empty(dir_)) {
        const fs::path manifest = dir_ / "manifest.json";
        if (!fs::exists(manifest) || read_json(manifest).value("command", "") != command_) {
          fail(ErrorCode::kIo, "refusing to overwrite " + dir_.string() + ": not an earlier '" + command_ + "' output");
        }
        for (const auto& e : fs::directory_iterator(dir_)) fs::remove_all(e.path());
      }
    }
    fs::create_directories(dir_);
    Json m = header();
    m["complete"] = false;
    write_json(m, dir_ / "manifest.json");
  }

  const fs::path& dir() const { return dir_; }
  fs::path operator/(const std::string& name) const { return dir_ / name; }

  // Final manifest; `extra` fields follow the common ones.
  void finish(const Json& extra) {
    Json m = header();
    m["complete"] = true;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    write_json(m, dir_ / "manifest.json");
  }

  // Leaves the incomplete marker with the failure reason.
  void abandon(const std::string& why) noexcept {
    try {
      Json m = header();
      m["complete"] = false;
      m["error"] = why;
      write_json(m, dir_ / "manifest.json");
    } catch (...) {
    }
  }

 private:
  Json header() const {
    Json m;
    m["command"] = command_;
    m["seed"] = seed_;
    m["config_hash"] = hash_;
    return m;
  }

  fs::path dir_;
  std::string command_;
  std::uint64_t seed_;
  std::string hash_;
};

// Runs `body` and marks the output incomplete when it throws.
template <typename F>
std::string guarded(Output& out, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    out.abandon(e.what());
    throw;
  }
}

void log(const std::string& line) { std::cerr << line << std::endl; }

// --- shared loaders ------------------------------------------------------------

fs::path model_dir(const fs::path& p) {
  if (fs::exists(p / "model" / "config.cfg")) return p / "model";
  if (fs::exists(p / "config.cfg")) return p;
  fail(ErrorCode::kCheckpoint, "no model checkpoint under " + p.string());
}

std::unique_ptr<Model> load_model(const Args& args) {
  if (!args.has("model")) fail(ErrorCode::kInvalidArgument, "missing required option --model (a trained run directory)");
  return Model::load(model_dir(args.get("model")));
}

// The dataset a command works on: --data, else the directory recorded by
// the training run, else the config's synthetic dataset.
DatasetDir dataset_for(const Args& args, const RunConfig& config) {
  if (args.has("data")) return read_dataset_dir(args.get("data"));
  if (args.has("model")) {
    const fs::path manifest = fs::path(args.get("model")) / "manifest.json";
    if (fs::exists(manifest)) {
      const Json m = read_json(manifest);
      const std::string data = m.value("data", "synthetic");
      if (data != "synthetic") return read_dataset_dir(data);
    }
  }
  return synthesize_dataset(config);
}

void write_permuted_dir(const qa::PermutedTestSet& pts, const fs::path& dir) {
  qa::write_permutations(pts.records, dir / "permutations.jsonl");
  qa::write_samples(pts.samples, dir / "samples.jsonl");
  qa::write_corpus(pts.tables, dir / "tables");
}

qa::PermutedTestSet read_permuted_dir(const fs::path& dir) {
  qa::PermutedTestSet pts;
  const Json m = read_json(dir / "manifest.json");
  if (!m.value("complete", false)) fail(ErrorCode::kIo, dir.string() + " is an incomplete permute output");
  pts.remap = m.value("remap", true);
  pts.records = qa::read_permutations(dir / "permutations.jsonl");
  pts.samples = qa::read_samples(dir / "samples.jsonl");
  const auto tables = qa::load_corpus(dir / "tables");
  std::map<std::string, const qa::NamedTable*> by_id;
  for (const auto& nt : tables) by_id[nt.id] = &nt;
  for (const auto& r : pts.records) {
    const auto it = by_id.find(r.table_id);
    if (it == by_id.end()) fail(ErrorCode::kIo, dir.string() + ": no table for permutation record " + r.table_id);
    pts.tables.push_back(*it->second);
  }
  return pts;
}

Json scores_json(const qa::Scores& s) {
  Json j;
  j["direct"] = s.direct;
  if (s.has_permutation) {
    j["permutation"] = s.permutation;
    j["robustness"] = s.robustness;
  }
  j["missing"] = s.missing.size();
  Json per = Json::object();
  for (const auto& [name, t] : s.per_task) {
    Json e;
    e["total"] = t.total;
    e["direct"] = t.total ? static_cast<double>(t.correct) / static_cast<double>(t.total) : 0.0;
    if (s.has_permutation) {
      e["permutation"] = t.perm_total ? static_cast<double>(t.perm_correct) / static_cast<double>(t.perm_total) : 0.0;
      e["robustness"] = t.pairs ? static_cast<double>(t.consistent) / static_cast<double>(t.pairs) : 0.0;
    }
    per[name] = e;
  }
  j["per_task"] = per;
  return j;
}

void write_transcripts(const std::vector<Transcript>& ts, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& t : ts) {
    Json j;
    j["sample_id"] = t.sample_id;
    j["question"] = t.question;
    j["gold"] = t.gold;
    j["prediction"] = t.prediction;
    j["mode"] = t.mode;
    out << j.dump() << "\n";
  }
}

Json curve_json(const std::vector<EpochLog>& curve) {
  Json a = Json::array();
  for (const auto& e : curve) {
    Json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["valid_loss"] = e.valid_loss;
    j["lr"] = e.lr;
    a.push_back(j);
  }
  return a;
}

void write_le_doubles(std::ostream& out, std::span<const double> values) {
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

DatasetDir read_dataset_dir(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json") && !read_json(dir / "manifest.json").value("complete", false)) {
    fail(ErrorCode::kIo, dir.string() + " is an incomplete gen output");
  }
  DatasetDir d;
  d.corpus = qa::load_corpus(dir / "tables");
  d.dataset.samples = qa::read_samples(dir / "samples.jsonl");
  for (const auto& s : d.dataset.samples) d.dataset.splits[s.table_id] = s.split;
  return d;
}

DatasetDir synthesize_dataset(const RunConfig& config) {
  DatasetDir d;
  d.corpus = qa::generate_corpus(config.corpus, config.corpus_seed);
  d.dataset = qa::generate_dataset(d.corpus, config.seed);
  return d;
}

// --- commands --------------------------------------------------------------------

std::string gen(const Args& args) {
  RunConfig config = resolve_config(args);
  if (args.has("synthetic")) config.corpus.tables = args.get_u64("synthetic", config.corpus.tables);
  Output out(output_dir(args, "gen"), "gen", config);
  return guarded(out, [&] {
    const qa::Corpus corpus =
        args.has("tables") ? qa::load_corpus(args.get("tables")) : qa::generate_corpus(config.corpus, config.corpus_seed);
    const auto ds = qa::generate_dataset(corpus, config.seed);
    qa::write_corpus(corpus, out / "tables");
    qa::write_samples(ds.samples, out / "samples.jsonl");
    config.save(out / "config.cfg");
    Json extra;
    extra["source"] = args.has("tables") ? "directory" : "synthetic";
    extra["tables"] = corpus.size();
    extra["samples"] = ds.samples.size();
    Json splits;
    for (auto s : {qa::Split::kTrain, qa::Split::kValid, qa::Split::kTest}) splits[qa::split_name(s)] = ds.select(s).size();
    extra["splits"] = splits;
    out.finish(extra);
    return extra.dump();
  });
}

std::string permute(const Args& args) {
  const RunConfig config = resolve_config(args);
  const auto data = read_dataset_dir(args.get("data"));
  Output out(output_dir(args, "permute"), "permute", config);
  return guarded(out, [&] {
    const bool remap = args.has("no-remap") ? !args.flag("no-remap") : config.remap_permuted;
    const auto pts = qa::permute_test_set(data.dataset, data.corpus, config.seed, remap);
    write_permuted_dir(pts, out.dir());
    Json extra;
    extra["remap"] = remap;
    extra["tables"] = pts.records.size();
    extra["samples"] = pts.samples.size();
    out.finish(extra);
    return extra.dump();
  });
}

std::string train(const Args& args) {
  const RunConfig config = resolve_config(args);
  const auto data = args.has("data") ? read_dataset_dir(args.get("data")) : synthesize_dataset(config);
  Output out(output_dir(args, "train"), "train", config);
  return guarded(out, [&] {
    const auto train_set = filter_tasks(config, data.dataset.select(qa::Split::kTrain));
    const auto valid_set = filter_tasks(config, data.dataset.select(qa::Split::kValid));
    Model model(config, build_vocab(data.corpus, data.dataset.samples));
    const TableIndex index(data.corpus);
    const auto start = std::chrono::steady_clock::now();
    const auto result = train_model(model, index, train_set, valid_set, [&](const EpochLog& e) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::ostringstream line;
      line << "epoch " << e.epoch << " train_loss " << e.train_loss << " valid_loss " << e.valid_loss << " lr "
           << e.lr << " (" << secs << " s)";
      log(line.str());
    });
    model.save(out / "model");
    config.save(out / "config.cfg");
    Json extra;
    extra["data"] = args.has("data") ? Json(fs::absolute(args.get("data")).string()) : Json("synthetic");
    extra["mode"] = dec::mode_name(config.mode);
    extra["parameters"] = model.params().parameter_count();
    extra["train_samples"] = train_set.size();
    extra["valid_samples"] = valid_set.size();
    extra["best_epoch"] = result.best_epoch;
    extra["early_stopped"] = result.early_stopped;
    extra["steps"] = result.steps;
    extra["loss_curve"] = curve_json(result.curve);
    out.finish(extra);
    Json summary;
    summary["best_epoch"] = result.best_epoch;
    summary["epochs_run"] = result.curve.size();
    summary["steps"] = result.steps;
    if (!result.curve.empty()) summary["final_valid_loss"] = result.curve.back().valid_loss;
    return summary.dump();
  });
}

std::string encode(const Args& args) {
  const auto model = load_model(args);
  const RunConfig& config = model->config();
  const qa::Corpus corpus = args.has("tables") ? qa::load_corpus(args.get("tables")) : dataset_for(args, config).corpus;
  Output out(output_dir(args, "encode"), "encode", config);
  return guarded(out, [&] {
    num::NoGradGuard guard;
    std::ofstream bin(out / "embeddings.bin", std::ios::binary | std::ios::trunc);
    if (!bin) fail(ErrorCode::kIo, "cannot write embeddings.bin");
    Json tables = Json::array();
    std::size_t offset = 0;
    for (const auto& nt : corpus) {
      const auto xst = model->structure(nt.table);
      write_le_doubles(bin, xst.data());
      Json e;
      e["id"] = nt.id;
      e["offset"] = offset;  // in values, not bytes
      e["rows"] = xst.rows();
      e["cols"] = xst.cols();
      tables.push_back(e);
      offset += xst.size();
    }
    bin.close();
    if (!bin) fail(ErrorCode::kIo, "short write on embeddings.bin");
    Json extra;
    extra["payload"] = "embeddings.bin";
    extra["dtype"] = "float64-le";
    extra["values"] = offset;
    extra["tables"] = tables;
    out.finish(extra);
    Json summary;
    summary["tables"] = corpus.size();
    summary["values"] = offset;
    return summary.dump();
  });
}

std::string eval(const Args& args) {
  std::unique_ptr<Model> model;
  RunConfig config;
  if (args.has("predictions")) {
    config = resolve_config(args);
  } else {
    model = load_model(args);
    config = model->config();
  }
  const auto data = dataset_for(args, config);
  const dec::Mode mode = args.has("mode") ? dec::parse_mode(args.get("mode")) : config.mode;
  const qa::Split split = qa::parse_split(args.get_or("split", "test"));
  const std::size_t workers = args.get_u64("workers", config.workers);
  Output out(output_dir(args, "eval"), "eval", config);
  return guarded(out, [&] {
    const auto samples = filter_tasks(config, data.dataset.select(split));
    TableIndex index(data.corpus);

    qa::Predictions preds;
    std::vector<Transcript> transcripts;
    if (args.has("predictions")) {
      preds = qa::read_predictions(args.get("predictions"));
    } else {
      preds = predict(*model, index, samples, mode, &transcripts, workers);
      qa::write_predictions(preds, out / "predictions.jsonl");
    }

    // Permuted side: a `permute` output, or a fresh draw from the run seed.
    std::optional<qa::PermutedTestSet> pts;
    if (args.has("permuted")) {
      pts = read_permuted_dir(args.get("permuted"));
    } else if (!args.flag("no-permute") && split == qa::Split::kTest) {
      pts = qa::permute_test_set(data.dataset, data.corpus, config.seed, config.remap_permuted);
    }
    qa::Predictions perm_preds;
    if (pts) {
      pts->samples = filter_tasks(config, pts->samples);
      if (args.has("permuted-predictions")) {
        perm_preds = qa::read_predictions(args.get("permuted-predictions"));
      } else if (model) {
        TableIndex perm_index;
        perm_index.add(pts->tables);
        perm_preds = predict(*model, perm_index, pts->samples, mode, &transcripts, workers);
        qa::write_predictions(perm_preds, out / "permuted_predictions.jsonl");
      } else {
        pts.reset();
      }
    }
    if (!transcripts.empty()) write_transcripts(transcripts, out / "transcripts.jsonl");

    const auto scores = qa::score(samples, preds, pts ? &*pts : nullptr, pts ? &perm_preds : nullptr);
    for (const auto& id : scores.missing) log("missing prediction for " + id);

    Json report;
    report["seed"] = config.seed;
    report["config_hash"] = config.hash();
    report["mode"] = dec::mode_name(mode);
    report["split"] = qa::split_name(split);
    report["samples"] = samples.size();
    const Json metrics = scores_json(scores);
    for (const auto& [k, v] : metrics.items()) report[k] = v;
    if (args.has("model")) {
      const fs::path run_manifest = fs::path(args.get("model")) / "manifest.json";
      if (fs::exists(run_manifest)) {
        const Json m = read_json(run_manifest);
        if (m.contains("loss_curve")) report["loss_curve"] = m["loss_curve"];
      }
    }
    if (args.has("probe")) {
      const Json p = read_json(fs::path(args.get("probe")) / "report.json");
      report["probe"] = p;
    }
    write_json(report, out / "report.json");
    Json extra;
    extra["report"] = "report.json";
    out.finish(extra);
    Json summary = scores_json(scores);
    summary.erase("per_task");
    return summary.dump();
  });
}

std::string probe(const Args& args) {
  const auto pretrained = load_model(args);
  RunConfig config = pretrained->config();
  if (args.has("seed")) config.seed = args.get_u64("seed", config.seed);
  const std::size_t n_seeds = args.get_u64("seeds", 3);
  if (n_seeds == 0) fail(ErrorCode::kInvalidArgument, "--seeds must be positive");
  qa::CorpusOptions copt = config.corpus;
  copt.tables = args.get_u64("tables", 100);
  const std::uint64_t corpus_seed = args.get_u64("corpus-seed", config.corpus_seed + 1);
  probe::ProbeOptions popt;
  popt.epochs = args.get_u64("epochs", popt.epochs);
  popt.lr = args.get_double("lr", popt.lr);
  Output out(output_dir(args, "probe"), "probe", config);
  return guarded(out, [&] {
    const auto corpus = qa::generate_corpus(copt, corpus_seed);
    // The random encoder is the pretrained run's own initialization.
    Model random_init(pretrained->config(), pretrained->vocab());
    const probe::Regime regimes[] = {probe::Regime::kMlpOnly, probe::Regime::kRandomEncoder,
                                     probe::Regime::kPretrainedEncoder};
    Json report;
    report["seed"] = config.seed;
    report["config_hash"] = config.hash();
    report["tables"] = corpus.size();
    report["corpus_seed"] = corpus_seed;
    report["epochs"] = popt.epochs;
    report["lr"] = popt.lr;
    Json per = Json::object();
    std::map<probe::Regime, double> medians;
    for (auto r : regimes) {
      const auto& encoder = r == probe::Regime::kPretrainedEncoder ? pretrained->encoder() : random_init.encoder();
      std::vector<double> f1s;
      Json runs = Json::array();
      for (std::size_t i = 0; i < n_seeds; ++i) {
        const std::uint64_t s = config.seed + i;
        const auto inst = probe::build_probe_dataset(corpus, r, encoder, s);
        const auto res = probe::train_and_evaluate(inst, popt, s);
        log(std::string(probe::regime_name(r)) + " seed " + std::to_string(s) + " f1 " + std::to_string(res.f1));
        Json j;
        j["seed"] = s;
        j["f1"] = res.f1;
        j["precision"] = res.precision;
        j["recall"] = res.recall;
        j["train_accuracy"] = res.train_accuracy;
        j["train_instances"] = res.n_train;
        j["test_instances"] = res.n_test;
        runs.push_back(j);
        f1s.push_back(res.f1);
      }
      medians[r] = median(f1s);
      Json e;
      e["median_f1"] = medians[r];
      e["runs"] = runs;
      per[probe::regime_name(r)] = e;
    }
    report["regimes"] = per;
    const double gap_random = medians[probe::Regime::kRandomEncoder] - medians[probe::Regime::kMlpOnly];
    const double gap_pretrained = medians[probe::Regime::kPretrainedEncoder] - medians[probe::Regime::kRandomEncoder];
    report["gap_random_over_mlp"] = gap_random;
    report["gap_pretrained_over_random"] = gap_pretrained;
    write_json(report, out / "report.json");
    Json extra;
    extra["report"] = "report.json";
    out.finish(extra);
    Json summary;
    for (auto r : regimes) summary[probe::regime_name(r)] = medians[r];
    summary["gap_random_over_mlp"] = gap_random;
    summary["gap_pretrained_over_random"] = gap_pretrained;
    return summary.dump();
  });
}

std::string saliency(const Args& args) {
  auto model = load_model(args);
  const RunConfig& config = model->config();
  const auto data = dataset_for(args, config);
  const dec::Mode mode = args.has("mode") ? dec::parse_mode(args.get("mode")) : config.mode;
  const std::size_t count = args.get_u64("count", 20);
  Output out(output_dir(args, "saliency"), "saliency", config);
  return guarded(out, [&] {
    auto samples = filter_tasks(config, data.dataset.select(qa::parse_split(args.get_or("split", "test"))));
    if (samples.size() > count) samples.resize(count);
    const TableIndex index(data.corpus);
    const auto records = hypertab::saliency(*model, index, samples, mode);
    std::ofstream f(out / "saliency.jsonl", std::ios::trunc);
    if (!f) fail(ErrorCode::kIo, "cannot write saliency.jsonl");
    double prefix_total = 0.0;
    double after_max = 0.0;
    for (const auto& r : records) {
      double prefix = 0.0;
      for (std::size_t i = 0; i < r.prefix_rows; ++i) prefix += r.scores[i];
      double after = 0.0;
      for (std::size_t i = r.target_input_row + 1; i < r.scores.size(); ++i) after = std::max(after, r.scores[i]);
      prefix_total += prefix;
      after_max = std::max(after_max, after);
      Json j;
      j["sample_id"] = r.sample_id;
      j["mode"] = dec::mode_name(mode);
      j["target"] = r.target;
      j["target_input_row"] = r.target_input_row;
      j["prefix_rows"] = r.prefix_rows;
      j["prefix_score"] = prefix;
      j["max_score_after_target"] = after;
      j["tokens"] = r.tokens;
      j["scores"] = r.scores;
      f << j.dump() << "\n";
    }
    f.close();
    Json extra;
    extra["episodes"] = records.size();
    extra["prefix_score_total"] = prefix_total;
    extra["max_score_after_target"] = after_max;
    out.finish(extra);
    return extra.dump();
  });
}

std::string gradcheck(const Args& args) {
  const RunConfig config = resolve_config(args);
  const double eps = args.get_double("eps", 1e-4);
  const double tolerance = args.get_double("tolerance", 1e-5);
  const std::size_t n_samples = args.get_u64("samples", 2);
  if (n_samples == 0) fail(ErrorCode::kInvalidArgument, "--samples must be positive");
  Output out(output_dir(args, "gradcheck"), "gradcheck", config);
  return guarded(out, [&] {
    auto data = synthesize_dataset(config);
    auto samples = filter_tasks(config, data.dataset.samples);
    if (samples.size() > n_samples) samples.resize(n_samples);
    // Generated tables have no empty cells; one extra episode on a table with
    // an empty cell reaches the empty-cell embedding too.
    qa::NamedTable audit{"audit", table::Table::flat({"name", "city"}, {{"Ann", ""}, {"Bob", "Oslo"}})};
    qa::Sample extra_sample;
    extra_sample.sample_id = "audit/cell_location/0";
    extra_sample.table_id = audit.id;
    extra_sample.slots = {1, 1, ""};
    extra_sample.question = qa::render_question(audit.table, qa::Task::kCellLocation, 0, extra_sample.slots);
    extra_sample.answer = qa::answer_for(audit.table, qa::Task::kCellLocation, extra_sample.slots);
    data.corpus.push_back(audit);
    samples.push_back(extra_sample);
    Model model(config, build_vocab(data.corpus, samples));
    const TableIndex index(data.corpus);
    const auto rep = grad_audit(model, index, samples, eps);
    Json groups = Json::array();
    for (const auto& e : rep.entries) {
      Json j;
      j["name"] = e.name;
      j["checked"] = e.checked;
      j["max_rel_error"] = e.max_rel_error;
      j["analytic_norm"] = e.analytic_norm;
      j["numeric_norm"] = e.numeric_norm;
      groups.push_back(j);
    }
    Json report;
    report["seed"] = config.seed;
    report["config_hash"] = config.hash();
    report["eps"] = eps;
    report["tolerance"] = tolerance;
    report["parameters"] = model.params().parameter_count();
    report["samples"] = samples.size();
    report["max_rel_error"] = rep.max_rel_error;
    report["all_nonzero"] = rep.all_nonzero;
    report["passed"] = rep.max_rel_error < tolerance && rep.all_nonzero;
    report["groups"] = groups;
    write_json(report, out / "report.json");
    Json extra;
    extra["report"] = "report.json";
    out.finish(extra);
    Json summary;
    summary["parameters"] = report["parameters"];
    summary["max_rel_error"] = rep.max_rel_error;
    summary["all_nonzero"] = rep.all_nonzero;
    summary["passed"] = report["passed"];
    return summary.dump();
  });
}

std::string run(const std::string& command, const Args& args) {
  if (command == "gen") return gen(args);
  if (command == "permute") return permute(args);
  if (command == "train") return train(args);
  if (command == "encode") return encode(args);
  if (command == "eval") return eval(args);
  if (command == "probe") return probe(args);
  if (command == "saliency") return saliency(args);
  if (command == "gradcheck") return gradcheck(args);
  fail(ErrorCode::kInvalidArgument, "unknown command '" + command + "'");
}

}  // namespace hypertab::cmd
