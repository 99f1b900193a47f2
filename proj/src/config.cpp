#include "hypertab/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "hypertab/error.hpp"
#include "hypertab/random.hpp"

namespace hypertab {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorCode::kInvalidArgument, "config: " + key + " = '" + value + "' is not " + expected);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename T>
Field size_field(T RunConfig::*group, std::size_t T::*member) {
  return {[=](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.*group.*member)); },
          [=](RunConfig& c, const std::string& k, const std::string& v) {
            c.*group.*member = static_cast<std::size_t>(to_u64(k, v));
          }};
}

template <typename T>
Field double_field(T RunConfig::*group, double T::*member) {
  return {[=](const RunConfig& c) { return fmt(c.*group.*member); },
          [=](RunConfig& c, const std::string& k, const std::string& v) { c.*group.*member = to_double(k, v); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f{
      {"seed", {[](const RunConfig& c) { return fmt(c.seed); },
                [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }}},
      {"encoder.d_g", size_field(&RunConfig::encoder, &enc::EncoderConfig::d_g)},
      {"encoder.layers", size_field(&RunConfig::encoder, &enc::EncoderConfig::layers)},
      {"encoder.heads", size_field(&RunConfig::encoder, &enc::EncoderConfig::heads)},
      {"encoder.fusion_hidden", size_field(&RunConfig::encoder, &enc::EncoderConfig::fusion_hidden)},
      {"encoder.ff_hidden", size_field(&RunConfig::encoder, &enc::EncoderConfig::ff_hidden)},
      {"encoder.hash_buckets", size_field(&RunConfig::encoder, &enc::EncoderConfig::hash_buckets)},
      {"encoder.seed_count", size_field(&RunConfig::encoder, &enc::EncoderConfig::seed_count)},
      {"projector.k_tokens",
       {[](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.k_tokens)); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.k_tokens = to_u64(k, v); }}},
      {"decoder.d_l", size_field(&RunConfig::decoder, &dec::DecoderConfig::d_l)},
      {"decoder.layers", size_field(&RunConfig::decoder, &dec::DecoderConfig::layers)},
      {"decoder.heads", size_field(&RunConfig::decoder, &dec::DecoderConfig::heads)},
      {"decoder.ff_hidden", size_field(&RunConfig::decoder, &dec::DecoderConfig::ff_hidden)},
      {"decoder.max_seq_len", size_field(&RunConfig::decoder, &dec::DecoderConfig::max_seq_len)},
      {"decoder.max_new_tokens", size_field(&RunConfig::decoder, &dec::DecoderConfig::max_new_tokens)},
      {"optim.lr", double_field(&RunConfig::optim, &OptimConfig::lr)},
      {"optim.weight_decay", double_field(&RunConfig::optim, &OptimConfig::weight_decay)},
      {"optim.beta1", double_field(&RunConfig::optim, &OptimConfig::beta1)},
      {"optim.beta2", double_field(&RunConfig::optim, &OptimConfig::beta2)},
      {"optim.warmup_fraction", double_field(&RunConfig::optim, &OptimConfig::warmup_fraction)},
      {"optim.epochs", size_field(&RunConfig::optim, &OptimConfig::epochs)},
      {"optim.batch_size", size_field(&RunConfig::optim, &OptimConfig::batch_size)},
      {"optim.patience", size_field(&RunConfig::optim, &OptimConfig::patience)},
      {"mode", {[](const RunConfig& c) { return std::string(dec::mode_name(c.mode)); },
                [](RunConfig& c, const std::string&, const std::string& v) { c.mode = dec::parse_mode(v); }}},
      {"freeze_decoder",
       {[](const RunConfig& c) { return fmt(c.freeze_decoder); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.freeze_decoder = to_bool(k, v); }}},
      {"remap_permuted",
       {[](const RunConfig& c) { return fmt(c.remap_permuted); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.remap_permuted = to_bool(k, v); }}},
      {"tasks", {[](const RunConfig& c) { return c.tasks; },
                 [](RunConfig& c, const std::string&, const std::string& v) {
                   c.tasks = v;
                   if (v != "all") {
                     std::stringstream ss(v);
                     std::string item;
                     while (std::getline(ss, item, ',')) qa::parse_task(trim(item));
                   }
                 }}},
      {"workers",
       {[](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.workers)); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.workers = to_u64(k, v); }}},
      {"corpus.tables", size_field(&RunConfig::corpus, &qa::CorpusOptions::tables)},
      {"corpus.min_rows", size_field(&RunConfig::corpus, &qa::CorpusOptions::min_rows)},
      {"corpus.max_rows", size_field(&RunConfig::corpus, &qa::CorpusOptions::max_rows)},
      {"corpus.min_cols", size_field(&RunConfig::corpus, &qa::CorpusOptions::min_cols)},
      {"corpus.max_cols", size_field(&RunConfig::corpus, &qa::CorpusOptions::max_cols)},
      {"corpus.nested_fraction", double_field(&RunConfig::corpus, &qa::CorpusOptions::nested_fraction)},
      {"corpus.typed_columns",
       {[](const RunConfig& c) { return fmt(c.corpus.typed_columns); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.corpus.typed_columns = to_bool(k, v); }}},
      {"corpus.seed", {[](const RunConfig& c) { return fmt(c.corpus_seed); },
                       [](RunConfig& c, const std::string& k, const std::string& v) { c.corpus_seed = to_u64(k, v); }}},
  };
  return f;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) fail(ErrorCode::kInvalidArgument, "config: unknown key '" + key + "'");
  it->second.set(*this, key, value);
}

std::map<std::string, std::string> RunConfig::values() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) out[k] = f.get(*this);
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values()) out += k + " = " + v + "\n";
  return out;
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig c;
  std::stringstream ss(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(ss, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kParse, "config line " + std::to_string(n) + ": expected 'key = value'");
    }
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.code(), "config line " + std::to_string(n) + ": " + e.what());
    }
  }
  c.encoder.validate();
  c.decoder.validate();
  c.projector().validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return from_text(ss.str());
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

void RunConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << to_text();
}

std::string RunConfig::hash() const {
  const auto t = to_text();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(t.data(), t.size())));
  return buf;
}

bool RunConfig::includes(qa::Task t) const {
  if (tasks == "all") return true;
  std::stringstream ss(tasks);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item) == qa::task_name(t)) return true;
  }
  return false;
}

enc::ProjectorConfig RunConfig::projector() const {
  enc::ProjectorConfig p;
  p.d_g = encoder.d_g;
  p.d_l = decoder.d_l;
  p.k_tokens = k_tokens;
  p.heads = encoder.heads;
  p.ff_hidden = encoder.ff_hidden;
  return p;
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "desk") return c;
  if (name == "tiny") {
    c.encoder.d_g = 8;
    c.encoder.layers = 1;
    c.encoder.heads = 2;
    c.encoder.fusion_hidden = 8;
    c.encoder.ff_hidden = 8;
    c.encoder.hash_buckets = 2;
    c.decoder.d_l = 8;
    c.decoder.layers = 1;
    c.decoder.heads = 2;
    c.decoder.ff_hidden = 16;
    c.decoder.max_seq_len = 48;
    c.decoder.max_new_tokens = 8;
    c.optim.epochs = 2;
    c.optim.batch_size = 2;
    c.corpus.tables = 2;
    c.corpus.min_rows = 1;
    c.corpus.max_rows = 2;
    c.corpus.min_cols = 1;
    c.corpus.max_cols = 2;
    c.corpus.nested_fraction = 0.0;
    c.tasks = "cell_location";
    return c;
  }
  if (name == "paper") {
    c.encoder.d_g = 768;
    c.encoder.layers = 3;
    c.encoder.heads = 12;
    c.encoder.fusion_hidden = 768;
    c.encoder.ff_hidden = 3072;
    c.decoder.d_l = 4096;
    c.decoder.layers = 32;
    c.decoder.heads = 32;
    c.decoder.ff_hidden = 11008;
    c.decoder.max_seq_len = 4096;
    c.decoder.max_new_tokens = 128;
    c.optim.lr = 1e-5;
    c.optim.weight_decay = 0.05;
    c.optim.epochs = 10;
    c.optim.batch_size = 8;
    c.optim.patience = 3;
    c.freeze_decoder = true;
    c.corpus.tables = 500;
    return c;
  }
  fail(ErrorCode::kInvalidArgument, "unknown preset '" + name + "' (desk, tiny, paper)");
}

}  // namespace hypertab
