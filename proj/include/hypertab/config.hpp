#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "hypertab/decoder.hpp"
#include "hypertab/encoder.hpp"
#include "hypertab/structqa.hpp"

namespace hypertab {

struct OptimConfig {
  double lr = 3e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double warmup_fraction = 0.05;
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  std::size_t patience = 3;
};

// Everything that determines a run. Stored as "key = value" lines; '#'
// starts a comment. Unknown keys are rejected.
struct RunConfig {
  // Defaults are the desk preset.
  RunConfig() { decoder.max_new_tokens = 32; }

  std::uint64_t seed = 7;
  enc::EncoderConfig encoder;
  std::size_t k_tokens = 1;
  dec::DecoderConfig decoder;
  OptimConfig optim;
  dec::Mode mode = dec::Mode::kWithStructure;
  bool freeze_decoder = false;
  bool remap_permuted = true;
  std::string tasks = "all";  // comma-separated task names or "all"
  std::size_t workers = 1;
  // Synthetic corpus used when no corpus directory is given.
  qa::CorpusOptions corpus;
  std::uint64_t corpus_seed = 11;

  // Canonical text: every key, sorted, one per line.
  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  // 16 hex digits over the canonical text.
  std::string hash() const;

  // Sets one key; throws Error(kInvalidArgument) on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> values() const;

  bool includes(qa::Task t) const;
  enc::ProjectorConfig projector() const;
};

// Built-in presets: "desk", "tiny", "paper".
RunConfig preset(const std::string& name);

}  // namespace hypertab
