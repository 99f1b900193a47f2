#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hypertab/config.hpp"
#include "hypertab/structqa.hpp"

namespace hypertab::cmd {

// Command arguments as repeated key/value pairs ("set" may appear many times).
class Args {
 public:
  void add(const std::string& key, const std::string& value) { values_[key].push_back(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  // Last value given for `key`; throws Error(kInvalidArgument) when absent.
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool flag(const std::string& key) const;
  const std::vector<std::string>& all(const std::string& key) const;

 private:
  std::map<std::string, std::vector<std::string>> values_;
};

// Preset (default "desk"), then "config" file, then every "set" (key=value),
// then "seed".
RunConfig resolve_config(const Args& args);

// Output directory: "out", else $HYPERTAB_OUT_ROOT/<command>, else
// runs/<command>.
std::filesystem::path output_dir(const Args& args, const std::string& command);

// A dataset directory as written by `gen`: tables/ plus samples.jsonl.
struct DatasetDir {
  qa::Corpus corpus;
  qa::Dataset dataset;
};
DatasetDir read_dataset_dir(const std::filesystem::path& dir);

// Synthetic corpus from the config's corpus options, dataset from its seed.
DatasetDir synthesize_dataset(const RunConfig& config);

// Each command writes into its output directory, records a manifest.json
// (complete=false until it finishes) and returns a JSON summary.
std::string gen(const Args& args);
std::string permute(const Args& args);
std::string train(const Args& args);
std::string encode(const Args& args);
std::string eval(const Args& args);
std::string probe(const Args& args);
std::string saliency(const Args& args);
std::string gradcheck(const Args& args);

// Dispatch by name; throws Error(kInvalidArgument) for unknown commands.
std::string run(const std::string& command, const Args& args);

}  // namespace hypertab::cmd
