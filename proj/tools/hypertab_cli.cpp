// hypertab command-line tool. Talks to the library only through hypertab.h.
#include <CLI11.hpp>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "hypertab/hypertab.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCheckFailed = 3;

// Option values collected per subcommand; flags are stored as "true".
struct Collected {
  std::map<std::string, std::string> single;
  std::vector<std::string> sets;
  std::map<std::string, bool> flags;
};

void add_value(CLI::App* app, Collected& c, const std::string& name, const std::string& help, bool required = false) {
  auto* opt = app->add_option("--" + name, c.single[name], help);
  if (required) opt->required();
}

void add_config_options(CLI::App* app, Collected& c) {
  add_value(app, c, "preset", "built-in preset: desk, tiny or paper");
  add_value(app, c, "config", "config file (key = value lines)");
  app->add_option("--set", c.sets, "override one config key, key=value (repeatable)");
  add_value(app, c, "seed", "run seed");
}

void add_flag(CLI::App* app, Collected& c, const std::string& name, const std::string& help) {
  app->add_flag("--" + name, c.flags[name], help);
}

int run(const std::string& command, const CLI::App* app, const Collected& c) {
  ht_args* args = nullptr;
  if (ht_args_new(&args) != HT_OK) {
    std::fprintf(stderr, "error: %s\n", ht_last_error());
    return kExitFailure;
  }
  for (const auto& [key, value] : c.single) {
    if (app->count("--" + key)) ht_args_add(args, key.c_str(), value.c_str());
  }
  for (const auto& kv : c.sets) ht_args_add(args, "set", kv.c_str());
  for (const auto& [key, on] : c.flags) {
    if (on) ht_args_add(args, key.c_str(), "true");
  }
  char* summary = nullptr;
  const ht_status st = ht_run(command.c_str(), args, &summary);
  ht_args_free(args);
  if (st != HT_OK) {
    std::fprintf(stderr, "%s: %s: %s\n", command.c_str(), ht_status_name(st), ht_last_error());
    return st == HT_ERR_INVALID_ARGUMENT ? kExitUsage : kExitFailure;
  }
  std::printf("%s\n", summary);
  const auto j = nlohmann::json::parse(summary, nullptr, false);
  ht_string_free(summary);
  if (j.is_object() && j.contains("passed") && !j["passed"].get<bool>()) return kExitCheckFailed;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypergraph table encoder toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ht_version());

  std::map<std::string, Collected> opts;
  std::map<std::string, CLI::App*> subs;
  const auto sub = [&](const std::string& name, const std::string& help) {
    subs[name] = app.add_subcommand(name, help);
    add_value(subs[name], opts[name], "out", "output directory (default $HYPERTAB_OUT_ROOT/<command>)");
    return subs[name];
  };

  {
    auto* s = sub("gen", "generate a StructQA dataset from a table corpus");
    auto& c = opts["gen"];
    add_value(s, c, "tables", "corpus directory of .csv/.tsv/.tbl tables");
    add_value(s, c, "synthetic", "number of synthetic tables when --tables is absent");
    add_config_options(s, c);
  }
  {
    auto* s = sub("permute", "draw one row/column permutation per test table");
    auto& c = opts["permute"];
    add_value(s, c, "data", "dataset directory written by gen", true);
    add_flag(s, c, "no-remap", "keep original row numbers in re-instantiated questions");
    add_config_options(s, c);
  }
  {
    auto* s = sub("train", "train encoder, projector and decoder");
    auto& c = opts["train"];
    add_value(s, c, "data", "dataset directory written by gen (default: synthetic from the config)");
    add_config_options(s, c);
  }
  {
    auto* s = sub("encode", "dump structure tokens per table");
    auto& c = opts["encode"];
    add_value(s, c, "model", "trained run directory", true);
    add_value(s, c, "tables", "corpus directory to encode");
    add_value(s, c, "data", "dataset directory whose tables to encode");
  }
  {
    auto* s = sub("eval", "score predictions or run a model on a split");
    auto& c = opts["eval"];
    add_value(s, c, "model", "trained run directory");
    add_value(s, c, "data", "dataset directory written by gen");
    add_value(s, c, "permuted", "permute output directory");
    add_value(s, c, "predictions", "predictions file (sample_id, prediction records)");
    add_value(s, c, "permuted-predictions", "predictions on the permuted test set");
    add_value(s, c, "probe", "probe output directory to include in the report");
    add_value(s, c, "mode", "with_structure or text_only");
    add_value(s, c, "split", "train, valid or test");
    add_value(s, c, "workers", "inference threads");
    add_flag(s, c, "no-permute", "skip the permuted test set");
    add_config_options(s, c);
  }
  {
    auto* s = sub("probe", "cell membership probe over three regimes");
    auto& c = opts["probe"];
    add_value(s, c, "model", "trained run directory (pretrained encoder)", true);
    add_value(s, c, "tables", "synthetic probe tables");
    add_value(s, c, "seeds", "probe seeds");
    add_value(s, c, "epochs", "classifier epochs");
    add_value(s, c, "lr", "classifier learning rate");
    add_value(s, c, "seed", "first probe seed");
    add_value(s, c, "corpus-seed", "probe corpus seed");
  }
  {
    auto* s = sub("saliency", "gradient token importance for the first answer token");
    auto& c = opts["saliency"];
    add_value(s, c, "model", "trained run directory", true);
    add_value(s, c, "data", "dataset directory written by gen");
    add_value(s, c, "count", "episodes");
    add_value(s, c, "mode", "with_structure or text_only");
    add_value(s, c, "split", "train, valid or test");
  }
  {
    auto* s = sub("gradcheck", "finite-difference audit of the full model loss");
    auto& c = opts["gradcheck"];
    add_value(s, c, "eps", "central-difference step");
    add_value(s, c, "tolerance", "maximum relative error");
    add_value(s, c, "samples", "episodes in the audited loss");
    add_config_options(s, c);
  }

  std::string preset_name;
  auto* preset_cmd = app.add_subcommand("preset", "print a built-in preset as a config file");
  preset_cmd->add_option("name", preset_name, "desk, tiny or paper")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (preset_cmd->parsed()) {
    char* text = nullptr;
    if (ht_preset_text(preset_name.c_str(), &text) != HT_OK) {
      std::fprintf(stderr, "preset: %s\n", ht_last_error());
      return kExitUsage;
    }
    std::fputs(text, stdout);
    ht_string_free(text);
    return 0;
  }
  for (const auto& [name, s] : subs) {
    if (s->parsed()) return run(name, s, opts[name]);
  }
  return kExitUsage;
}
