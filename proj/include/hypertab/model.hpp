#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hypertab/config.hpp"
#include "hypertab/decoder.hpp"
#include "hypertab/encoder.hpp"
#include "hypertab/structqa.hpp"
#include "hypertab/text.hpp"

namespace hypertab {

// Vocabulary over every table serialization in the corpus plus the given
// questions and answers.
text::Vocab build_vocab(const qa::Corpus& corpus, const std::vector<qa::Sample>& samples);

// Encoder, projector and decoder over one parameter store. Not copyable: the
// encoder keeps a pointer to the vocabulary.
class Model {
 public:
  Model(const RunConfig& config, text::Vocab vocab);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const RunConfig& config() const { return config_; }
  const text::Vocab& vocab() const { return vocab_; }
  num::ParamStore& params() { return store_; }
  const num::ParamStore& params() const { return store_; }
  const enc::Encoder& encoder() const { return encoder_; }
  const enc::Projector& projector() const { return projector_; }
  const dec::Decoder& decoder() const { return decoder_; }

  num::Tensor structure(const enc::PreparedGraph& g) const;
  num::Tensor structure(const table::Table& t) const;

  // Prompt = serialized table followed by the question.
  std::vector<int> prompt_ids(const table::Table& t, const std::string& question) const;
  dec::Episode episode(const table::Table& t, const std::string& question, const std::string& answer,
                       dec::Mode mode) const;
  std::string answer(const table::Table& t, const std::string& question, dec::Mode mode) const;

  // <dir>/config.cfg, <dir>/vocab.txt and the parameter checkpoint.
  void save(const std::filesystem::path& dir) const;
  // Rebuilds the model from <dir>; refuses when the checkpoint's config hash
  // does not match config.cfg.
  static std::unique_ptr<Model> load(const std::filesystem::path& dir);

 private:
  RunConfig config_;
  text::Vocab vocab_;
  num::ParamStore store_;
  std::mt19937_64 init_rng_;
  enc::Encoder encoder_;
  enc::Projector projector_;
  dec::Decoder decoder_;
};

}  // namespace hypertab
