#pragma once

#include <random>
#include <string>
#include <vector>

#include "hypertab/layers.hpp"

namespace hypertab::dec {

using num::ParamStore;
using num::Tensor;

struct DecoderConfig {
  std::size_t d_l = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff_hidden = 512;
  std::size_t max_seq_len = 512;
  std::size_t max_new_tokens = 128;

  void validate() const;
};

enum class Mode { kWithStructure, kTextOnly };

const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

// Input layout: [structure rows][prompt tokens][bos][answer tokens]; the model
// is scored on answer tokens followed by eos.
struct Episode {
  Tensor structure;          // k x d_l; ignored in text-only mode
  std::vector<int> prompt;   // table text followed by the question
  std::vector<int> answer;   // without eos
};

struct Saliency {
  std::size_t prefix_rows = 0;  // leading scores belonging to structure rows
  std::vector<double> scores;   // one per input row
};

class Decoder {
 public:
  // Registers parameters under "decoder/".
  Decoder(ParamStore& store, const DecoderConfig& config, std::size_t vocab_size, std::mt19937_64& rng);

  const DecoderConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }

  // (answer.size() + 1) x vocab; row j predicts answer[j], the last row eos.
  Tensor forward_logits(const Episode& ep, Mode mode) const;
  // Mean cross-entropy over the answer positions.
  Tensor loss(const Episode& ep, Mode mode) const;
  // Log-probability of every answer token and of the final eos.
  std::vector<double> answer_log_probs(const Episode& ep, Mode mode) const;
  // Greedy decoding from prompt (+ structure); ep.answer is ignored.
  // max_new == 0 uses config().max_new_tokens.
  std::vector<int> generate(const Episode& ep, Mode mode, std::size_t max_new = 0) const;
  // L2 norm of d log p(target) / d input-row for each input row. `target`
  // indexes the scored positions (answer tokens, then eos).
  Saliency token_saliency(const Episode& ep, Mode mode, std::size_t target) const;

 private:
  struct Block {
    nn::LayerNorm norm1;
    nn::Linear query, key, value, proj;
    nn::LayerNorm norm2;
    nn::FeedForward ff;
  };

  Tensor input_rows(const Episode& ep, Mode mode, const std::vector<int>& ids) const;
  Tensor hidden(const Tensor& inputs) const;
  std::size_t prefix_rows(const Episode& ep, Mode mode) const;

  DecoderConfig config_;
  std::size_t vocab_size_;
  Tensor token_embedding_;  // vocab x d_l, tied with the output layer
  Tensor position_embedding_;
  std::vector<Block> blocks_;
  nn::LayerNorm final_norm_;
};

}  // namespace hypertab::dec
