#include "hypertab/decoder.hpp"

#include <cmath>

#include "hypertab/error.hpp"
#include "hypertab/text.hpp"

namespace hypertab::dec {

namespace {

constexpr double kEmbeddingBound = 0.05;

std::vector<std::uint32_t> as_rows(const std::vector<int>& ids, std::size_t vocab) {
  std::vector<std::uint32_t> rows;
  rows.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      fail(ErrorCode::kInvalidArgument, "decoder: token id " + std::to_string(id) + " outside vocabulary of " +
                                            std::to_string(vocab));
    }
    rows.push_back(static_cast<std::uint32_t>(id));
  }
  return rows;
}

std::vector<int> with_bos(const Episode& ep) {
  std::vector<int> ids = ep.prompt;
  ids.push_back(text::Vocab::kBos);
  ids.insert(ids.end(), ep.answer.begin(), ep.answer.end());
  return ids;
}

}  // namespace

void DecoderConfig::validate() const {
  if (d_l == 0 || heads == 0 || d_l % heads != 0) {
    fail(ErrorCode::kInvalidArgument,
         "decoder: d_l " + std::to_string(d_l) + " must be a positive multiple of heads " + std::to_string(heads));
  }
  if (layers == 0 || ff_hidden == 0) fail(ErrorCode::kInvalidArgument, "decoder: layers and ff_hidden must be positive");
  if (max_seq_len == 0) fail(ErrorCode::kInvalidArgument, "decoder: max_seq_len must be positive");
}

const char* mode_name(Mode m) { return m == Mode::kWithStructure ? "with_structure" : "text_only"; }

Mode parse_mode(const std::string& s) {
  if (s == "with_structure") return Mode::kWithStructure;
  if (s == "text_only") return Mode::kTextOnly;
  fail(ErrorCode::kInvalidArgument, "unknown mode '" + s + "' (expected with_structure or text_only)");
}

Decoder::Decoder(ParamStore& store, const DecoderConfig& config, std::size_t vocab_size, std::mt19937_64& rng)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size <= static_cast<std::size_t>(text::Vocab::kEos)) {
    fail(ErrorCode::kInvalidArgument, "decoder: vocabulary too small");
  }
  const std::size_t d = config_.d_l;
  token_embedding_ = store.add_uniform("decoder/token_embedding", vocab_size, d, kEmbeddingBound, rng);
  position_embedding_ = store.add_uniform("decoder/position_embedding", config_.max_seq_len, d, kEmbeddingBound, rng);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "decoder/block" + std::to_string(l);
    blocks_.push_back(Block{nn::LayerNorm::make(store, p + "/norm1", d),
                            nn::Linear::make(store, p + "/query", d, d, rng),
                            nn::Linear::make(store, p + "/key", d, d, rng, false),  // a key bias cancels in softmax
                            nn::Linear::make(store, p + "/value", d, d, rng),
                            nn::Linear::make(store, p + "/proj", d, d, rng),
                            nn::LayerNorm::make(store, p + "/norm2", d),
                            nn::FeedForward::make(store, p + "/ff", d, config_.ff_hidden, d, rng)});
  }
  final_norm_ = nn::LayerNorm::make(store, "decoder/final_norm", d);
}

std::size_t Decoder::prefix_rows(const Episode& ep, Mode mode) const {
  if (mode == Mode::kTextOnly) return 0;
  if (!ep.structure.defined()) fail(ErrorCode::kInvalidArgument, "decoder: with_structure episode has no structure rows");
  if (ep.structure.cols() != config_.d_l) {
    fail(ErrorCode::kShape, "decoder: structure rows " + num::shape_str(ep.structure) + " do not have width " +
                                std::to_string(config_.d_l));
  }
  return ep.structure.rows();
}

Tensor Decoder::input_rows(const Episode& ep, Mode mode, const std::vector<int>& ids) const {
  const std::size_t k = prefix_rows(ep, mode);
  if (k + ids.size() > config_.max_seq_len) {
    fail(ErrorCode::kInvalidArgument, "decoder: sequence of " + std::to_string(k + ids.size()) +
                                          " rows exceeds max_seq_len " + std::to_string(config_.max_seq_len));
  }
  std::vector<std::uint32_t> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<std::uint32_t>(i);
  // Text positions count from 0 in both modes; structure rows carry none.
  const Tensor text = num::add(num::gather_rows(token_embedding_, as_rows(ids, vocab_size_)),
                               num::gather_rows(position_embedding_, positions));
  if (k == 0) return text;
  const std::vector<Tensor> parts{ep.structure, text};
  return num::concat_rows(parts);
}

Tensor Decoder::hidden(const Tensor& inputs) const {
  Tensor h = inputs;
  for (const Block& b : blocks_) {
    const Tensor x = b.norm1(h);
    const Tensor att = num::attention(b.query(x), b.key(x), b.value(x), config_.heads, true);
    h = num::add(h, b.proj(att));
    h = num::add(h, b.ff(b.norm2(h)));
  }
  return final_norm_(h);
}

Tensor Decoder::forward_logits(const Episode& ep, Mode mode) const {
  const auto ids = with_bos(ep);
  const Tensor h = hidden(input_rows(ep, mode, ids));
  const std::size_t scored = ep.answer.size() + 1;
  return num::matmul_nt(num::slice_rows(h, h.rows() - scored, scored), token_embedding_);
}

Tensor Decoder::loss(const Episode& ep, Mode mode) const {
  std::vector<int> targets = ep.answer;
  targets.push_back(text::Vocab::kEos);
  return num::cross_entropy(forward_logits(ep, mode), targets);
}

std::vector<double> Decoder::answer_log_probs(const Episode& ep, Mode mode) const {
  num::NoGradGuard guard;
  const Tensor logits = forward_logits(ep, mode);
  std::vector<int> targets = ep.answer;
  targets.push_back(text::Vocab::kEos);
  std::vector<double> out;
  const std::size_t v = logits.cols();
  const auto data = logits.data();
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const double* row = data.data() + r * v;
    double mx = row[0];
    for (std::size_t c = 1; c < v; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < v; ++c) z += std::exp(row[c] - mx);
    out.push_back(row[targets[r]] - mx - std::log(z));
  }
  return out;
}

std::vector<int> Decoder::generate(const Episode& ep, Mode mode, std::size_t max_new) const {
  num::NoGradGuard guard;
  if (max_new == 0) max_new = config_.max_new_tokens;
  std::vector<int> ids = ep.prompt;
  ids.push_back(text::Vocab::kBos);
  std::vector<int> out;
  while (out.size() < max_new) {
    if (prefix_rows(ep, mode) + ids.size() > config_.max_seq_len) break;
    const Tensor h = hidden(input_rows(ep, mode, ids));
    const Tensor logits = num::matmul_nt(num::slice_rows(h, h.rows() - 1, 1), token_embedding_);
    const auto row = logits.data();
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    const int next = static_cast<int>(best);
    if (next == text::Vocab::kEos) break;
    out.push_back(next);
    ids.push_back(next);
  }
  return out;
}

Saliency Decoder::token_saliency(const Episode& ep, Mode mode, std::size_t target) const {
  if (target > ep.answer.size()) {
    fail(ErrorCode::kInvalidArgument, "saliency: target " + std::to_string(target) + " beyond " +
                                          std::to_string(ep.answer.size() + 1) + " scored positions");
  }
  const auto ids = with_bos(ep);
  // Re-root the tape at a leaf copy of the input rows so their gradient is kept.
  const Tensor built = input_rows(ep, mode, ids);
  const Tensor inputs = Tensor::parameter(built.rows(), built.cols(),
                                          std::vector<double>(built.data().begin(), built.data().end()));
  const Tensor h = hidden(inputs);
  const std::size_t row = h.rows() - (ep.answer.size() + 1) + target;
  const Tensor logits = num::matmul_nt(num::slice_rows(h, row, 1), token_embedding_);
  const int want = target < ep.answer.size() ? ep.answer[target] : text::Vocab::kEos;
  const std::vector<int> t{want};
  num::cross_entropy(logits, t).backward();
  Saliency s;
  s.prefix_rows = prefix_rows(ep, mode);
  const auto g = inputs.grad();
  const std::size_t d = inputs.cols();
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) sq += g[r * d + c] * g[r * d + c];
    s.scores.push_back(std::sqrt(sq));
  }
  return s;
}

}  // namespace hypertab::dec
