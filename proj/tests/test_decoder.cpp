#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "hypertab/decoder.hpp"
#include "hypertab/error.hpp"
#include "hypertab/model.hpp"
#include "hypertab/pipeline.hpp"
#include "test_util.hpp"

namespace hypertab::dec {
namespace {

using testing::rel_close;
using text::Vocab;

// --- tokenizer and vocabulary ---------------------------------------------------

TEST(Tokenize, EmptyText) {
  const Vocab v = Vocab::build({"a b"});
  EXPECT_TRUE(v.encode("").empty());
  EXPECT_TRUE(text::split_tokens("   ").empty());
}

TEST(Tokenize, RowQuestionFragment) {
  const Vocab v = Vocab::build({"row 0 : Bob", "Ann"});
  const auto ids = v.encode("row 0 : Bob");
  ASSERT_EQ(ids.size(), 4u);
  // Reserved ids, then the sorted distinct tokens: 0 : Ann Bob row.
  EXPECT_EQ(ids, (std::vector<int>{Vocab::kReserved + 4, Vocab::kReserved + 0, Vocab::kReserved + 1,
                                   Vocab::kReserved + 3}));
  for (int id : ids) EXPECT_NE(id, Vocab::kUnk);
  EXPECT_EQ(v.encode("Zed"), std::vector<int>{Vocab::kUnk});
}

TEST(Tokenize, PunctuationSplits) {
  EXPECT_EQ(text::split_tokens("What's (x)?"),
            (std::vector<std::string>{"What", "'", "s", "(", "x", ")", "?"}));
  EXPECT_EQ(text::split_tokens("São Paulo,1.5"), (std::vector<std::string>{"São", "Paulo", ",", "1", ".", "5"}));
}

TEST(TokenizeProperty, DetokenizeRoundTrip) {
  static const char* pool[] = {"row", "3", ",", ".", "(", ")", "?", "Oslo", "-", "x_y", ":", "'", "Ann"};
  std::mt19937_64 rng(1);
  std::vector<std::string> corpus;
  for (int i = 0; i < 200; ++i) {
    std::string s;
    const std::size_t n = rng() % 10;
    for (std::size_t k = 0; k < n; ++k) {
      s += pool[rng() % 13];
      if (rng() % 2) s += " ";
    }
    corpus.push_back(s);
  }
  const Vocab v = Vocab::build(corpus);
  for (const auto& s : corpus) {
    const auto toks = text::split_tokens(s);
    EXPECT_EQ(text::split_tokens(text::join_tokens(toks)), toks) << s;
    EXPECT_EQ(v.decode(v.encode(s)), text::join_tokens(toks)) << s;
  }
}

TEST(VocabFile, RoundTrip) {
  const Vocab v = Vocab::build({"Ann , Bob", "Oslo"});
  const auto path = std::filesystem::temp_directory_path() / "hypertab_vocab_test.txt";
  v.save(path);
  EXPECT_EQ(Vocab::load(path), v);
  std::filesystem::remove(path);
  EXPECT_EQ(v.token(Vocab::kBos).empty(), false);
  EXPECT_THROW(v.token(static_cast<int>(v.size())), Error);
}

// --- decoder --------------------------------------------------------------------

struct Rig {
  num::ParamStore store;
  std::unique_ptr<Decoder> decoder;
};

DecoderConfig small_config() {
  DecoderConfig c;
  c.d_l = 16;
  c.layers = 2;
  c.heads = 2;
  c.ff_hidden = 32;
  c.max_seq_len = 40;
  c.max_new_tokens = 6;
  return c;
}

std::unique_ptr<Rig> make_rig(DecoderConfig cfg = small_config(), std::size_t vocab = 30, std::uint64_t seed = 3) {
  auto rig = std::make_unique<Rig>();
  std::mt19937_64 rng(seed);
  rig->decoder = std::make_unique<Decoder>(rig->store, cfg, vocab, rng);
  return rig;
}

Tensor random_structure(std::size_t k, std::size_t d, std::uint64_t seed = 9) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(k * d);
  for (auto& x : v) x = u(rng);
  return Tensor::parameter(k, d, v);
}

Episode episode(std::size_t d = 16) {
  return Episode{random_structure(1, d), {7, 8, 9, 10, 11}, {12, 13, 14}};
}

std::vector<double> row_of(const Tensor& t, std::size_t r) {
  return {t.data().begin() + r * t.cols(), t.data().begin() + (r + 1) * t.cols()};
}

TEST(ForwardLogits, Shape) {
  auto rig = make_rig();
  const Tensor logits = rig->decoder->forward_logits(episode(), Mode::kWithStructure);
  EXPECT_EQ(logits.rows(), 4u);
  EXPECT_EQ(logits.cols(), 30u);
}

TEST(ForwardLogits, Causality) {
  auto rig = make_rig();
  const Episode ep = episode();
  for (std::size_t i = 0; i < ep.answer.size(); ++i) {
    Episode changed = ep;
    changed.answer[i] = 20;
    const Tensor a = rig->decoder->forward_logits(ep, Mode::kWithStructure);
    const Tensor b = rig->decoder->forward_logits(changed, Mode::kWithStructure);
    // Row j predicts answer[j], so answer[i] is visible from row i + 1 on.
    for (std::size_t j = 0; j <= i; ++j) EXPECT_EQ(row_of(a, j), row_of(b, j)) << i << " " << j;
    for (std::size_t j = i + 1; j < a.rows(); ++j) EXPECT_NE(row_of(a, j), row_of(b, j)) << i << " " << j;
  }
}

TEST(ForwardLogits, StructurePrefixMatters) {
  auto rig = make_rig();
  const Episode ep = episode();
  const Tensor a = rig->decoder->forward_logits(ep, Mode::kWithStructure);
  const Tensor b = rig->decoder->forward_logits(ep, Mode::kTextOnly);
  for (std::size_t j = 0; j < a.rows(); ++j) EXPECT_FALSE(rel_close(row_of(a, j), row_of(b, j), 1e-6));
  // Text-only ignores whatever structure rows the episode carries.
  Episode other = ep;
  other.structure = random_structure(2, 16, 77);
  const Tensor c = rig->decoder->forward_logits(other, Mode::kTextOnly);
  EXPECT_TRUE(std::equal(b.data().begin(), b.data().end(), c.data().begin()));
}

TEST(ForwardLogits, Errors) {
  auto rig = make_rig();
  Episode ep = episode();
  ep.prompt.assign(40, 7);
  EXPECT_EQ(testing::error_code_of([&] { rig->decoder->forward_logits(ep, Mode::kWithStructure); }),
            ErrorCode::kInvalidArgument);
  ep = episode();
  ep.structure = random_structure(1, 8);
  EXPECT_EQ(testing::error_code_of([&] { rig->decoder->forward_logits(ep, Mode::kWithStructure); }),
            ErrorCode::kShape);
  ep = episode();
  ep.structure = Tensor();
  EXPECT_THROW(rig->decoder->forward_logits(ep, Mode::kWithStructure), Error);
  EXPECT_NO_THROW(rig->decoder->forward_logits(ep, Mode::kTextOnly));
  ep = episode();
  ep.prompt[0] = 30;
  EXPECT_THROW(rig->decoder->forward_logits(ep, Mode::kTextOnly), Error);
  auto bad = small_config();
  bad.heads = 3;
  EXPECT_THROW(make_rig(bad), Error);
}

TEST(Loss, NearLogVocabAtInit) {
  // Untrained logits are close to uniform, so the expected loss is ln(V).
  DecoderConfig cfg;
  cfg.max_new_tokens = 32;
  const std::size_t vocab = 400;
  auto rig = make_rig(cfg, vocab, 5);
  std::mt19937_64 rng(6);
  double total = 0;
  const int n = 20;
  for (int i = 0; i < n; ++i) {
    Episode ep{random_structure(1, cfg.d_l, 100 + i), {}, {}};
    for (int k = 0; k < 12; ++k) ep.prompt.push_back(Vocab::kReserved + static_cast<int>(rng() % (vocab - 5)));
    for (int k = 0; k < 3; ++k) ep.answer.push_back(Vocab::kReserved + static_cast<int>(rng() % (vocab - 5)));
    total += rig->decoder->loss(ep, Mode::kWithStructure).item();
  }
  EXPECT_NEAR(total / n, std::log(static_cast<double>(vocab)), 0.05 * std::log(static_cast<double>(vocab)));
}

TEST(Loss, OnlyAnswerPositionsAreScored) {
  auto rig = make_rig();
  const Episode ep = episode();
  const auto lp = rig->decoder->answer_log_probs(ep, Mode::kWithStructure);
  ASSERT_EQ(lp.size(), ep.answer.size() + 1);
  double mean = 0;
  for (double v : lp) mean -= v / static_cast<double>(lp.size());
  EXPECT_NEAR(rig->decoder->loss(ep, Mode::kWithStructure).item(), mean, 1e-12);
}

TEST(LossProperty, LabelsAtMaskedPositionsAreIgnored) {
  // Whatever sits at a masked target row, neither its logits nor its label
  // reach the loss.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(5 * 6);
    for (auto& x : v) x = u(rng);
    const std::vector<int> targets{-1, -1, static_cast<int>(rng() % 6), -1, static_cast<int>(rng() % 6)};
    const double a = num::cross_entropy(Tensor::constant(5, 6, v), targets).item();
    for (int r : {0, 1, 3}) {
      for (int c = 0; c < 6; ++c) v[r * 6 + c] = u(rng);
    }
    const double b = num::cross_entropy(Tensor::constant(5, 6, v), targets).item();
    EXPECT_EQ(a, b);
  }
}

TEST(LogProbs, FactorizeOverPositions) {
  // One causal pass equals the product of next-token probabilities computed
  // prefix by prefix.
  auto rig = make_rig();
  const Episode ep = episode();
  const auto joint = rig->decoder->answer_log_probs(ep, Mode::kWithStructure);
  std::vector<int> seq = ep.answer;
  seq.push_back(Vocab::kEos);
  double total_joint = 0, total_steps = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    Episode prefix = ep;
    prefix.answer.assign(ep.answer.begin(), ep.answer.begin() + static_cast<long>(std::min(i, ep.answer.size())));
    const Tensor logits = rig->decoder->forward_logits(prefix, Mode::kWithStructure);
    const auto row = row_of(logits, logits.rows() - 1);
    double mx = row[0], z = 0;
    for (double x : row) mx = std::max(mx, x);
    for (double x : row) z += std::exp(x - mx);
    const double step = row[seq[i]] - mx - std::log(z);
    EXPECT_NEAR(step, joint[i], 1e-10);
    total_joint += joint[i];
    total_steps += step;
  }
  EXPECT_NEAR(total_joint, total_steps, 1e-10);
}

TEST(Decoder, GradientCheck) {
  auto cfg = small_config();
  cfg.d_l = 8;
  cfg.ff_hidden = 8;
  auto rig = make_rig(cfg, 16, 4);
  Episode ep{random_structure(2, 8), {5, 6, 7}, {8, 9}};
  std::vector<Tensor> leaves{ep.structure};
  for (auto& [name, e] : rig->store.entries()) leaves.push_back(e.tensor);
  EXPECT_LT(testing::fd_max_rel_error(leaves, [&] { return rig->decoder->loss(ep, Mode::kWithStructure); }), 1e-5);
}

// --- generation -------------------------------------------------------------------

TEST(Generate, RiggedEosGivesEmptyAnswer) {
  auto rig = make_rig();
  // Final norm output becomes the constant `shift`; align it with the eos row.
  auto& store = rig->store;
  Tensor gain = store.get("decoder/final_norm/gain");
  Tensor shift = store.get("decoder/final_norm/shift");
  Tensor emb = store.get("decoder/token_embedding");
  for (auto& g : gain.mutable_data()) g = 0.0;
  for (std::size_t c = 0; c < 16; ++c) {
    shift.mutable_data()[c] = c == 0 ? 1.0 : 0.0;
    emb.mutable_data()[Vocab::kEos * 16 + c] = c == 0 ? 100.0 : 0.0;
  }
  EXPECT_TRUE(rig->decoder->generate(episode(), Mode::kWithStructure).empty());
  EXPECT_TRUE(rig->decoder->generate(episode(), Mode::kTextOnly).empty());
}

TEST(Generate, DeterministicAndBounded) {
  auto a = make_rig();
  auto b = make_rig();
  const auto x = a->decoder->generate(episode(), Mode::kWithStructure);
  EXPECT_EQ(x, a->decoder->generate(episode(), Mode::kWithStructure));
  EXPECT_EQ(x, b->decoder->generate(episode(), Mode::kWithStructure));
  EXPECT_LE(x.size(), 6u);
  EXPECT_LE(a->decoder->generate(episode(), Mode::kWithStructure, 2).size(), 2u);
}

TEST(Generate, MatchesArgmaxOfForwardLogits) {
  auto rig = make_rig();
  Episode ep = episode();
  const auto out = rig->decoder->generate(ep, Mode::kWithStructure, 4);
  // Re-score the generated answer: each token is the argmax of its row.
  ep.answer = out;
  const Tensor logits = rig->decoder->forward_logits(ep, Mode::kWithStructure);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto row = row_of(logits, j);
    EXPECT_EQ(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()), out[j]);
  }
}

// --- saliency ---------------------------------------------------------------------

TEST(Saliency, NonNegativeAndCausal) {
  auto rig = make_rig();
  const Episode ep = episode();
  const std::size_t inputs = 1 + ep.prompt.size() + 1 + ep.answer.size();
  for (std::size_t target = 0; target <= ep.answer.size(); ++target) {
    const Saliency s = rig->decoder->token_saliency(ep, Mode::kWithStructure, target);
    ASSERT_EQ(s.scores.size(), inputs);
    EXPECT_EQ(s.prefix_rows, 1u);
    for (double v : s.scores) EXPECT_GE(v, 0.0);
    // The output row for `target` sits at input row 1 + |prompt| + target.
    const std::size_t own = 1 + ep.prompt.size() + target;
    for (std::size_t r = own + 1; r < inputs; ++r) EXPECT_EQ(s.scores[r], 0.0) << target << " " << r;
    for (std::size_t r = 0; r <= own; ++r) EXPECT_GT(s.scores[r], 0.0) << target << " " << r;
  }
  EXPECT_THROW(rig->decoder->token_saliency(ep, Mode::kWithStructure, ep.answer.size() + 1), Error);
}

TEST(Saliency, ZeroedPrefixChangesScores) {
  auto rig = make_rig();
  Episode ep = episode();
  const Saliency a = rig->decoder->token_saliency(ep, Mode::kWithStructure, 0);
  ep.structure = Tensor::zeros(1, 16);
  const Saliency b = rig->decoder->token_saliency(ep, Mode::kWithStructure, 0);
  double sa = 0, sb = 0;
  for (double v : a.scores) sa += v;
  for (double v : b.scores) sb += v;
  EXPECT_GT(std::abs(sa - sb), 1e-9 * sa);
  const Saliency t = rig->decoder->token_saliency(ep, Mode::kTextOnly, 0);
  EXPECT_EQ(t.prefix_rows, 0u);
  EXPECT_EQ(t.scores.size(), a.scores.size() - 1);
}

TEST(Saliency, MatchesFiniteDifferenceOfInputRow) {
  // Independent check of one score: perturb the structure row directly.
  auto rig = make_rig();
  Episode ep = episode();
  const Saliency s = rig->decoder->token_saliency(ep, Mode::kWithStructure, 1);
  const auto logp = [&] { return rig->decoder->answer_log_probs(ep, Mode::kWithStructure)[1]; };
  double sq = 0;
  auto x = ep.structure.mutable_data();
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double orig = x[c];
    x[c] = orig + 1e-6;
    const double up = logp();
    x[c] = orig - 1e-6;
    const double down = logp();
    x[c] = orig;
    sq += std::pow((up - down) / 2e-6, 2);
  }
  EXPECT_NEAR(s.scores[0], std::sqrt(sq), 1e-6 * std::max(1.0, std::sqrt(sq)));
}

TEST(Mode, Names) {
  EXPECT_STREQ(mode_name(Mode::kWithStructure), "with_structure");
  EXPECT_EQ(parse_mode("text_only"), Mode::kTextOnly);
  EXPECT_EQ(testing::error_code_of([] { parse_mode("both"); }), ErrorCode::kInvalidArgument);
}

// --- training through the full model -------------------------------------------

struct ModelRig {
  RunConfig cfg;
  qa::Corpus corpus;
  qa::Dataset ds;
  std::unique_ptr<Model> model;
};

std::unique_ptr<ModelRig> tiny_model(bool freeze = false) {
  auto r = std::make_unique<ModelRig>();
  r->cfg = preset("tiny");
  r->cfg.corpus.tables = 4;
  r->cfg.freeze_decoder = freeze;
  r->corpus = qa::generate_corpus(r->cfg.corpus, r->cfg.corpus_seed);
  r->ds = qa::generate_dataset(r->corpus, r->cfg.seed);
  r->model = std::make_unique<Model>(r->cfg, build_vocab(r->corpus, r->ds.samples));
  return r;
}

TEST(TrainStep, OneStepDecreasesLoss) {
  auto r = tiny_model();
  const TableIndex tables(r->corpus);
  const auto samples = filter_tasks(r->cfg, r->ds.samples);
  std::vector<const qa::Sample*> batch;
  for (std::size_t i = 0; i < 4; ++i) batch.push_back(&samples[i]);
  r->model->params().zero_grad();
  const Tensor before = batch_loss(*r->model, tables, batch, Mode::kWithStructure);
  before.backward();
  num::AdamW opt({});
  opt.step(r->model->params(), 1e-3);
  const double after = batch_loss(*r->model, tables, batch, Mode::kWithStructure).item();
  EXPECT_LT(after, before.item());
}

TEST(TrainStep, GradientReachesEncoderThroughStructure) {
  auto r = tiny_model();
  const TableIndex tables(r->corpus);
  const auto samples = filter_tasks(r->cfg, r->ds.samples);
  r->model->params().zero_grad();
  batch_loss(*r->model, tables, {&samples[0], &samples[1]}, Mode::kWithStructure).backward();
  for (const char* name : {"projector/affine/weight", "encoder/token_embedding", "encoder/layer0/fusion/in/weight"}) {
    const auto g = r->model->params().get(name).grad();
    EXPECT_TRUE(std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; })) << name;
  }
}

TEST(TrainStep, FrozenDecoderIsBitIdentical) {
  auto r = tiny_model(true);
  const TableIndex tables(r->corpus);
  const auto train = filter_tasks(r->cfg, r->ds.select(qa::Split::kTrain));
  const num::ParamStore before = r->model->params().clone();
  train_model(*r->model, tables, train, {});
  bool encoder_moved = false, projector_moved = false;
  for (const auto& [name, e] : r->model->params().entries()) {
    const auto now = e.tensor.data();
    const auto was = before.get(name).data();
    const bool same = std::equal(now.begin(), now.end(), was.begin());
    if (name.rfind("decoder/", 0) == 0) {
      EXPECT_TRUE(same) << name;
    }
    if (name.rfind("encoder/", 0) == 0 && !same) encoder_moved = true;
    if (name.rfind("projector/", 0) == 0 && !same) projector_moved = true;
  }
  EXPECT_TRUE(encoder_moved);
  EXPECT_TRUE(projector_moved);
}

TEST(StructurePrefix, InvariantUnderTablePermutation) {
  auto r = tiny_model();
  std::mt19937_64 rng(12);
  for (int i = 0; i < 20; ++i) {
    const table::Table t =
        i % 2 ? testing::random_flat(rng, 5, 5, false) : testing::random_hierarchical(rng, i % 4 == 0);
    const table::Table p = table::permute_table(t, table::random_permutation(t, rng));
    const Tensor a = r->model->structure(t);
    const Tensor b = r->model->structure(p);
    EXPECT_TRUE(rel_close({a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()}, 1e-5));
  }
  // The serialized text does change with the permutation.
  const table::Table t = table::Table::flat({"a", "b"}, {{"1", "2"}, {"3", "4"}});
  const table::Table p = table::permute_table(t, {{1, 0}, {0, 1}});
  EXPECT_NE(r->model->prompt_ids(t, "q ?"), r->model->prompt_ids(p, "q ?"));
}

}  // namespace
}  // namespace hypertab::dec
