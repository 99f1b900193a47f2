#include "hypertab/model.hpp"

#include "hypertab/error.hpp"
#include "hypertab/hypergraph.hpp"

namespace hypertab {

text::Vocab build_vocab(const qa::Corpus& corpus, const std::vector<qa::Sample>& samples) {
  std::vector<std::string> texts;
  for (const auto& nt : corpus) texts.push_back(table::serialize_table(nt.table));
  for (const auto& s : samples) {
    texts.push_back(s.question);
    texts.push_back(s.answer_text());
  }
  return text::Vocab::build(texts);
}

// Parameters are created in a fixed order (encoder, projector, decoder) from
// one generator seeded by the run seed.
Model::Model(const RunConfig& config, text::Vocab vocab)
    : config_(config),
      vocab_(std::move(vocab)),
      init_rng_(config.seed),
      encoder_(store_, config_.encoder, vocab_, init_rng_),
      projector_(store_, config_.projector(), init_rng_),
      decoder_(store_, config_.decoder, vocab_.size(), init_rng_) {}

num::Tensor Model::structure(const enc::PreparedGraph& g) const {
  const auto s = encoder_.encode(g);
  return projector_(s.nodes, s.edges);
}

num::Tensor Model::structure(const table::Table& t) const {
  return structure(encoder_.prepare(graph::build_hypergraph(t)));
}

std::vector<int> Model::prompt_ids(const table::Table& t, const std::string& question) const {
  auto ids = vocab_.encode(table::serialize_table(t));
  const auto q = vocab_.encode(question);
  ids.insert(ids.end(), q.begin(), q.end());
  return ids;
}

dec::Episode Model::episode(const table::Table& t, const std::string& question, const std::string& answer,
                            dec::Mode mode) const {
  dec::Episode ep;
  if (mode == dec::Mode::kWithStructure) ep.structure = structure(t);
  ep.prompt = prompt_ids(t, question);
  ep.answer = vocab_.encode(answer);
  return ep;
}

std::string Model::answer(const table::Table& t, const std::string& question, dec::Mode mode) const {
  num::NoGradGuard guard;
  const auto ep = episode(t, question, "", mode);
  return vocab_.decode(decoder_.generate(ep, mode));
}

void Model::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  config_.save(dir / "config.cfg");
  vocab_.save(dir / "vocab.txt");
  num::save_checkpoint(store_, dir, config_.hash());
}

std::unique_ptr<Model> Model::load(const std::filesystem::path& dir) {
  const auto config = RunConfig::load(dir / "config.cfg");
  auto model = std::make_unique<Model>(config, text::Vocab::load(dir / "vocab.txt"));
  num::load_checkpoint(model->store_, dir, config.hash());
  return model;
}

}  // namespace hypertab
