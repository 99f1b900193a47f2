#include "hypertab/encoder.hpp"

#include <algorithm>

#include "hypertab/error.hpp"
#include "hypertab/random.hpp"

namespace hypertab::enc {

namespace {

std::string layer_prefix(std::size_t t) { return "encoder/layer" + std::to_string(t); }

}  // namespace

void EncoderConfig::validate() const {
  if (d_g == 0 || heads == 0 || d_g % heads != 0) {
    fail(ErrorCode::kInvalidArgument,
         "encoder: d_g " + std::to_string(d_g) + " must be a positive multiple of heads " + std::to_string(heads));
  }
  if (layers == 0) fail(ErrorCode::kInvalidArgument, "encoder: at least one layer is required");
  if (fusion_hidden == 0 || ff_hidden == 0) fail(ErrorCode::kInvalidArgument, "encoder: hidden widths must be positive");
  if (seed_count == 0) fail(ErrorCode::kInvalidArgument, "encoder: seed_count must be positive");
}

Encoder::Encoder(ParamStore& store, const EncoderConfig& config, const text::Vocab& vocab, std::mt19937_64& rng)
    : config_(config), vocab_(&vocab) {
  config_.validate();
  const std::size_t d = config_.d_g;
  const std::size_t rows = vocab.size() + config_.hash_buckets;
  // Token vectors start at unit scale so that mean-pooled texts differ
  // visibly before any training.
  token_embedding_ = store.add_uniform("encoder/token_embedding", rows, d, 1.0, rng);
  empty_cell_ = store.add_uniform("encoder/empty_cell", 1, d, 1.0, rng);
  row_edge_ = store.add_uniform("encoder/row_edge", 1, d, 1.0, rng);
  for (std::size_t t = 0; t < config_.layers; ++t) {
    const std::string p = layer_prefix(t);
    layers_.push_back(Layer{
        nn::SetAttentionBlock::make(store, p + "/edge_set", d, config_.ff_hidden, config_.heads, config_.seed_count,
                                    rng),
        nn::FeedForward::make(store, p + "/fusion", 2 * d, config_.fusion_hidden, d, rng),
        nn::SetAttentionBlock::make(store, p + "/node_set", d, config_.ff_hidden, config_.heads, config_.seed_count,
                                    rng)});
  }
}

std::uint32_t Encoder::token_row(const std::string& token) const {
  if (vocab_->contains(token)) return static_cast<std::uint32_t>(vocab_->id(token));
  if (config_.hash_buckets == 0) return text::Vocab::kUnk;
  const auto h = fnv1a(token.data(), token.size());
  return static_cast<std::uint32_t>(vocab_->size() + h % config_.hash_buckets);
}

PreparedGraph Encoder::prepare(const graph::Hypergraph& g) const {
  PreparedGraph p;
  p.n_nodes = g.nodes.size();
  p.n_edges = g.edges.size();
  // Two extra rows follow the token rows: the empty-cell and row-edge vectors.
  std::vector<std::vector<std::uint32_t>> texts;
  std::vector<int> fallback;  // 0 empty cell, 1 row edge
  for (const auto& n : g.nodes) {
    texts.emplace_back();
    for (const auto& tok : text::split_tokens(n.text)) texts.back().push_back(token_row(tok));
    fallback.push_back(0);
  }
  for (const auto& e : g.edges) {
    texts.emplace_back();
    for (const auto& tok : text::split_tokens(e.label)) texts.back().push_back(token_row(tok));
    fallback.push_back(e.kind == graph::EdgeKind::kRow && !e.source ? 1 : 0);
  }
  std::size_t total = 0;
  for (const auto& t : texts) total += t.size();
  const auto empty_slot = static_cast<std::uint32_t>(total);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::vector<std::uint32_t> seg;
    if (fallback[i] == 1) {
      seg.push_back(empty_slot + 1);
    } else if (texts[i].empty()) {
      seg.push_back(empty_slot);
    } else {
      for (std::size_t k = 0; k < texts[i].size(); ++k) seg.push_back(static_cast<std::uint32_t>(p.token_rows.size() + k));
    }
    p.token_rows.insert(p.token_rows.end(), texts[i].begin(), texts[i].end());
    p.init_segments.push_back(std::move(seg));
  }
  // Reductions visit members in cell-id order, so the result does not depend
  // on how the hypergraph happens to number its nodes and edges.
  const auto inc = graph::incidence(g);
  std::vector<std::uint32_t> node_key(g.nodes.size());
  for (const auto& n : g.nodes) node_key[n.node_id] = n.cell_id.value;
  std::vector<std::pair<int, std::uint32_t>> edge_key(g.edges.size());
  for (const auto& e : g.edges) {
    std::uint32_t k = e.source ? e.source->value : UINT32_MAX;
    if (!e.source) {
      for (auto v : e.members) k = std::min(k, node_key[v]);
    }
    edge_key[e.edge_id] = {static_cast<int>(e.kind), k};
  }
  p.edge_members = inc.edge_nodes;
  for (auto& m : p.edge_members) {
    std::sort(m.begin(), m.end(), [&](auto a, auto b) { return node_key[a] < node_key[b]; });
  }
  p.node_edges = inc.node_edges;
  for (auto& m : p.node_edges) {
    std::sort(m.begin(), m.end(), [&](auto a, auto b) { return edge_key[a] < edge_key[b]; });
  }
  return p;
}

EncoderState Encoder::init_state(const PreparedGraph& p) const {
  if (p.n_nodes == 0 || p.n_edges == 0) fail(ErrorCode::kShape, "encoder: hypergraph has no nodes or no edges");
  std::vector<Tensor> parts;
  if (!p.token_rows.empty()) parts.push_back(num::gather_rows(token_embedding_, p.token_rows));
  parts.push_back(empty_cell_);
  parts.push_back(row_edge_);
  const Tensor pool = num::concat_rows(parts);
  const auto& segments = p.init_segments;
  const Tensor all = num::segment_mean(pool, segments);
  return EncoderState{num::slice_rows(all, 0, p.n_nodes), num::slice_rows(all, p.n_nodes, p.n_edges), 0};
}

EncoderState Encoder::layer(const EncoderState& s, const PreparedGraph& p) const {
  if (s.layer >= layers_.size()) fail(ErrorCode::kInvalidArgument, "encoder: no layer " + std::to_string(s.layer));
  if (s.nodes.rows() != p.n_nodes || s.edges.rows() != p.n_edges) {
    fail(ErrorCode::kShape, "encoder: state " + num::shape_str(s.nodes) + "/" + num::shape_str(s.edges) +
                                " does not match hypergraph with " + std::to_string(p.n_nodes) + " nodes and " +
                                std::to_string(p.n_edges) + " edges");
  }
  const Layer& L = layers_[s.layer];
  const Tensor gathered = L.edge_set(s.nodes, p.edge_members);
  const std::vector<Tensor> cat{s.edges, gathered};
  const Tensor edges = L.fusion(num::concat_cols(cat));
  const Tensor nodes = L.node_set(edges, p.node_edges);
  return EncoderState{nodes, edges, s.layer + 1};
}

EncoderState Encoder::encode(const PreparedGraph& p) const {
  EncoderState s = init_state(p);
  for (std::size_t t = 0; t < layers_.size(); ++t) s = layer(s, p);
  return s;
}

void ProjectorConfig::validate() const {
  if (d_g == 0 || d_l == 0) fail(ErrorCode::kInvalidArgument, "projector: widths must be positive");
  if (k_tokens == 0) fail(ErrorCode::kInvalidArgument, "projector: k_tokens must be at least 1");
  if (k_tokens > 1 && (heads == 0 || d_g % heads != 0)) {
    fail(ErrorCode::kInvalidArgument, "projector: d_g must be divisible by heads");
  }
}

Projector::Projector(ParamStore& store, const ProjectorConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  affine_ = nn::Linear::make(store, "projector/affine", config_.d_g, config_.d_l, rng);
  if (config_.k_tokens > 1) {
    pool_.push_back(nn::SetAttentionBlock::make(store, "projector/pool", config_.d_g, config_.ff_hidden, config_.heads,
                                                config_.k_tokens, rng));
  }
}

Tensor Projector::operator()(const Tensor& nodes, const Tensor& edges) const {
  if (nodes.rows() + edges.rows() == 0) fail(ErrorCode::kShape, "projector: empty input");
  if (nodes.cols() != config_.d_g || edges.cols() != config_.d_g) {
    fail(ErrorCode::kShape, "projector: inputs " + num::shape_str(nodes) + " and " + num::shape_str(edges) +
                                " do not have width " + std::to_string(config_.d_g));
  }
  const std::vector<Tensor> parts{nodes, edges};
  const Tensor set = num::concat_rows(parts);
  if (pool_.empty()) return affine_(num::mean_rows(set));
  std::vector<std::uint32_t> all(set.rows());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  return affine_(pool_.front().per_seed(set, {all}));
}

}  // namespace hypertab::enc
