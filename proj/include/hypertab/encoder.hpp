#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hypertab/hypergraph.hpp"
#include "hypertab/layers.hpp"
#include "hypertab/text.hpp"

namespace hypertab::enc {

using num::ParamStore;
using num::Tensor;

struct EncoderConfig {
  std::size_t d_g = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t fusion_hidden = 128;
  std::size_t ff_hidden = 128;     // rFF width inside every set block
  std::size_t hash_buckets = 64;   // embeddings for out-of-vocabulary tokens
  std::size_t seed_count = 1;

  void validate() const;
};

struct EncoderState {
  Tensor nodes;  // |V| x d_g
  Tensor edges;  // |E| x d_g
  std::size_t layer = 0;
};

// Everything about a hypergraph the encoder needs, resolved once.
struct PreparedGraph {
  std::vector<std::uint32_t> token_rows;                 // embedding-table rows, all texts concatenated
  std::vector<std::vector<std::uint32_t>> init_segments;  // per node, then per edge
  std::vector<std::vector<std::uint32_t>> edge_members;   // node ids in cell-id order
  std::vector<std::vector<std::uint32_t>> node_edges;     // edge ids by (kind, anchor cell id)
  std::size_t n_nodes = 0;
  std::size_t n_edges = 0;
};

class Encoder {
 public:
  // Registers parameters under "encoder/" in `store`.
  Encoder(ParamStore& store, const EncoderConfig& config, const text::Vocab& vocab, std::mt19937_64& rng);

  const EncoderConfig& config() const { return config_; }

  // Embedding-table row for a token: its vocabulary id, or a hash bucket.
  std::uint32_t token_row(const std::string& token) const;
  PreparedGraph prepare(const graph::Hypergraph& g) const;

  // Mean of token embeddings per text. Empty node text uses the empty-cell
  // vector; unlabeled row edges share the row-edge vector; other empty
  // labels also fall back to the empty-cell vector.
  EncoderState init_state(const PreparedGraph& p) const;
  // Edges from their members, then nodes from their incident edges.
  EncoderState layer(const EncoderState& s, const PreparedGraph& p) const;
  EncoderState encode(const PreparedGraph& p) const;
  EncoderState encode(const graph::Hypergraph& g) const { return encode(prepare(g)); }

 private:
  struct Layer {
    nn::SetAttentionBlock edge_set;
    nn::FeedForward fusion;
    nn::SetAttentionBlock node_set;
  };

  EncoderConfig config_;
  const text::Vocab* vocab_;
  Tensor token_embedding_;
  Tensor empty_cell_;
  Tensor row_edge_;
  std::vector<Layer> layers_;
};

struct ProjectorConfig {
  std::size_t d_g = 64;
  std::size_t d_l = 128;
  std::size_t k_tokens = 1;
  std::size_t heads = 4;       // used only when k_tokens > 1
  std::size_t ff_hidden = 128;

  void validate() const;
};

// Pools node and edge embeddings as one set and maps them to k_tokens
// decoder-width structure tokens.
class Projector {
 public:
  // Registers parameters under "projector/".
  Projector(ParamStore& store, const ProjectorConfig& config, std::mt19937_64& rng);

  const ProjectorConfig& config() const { return config_; }
  Tensor operator()(const Tensor& nodes, const Tensor& edges) const;  // k_tokens x d_l

 private:
  ProjectorConfig config_;
  nn::Linear affine_;
  std::vector<nn::SetAttentionBlock> pool_;  // empty when k_tokens == 1
};

}  // namespace hypertab::enc
