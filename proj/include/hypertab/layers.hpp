#pragma once

#include <random>
#include <string>
#include <vector>

#include "hypertab/params.hpp"
#include "hypertab/tensor.hpp"

namespace hypertab::nn {

using num::ParamStore;
using num::Tensor;

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out, undefined when bias-free

  static Linear make(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                     std::mt19937_64& rng, bool with_bias = true);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor shift;

  static LayerNorm make(ParamStore& store, const std::string& prefix, std::size_t width);
  Tensor operator()(const Tensor& x) const { return num::layer_norm(x, gain, shift); }
};

// Two affine maps around a GELU.
struct FeedForward {
  Linear in;
  Linear out;

  static FeedForward make(ParamStore& store, const std::string& prefix, std::size_t width, std::size_t hidden,
                          std::size_t out_width, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const { return out(num::gelu(in(x))); }
};

// Set attention block with trainable seeds S (s x d):
//   H   = LayerNorm(S + MultiHead(S, X, X))
//   out = LayerNorm(H + rFF(H))
// evaluated independently for every member segment of X. The residual is on
// the seed operand, so the output has one row per seed whatever |X| is.
struct SetAttentionBlock {
  Tensor seeds;
  Linear query, key, value, proj;
  LayerNorm norm1, norm2;
  FeedForward rff;
  std::size_t heads = 1;

  static SetAttentionBlock make(ParamStore& store, const std::string& prefix, std::size_t width,
                                std::size_t ff_hidden, std::size_t heads, std::size_t seed_count,
                                std::mt19937_64& rng);
  std::size_t seed_count() const { return seeds.rows(); }

  // (segments * s) x d, segment-major.
  Tensor per_seed(const Tensor& x, const std::vector<std::vector<std::uint32_t>>& segments) const;
  // segments x d; the s seed outputs of a segment are averaged.
  Tensor operator()(const Tensor& x, const std::vector<std::vector<std::uint32_t>>& segments) const;
};

}  // namespace hypertab::nn
