#include "hypertab/layers.hpp"

#include <cmath>

#include "hypertab/error.hpp"

namespace hypertab::nn {

Linear Linear::make(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                    std::mt19937_64& rng, bool with_bias) {
  Linear l;
  l.weight = store.add_fan_in(prefix + "/weight", in, out, rng);
  if (with_bias) l.bias = store.add_constant(prefix + "/bias", 1, out, 0.0);
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = num::matmul(x, weight);
  return bias.defined() ? num::add_row(y, bias) : y;
}

LayerNorm LayerNorm::make(ParamStore& store, const std::string& prefix, std::size_t width) {
  return LayerNorm{store.add_constant(prefix + "/gain", 1, width, 1.0),
                   store.add_constant(prefix + "/shift", 1, width, 0.0)};
}

FeedForward FeedForward::make(ParamStore& store, const std::string& prefix, std::size_t width,
                              std::size_t hidden, std::size_t out_width, std::mt19937_64& rng) {
  return FeedForward{Linear::make(store, prefix + "/in", width, hidden, rng),
                     Linear::make(store, prefix + "/out", hidden, out_width, rng)};
}

SetAttentionBlock SetAttentionBlock::make(ParamStore& store, const std::string& prefix, std::size_t width,
                                          std::size_t ff_hidden, std::size_t heads, std::size_t seed_count,
                                          std::mt19937_64& rng) {
  if (heads == 0 || width % heads != 0) {
    fail(ErrorCode::kInvalidArgument, prefix + ": width " + std::to_string(width) + " not divisible by " +
                                          std::to_string(heads) + " heads");
  }
  if (seed_count == 0) fail(ErrorCode::kInvalidArgument, prefix + ": seed count must be positive");
  SetAttentionBlock b;
  b.seeds = store.add_uniform(prefix + "/seeds", seed_count, width, 1.0 / std::sqrt(static_cast<double>(width)), rng);
  b.query = Linear::make(store, prefix + "/query", width, width, rng, false);
  b.key = Linear::make(store, prefix + "/key", width, width, rng, false);
  b.value = Linear::make(store, prefix + "/value", width, width, rng, false);
  b.proj = Linear::make(store, prefix + "/proj", width, width, rng);
  b.norm1 = LayerNorm::make(store, prefix + "/norm1", width);
  b.norm2 = LayerNorm::make(store, prefix + "/norm2", width);
  b.rff = FeedForward::make(store, prefix + "/rff", width, ff_hidden, width, rng);
  b.heads = heads;
  return b;
}

Tensor SetAttentionBlock::per_seed(const Tensor& x, const std::vector<std::vector<std::uint32_t>>& segments) const {
  if (segments.empty()) fail(ErrorCode::kShape, "set attention: no segments");
  const Tensor q = query(seeds);
  const Tensor k = key(x);
  const Tensor v = value(x);
  const Tensor att = proj(num::segment_attention(q, k, v, segments, heads));
  const Tensor h = norm1(num::add(num::tile_rows(seeds, segments.size()), att));
  return norm2(num::add(h, rff(h)));
}

Tensor SetAttentionBlock::operator()(const Tensor& x, const std::vector<std::vector<std::uint32_t>>& segments) const {
  return num::group_mean(per_seed(x, segments), seed_count());
}

}  // namespace hypertab::nn
