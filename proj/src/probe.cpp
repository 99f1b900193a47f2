#include "hypertab/probe.hpp"

#include <cmath>

#include "hypertab/error.hpp"
#include "hypertab/hypergraph.hpp"
#include "hypertab/layers.hpp"
#include "hypertab/params.hpp"
#include "hypertab/random.hpp"

namespace hypertab::probe {

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::kMlpOnly: return "mlp_only";
    case Regime::kRandomEncoder: return "random_encoder";
    case Regime::kPretrainedEncoder: return "pretrained_encoder";
  }
  return "?";
}

Regime parse_regime(const std::string& s) {
  for (Regime r : {Regime::kMlpOnly, Regime::kRandomEncoder, Regime::kPretrainedEncoder}) {
    if (s == regime_name(r)) return r;
  }
  fail(ErrorCode::kInvalidArgument, "unknown probe regime '" + s + "'");
}

std::vector<Instance> build_probe_dataset(const qa::Corpus& corpus, Regime regime, const enc::Encoder& encoder,
                                          std::uint64_t seed) {
  num::NoGradGuard guard;
  std::mt19937_64 rng(seed);
  std::vector<Instance> out;
  for (const auto& nt : corpus) {
    const auto g = graph::build_hypergraph(nt.table);
    const auto prepared = encoder.prepare(g);
    const auto state = regime == Regime::kMlpOnly ? encoder.init_state(prepared) : encoder.encode(prepared);
    const std::size_t d = state.nodes.cols();
    const auto nodes = state.nodes.data();
    const auto edges = state.edges.data();
    // Row and column edge ids by position.
    std::vector<std::uint32_t> col_edges, row_edges;
    for (const auto& e : g.edges) {
      if (e.kind == graph::EdgeKind::kColumn) col_edges.push_back(e.edge_id);
      if (e.kind == graph::EdgeKind::kRow) row_edges.push_back(e.edge_id);
    }
    const auto emit = [&](std::size_t node, std::uint32_t edge, int label) {
      Instance in;
      in.features.assign(nodes.begin() + node * d, nodes.begin() + (node + 1) * d);
      in.features.insert(in.features.end(), edges.begin() + edge * d, edges.begin() + (edge + 1) * d);
      in.label = label;
      in.table_id = nt.id;
      out.push_back(std::move(in));
    };
    const std::size_t cols = nt.table.n_cols();
    for (std::size_t node = 0; node < g.nodes.size(); ++node) {
      const std::size_t r = node / cols;
      const std::size_t c = node % cols;
      for (const auto* axis : {&row_edges, &col_edges}) {
        if (axis->size() < 2) continue;
        const std::size_t own = axis == &row_edges ? r : c;
        std::size_t other = uniform_index(rng, axis->size() - 1);
        if (other >= own) ++other;
        emit(node, (*axis)[own], 1);
        emit(node, (*axis)[other], 0);
      }
    }
  }
  return out;
}

double f1_score(const std::vector<int>& predicted, const std::vector<int>& gold, double* precision, double* recall) {
  if (predicted.size() != gold.size()) fail(ErrorCode::kInvalidArgument, "f1: prediction and gold sizes differ");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] == 1 && gold[i] == 1) ++tp;
    if (predicted[i] == 1 && gold[i] != 1) ++fp;
    if (predicted[i] != 1 && gold[i] == 1) ++fn;
  }
  const double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  if (precision) *precision = p;
  if (recall) *recall = r;
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

namespace {

num::Tensor stack(const std::vector<Instance>& all, const std::vector<std::size_t>& idx, std::size_t begin,
                  std::size_t end) {
  const std::size_t d = all.front().features.size();
  std::vector<double> v;
  v.reserve((end - begin) * d);
  for (std::size_t i = begin; i < end; ++i) {
    const auto& f = all[idx[i]].features;
    v.insert(v.end(), f.begin(), f.end());
  }
  return num::Tensor::constant(end - begin, d, std::move(v));
}

}  // namespace

ProbeResult train_and_evaluate(const std::vector<Instance>& instances, const ProbeOptions& opt, std::uint64_t seed) {
  if (instances.size() < 2) fail(ErrorCode::kInvalidArgument, "probe: need at least two instances");
  const std::size_t d = instances.front().features.size();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(instances.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  shuffle(std::span(idx), rng);
  std::size_t n_train = static_cast<std::size_t>(std::floor(opt.train_fraction * static_cast<double>(idx.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());

  // Standardize every feature with training-split statistics.
  std::vector<double> mean(d, 0.0), inv_std(d, 0.0);
  for (std::size_t i : train) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += instances[i].features[j];
  }
  for (double& m : mean) m /= static_cast<double>(train.size());
  for (std::size_t i : train) {
    for (std::size_t j = 0; j < d; ++j) {
      const double z = instances[i].features[j] - mean[j];
      inv_std[j] += z * z;
    }
  }
  for (double& v : inv_std) v = 1.0 / std::sqrt(v / static_cast<double>(train.size()) + 1e-12);
  std::vector<Instance> scaled = instances;
  for (auto& in : scaled) {
    for (std::size_t j = 0; j < d; ++j) in.features[j] = (in.features[j] - mean[j]) * inv_std[j];
  }

  num::ParamStore store;
  const auto head = nn::FeedForward::make(store, "probe", d, opt.hidden, 1, rng);
  num::AdamW adam({opt.lr, 0.0, 0.9, 0.999, 1e-8});
  const auto labels_of = [&](const std::vector<std::size_t>& ids, std::size_t b, std::size_t e) {
    std::vector<double> y;
    for (std::size_t i = b; i < e; ++i) y.push_back(instances[ids[i]].label);
    return y;
  };
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    shuffle(std::span(train), rng);
    for (std::size_t b = 0; b < train.size(); b += opt.batch_size) {
      const std::size_t e = std::min(train.size(), b + opt.batch_size);
      store.zero_grad();
      num::bce_with_logits(head(stack(scaled, train, b, e)), labels_of(train, b, e)).backward();
      adam.step(store, opt.lr);
    }
  }
  const auto classify = [&](const std::vector<std::size_t>& ids, std::vector<int>& pred, std::vector<int>& gold) {
    num::NoGradGuard guard;
    const num::Tensor out = head(stack(scaled, ids, 0, ids.size()));
    const auto logits = out.data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      pred.push_back(logits[i] > 0.0 ? 1 : 0);
      gold.push_back(instances[ids[i]].label);
    }
  };
  ProbeResult res;
  res.n_train = train.size();
  res.n_test = test.size();
  std::vector<int> pred, gold;
  classify(train, pred, gold);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == gold[i];
  res.train_accuracy = static_cast<double>(hit) / static_cast<double>(pred.size());
  pred.clear();
  gold.clear();
  classify(test, pred, gold);
  res.f1 = f1_score(pred, gold, &res.precision, &res.recall);
  return res;
}

}  // namespace hypertab::probe
