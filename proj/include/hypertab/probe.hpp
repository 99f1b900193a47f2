#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hypertab/encoder.hpp"
#include "hypertab/structqa.hpp"

namespace hypertab::probe {

enum class Regime { kMlpOnly, kRandomEncoder, kPretrainedEncoder };

const char* regime_name(Regime r);
Regime parse_regime(const std::string& s);

struct Instance {
  std::vector<double> features;  // cell embedding then edge embedding
  int label = 0;                 // 1 member, 0 non-member
  std::string table_id;
};

// For every body cell and each axis with at least two edges of that axis:
// one (cell, own row/column edge) positive and one (cell, other edge of the
// same axis) negative, so classes are balanced per table. mlp_only reads the
// initial text embeddings; the encoder regimes read final embeddings.
std::vector<Instance> build_probe_dataset(const qa::Corpus& corpus, Regime regime, const enc::Encoder& encoder,
                                          std::uint64_t seed);

struct ProbeOptions {
  std::size_t epochs = 50;
  double lr = 3e-4;
  std::size_t hidden = 64;
  std::size_t batch_size = 32;
  double train_fraction = 0.8;
};

struct ProbeResult {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double train_accuracy = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

// F1 of the positive class; 0 when nothing is predicted positive and nothing
// is positive.
double f1_score(const std::vector<int>& predicted, const std::vector<int>& gold, double* precision = nullptr,
                double* recall = nullptr);

// Two-layer feedforward classifier on frozen features, seeded instance split.
ProbeResult train_and_evaluate(const std::vector<Instance>& instances, const ProbeOptions& opt, std::uint64_t seed);

}  // namespace hypertab::probe
