#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hypertab/model.hpp"
#include "hypertab/params.hpp"

namespace hypertab {

// Table lookup by id over one or more corpora.
class TableIndex {
 public:
  TableIndex() = default;
  explicit TableIndex(const qa::Corpus& corpus) { add(corpus); }
  void add(const qa::Corpus& corpus);
  const table::Table& at(const std::string& id) const;

 private:
  std::map<std::string, const table::Table*> tables_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double lr = 0.0;  // at the last step of the epoch
};

struct TrainResult {
  std::vector<EpochLog> curve;
  std::size_t best_epoch = 0;  // 1-based; parameters are restored to it
  bool early_stopped = false;
  std::size_t steps = 0;
};

// Samples not selected by config().tasks are skipped.
std::vector<qa::Sample> filter_tasks(const RunConfig& config, const std::vector<qa::Sample>& samples);

// Mean answer-token loss of one batch (weights by answer length, so the
// result equals the per-token mean over the batch).
num::Tensor batch_loss(const Model& model, const TableIndex& tables, const std::vector<const qa::Sample*>& batch,
                       dec::Mode mode);

// AdamW with linear warm-up and half-cycle cosine decay; early stopping on
// validation loss with the configured patience, keeping the best epoch.
TrainResult train_model(Model& model, const TableIndex& tables, const std::vector<qa::Sample>& train,
                        const std::vector<qa::Sample>& valid,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

double mean_loss(const Model& model, const TableIndex& tables, const std::vector<qa::Sample>& samples,
                 dec::Mode mode);

struct Transcript {
  std::string sample_id;
  std::string question;
  std::string gold;
  std::string prediction;
  std::string mode;
};

// Greedy answers; up to `workers` threads share the read-only parameters.
qa::Predictions predict(const Model& model, const TableIndex& tables, const std::vector<qa::Sample>& samples,
                        dec::Mode mode, std::vector<Transcript>* transcripts = nullptr, std::size_t workers = 1);

struct SaliencyRecord {
  std::string sample_id;
  std::vector<std::string> tokens;  // "[structure]" for prefix rows
  std::vector<double> scores;
  std::size_t prefix_rows = 0;
  std::size_t target = 0;            // scored position
  std::size_t target_input_row = 0;  // input row whose output predicts it
};

// Saliency of the first answer token of each sample.
std::vector<SaliencyRecord> saliency(Model& model, const TableIndex& tables,
                                     const std::vector<qa::Sample>& samples, dec::Mode mode);

// Finite-difference audit of the full encoder, projector and decoder loss on
// `samples` (structure mode).
num::GradCheckReport grad_audit(Model& model, const TableIndex& tables, const std::vector<qa::Sample>& samples,
                                double eps = 1e-4);

}  // namespace hypertab
