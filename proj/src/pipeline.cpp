#include "hypertab/pipeline.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "hypertab/error.hpp"
#include "hypertab/hypergraph.hpp"
#include "hypertab/random.hpp"

namespace hypertab {

void TableIndex::add(const qa::Corpus& corpus) {
  for (const auto& nt : corpus) tables_[nt.id] = &nt.table;
}

const table::Table& TableIndex::at(const std::string& id) const {
  const auto it = tables_.find(id);
  if (it == tables_.end()) fail(ErrorCode::kInvalidArgument, "unknown table id '" + id + "'");
  return *it->second;
}

std::vector<qa::Sample> filter_tasks(const RunConfig& config, const std::vector<qa::Sample>& samples) {
  std::vector<qa::Sample> out;
  for (const auto& s : samples) {
    if (config.includes(s.task)) out.push_back(s);
  }
  return out;
}

num::Tensor batch_loss(const Model& model, const TableIndex& tables, const std::vector<const qa::Sample*>& batch,
                       dec::Mode mode) {
  if (batch.empty()) fail(ErrorCode::kInvalidArgument, "batch_loss: empty batch");
  std::map<std::string, num::Tensor> structures;
  std::vector<dec::Episode> episodes;
  std::size_t tokens = 0;
  for (const auto* s : batch) {
    const auto& t = tables.at(s->table_id);
    dec::Episode ep;
    if (mode == dec::Mode::kWithStructure) {
      auto it = structures.find(s->table_id);
      if (it == structures.end()) it = structures.emplace(s->table_id, model.structure(t)).first;
      ep.structure = it->second;
    }
    ep.prompt = model.prompt_ids(t, s->question);
    ep.answer = model.vocab().encode(s->answer_text());
    tokens += ep.answer.size() + 1;
    episodes.push_back(std::move(ep));
  }
  num::Tensor total;
  for (const auto& ep : episodes) {
    const double w = static_cast<double>(ep.answer.size() + 1) / static_cast<double>(tokens);
    const num::Tensor l = num::scale(model.decoder().loss(ep, mode), w);
    total = total.defined() ? num::add(total, l) : l;
  }
  return total;
}

double mean_loss(const Model& model, const TableIndex& tables, const std::vector<qa::Sample>& samples,
                 dec::Mode mode) {
  if (samples.empty()) return 0.0;
  num::NoGradGuard guard;
  std::vector<const qa::Sample*> all;
  for (const auto& s : samples) all.push_back(&s);
  return batch_loss(model, tables, all, mode).item();
}

TrainResult train_model(Model& model, const TableIndex& tables, const std::vector<qa::Sample>& train,
                        const std::vector<qa::Sample>& valid, const std::function<void(const EpochLog&)>& on_epoch) {
  const RunConfig& cfg = model.config();
  if (train.empty()) fail(ErrorCode::kInvalidArgument, "train: no training samples");
  if (cfg.optim.batch_size == 0) fail(ErrorCode::kInvalidArgument, "train: batch_size must be positive");
  const std::size_t per_epoch = (train.size() + cfg.optim.batch_size - 1) / cfg.optim.batch_size;
  num::WarmupCosine sched;
  sched.base_lr = cfg.optim.lr;
  sched.total_steps = per_epoch * cfg.optim.epochs;
  sched.warmup_steps = static_cast<std::uint64_t>(std::floor(cfg.optim.warmup_fraction * sched.total_steps));
  num::AdamW opt({cfg.optim.lr, cfg.optim.weight_decay, cfg.optim.beta1, cfg.optim.beta2, 1e-8});
  std::vector<std::string> frozen;
  if (cfg.freeze_decoder) frozen.push_back("decoder/");
  if (cfg.mode == dec::Mode::kTextOnly) {
    // Unused parameters stay at their initial values.
    frozen.push_back("encoder/");
    frozen.push_back("projector/");
  }

  std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  num::ParamStore best = model.params().clone();
  double best_valid = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.optim.epochs; ++epoch) {
    shuffle(std::span(order), rng);
    double sum = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      std::vector<const qa::Sample*> batch;
      for (std::size_t k = b * cfg.optim.batch_size; k < std::min(train.size(), (b + 1) * cfg.optim.batch_size); ++k) {
        batch.push_back(&train[order[k]]);
      }
      model.params().zero_grad();
      const num::Tensor loss = batch_loss(model, tables, batch, cfg.mode);
      if (!std::isfinite(loss.item())) fail(ErrorCode::kNumeric, "train: non-finite loss at epoch " + std::to_string(epoch));
      loss.backward();
      lr = sched.lr_at(result.steps);
      opt.step(model.params(), lr, frozen);
      ++result.steps;
      sum += loss.item() * static_cast<double>(batch.size());
    }
    EpochLog log{epoch, sum / static_cast<double>(train.size()), 0.0, lr};
    log.valid_loss = valid.empty() ? log.train_loss : mean_loss(model, tables, valid, cfg.mode);
    result.curve.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.valid_loss < best_valid) {
      best_valid = log.valid_loss;
      best = model.params().clone();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.optim.patience && cfg.optim.patience > 0) {
      result.early_stopped = true;
      break;
    }
  }
  // Restore the best epoch's values into the live tensors.
  for (auto& [name, entry] : model.params().entries()) {
    const auto src = best.get(name).data();
    std::copy(src.begin(), src.end(), entry.tensor.mutable_data().begin());
  }
  model.params().zero_grad();
  return result;
}

qa::Predictions predict(const Model& model, const TableIndex& tables, const std::vector<qa::Sample>& samples,
                        dec::Mode mode, std::vector<Transcript>* transcripts, std::size_t workers) {
  // Worker w answers samples w, w + n, ...; the parameters are only read.
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, samples.size()));
  std::vector<std::string> answers(samples.size());
  const auto run = [&](std::size_t w) {
    num::NoGradGuard guard;
    std::map<std::string, num::Tensor> structures;
    for (std::size_t i = w; i < samples.size(); i += n) {
      const auto& s = samples[i];
      const auto& t = tables.at(s.table_id);
      dec::Episode ep;
      if (mode == dec::Mode::kWithStructure) {
        auto it = structures.find(s.table_id);
        if (it == structures.end()) it = structures.emplace(s.table_id, model.structure(t)).first;
        ep.structure = it->second;
      }
      ep.prompt = model.prompt_ids(t, s.question);
      answers[i] = model.vocab().decode(model.decoder().generate(ep, mode));
    }
  };
  if (n == 1) {
    run(0);
  } else {
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) {
      pool.emplace_back([&, w] {
        try {
          run(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  qa::Predictions out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    out[s.sample_id] = answers[i];
    if (transcripts) transcripts->push_back({s.sample_id, s.question, s.answer_text(), answers[i], dec::mode_name(mode)});
  }
  return out;
}

std::vector<SaliencyRecord> saliency(Model& model, const TableIndex& tables,
                                     const std::vector<qa::Sample>& samples, dec::Mode mode) {
  std::vector<SaliencyRecord> out;
  for (const auto& s : samples) {
    const auto& t = tables.at(s.table_id);
    dec::Episode ep;
    if (mode == dec::Mode::kWithStructure) {
      num::NoGradGuard guard;
      ep.structure = model.structure(t);
    }
    ep.prompt = model.prompt_ids(t, s.question);
    ep.answer = model.vocab().encode(s.answer_text());
    const auto sal = model.decoder().token_saliency(ep, mode, 0);
    SaliencyRecord r;
    r.sample_id = s.sample_id;
    r.prefix_rows = sal.prefix_rows;
    r.scores = sal.scores;
    for (std::size_t i = 0; i < sal.prefix_rows; ++i) r.tokens.push_back("[structure]");
    for (int id : ep.prompt) r.tokens.push_back(model.vocab().token(id));
    r.tokens.push_back(model.vocab().token(text::Vocab::kBos));
    for (int id : ep.answer) r.tokens.push_back(model.vocab().token(id));
    r.target = 0;
    r.target_input_row = sal.prefix_rows + ep.prompt.size();
    out.push_back(std::move(r));
  }
  // Saliency backward passes also reach the parameters.
  model.params().zero_grad();
  return out;
}

num::GradCheckReport grad_audit(Model& model, const TableIndex& tables, const std::vector<qa::Sample>& samples,
                                double eps) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "gradcheck: no samples");
  std::vector<const qa::Sample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  return num::grad_check(model.params(), [&] { return batch_loss(model, tables, batch, dec::Mode::kWithStructure); },
                         eps);
}

}  // namespace hypertab
