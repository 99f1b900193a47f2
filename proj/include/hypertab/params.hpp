#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hypertab/tensor.hpp"

namespace hypertab::num {

// Named trainable tensors. Names are '/'-separated paths ("encoder/layer0/..."),
// iterated in lexicographic order.
class ParamStore {
 public:
  struct Entry {
    Tensor tensor;
    bool decay = true;  // subject to decoupled weight decay
  };

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] with fan_in = rows.
  Tensor add_fan_in(const std::string& name, std::size_t rows, std::size_t cols, std::mt19937_64& rng);
  Tensor add_uniform(const std::string& name, std::size_t rows, std::size_t cols, double bound,
                     std::mt19937_64& rng);
  Tensor add_constant(const std::string& name, std::size_t rows, std::size_t cols, double value,
                      bool decay = false);
  Tensor add(const std::string& name, std::size_t rows, std::size_t cols, std::vector<double> values,
             bool decay = true);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

  void zero_grad();
  std::size_t parameter_count() const;
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }
  void bump_step() { ++step_; }

  // Deep copy of values (fresh leaves, no gradients).
  ParamStore clone() const;
  bool values_equal(const ParamStore& other) const;

 private:
  std::map<std::string, Entry> entries_;
  std::uint64_t step_ = 0;
};

struct AdamWConfig {
  double lr = 3e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Linear warm-up followed by half-cycle cosine decay to zero.
struct WarmupCosine {
  double base_lr = 3e-4;
  std::uint64_t warmup_steps = 0;
  std::uint64_t total_steps = 1;
  double lr_at(std::uint64_t step) const;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  // One update with learning rate `lr` from the gradients currently held by
  // the store. Parameters whose name starts with any prefix in `frozen` are
  // left untouched. Throws Error(kNumeric) on a non-finite gradient or update.
  void step(ParamStore& store, double lr, const std::vector<std::string>& frozen = {});

  const AdamWConfig& config() const { return cfg_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamWConfig cfg_;
  std::map<std::string, Moments> moments_;
  std::uint64_t t_ = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;      // coordinates perturbed
  double max_rel_error = 0.0;   // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool all_nonzero = true;  // every parameter received a nonzero gradient
};

// Central differences (f(x+eps) - f(x-eps)) / (2 eps) against tape gradients.
// `max_coords` > 0 bounds the coordinates checked per parameter (evenly
// strided). `loss` must rebuild the tape from the store on every call.
GradCheckReport grad_check(ParamStore& store, const std::function<Tensor()>& loss, double eps = 1e-5,
                           std::size_t max_coords = 0);

// Checkpoint = <dir>/manifest.json + <dir>/params.bin (little-endian float64).
struct CheckpointInfo {
  std::uint64_t step = 0;
  std::string config_hash;
  std::map<std::string, std::vector<std::size_t>> shapes;
};

void save_checkpoint(const ParamStore& store, const std::filesystem::path& dir, const std::string& config_hash);
// Loads into the already-registered tensors of `store`. Refuses on a config
// hash mismatch (when `expected_hash` is non-empty), unknown or missing
// names, shape mismatches, truncated payloads and checksum failures.
CheckpointInfo load_checkpoint(ParamStore& store, const std::filesystem::path& dir,
                               const std::string& expected_hash);
CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);

}  // namespace hypertab::num
