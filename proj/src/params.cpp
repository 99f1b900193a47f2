#include "hypertab/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "hypertab/error.hpp"
#include "hypertab/random.hpp"

namespace hypertab::num {

using nlohmann::json;

Tensor ParamStore::add_fan_in(const std::string& name, std::size_t rows, std::size_t cols,
                              std::mt19937_64& rng) {
  return add_uniform(name, rows, cols, 1.0 / std::sqrt(static_cast<double>(rows)), rng);
}

Tensor ParamStore::add_uniform(const std::string& name, std::size_t rows, std::size_t cols, double bound,
                               std::mt19937_64& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = uniform_real(rng, -bound, bound);
  return add(name, rows, cols, std::move(v));
}

Tensor ParamStore::add_constant(const std::string& name, std::size_t rows, std::size_t cols, double value,
                                bool decay) {
  return add(name, rows, cols, std::vector<double>(rows * cols, value), decay);
}

Tensor ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool decay) {
  if (entries_.count(name)) fail(ErrorCode::kInvalidArgument, "duplicate parameter name '" + name + "'");
  Tensor t = Tensor::parameter(rows, cols, std::move(values));
  entries_.emplace(name, Entry{t, decay});
  return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail(ErrorCode::kInvalidArgument, "unknown parameter '" + name + "'");
  return it->second.tensor;
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) e.tensor.zero_grad();
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.tensor.size();
  return n;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, e] : entries_) {
    const auto d = e.tensor.data();
    out.add(name, e.tensor.rows(), e.tensor.cols(), std::vector<double>(d.begin(), d.end()), e.decay);
  }
  out.step_ = step_;
  return out;
}

bool ParamStore::values_equal(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (const auto& [name, e] : entries_) {
    auto it = other.entries_.find(name);
    if (it == other.entries_.end()) return false;
    const auto a = e.tensor.data();
    const auto b = it->second.tensor.data();
    if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

double WarmupCosine::lr_at(std::uint64_t step) const {
  if (warmup_steps > 0 && step < warmup_steps) {
    return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  const double span = static_cast<double>(std::max<std::uint64_t>(1, total_steps - std::min(total_steps, warmup_steps)));
  const double progress = std::min(1.0, static_cast<double>(step - warmup_steps) / span);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void AdamW::step(ParamStore& store, double lr, const std::vector<std::string>& frozen) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, e] : store.entries()) {
    bool is_frozen = false;
    for (const auto& p : frozen) {
      if (name.compare(0, p.size(), p) == 0) is_frozen = true;
    }
    if (is_frozen) continue;
    Tensor& t = e.tensor;
    const auto g = t.grad();
    for (double x : g) {
      if (!std::isfinite(x)) fail(ErrorCode::kNumeric, "non-finite gradient in parameter '" + name + "'");
    }
    auto& mo = moments_[name];
    if (mo.m.empty()) {
      mo.m.assign(t.size(), 0.0);
      mo.v.assign(t.size(), 0.0);
    }
    auto w = t.mutable_data();
    const double decay = e.decay ? cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      mo.m[i] = cfg_.beta1 * mo.m[i] + (1.0 - cfg_.beta1) * g[i];
      mo.v[i] = cfg_.beta2 * mo.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = mo.m[i] / bc1;
      const double vhat = mo.v[i] / bc2;
      w[i] -= lr * decay * w[i];
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      if (!std::isfinite(w[i])) fail(ErrorCode::kNumeric, "parameter '" + name + "' became non-finite");
    }
  }
  store.bump_step();
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(ParamStore& store, const std::function<Tensor()>& loss, double eps,
                           std::size_t max_coords) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) fail(ErrorCode::kInvalidArgument, "grad_check: eps must lie in [1e-7, 1e-3]");
  store.zero_grad();
  const Tensor base = loss();
  if (!std::isfinite(base.item())) fail(ErrorCode::kNumeric, "grad_check: loss is not finite");
  base.backward();

  GradCheckReport report;
  for (auto& [name, e] : store.entries()) {
    Tensor& t = e.tensor;
    const auto analytic = t.grad();
    auto w = t.mutable_data();
    const std::size_t n = w.size();
    const std::size_t stride = (max_coords == 0 || n <= max_coords) ? 1 : (n + max_coords - 1) / max_coords;
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    GradCheckEntry entry{name};
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = w[i];
      w[i] = orig + eps;
      const double fp = loss().item();
      w[i] = orig - eps;
      const double fm = loss().item();
      w[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        fail(ErrorCode::kNumeric, "grad_check: non-finite loss while perturbing '" + name + "'");
      }
      const double numeric = (fp - fm) / (2.0 * eps);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
      ++entry.checked;
    }
    entry.analytic_norm = std::sqrt(a2);
    entry.numeric_norm = std::sqrt(n2);
    const double denom = std::max(entry.analytic_norm, entry.numeric_norm);
    entry.max_rel_error = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
    if (denom == 0.0) report.all_nonzero = false;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  store.zero_grad();
  return report;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kFormat = "hypertab-checkpoint/1";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void put_le(std::vector<unsigned char>& out, double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

json read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) fail(ErrorCode::kIo, "cannot open " + (dir / "manifest.json").string());
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    fail(ErrorCode::kCheckpoint, "malformed checkpoint manifest: " + std::string(ex.what()));
  }
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::filesystem::path& dir, const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  std::vector<unsigned char> payload;
  json params = json::array();
  for (const auto& [name, e] : store.entries()) {
    params.push_back({{"name", name},
                      {"shape", {e.tensor.rows(), e.tensor.cols()}},
                      {"offset", payload.size()},
                      {"decay", e.decay}});
    for (double x : e.tensor.data()) put_le(payload, x);
  }
  json manifest = {{"format", kFormat},
                   {"step", store.step()},
                   {"config_hash", config_hash},
                   {"payload_bytes", payload.size()},
                   {"payload_fnv1a", hex64(fnv1a(payload.data(), payload.size()))},
                   {"params", params}};
  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + (dir / "params.bin").string());
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir) {
  const json m = read_manifest(dir);
  CheckpointInfo info;
  try {
    if (m.at("format") != kFormat) fail(ErrorCode::kCheckpoint, "unsupported checkpoint format");
    info.step = m.at("step").get<std::uint64_t>();
    info.config_hash = m.at("config_hash").get<std::string>();
    for (const auto& p : m.at("params")) {
      info.shapes[p.at("name").get<std::string>()] = p.at("shape").get<std::vector<std::size_t>>();
    }
  } catch (const json::exception& ex) {
    fail(ErrorCode::kCheckpoint, "malformed checkpoint manifest: " + std::string(ex.what()));
  }
  return info;
}

CheckpointInfo load_checkpoint(ParamStore& store, const std::filesystem::path& dir,
                               const std::string& expected_hash) {
  const json m = read_manifest(dir);
  const CheckpointInfo info = read_checkpoint_info(dir);
  if (!expected_hash.empty() && info.config_hash != expected_hash) {
    fail(ErrorCode::kCheckpoint, "checkpoint config hash " + info.config_hash + " does not match expected " +
                                     expected_hash);
  }
  std::ifstream in(dir / "params.bin", std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + (dir / "params.bin").string());
  std::vector<unsigned char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto expected_bytes = m.at("payload_bytes").get<std::size_t>();
  if (payload.size() != expected_bytes) {
    fail(ErrorCode::kCheckpoint, "checkpoint payload has " + std::to_string(payload.size()) +
                                     " bytes, manifest expects " + std::to_string(expected_bytes));
  }
  if (hex64(fnv1a(payload.data(), payload.size())) != m.at("payload_fnv1a").get<std::string>()) {
    fail(ErrorCode::kCheckpoint, "checkpoint payload checksum mismatch");
  }
  for (const auto& [name, e] : store.entries()) {
    if (!info.shapes.count(name)) fail(ErrorCode::kCheckpoint, "checkpoint lacks parameter '" + name + "'");
  }
  for (const auto& p : m.at("params")) {
    const auto name = p.at("name").get<std::string>();
    const auto shape = p.at("shape").get<std::vector<std::size_t>>();
    const auto offset = p.at("offset").get<std::size_t>();
    auto it = store.entries().find(name);
    if (it == store.entries().end()) fail(ErrorCode::kCheckpoint, "checkpoint has unexpected parameter '" + name + "'");
    Tensor& t = it->second.tensor;
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols()) {
      fail(ErrorCode::kCheckpoint, "shape mismatch for '" + name + "': checkpoint " + std::to_string(shape[0]) + "x" +
                                       std::to_string(shape.size() > 1 ? shape[1] : 0) + ", model " + shape_str(t));
    }
    if (offset + t.size() * 8 > payload.size()) {
      fail(ErrorCode::kCheckpoint, "parameter '" + name + "' extends past the end of the payload");
    }
    auto w = t.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = get_le(payload.data() + offset + 8 * i);
  }
  store.set_step(info.step);
  return info;
}

}  // namespace hypertab::num
