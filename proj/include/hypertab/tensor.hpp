#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hypertab::num {

// One value on the tape. Rank is fixed at two; row vectors are 1 x n.
struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // sized on first use
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs that require grad.
  std::function<void(Node&)> backward;

  double* grad_data();  // allocates zeros on first call
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  // Leaf that accumulates gradients across backward passes.
  static Tensor parameter(std::size_t rows, std::size_t cols, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->rows * node_->cols; }
  std::span<const double> data() const { return node_->value; }
  // Only meaningful on leaves; mutating interior tape values breaks backward.
  std::span<double> mutable_data() { return node_->value; }
  double operator()(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zeros when no gradient has been accumulated.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Reverse sweep from a 1x1 tensor.
  void backward() const;

  // Copy of the value as a new constant (cuts the tape).
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

std::string shape_str(const Tensor& t);

// While alive, ops on this thread record no tape (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// --- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // (r x k)(k x c)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (r x k)(c x k)^T
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);        // elementwise
Tensor add_row(const Tensor& a, const Tensor& row);  // broadcast 1 x c over rows
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& a);  // tanh approximation
Tensor tanh(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& shift, double eps = 1e-5);
Tensor sum(const Tensor& a);
Tensor mean_rows(const Tensor& a);  // 1 x c
// Mean over the listed rows, visited in the given order.
Tensor mean_rows_of(const Tensor& a, std::span<const std::uint32_t> rows);
// Row-wise mean per segment: (r x c) -> (segments x c). Segments must be non-empty.
Tensor segment_mean(const Tensor& a, const std::vector<std::vector<std::uint32_t>>& segments);
Tensor gather_rows(const Tensor& a, std::span<const std::uint32_t> rows);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
// Rows in consecutive groups of `group` are averaged: (r x c) -> (r/group x c).
Tensor group_mean(const Tensor& a, std::size_t group);
// Stacks `times` copies of `a` vertically.
Tensor tile_rows(const Tensor& a, std::size_t times);

// Mean token cross-entropy; targets < 0 are ignored.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);
// Mean binary cross-entropy on logits (n x 1).
Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels);

// Scaled dot-product attention per head, heads concatenated (no projections).
// With `causal`, query i sees keys j <= i + (keys - queries).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, bool causal);

// Pooling attention: the `s` query rows attend independently within every
// segment of (k, v) rows. Output has segments.size() * s rows, segment-major.
Tensor segment_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         const std::vector<std::vector<std::uint32_t>>& segments, std::size_t heads);

}  // namespace hypertab::num
