#include "hypertab/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "hypertab/error.hpp"

namespace hypertab::num {

namespace {

thread_local bool grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using Strided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStrided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

ConstMatMap view(const Node& n) { return ConstMatMap(n.value.data(), n.rows, n.cols); }
MatMap gview(Node& n) { return MatMap(n.grad_data(), n.rows, n.cols); }

std::shared_ptr<Node> make(std::size_t rows, std::size_t cols, const char* op,
                           std::vector<std::shared_ptr<Node>> inputs) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(rows * cols, 0.0);
  n->op = op;
  if (!grad_enabled) return n;  // no tape: inputs are dropped
  n->requires_grad = std::any_of(inputs.begin(), inputs.end(), [](const auto& p) { return p->requires_grad; });
  n->inputs = std::move(inputs);
  return n;
}

std::string dims(const Node& n) { return std::to_string(n.rows) + "x" + std::to_string(n.cols); }

[[noreturn]] void shape_error(const char* op, const Node& a, const Node& b) {
  fail(ErrorCode::kShape, std::string(op) + ": incompatible shapes " + dims(a) + " and " + dims(b));
}

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) fail(ErrorCode::kShape, std::string(op) + ": " + what);
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

double* Node::grad_data() {
  if (grad.empty()) grad.assign(rows * cols, 0.0);
  return grad.data();
}

Tensor Tensor::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) {
    fail(ErrorCode::kShape, "constant: " + std::to_string(values.size()) + " values for shape " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return constant(rows, cols, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::parameter(std::size_t rows, std::size_t cols, std::vector<double> values) {
  Tensor t = constant(rows, cols, std::move(values));
  t.node_->requires_grad = true;
  t.node_->op = "param";
  return t;
}

double Tensor::item() const {
  if (size() != 1) fail(ErrorCode::kShape, "item: tensor is " + shape_str(*this) + ", expected 1x1");
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() { return {node_->grad_data(), size()}; }

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  if (size() != 1) fail(ErrorCode::kShape, "backward: expected a 1x1 tensor, got " + shape_str(*this));
  if (!node_->requires_grad) return;
  // Iterative post-order DFS gives a topological order of the sub-tape.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->grad_data()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

Tensor Tensor::detach() const { return constant(rows(), cols(), node_->value); }

std::string shape_str(const Tensor& t) { return dims(*t.node()); }

// --- dense algebra -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Node& A = *a.node();
  const Node& B = *b.node();
  if (A.cols != B.rows) shape_error("matmul", A, B);
  auto out = make(A.rows, B.cols, "matmul", {a.node(), b.node()});
  MatMap(out->value.data(), A.rows, B.cols).noalias() = view(A) * view(B);
  out->backward = [](Node& self) {
    Node& A = *self.inputs[0];
    Node& B = *self.inputs[1];
    ConstMatMap g(self.grad.data(), self.rows, self.cols);
    if (A.requires_grad) gview(A).noalias() += g * view(B).transpose();
    if (B.requires_grad) gview(B).noalias() += view(A).transpose() * g;
  };
  return Tensor(out);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const Node& A = *a.node();
  const Node& B = *b.node();
  if (A.cols != B.cols) shape_error("matmul_nt", A, B);
  auto out = make(A.rows, B.rows, "matmul_nt", {a.node(), b.node()});
  MatMap(out->value.data(), A.rows, B.rows).noalias() = view(A) * view(B).transpose();
  out->backward = [](Node& self) {
    Node& A = *self.inputs[0];
    Node& B = *self.inputs[1];
    ConstMatMap g(self.grad.data(), self.rows, self.cols);
    if (A.requires_grad) gview(A).noalias() += g * view(B);
    if (B.requires_grad) gview(B).noalias() += g.transpose() * view(A);
  };
  return Tensor(out);
}

namespace {

template <typename Fwd>
Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, double sa, double sb,
                         bool product) {
  const Node& A = *a.node();
  const Node& B = *b.node();
  if (A.rows != B.rows || A.cols != B.cols) shape_error(op, A, B);
  auto out = make(A.rows, A.cols, op, {a.node(), b.node()});
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = fwd(A.value[i], B.value[i]);
  out->backward = [sa, sb, product](Node& self) {
    Node& A = *self.inputs[0];
    Node& B = *self.inputs[1];
    const std::size_t n = self.value.size();
    if (A.requires_grad) {
      double* ga = A.grad_data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i] * (product ? B.value[i] : sa);
    }
    if (B.requires_grad) {
      double* gb = B.grad_data();
      for (std::size_t i = 0; i < n; ++i) gb[i] += self.grad[i] * (product ? A.value[i] : sb);
    }
  };
  return Tensor(out);
}

template <typename F, typename DF>
Tensor unary(const Tensor& a, const char* op, F f, DF df) {
  const Node& A = *a.node();
  auto out = make(A.rows, A.cols, op, {a.node()});
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = f(A.value[i]);
  out->backward = [df](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    double* ga = A.grad_data();
    for (std::size_t i = 0; i < self.value.size(); ++i) ga[i] += self.grad[i] * df(A.value[i], self.value[i]);
  };
  return Tensor(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_same_shape(a, b, "add", [](double x, double y) { return x + y; }, 1.0, 1.0, false);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_same_shape(a, b, "sub", [](double x, double y) { return x - y; }, 1.0, -1.0, false);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_same_shape(a, b, "mul", [](double x, double y) { return x * y; }, 0.0, 0.0, true);
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  const Node& A = *a.node();
  const Node& R = *row.node();
  if (R.rows != 1 || R.cols != A.cols) shape_error("add_row", A, R);
  auto out = make(A.rows, A.cols, "add_row", {a.node(), row.node()});
  MatMap(out->value.data(), A.rows, A.cols) = view(A).rowwise() + view(R).row(0);
  out->backward = [](Node& self) {
    Node& A = *self.inputs[0];
    Node& R = *self.inputs[1];
    ConstMatMap g(self.grad.data(), self.rows, self.cols);
    if (A.requires_grad) gview(A) += g;
    if (R.requires_grad) gview(R) += g.colwise().sum();
  };
  return Tensor(out);
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor gelu(const Tensor& a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  return unary(
      a, "gelu",
      [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + k * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(c * (x + k * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * k * x * x);
      });
}

Tensor tanh(const Tensor& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor softmax_rows(const Tensor& a) {
  const Node& A = *a.node();
  require(A.cols > 0, "softmax_rows", "zero-length axis");
  auto out = make(A.rows, A.cols, "softmax_rows", {a.node()});
  for (std::size_t r = 0; r < A.rows; ++r) {
    const double* x = &A.value[r * A.cols];
    double* y = &out->value[r * A.cols];
    const double m = *std::max_element(x, x + A.cols);
    double z = 0.0;
    for (std::size_t c = 0; c < A.cols; ++c) z += (y[c] = std::exp(x[c] - m));
    for (std::size_t c = 0; c < A.cols; ++c) y[c] /= z;
  }
  out->backward = [](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    double* ga = A.grad_data();
    for (std::size_t r = 0; r < self.rows; ++r) {
      const double* y = &self.value[r * self.cols];
      const double* g = &self.grad[r * self.cols];
      double dot = 0.0;
      for (std::size_t c = 0; c < self.cols; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < self.cols; ++c) ga[r * self.cols + c] += y[c] * (g[c] - dot);
    }
  };
  return Tensor(out);
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& shift, double eps) {
  const Node& A = *a.node();
  require(A.cols > 0, "layer_norm", "zero-length axis");
  require(eps > 0.0, "layer_norm", "epsilon must be positive");
  require(gain.rows() == 1 && gain.cols() == A.cols && shift.rows() == 1 && shift.cols() == A.cols,
          "layer_norm", "gain/shift must be 1x" + std::to_string(A.cols));
  auto out = make(A.rows, A.cols, "layer_norm", {a.node(), gain.node(), shift.node()});
  // Cache normalized values and inverse std for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(A.value.size());
  auto inv = std::make_shared<std::vector<double>>(A.rows);
  const std::size_t n = A.cols;
  const double* gv = gain.data().data();
  const double* sv = shift.data().data();
  for (std::size_t r = 0; r < A.rows; ++r) {
    const double* x = &A.value[r * n];
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += x[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv)[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      const double h = (x[c] - mu) * is;
      (*xhat)[r * n + c] = h;
      out->value[r * n + c] = h * gv[c] + sv[c];
    }
  }
  out->backward = [xhat, inv](Node& self) {
    Node& A = *self.inputs[0];
    Node& G = *self.inputs[1];
    Node& S = *self.inputs[2];
    const std::size_t n = self.cols;
    std::vector<double> dh(n);
    for (std::size_t r = 0; r < self.rows; ++r) {
      const double* g = &self.grad[r * n];
      const double* h = &(*xhat)[r * n];
      if (G.requires_grad) {
        double* gg = G.grad_data();
        for (std::size_t c = 0; c < n; ++c) gg[c] += g[c] * h[c];
      }
      if (S.requires_grad) {
        double* gs = S.grad_data();
        for (std::size_t c = 0; c < n; ++c) gs[c] += g[c];
      }
      if (A.requires_grad) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          dh[c] = g[c] * G.value[c];
          m1 += dh[c];
          m2 += dh[c] * h[c];
        }
        m1 /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
        double* ga = A.grad_data() + r * n;
        for (std::size_t c = 0; c < n; ++c) ga[c] += (*inv)[r] * (dh[c] - m1 - h[c] * m2);
      }
    }
  };
  return Tensor(out);
}

Tensor sum(const Tensor& a) {
  const Node& A = *a.node();
  auto out = make(1, 1, "sum", {a.node()});
  double s = 0.0;
  for (double v : A.value) s += v;
  out->value[0] = s;
  out->backward = [](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    double* ga = A.grad_data();
    for (std::size_t i = 0; i < A.value.size(); ++i) ga[i] += self.grad[0];
  };
  return Tensor(out);
}

Tensor mean_rows(const Tensor& a) {
  std::vector<std::uint32_t> all(a.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  return mean_rows_of(a, all);
}

Tensor mean_rows_of(const Tensor& a, std::span<const std::uint32_t> rows) {
  const Node& A = *a.node();
  require(!rows.empty(), "mean_rows_of", "empty row set");
  for (auto r : rows) require(r < A.rows, "mean_rows_of", "row index out of range");
  auto out = make(1, A.cols, "mean_rows_of", {a.node()});
  const double w = 1.0 / static_cast<double>(rows.size());
  for (auto r : rows) {
    for (std::size_t c = 0; c < A.cols; ++c) out->value[c] += A.value[r * A.cols + c];
  }
  for (double& v : out->value) v *= w;
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  out->backward = [idx = std::move(idx), w](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    double* ga = A.grad_data();
    for (auto r : idx) {
      for (std::size_t c = 0; c < A.cols; ++c) ga[r * A.cols + c] += w * self.grad[c];
    }
  };
  return Tensor(out);
}

Tensor segment_mean(const Tensor& a, const std::vector<std::vector<std::uint32_t>>& segments) {
  const Node& A = *a.node();
  for (const auto& seg : segments) {
    require(!seg.empty(), "segment_mean", "empty segment");
    for (auto r : seg) require(r < A.rows, "segment_mean", "row index out of range");
  }
  auto out = make(segments.size(), A.cols, "segment_mean", {a.node()});
  for (std::size_t g = 0; g < segments.size(); ++g) {
    const double w = 1.0 / static_cast<double>(segments[g].size());
    double* o = &out->value[g * A.cols];
    for (auto r : segments[g]) {
      for (std::size_t c = 0; c < A.cols; ++c) o[c] += A.value[r * A.cols + c];
    }
    for (std::size_t c = 0; c < A.cols; ++c) o[c] *= w;
  }
  out->backward = [segments](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    double* ga = A.grad_data();
    for (std::size_t g = 0; g < segments.size(); ++g) {
      const double w = 1.0 / static_cast<double>(segments[g].size());
      for (auto r : segments[g]) {
        for (std::size_t c = 0; c < A.cols; ++c) ga[r * A.cols + c] += w * self.grad[g * A.cols + c];
      }
    }
  };
  return Tensor(out);
}

Tensor gather_rows(const Tensor& a, std::span<const std::uint32_t> rows) {
  const Node& A = *a.node();
  for (auto r : rows) {
    if (r >= A.rows) {
      fail(ErrorCode::kShape, "gather_rows: index " + std::to_string(r) + " out of range for " + dims(A));
    }
  }
  auto out = make(rows.size(), A.cols, "gather_rows", {a.node()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(&A.value[rows[i] * A.cols], A.cols, &out->value[i * A.cols]);
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  out->backward = [idx = std::move(idx)](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    double* ga = A.grad_data();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < A.cols; ++c) ga[idx[i] * A.cols + c] += self.grad[i * A.cols + c];
    }
  };
  return Tensor(out);
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", *parts.front().node(), *p.node());
    rows += p.rows();
    inputs.push_back(p.node());
  }
  auto out = make(rows, cols, "concat_rows", std::move(inputs));
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out->value.begin() + static_cast<std::ptrdiff_t>(off));
    off += p.size();
  }
  out->backward = [](Node& self) {
    std::size_t off = 0;
    for (auto& in : self.inputs) {
      const std::size_t n = in->rows * in->cols;
      if (in->requires_grad) {
        double* g = in->grad_data();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  };
  return Tensor(out);
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", *parts.front().node(), *p.node());
    cols += p.cols();
    inputs.push_back(p.node());
  }
  auto out = make(rows, cols, "concat_cols", std::move(inputs));
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(&p.data()[r * p.cols()], p.cols(), &out->value[r * cols + off]);
    }
    off += p.cols();
  }
  out->backward = [](Node& self) {
    std::size_t off = 0;
    for (auto& in : self.inputs) {
      if (in->requires_grad) {
        double* g = in->grad_data();
        for (std::size_t r = 0; r < self.rows; ++r) {
          for (std::size_t c = 0; c < in->cols; ++c) g[r * in->cols + c] += self.grad[r * self.cols + off + c];
        }
      }
      off += in->cols;
    }
  };
  return Tensor(out);
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  const Node& A = *a.node();
  require(begin + count <= A.rows, "slice_rows", "range exceeds " + dims(A));
  std::vector<std::uint32_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = static_cast<std::uint32_t>(begin + i);
  return gather_rows(a, idx);
}

Tensor group_mean(const Tensor& a, std::size_t group) {
  const Node& A = *a.node();
  require(group > 0 && A.rows % group == 0, "group_mean",
          "row count " + std::to_string(A.rows) + " is not a multiple of " + std::to_string(group));
  if (group == 1) return a;
  const std::size_t out_rows = A.rows / group;
  auto out = make(out_rows, A.cols, "group_mean", {a.node()});
  const double w = 1.0 / static_cast<double>(group);
  for (std::size_t r = 0; r < A.rows; ++r) {
    for (std::size_t c = 0; c < A.cols; ++c) out->value[(r / group) * A.cols + c] += w * A.value[r * A.cols + c];
  }
  out->backward = [group, w](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    double* ga = A.grad_data();
    for (std::size_t r = 0; r < A.rows; ++r) {
      for (std::size_t c = 0; c < A.cols; ++c) ga[r * A.cols + c] += w * self.grad[(r / group) * A.cols + c];
    }
  };
  return Tensor(out);
}

Tensor tile_rows(const Tensor& a, std::size_t times) {
  std::vector<std::uint32_t> idx;
  idx.reserve(a.rows() * times);
  for (std::size_t t = 0; t < times; ++t) {
    for (std::size_t r = 0; r < a.rows(); ++r) idx.push_back(static_cast<std::uint32_t>(r));
  }
  return gather_rows(a, idx);
}

// --- losses --------------------------------------------------------------

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  const Node& L = *logits.node();
  require(targets.size() == L.rows, "cross_entropy",
          std::to_string(targets.size()) + " targets for " + dims(L) + " logits");
  require(L.cols > 0, "cross_entropy", "zero-length axis");
  auto out = make(1, 1, "cross_entropy", {logits.node()});
  auto probs = std::make_shared<std::vector<double>>(L.value.size());
  std::size_t counted = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < L.rows; ++r) {
    if (targets[r] < 0) continue;
    require(static_cast<std::size_t>(targets[r]) < L.cols, "cross_entropy", "target id out of range");
    const double* x = &L.value[r * L.cols];
    double* p = &(*probs)[r * L.cols];
    const double m = *std::max_element(x, x + L.cols);
    double z = 0.0;
    for (std::size_t c = 0; c < L.cols; ++c) z += (p[c] = std::exp(x[c] - m));
    for (std::size_t c = 0; c < L.cols; ++c) p[c] /= z;
    total += (m + std::log(z)) - x[targets[r]];
    ++counted;
  }
  require(counted > 0, "cross_entropy", "all targets ignored");
  out->value[0] = total / static_cast<double>(counted);
  std::vector<int> tg(targets.begin(), targets.end());
  out->backward = [probs, tg = std::move(tg), counted](Node& self) {
    Node& L = *self.inputs[0];
    if (!L.requires_grad) return;
    double* gl = L.grad_data();
    const double w = self.grad[0] / static_cast<double>(counted);
    for (std::size_t r = 0; r < L.rows; ++r) {
      if (tg[r] < 0) continue;
      for (std::size_t c = 0; c < L.cols; ++c) gl[r * L.cols + c] += w * (*probs)[r * L.cols + c];
      gl[r * L.cols + tg[r]] -= w;
    }
  };
  return Tensor(out);
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels) {
  const Node& L = *logits.node();
  require(L.cols == 1 && labels.size() == L.rows && L.rows > 0, "bce_with_logits",
          "expected n x 1 logits with n labels, got " + dims(L));
  auto out = make(1, 1, "bce_with_logits", {logits.node()});
  double total = 0.0;
  for (std::size_t i = 0; i < L.rows; ++i) {
    const double z = L.value[i];
    // softplus(z) - y z, stable for large |z|
    total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - labels[i] * z;
  }
  out->value[0] = total / static_cast<double>(L.rows);
  std::vector<double> y(labels.begin(), labels.end());
  out->backward = [y = std::move(y)](Node& self) {
    Node& L = *self.inputs[0];
    if (!L.requires_grad) return;
    double* gl = L.grad_data();
    const double w = self.grad[0] / static_cast<double>(L.rows);
    for (std::size_t i = 0; i < L.rows; ++i) gl[i] += w * (1.0 / (1.0 + std::exp(-L.value[i])) - y[i]);
  };
  return Tensor(out);
}

// --- attention -------------------------------------------------------------

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, bool causal) {
  const Node& Q = *q.node();
  const Node& K = *k.node();
  const Node& V = *v.node();
  const std::size_t d = Q.cols;
  require(heads > 0 && d % heads == 0, "attention",
          "width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  require(K.rows >= 1, "attention", "no keys");
  require(K.cols == d && V.cols == d && V.rows == K.rows, "attention",
          "q " + dims(Q) + ", k " + dims(K) + ", v " + dims(V));
  const std::size_t n = Q.rows;
  const std::size_t m = K.rows;
  require(!causal || m >= n, "attention", "causal attention needs at least as many keys as queries");
  const std::size_t dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t offset = m - std::min(m, n);

  auto out = make(n, d, "attention", {q.node(), k.node(), v.node()});
  auto probs = std::make_shared<std::vector<double>>(heads * n * m);
  for (std::size_t h = 0; h < heads; ++h) {
    ConstStrided qh(Q.value.data() + h * dh, n, dh, Eigen::OuterStride<>(d));
    ConstStrided kh(K.value.data() + h * dh, m, dh, Eigen::OuterStride<>(d));
    ConstStrided vh(V.value.data() + h * dh, m, dh, Eigen::OuterStride<>(d));
    MatMap p(probs->data() + h * n * m, n, m);
    p.noalias() = (qh * kh.transpose()) * sc;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t limit = causal ? i + offset + 1 : m;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < limit; ++j) mx = std::max(mx, p(i, j));
      double z = 0.0;
      for (std::size_t j = 0; j < limit; ++j) z += (p(i, j) = std::exp(p(i, j) - mx));
      for (std::size_t j = 0; j < limit; ++j) p(i, j) /= z;
      for (std::size_t j = limit; j < m; ++j) p(i, j) = 0.0;
    }
    Strided oh(out->value.data() + h * dh, n, dh, Eigen::OuterStride<>(d));
    oh.noalias() = p * vh;
  }
  out->backward = [probs, heads, dh, sc](Node& self) {
    Node& Q = *self.inputs[0];
    Node& K = *self.inputs[1];
    Node& V = *self.inputs[2];
    const std::size_t n = Q.rows, m = K.rows, d = Q.cols;
    RowMat dp(n, m);
    for (std::size_t h = 0; h < heads; ++h) {
      ConstStrided qh(Q.value.data() + h * dh, n, dh, Eigen::OuterStride<>(d));
      ConstStrided kh(K.value.data() + h * dh, m, dh, Eigen::OuterStride<>(d));
      ConstStrided vh(V.value.data() + h * dh, m, dh, Eigen::OuterStride<>(d));
      ConstStrided go(self.grad.data() + h * dh, n, dh, Eigen::OuterStride<>(d));
      ConstMatMap p(probs->data() + h * n * m, n, m);
      if (V.requires_grad) {
        Strided gv(V.grad_data() + h * dh, m, dh, Eigen::OuterStride<>(d));
        gv.noalias() += p.transpose() * go;
      }
      if (!Q.requires_grad && !K.requires_grad) continue;
      dp.noalias() = go * vh.transpose();
      // softmax backward: ds = p * (dp - rowsum(dp * p))
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < m; ++j) dot += dp(i, j) * p(i, j);
        for (std::size_t j = 0; j < m; ++j) dp(i, j) = p(i, j) * (dp(i, j) - dot) * sc;
      }
      if (Q.requires_grad) {
        Strided gq(Q.grad_data() + h * dh, n, dh, Eigen::OuterStride<>(d));
        gq.noalias() += dp * kh;
      }
      if (K.requires_grad) {
        Strided gk(K.grad_data() + h * dh, m, dh, Eigen::OuterStride<>(d));
        gk.noalias() += dp.transpose() * qh;
      }
    }
  };
  return Tensor(out);
}

Tensor segment_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         const std::vector<std::vector<std::uint32_t>>& segments, std::size_t heads) {
  const Node& Q = *q.node();
  const Node& K = *k.node();
  const Node& V = *v.node();
  const std::size_t d = Q.cols;
  require(heads > 0 && d % heads == 0, "segment_attention",
          "width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  require(K.cols == d && V.cols == d && V.rows == K.rows, "segment_attention",
          "q " + dims(Q) + ", k " + dims(K) + ", v " + dims(V));
  for (const auto& seg : segments) {
    require(!seg.empty(), "segment_attention", "empty segment");
    for (auto r : seg) require(r < K.rows, "segment_attention", "segment index out of range");
  }
  const std::size_t s = Q.rows;
  const std::size_t dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  auto out = make(segments.size() * s, d, "segment_attention", {q.node(), k.node(), v.node()});
  // probs laid out per segment: [seg][head][query][member]
  std::vector<std::size_t> base(segments.size() + 1, 0);
  for (std::size_t g = 0; g < segments.size(); ++g) base[g + 1] = base[g] + heads * s * segments[g].size();
  auto probs = std::make_shared<std::vector<double>>(base.back());
  for (std::size_t g = 0; g < segments.size(); ++g) {
    const auto& seg = segments[g];
    const std::size_t kk = seg.size();
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < s; ++i) {
        double* p = probs->data() + base[g] + (h * s + i) * kk;
        const double* qi = &Q.value[i * d + h * dh];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < kk; ++j) {
          const double* kj = &K.value[seg[j] * d + h * dh];
          double dot = 0.0;
          for (std::size_t c = 0; c < dh; ++c) dot += qi[c] * kj[c];
          p[j] = dot * sc;
          mx = std::max(mx, p[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < kk; ++j) z += (p[j] = std::exp(p[j] - mx));
        double* o = &out->value[(g * s + i) * d + h * dh];
        for (std::size_t j = 0; j < kk; ++j) {
          p[j] /= z;
          const double* vj = &V.value[seg[j] * d + h * dh];
          for (std::size_t c = 0; c < dh; ++c) o[c] += p[j] * vj[c];
        }
      }
    }
  }
  out->backward = [probs, base, segments, heads, dh, sc, s](Node& self) {
    Node& Q = *self.inputs[0];
    Node& K = *self.inputs[1];
    Node& V = *self.inputs[2];
    const std::size_t d = Q.cols;
    std::vector<double> ds;
    for (std::size_t g = 0; g < segments.size(); ++g) {
      const auto& seg = segments[g];
      const std::size_t kk = seg.size();
      ds.resize(kk);
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < s; ++i) {
          const double* p = probs->data() + base[g] + (h * s + i) * kk;
          const double* go = &self.grad[(g * s + i) * d + h * dh];
          double dot = 0.0;
          for (std::size_t j = 0; j < kk; ++j) {
            const double* vj = &V.value[seg[j] * d + h * dh];
            double dpj = 0.0;
            for (std::size_t c = 0; c < dh; ++c) dpj += go[c] * vj[c];
            ds[j] = dpj;
            dot += dpj * p[j];
            if (V.requires_grad) {
              double* gv = V.grad_data() + seg[j] * d + h * dh;
              for (std::size_t c = 0; c < dh; ++c) gv[c] += p[j] * go[c];
            }
          }
          for (std::size_t j = 0; j < kk; ++j) ds[j] = p[j] * (ds[j] - dot) * sc;
          const double* qi = &Q.value[i * d + h * dh];
          for (std::size_t j = 0; j < kk; ++j) {
            const double* kj = &K.value[seg[j] * d + h * dh];
            if (Q.requires_grad) {
              double* gq = Q.grad_data() + i * d + h * dh;
              for (std::size_t c = 0; c < dh; ++c) gq[c] += ds[j] * kj[c];
            }
            if (K.requires_grad) {
              double* gk = K.grad_data() + seg[j] * d + h * dh;
              for (std::size_t c = 0; c < dh; ++c) gk[c] += ds[j] * qi[c];
            }
          }
        }
      }
    }
  };
  return Tensor(out);
}

}  // namespace hypertab::num
