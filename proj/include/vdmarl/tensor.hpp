#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vdmarl {

// Dense row-major tensor of doubles with reverse-mode autodiff. Graphs are
// dynamic: every op records its parents and a backprop closure on the result
// node, and backward() walks the tape once. Tensors are cheap handles; copying
// one aliases the same node.
using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, only when reached by backward
  bool requires_grad = false;
  bool backward_root_used = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;  // pushes adjoints to parents
};

class Tensor {
 public:
  Tensor() = default;

  // Constants (no gradient is ever tracked through these).
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor of(Shape shape, std::vector<double> data);
  static Tensor scalar(double v);

  // Trainable leaf.
  static Tensor param(Shape shape, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int size() const;
  int rows() const;  // 2-D helpers
  int cols() const;
  bool requires_grad() const;

  double item() const;  // size-1 tensors only
  std::span<const double> values() const;
  std::span<double> values_mut();  // leaf mutation (optimizer updates)
  std::span<const double> grad() const;  // valid after backward reached it
  bool grad_allocated() const;

  // Numeric copy with no graph link.
  Tensor detach() const;

  std::shared_ptr<TensorNode> node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

// While a guard is alive on this thread, ops produce constants even when fed
// parameters. Used for rollouts, evaluation, and target-network forwards.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Elementwise; operands must have equal shapes, or one side may be a size-1
// tensor which then broadcasts against the other.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);

Tensor relu(const Tensor& x);
Tensor elu(const Tensor& x);    // alpha = 1
Tensor abs(const Tensor& x);    // subgradient 0 at 0
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);    // domain error on x <= 0

Tensor matmul(const Tensor& a, const Tensor& b);
// y = x * W^T + b, with x [B x in], W [out x in], b [out]. One op instead of
// matmul+broadcast keeps the bias gradient a plain column sum.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
// y = x * W^T (affine without the bias term)
Tensor linear(const Tensor& x, const Tensor& w);

Tensor reshape(const Tensor& x, Shape shape);
Tensor sum(const Tensor& x);                  // all elements -> scalar
Tensor row_sum(const Tensor& x);              // [B x n] -> [B x 1]
// y[r] = x[r, idx[r]]
Tensor gather_cols(const Tensor& x, const std::vector<int>& idx);
// Batched vector-matrix product: v [B x n], w [B x (n*m)] (each row a row-major
// n-by-m matrix), result [B x m]. Carries per-sample mixing weights.
Tensor rowwise_vm(const Tensor& v, const Tensor& w, int m);

// Row-wise masked softmax / log-softmax over the last axis of a 2-D tensor.
// mask entries are 0/1; masked positions get probability 0 (log prob a large
// negative constant) and receive no gradient. A row with no available entry is
// an error naming the row.
Tensor softmax(const Tensor& logits, const Tensor& mask);
Tensor log_softmax(const Tensor& logits, const Tensor& mask);
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

constexpr double kMaskedLogProb = -1e30;

// Scalar loss only. Zeroes adjoints across the reachable graph, then
// accumulates. Running backward twice from the same root is an error: rebuild
// the forward pass instead.
void backward(const Tensor& loss);

}  // namespace vdmarl
