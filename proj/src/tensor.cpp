#include "vdmarl/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace vdmarl {

namespace {

thread_local bool g_grad_enabled = true;

long shape_numel(const Shape& s) {
  long n = 1;
  for (int d : s) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension in " + shape_str(s));
    n *= d;
  }
  return n;
}

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> value) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor operand");
}

// c[m x n] += a[m x k] * b[k x n]
void mm(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ar = a + static_cast<size_t>(i) * k;
    double* cr = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double av = ar[p];
      if (av == 0.0) continue;
      const double* br = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

// c[m x n] += a[m x k] * b[n x k]^T
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ar = a + static_cast<size_t>(i) * k;
    double* cr = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* br = b + static_cast<size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ar[p] * br[p];
      cr[j] += s;
    }
  }
}

// c[m x n] += a[k x m]^T * b[k x n]
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double* ar = a + static_cast<size_t>(p) * m;
    const double* br = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      double av = ar[i];
      if (av == 0.0) continue;
      double* cr = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

Tensor finish(std::shared_ptr<TensorNode> n, std::initializer_list<Tensor> parents,
              std::function<void(TensorNode&)> backprop) {
  bool need = g_grad_enabled;
  if (need) {
    need = false;
    for (const Tensor& p : parents)
      if (p.requires_grad()) need = true;
  }
  if (need) {
    n->requires_grad = true;
    for (const Tensor& p : parents) n->parents.push_back(p.node());
    n->backprop = std::move(backprop);
  }
  return Tensor(std::move(n));
}

void require_2d(const Tensor& t, const char* op) {
  if (t.shape().size() != 2)
    throw std::invalid_argument(std::string(op) + ": expected 2-D tensor, got " + shape_str(t.shape()));
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape) {
  long n = shape_numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double v) {
  long n = shape_numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, v)));
}

Tensor Tensor::of(Shape shape, std::vector<double> data) {
  long n = shape_numel(shape);
  if (n != static_cast<long>(data.size())) {
    std::ostringstream os;
    os << "tensor: " << data.size() << " values do not fill shape " << shape_str(shape);
    throw std::invalid_argument(os.str());
  }
  return Tensor(make_node(std::move(shape), std::move(data)));
}

Tensor Tensor::scalar(double v) { return of({1}, {v}); }

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  Tensor t = of(std::move(shape), std::move(data));
  t.node()->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::runtime_error("tensor: shape() on undefined tensor");
  return node_->shape;
}

int Tensor::size() const { return node_ ? static_cast<int>(node_->value.size()) : 0; }

int Tensor::rows() const {
  require_2d(*this, "rows");
  return node_->shape[0];
}

int Tensor::cols() const {
  require_2d(*this, "cols");
  return node_->shape[1];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("tensor: item() needs a single element, got " + shape_str(shape()));
  return node_->value[0];
}

std::span<const double> Tensor::values() const {
  if (!node_) throw std::runtime_error("tensor: values() on undefined tensor");
  return node_->value;
}

std::span<double> Tensor::values_mut() {
  if (!node_) throw std::runtime_error("tensor: values_mut() on undefined tensor");
  return node_->value;
}

std::span<const double> Tensor::grad() const {
  if (!node_) throw std::runtime_error("tensor: grad() on undefined tensor");
  if (node_->grad.size() != node_->value.size())
    throw std::runtime_error("tensor: gradient not populated; run backward first");
  return node_->grad;
}

bool Tensor::grad_allocated() const {
  return node_ && node_->grad.size() == node_->value.size();
}

Tensor Tensor::detach() const {
  check_defined(*this, "detach");
  return Tensor(make_node(node_->shape, node_->value));
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

namespace {

enum class EwOp { Add, Sub, Mul };

Tensor ew_binary(const Tensor& a, const Tensor& b, EwOp op, const char* name) {
  check_defined(a, name);
  check_defined(b, name);
  bool a_scalar = a.size() == 1 && b.size() != 1;
  bool b_scalar = b.size() == 1 && a.size() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape())
    throw std::invalid_argument(std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  const Tensor& big = a_scalar ? b : a;
  long n = big.size();
  std::vector<double> out(n);
  const double* av = a.node()->value.data();
  const double* bv = b.node()->value.data();
  for (long i = 0; i < n; ++i) {
    double x = a_scalar ? av[0] : av[i];
    double y = b_scalar ? bv[0] : bv[i];
    out[i] = op == EwOp::Add ? x + y : (op == EwOp::Sub ? x - y : x * y);
  }
  auto node = make_node(big.shape(), std::move(out));
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return finish(std::move(node), {a, b}, [an, bn, a_scalar, b_scalar, op, n](TensorNode& self) {
    const double* g = self.grad.data();
    if (an->requires_grad) {
      double* ga = an->grad.data();
      for (long i = 0; i < n; ++i) {
        double gi = g[i];
        if (op == EwOp::Mul) gi *= b_scalar ? bn->value[0] : bn->value[i];
        ga[a_scalar ? 0 : i] += gi;
      }
    }
    if (bn->requires_grad) {
      double* gb = bn->grad.data();
      for (long i = 0; i < n; ++i) {
        double gi = g[i];
        if (op == EwOp::Mul)
          gi *= a_scalar ? an->value[0] : an->value[i];
        else if (op == EwOp::Sub)
          gi = -gi;
        gb[b_scalar ? 0 : i] += gi;
      }
    }
  });
}

Tensor ew_unary(const Tensor& x, const char* name, const std::function<double(double)>& f,
                const std::function<double(double, double)>& dfdx /* (x, y) -> dy/dx */) {
  check_defined(x, name);
  long n = x.size();
  std::vector<double> out(n);
  const double* xv = x.node()->value.data();
  for (long i = 0; i < n; ++i) out[i] = f(xv[i]);
  auto node = make_node(x.shape(), std::move(out));
  auto* xn = x.node().get();
  return finish(std::move(node), {x}, [xn, n, dfdx](TensorNode& self) {
    if (!xn->requires_grad) return;
    double* gx = xn->grad.data();
    const double* g = self.grad.data();
    for (long i = 0; i < n; ++i) gx[i] += g[i] * dfdx(xn->value[i], self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return ew_binary(a, b, EwOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return ew_binary(a, b, EwOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return ew_binary(a, b, EwOp::Mul, "mul"); }
Tensor add(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }

Tensor relu(const Tensor& x) {
  return ew_unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& x) {
  return ew_unary(
      x, "elu", [](double v) { return v > 0.0 ? v : std::expm1(v); },
      [](double v, double y) { return v > 0.0 ? 1.0 : y + 1.0; });
}

Tensor abs(const Tensor& x) {
  return ew_unary(
      x, "abs", [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor tanh(const Tensor& x) {
  return ew_unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return ew_unary(
      x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return ew_unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  check_defined(x, "log");
  const double* xv = x.node()->value.data();
  for (int i = 0; i < x.size(); ++i)
    if (xv[i] <= 0.0) {
      std::ostringstream os;
      os << "log: non-positive input " << xv[i] << " at flat index " << i;
      throw std::domain_error(os.str());
    }
  return ew_unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  int m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw std::invalid_argument("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  mm(a.values().data(), b.values().data(), out.data(), m, k, n);
  auto node = make_node({m, n}, std::move(out));
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return finish(std::move(node), {a, b}, [an, bn, m, k, n](TensorNode& self) {
    if (an->requires_grad) mm_nt(self.grad.data(), bn->value.data(), an->grad.data(), m, n, k);
    if (bn->requires_grad) mm_tn(an->value.data(), self.grad.data(), bn->grad.data(), k, m, n);
  });
}

namespace {

Tensor affine_impl(const Tensor& x, const Tensor& w, const Tensor* b) {
  check_defined(x, "affine");
  check_defined(w, "affine");
  require_2d(x, "affine");
  require_2d(w, "affine");
  int batch = x.shape()[0], in = x.shape()[1], out_dim = w.shape()[0];
  if (w.shape()[1] != in)
    throw std::invalid_argument("affine: input " + shape_str(x.shape()) +
                                " incompatible with weight " + shape_str(w.shape()));
  std::vector<double> out(static_cast<size_t>(batch) * out_dim, 0.0);
  if (b) {
    check_defined(*b, "affine");
    if (b->size() != out_dim)
      throw std::invalid_argument("affine: bias " + shape_str(b->shape()) +
                                  " incompatible with weight " + shape_str(w.shape()));
    const double* bv = b->values().data();
    for (int i = 0; i < batch; ++i)
      for (int j = 0; j < out_dim; ++j) out[static_cast<size_t>(i) * out_dim + j] = bv[j];
  }
  mm_nt(x.values().data(), w.values().data(), out.data(), batch, in, out_dim);
  auto node = make_node({batch, out_dim}, std::move(out));
  auto* xn = x.node().get();
  auto* wn = w.node().get();
  auto* bn = b ? b->node().get() : nullptr;
  auto bp = [xn, wn, bn, batch, in, out_dim](TensorNode& self) {
    const double* g = self.grad.data();
    if (xn->requires_grad) mm(g, wn->value.data(), xn->grad.data(), batch, out_dim, in);
    if (wn->requires_grad) mm_tn(g, xn->value.data(), wn->grad.data(), out_dim, batch, in);
    if (bn && bn->requires_grad) {
      double* gb = bn->grad.data();
      for (int i = 0; i < batch; ++i) {
        const double* gr = g + static_cast<size_t>(i) * out_dim;
        for (int j = 0; j < out_dim; ++j) gb[j] += gr[j];
      }
    }
  };
  if (b) return finish(std::move(node), {x, w, *b}, std::move(bp));
  return finish(std::move(node), {x, w}, std::move(bp));
}

}  // namespace

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) { return affine_impl(x, w, &b); }

Tensor linear(const Tensor& x, const Tensor& w) { return affine_impl(x, w, nullptr); }

Tensor reshape(const Tensor& x, Shape shape) {
  check_defined(x, "reshape");
  long n = shape_numel(shape);
  if (n != x.size())
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                shape_str(shape));
  auto node = make_node(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()));
  auto* xn = x.node().get();
  return finish(std::move(node), {x}, [xn, n](TensorNode& self) {
    if (!xn->requires_grad) return;
    for (long i = 0; i < n; ++i) xn->grad[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  check_defined(x, "sum");
  double s = 0.0;
  for (double v : x.values()) s += v;
  auto node = make_node({1}, {s});
  auto* xn = x.node().get();
  long n = x.size();
  return finish(std::move(node), {x}, [xn, n](TensorNode& self) {
    if (!xn->requires_grad) return;
    double g = self.grad[0];
    for (long i = 0; i < n; ++i) xn->grad[i] += g;
  });
}

Tensor row_sum(const Tensor& x) {
  check_defined(x, "row_sum");
  require_2d(x, "row_sum");
  int r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(r, 0.0);
  const double* xv = x.values().data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[i] += xv[static_cast<size_t>(i) * c + j];
  auto node = make_node({r, 1}, std::move(out));
  auto* xn = x.node().get();
  return finish(std::move(node), {x}, [xn, r, c](TensorNode& self) {
    if (!xn->requires_grad) return;
    for (int i = 0; i < r; ++i) {
      double g = self.grad[i];
      for (int j = 0; j < c; ++j) xn->grad[static_cast<size_t>(i) * c + j] += g;
    }
  });
}

Tensor gather_cols(const Tensor& x, const std::vector<int>& idx) {
  check_defined(x, "gather_cols");
  require_2d(x, "gather_cols");
  int r = x.shape()[0], c = x.shape()[1];
  if (static_cast<int>(idx.size()) != r) {
    std::ostringstream os;
    os << "gather_cols: " << idx.size() << " indices for " << r << " rows";
    throw std::invalid_argument(os.str());
  }
  std::vector<double> out(r);
  const double* xv = x.values().data();
  for (int i = 0; i < r; ++i) {
    if (idx[i] < 0 || idx[i] >= c) {
      std::ostringstream os;
      os << "gather_cols: index " << idx[i] << " out of range for row " << i << " of "
         << shape_str(x.shape());
      throw std::invalid_argument(os.str());
    }
    out[i] = xv[static_cast<size_t>(i) * c + idx[i]];
  }
  auto node = make_node({r, 1}, std::move(out));
  auto* xn = x.node().get();
  auto ix = idx;
  return finish(std::move(node), {x}, [xn, r, c, ix](TensorNode& self) {
    if (!xn->requires_grad) return;
    for (int i = 0; i < r; ++i) xn->grad[static_cast<size_t>(i) * c + ix[i]] += self.grad[i];
  });
}

Tensor rowwise_vm(const Tensor& v, const Tensor& w, int m) {
  check_defined(v, "rowwise_vm");
  check_defined(w, "rowwise_vm");
  require_2d(v, "rowwise_vm");
  require_2d(w, "rowwise_vm");
  int batch = v.shape()[0], n = v.shape()[1];
  if (w.shape()[0] != batch || w.shape()[1] != n * m)
    throw std::invalid_argument("rowwise_vm: weights " + shape_str(w.shape()) +
                                " do not match values " + shape_str(v.shape()) + " with m=" +
                                std::to_string(m));
  std::vector<double> out(static_cast<size_t>(batch) * m, 0.0);
  const double* vv = v.values().data();
  const double* wv = w.values().data();
  for (int bi = 0; bi < batch; ++bi) {
    const double* vr = vv + static_cast<size_t>(bi) * n;
    const double* wr = wv + static_cast<size_t>(bi) * n * m;
    double* outr = out.data() + static_cast<size_t>(bi) * m;
    for (int a = 0; a < n; ++a) {
      double va = vr[a];
      for (int j = 0; j < m; ++j) outr[j] += va * wr[a * m + j];
    }
  }
  auto node = make_node({batch, m}, std::move(out));
  auto* vn = v.node().get();
  auto* wn = w.node().get();
  return finish(std::move(node), {v, w}, [vn, wn, batch, n, m](TensorNode& self) {
    const double* g = self.grad.data();
    for (int bi = 0; bi < batch; ++bi) {
      const double* gr = g + static_cast<size_t>(bi) * m;
      const double* vr = vn->value.data() + static_cast<size_t>(bi) * n;
      const double* wr = wn->value.data() + static_cast<size_t>(bi) * n * m;
      for (int a = 0; a < n; ++a) {
        if (vn->requires_grad) {
          double s = 0.0;
          for (int j = 0; j < m; ++j) s += gr[j] * wr[a * m + j];
          vn->grad[static_cast<size_t>(bi) * n + a] += s;
        }
        if (wn->requires_grad) {
          double va = vr[a];
          for (int j = 0; j < m; ++j)
            wn->grad[static_cast<size_t>(bi) * n * m + a * m + j] += gr[j] * va;
        }
      }
    }
  });
}

namespace {

Tensor softmax_impl(const Tensor& logits, const Tensor* mask, bool log_form, const char* name) {
  check_defined(logits, name);
  require_2d(logits, name);
  int r = logits.shape()[0], c = logits.shape()[1];
  const double* mv = nullptr;
  if (mask) {
    check_defined(*mask, name);
    if (mask->shape() != logits.shape())
      throw std::invalid_argument(std::string(name) + ": mask " + shape_str(mask->shape()) +
                                  " does not match logits " + shape_str(logits.shape()));
    mv = mask->values().data();
  }
  const double* lv = logits.values().data();
  std::vector<double> probs(static_cast<size_t>(r) * c, 0.0);
  std::vector<double> out(static_cast<size_t>(r) * c);
  for (int i = 0; i < r; ++i) {
    const double* row = lv + static_cast<size_t>(i) * c;
    const double* mrow = mv ? mv + static_cast<size_t>(i) * c : nullptr;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < c; ++j)
      if ((!mrow || mrow[j] != 0.0) && row[j] > mx) mx = row[j];
    if (mx == -std::numeric_limits<double>::infinity()) {
      std::ostringstream os;
      os << name << ": row " << i << " has no available entry";
      throw std::runtime_error(os.str());
    }
    double z = 0.0;
    for (int j = 0; j < c; ++j)
      if (!mrow || mrow[j] != 0.0) z += std::exp(row[j] - mx);
    double logz = mx + std::log(z);
    for (int j = 0; j < c; ++j) {
      size_t at = static_cast<size_t>(i) * c + j;
      if (mrow && mrow[j] == 0.0) {
        out[at] = log_form ? kMaskedLogProb : 0.0;
      } else {
        probs[at] = std::exp(row[j] - logz);
        out[at] = log_form ? row[j] - logz : probs[at];
      }
    }
  }
  auto node = make_node(logits.shape(), std::move(out));
  auto* ln = logits.node().get();
  Tensor result;
  auto bp = [ln, r, c, probs = std::move(probs), mask_copy = mask ? mask->values() : std::span<const double>(),
             log_form](TensorNode& self) {
    if (!ln->requires_grad) return;
    const double* g = self.grad.data();
    for (int i = 0; i < r; ++i) {
      size_t base = static_cast<size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += g[base + j] * (log_form ? 1.0 : self.value[base + j]);
      // log-softmax rows must not propagate through masked sentinel entries
      if (log_form && !mask_copy.empty()) {
        dot = 0.0;
        for (int j = 0; j < c; ++j)
          if (mask_copy[base + j] != 0.0) dot += g[base + j];
      }
      for (int j = 0; j < c; ++j) {
        if (!mask_copy.empty() && mask_copy[base + j] == 0.0) continue;
        double p = probs[base + j];
        ln->grad[base + j] += log_form ? g[base + j] - p * dot : p * (g[base + j] - dot);
      }
    }
  };
  if (mask)
    result = finish(std::move(node), {logits, *mask}, std::move(bp));
  else
    result = finish(std::move(node), {logits}, std::move(bp));
  return result;
}

}  // namespace

Tensor softmax(const Tensor& logits, const Tensor& mask) {
  return softmax_impl(logits, &mask, false, "softmax");
}
Tensor log_softmax(const Tensor& logits, const Tensor& mask) {
  return softmax_impl(logits, &mask, true, "log_softmax");
}
Tensor softmax(const Tensor& logits) { return softmax_impl(logits, nullptr, false, "softmax"); }
Tensor log_softmax(const Tensor& logits) {
  return softmax_impl(logits, nullptr, true, "log_softmax");
}

void backward(const Tensor& loss) {
  check_defined(loss, "backward");
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
  auto root = loss.node();
  if (!root->requires_grad)
    throw std::runtime_error("backward: loss does not depend on any trainable parameter");
  if (root->backward_root_used)
    throw std::runtime_error("backward: already run on this graph; rebuild the forward pass");
  root->backward_root_used = true;

  // Iterative post-order DFS over requires_grad nodes, parents before node.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (TensorNode* n : order) n->grad.assign(n->value.size(), 0.0);
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace vdmarl
