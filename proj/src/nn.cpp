#include "vdmarl/nn.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vdmarl {

namespace {

Tensor apply_act(Tensor y, Activation act) {
  switch (act) {
    case Activation::None: return y;
    case Activation::Relu: return relu(y);
    case Activation::Elu: return elu(y);
    case Activation::Abs: return abs(y);
    case Activation::Tanh: return tanh(y);
  }
  throw std::logic_error("nn: unknown activation");
}

Tensor init_weight(int out_dim, int in_dim, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::vector<double> w(static_cast<size_t>(out_dim) * in_dim);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return Tensor::param({out_dim, in_dim}, std::move(w));
}

}  // namespace

DenseLayer DenseLayer::create(ParameterSet& params, const std::string& prefix, int in_dim,
                              int out_dim, Activation act, Rng& rng) {
  if (in_dim <= 0 || out_dim <= 0) {
    std::ostringstream os;
    os << "nn: dense layer '" << prefix << "' with non-positive dims " << in_dim << " -> "
       << out_dim;
    throw std::invalid_argument(os.str());
  }
  DenseLayer l;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.act = act;
  l.weight = params.add(prefix + ".weight", init_weight(out_dim, in_dim, rng));
  l.bias = params.add(prefix + ".bias", Tensor::param({out_dim}, std::vector<double>(out_dim, 0.0)));
  return l;
}

Tensor DenseLayer::forward(const Tensor& x) const { return apply_act(affine(x, weight, bias), act); }

GruCell GruCell::create(ParameterSet& params, const std::string& prefix, int in_dim,
                        int hidden_dim, Rng& rng) {
  GruCell c;
  c.in_dim = in_dim;
  c.hidden_dim = hidden_dim;
  auto zero_bias = [&](const std::string& name) {
    return params.add(name, Tensor::param({hidden_dim}, std::vector<double>(hidden_dim, 0.0)));
  };
  c.wz = params.add(prefix + ".wz", init_weight(hidden_dim, in_dim, rng));
  c.uz = params.add(prefix + ".uz", init_weight(hidden_dim, hidden_dim, rng));
  c.bz = zero_bias(prefix + ".bz");
  c.wr = params.add(prefix + ".wr", init_weight(hidden_dim, in_dim, rng));
  c.ur = params.add(prefix + ".ur", init_weight(hidden_dim, hidden_dim, rng));
  c.br = zero_bias(prefix + ".br");
  c.wc = params.add(prefix + ".wc", init_weight(hidden_dim, in_dim, rng));
  c.uc = params.add(prefix + ".uc", init_weight(hidden_dim, hidden_dim, rng));
  c.bc = zero_bias(prefix + ".bc");
  return c;
}

Tensor GruCell::step(const Tensor& x, const Tensor& h) const {
  if (x.shape().size() != 2 || h.shape().size() != 2 || x.shape()[0] != h.shape()[0])
    throw std::invalid_argument("gru: batch mismatch between input " + shape_str(x.shape()) +
                                " and hidden " + shape_str(h.shape()));
  Tensor z = sigmoid(add(affine(x, wz, bz), linear(h, uz)));
  Tensor r = sigmoid(add(affine(x, wr, br), linear(h, ur)));
  Tensor c = tanh(add(affine(x, wc, bc), linear(mul(r, h), uc)));
  Tensor one_minus_z = sub(Tensor::scalar(1.0), z);
  return add(mul(one_minus_z, h), mul(z, c));
}

double clip_grad_norm(std::vector<std::vector<double>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g) sq += v * v;
  double norm = std::sqrt(sq);
  if (max_norm <= 0.0 || norm <= max_norm) return norm;
  double scale = max_norm / norm;
  for (auto& g : grads)
    for (double& v : g) v *= scale;
  return norm;
}

void RmsProp::update(ParameterSet& params, const std::vector<std::vector<double>>& grads) {
  if (static_cast<int>(grads.size()) != params.count())
    throw std::invalid_argument("rmsprop: gradient list does not match parameter set");
  if (acc_.empty()) {
    acc_.resize(grads.size());
    for (size_t i = 0; i < grads.size(); ++i) acc_[i].assign(grads[i].size(), 0.0);
  }
  for (int i = 0; i < params.count(); ++i) {
    Tensor& t = params.tensor(i);
    const auto& g = grads[i];
    if (static_cast<int>(g.size()) != t.size())
      throw std::invalid_argument("rmsprop: gradient size mismatch for '" + params.name(i) + "'");
    auto vals = t.values_mut();
    auto& acc = acc_[i];
    for (size_t k = 0; k < g.size(); ++k) {
      if (!std::isfinite(g[k])) {
        std::ostringstream os;
        os << "rmsprop: non-finite gradient " << g[k] << " in '" << params.name(i) << "' at "
           << k;
        throw std::runtime_error(os.str());
      }
      acc[k] = decay_ * acc[k] + (1.0 - decay_) * g[k] * g[k];
      vals[k] -= lr_ * g[k] / std::sqrt(acc[k] + eps_);
    }
  }
}

std::vector<std::vector<double>> collect_grads(const ParameterSet& params) {
  std::vector<std::vector<double>> out(params.count());
  for (int i = 0; i < params.count(); ++i) {
    const Tensor& t = params.tensor(i);
    if (t.grad_allocated())
      out[i].assign(t.grad().begin(), t.grad().end());
    else
      out[i].assign(t.size(), 0.0);
  }
  return out;
}

}  // namespace vdmarl
