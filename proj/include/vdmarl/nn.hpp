#pragma once

#include <string>
#include <vector>

#include "vdmarl/params.hpp"
#include "vdmarl/rng.hpp"
#include "vdmarl/tensor.hpp"

namespace vdmarl {

enum class Activation { None, Relu, Elu, Abs, Tanh };

// Fully connected layer, y = act(x W^T + b). Weights start uniform in
// +-1/sqrt(fan_in), biases at zero.
struct DenseLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
  Activation act = Activation::None;
  int in_dim = 0;
  int out_dim = 0;

  static DenseLayer create(ParameterSet& params, const std::string& prefix, int in_dim,
                           int out_dim, Activation act, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

// GRU cell with the gate convention
//   z = sigmoid(x Wz^T + h Uz^T + bz)
//   r = sigmoid(x Wr^T + h Ur^T + br)
//   c = tanh(x Wc^T + (r . h) Uc^T + bc)
//   h' = (1 - z) . h + z . c
// so a large update-gate bias drives h' toward the candidate.
struct GruCell {
  Tensor wz, uz, bz;
  Tensor wr, ur, br;
  Tensor wc, uc, bc;
  int in_dim = 0;
  int hidden_dim = 0;

  static GruCell create(ParameterSet& params, const std::string& prefix, int in_dim,
                        int hidden_dim, Rng& rng);
  Tensor step(const Tensor& x, const Tensor& h) const;
};

// Scales all gradients in place by max_norm/norm when the global L2 norm
// across every entry exceeds max_norm. Returns the pre-clip norm. max_norm
// <= 0 disables clipping.
double clip_grad_norm(std::vector<std::vector<double>>& grads, double max_norm);

// RMSProp with accumulator acc <- decay*acc + (1-decay)*g^2 and update
// theta <- theta - lr * g / sqrt(acc + eps). One state vector per parameter,
// aligned with the ParameterSet order it was created from.
class RmsProp {
 public:
  explicit RmsProp(double lr = 5e-4, double decay = 0.99, double eps = 1e-5)
      : lr_(lr), decay_(decay), eps_(eps) {}

  // grads[i] aligns with params.tensor(i). Non-finite gradient entries are an
  // error naming the parameter.
  void update(ParameterSet& params, const std::vector<std::vector<double>>& grads);

  double lr() const { return lr_; }

 private:
  double lr_, decay_, eps_;
  std::vector<std::vector<double>> acc_;
};

// Copies grads out of the tensors' adjoint buffers, zero for params the loss
// never reached.
std::vector<std::vector<double>> collect_grads(const ParameterSet& params);

}  // namespace vdmarl
