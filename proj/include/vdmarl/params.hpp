#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vdmarl/tensor.hpp"

namespace vdmarl {

// Ordered, named collection of trainable leaf tensors. Order is insertion
// order and defines the flat index space used by grad_check and the
// optimizer's state vectors.
class ParameterSet {
 public:
  Tensor add(const std::string& name, Tensor param);
  bool has(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  int count() const { return static_cast<int>(tensors_.size()); }
  long total_size() const;
  const std::string& name(int i) const { return names_[i]; }
  Tensor& tensor(int i) { return tensors_[i]; }
  const Tensor& tensor(int i) const { return tensors_[i]; }

  double read_flat(long i) const;
  void write_flat(long i, double v);
  std::string describe_flat(long i) const;  // "name[offset]" for error messages

  std::vector<double> snapshot_values() const;
  void restore_values(const std::vector<double>& flat);

  // Copies values from a set with identical names and shapes; any mismatch is
  // an error naming the offending entry.
  void copy_values_from(const ParameterSet& other);

  // Registers every tensor of other under prefix + its name.
  void adopt(const ParameterSet& other, const std::string& prefix);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, int> index_;
};

// Central-difference gradient check. f builds a fresh scalar loss from the
// current parameter values; backward() on it fills analytic grads, which are
// compared against (f(x+h)-f(x-h))/2h one coordinate at a time. Returns the
// max over coordinates of |analytic - fd| / max(1, |fd|).
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_coordinate;
};
GradCheckReport grad_check(const std::function<Tensor()>& f, ParameterSet& params, double h);

// Binary checkpoint: magic "VDMARL01", then per tensor: u32 name length, name
// bytes, u32 rank, u64 dims, f64 values, all little-endian, read to EOF.
void save_checkpoint(const ParameterSet& params, const std::string& path);
// Loads into an existing set; missing names, extra names, or shape mismatches
// are errors naming the entry.
void load_checkpoint(ParameterSet& params, const std::string& path);

}  // namespace vdmarl
