#include "vdmarl/params.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vdmarl {

Tensor ParameterSet::add(const std::string& name, Tensor param) {
  if (index_.count(name))
    throw std::invalid_argument("params: duplicate parameter name '" + name + "'");
  if (!param.requires_grad())
    throw std::invalid_argument("params: '" + name + "' is not a trainable leaf");
  index_[name] = static_cast<int>(tensors_.size());
  names_.push_back(name);
  tensors_.push_back(param);
  return param;
}

bool ParameterSet::has(const std::string& name) const { return index_.count(name) != 0; }

Tensor& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("params: no parameter named '" + name + "'");
  return tensors_[it->second];
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("params: no parameter named '" + name + "'");
  return tensors_[it->second];
}

long ParameterSet::total_size() const {
  long n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

namespace {
[[noreturn]] void flat_oob(long i, long total) {
  std::ostringstream os;
  os << "params: flat index " << i << " out of range (total " << total << ")";
  throw std::out_of_range(os.str());
}
}  // namespace

double ParameterSet::read_flat(long i) const {
  long at = i;
  for (const Tensor& t : tensors_) {
    if (at < t.size()) return t.values()[at];
    at -= t.size();
  }
  flat_oob(i, total_size());
}

void ParameterSet::write_flat(long i, double v) {
  long at = i;
  for (Tensor& t : tensors_) {
    if (at < t.size()) {
      t.values_mut()[at] = v;
      return;
    }
    at -= t.size();
  }
  flat_oob(i, total_size());
}

std::string ParameterSet::describe_flat(long i) const {
  long at = i;
  for (size_t k = 0; k < tensors_.size(); ++k) {
    if (at < tensors_[k].size()) {
      std::ostringstream os;
      os << names_[k] << '[' << at << ']';
      return os.str();
    }
    at -= tensors_[k].size();
  }
  flat_oob(i, total_size());
}

std::vector<double> ParameterSet::snapshot_values() const {
  std::vector<double> out;
  out.reserve(total_size());
  for (const Tensor& t : tensors_) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

void ParameterSet::restore_values(const std::vector<double>& flat) {
  if (static_cast<long>(flat.size()) != total_size()) {
    std::ostringstream os;
    os << "params: restore size " << flat.size() << " does not match total " << total_size();
    throw std::invalid_argument(os.str());
  }
  long at = 0;
  for (Tensor& t : tensors_) {
    auto dst = t.values_mut();
    std::memcpy(dst.data(), flat.data() + at, dst.size() * sizeof(double));
    at += t.size();
  }
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  if (other.count() != count()) {
    std::ostringstream os;
    os << "params: copy between sets of " << other.count() << " and " << count() << " tensors";
    throw std::invalid_argument(os.str());
  }
  for (int i = 0; i < count(); ++i) {
    if (names_[i] != other.names_[i])
      throw std::invalid_argument("params: copy name mismatch '" + other.names_[i] + "' vs '" +
                                  names_[i] + "'");
    if (tensors_[i].shape() != other.tensors_[i].shape())
      throw std::invalid_argument("params: copy shape mismatch for '" + names_[i] + "': " +
                                  shape_str(other.tensors_[i].shape()) + " vs " +
                                  shape_str(tensors_[i].shape()));
    auto dst = tensors_[i].values_mut();
    auto src = other.tensors_[i].values();
    std::memcpy(dst.data(), src.data(), dst.size() * sizeof(double));
  }
}

void ParameterSet::adopt(const ParameterSet& other, const std::string& prefix) {
  for (int i = 0; i < other.count(); ++i) add(prefix + other.name(i), other.tensor(i));
}

GradCheckReport grad_check(const std::function<Tensor()>& f, ParameterSet& params, double h) {
  if (h <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
  Tensor loss = f();
  backward(loss);
  std::vector<double> analytic;
  analytic.reserve(params.total_size());
  for (int i = 0; i < params.count(); ++i) {
    const Tensor& t = params.tensor(i);
    // parameters the loss never touches have an exact zero gradient
    if (t.grad_allocated())
      analytic.insert(analytic.end(), t.grad().begin(), t.grad().end());
    else
      analytic.insert(analytic.end(), t.size(), 0.0);
  }

  GradCheckReport report;
  long total = params.total_size();
  for (long i = 0; i < total; ++i) {
    double x0 = params.read_flat(i);
    params.write_flat(i, x0 + h);
    double up = f().item();
    params.write_flat(i, x0 - h);
    double down = f().item();
    params.write_flat(i, x0);
    double fd = (up - down) / (2.0 * h);
    double rel = std::fabs(analytic[i] - fd) / std::max(1.0, std::fabs(fd));
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_coordinate = params.describe_flat(i);
    }
  }
  return report;
}

namespace {

constexpr char kMagic[8] = {'V', 'D', 'M', 'A', 'R', 'L', '0', '1'};

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

bool get_u32(std::istream& is, uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}

bool get_u64(std::istream& is, uint64_t& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}

bool get_f64(std::istream& is, double& v) {
  uint64_t bits;
  if (!get_u64(is, bits)) return false;
  std::memcpy(&v, &bits, 8);
  return true;
}

}  // namespace

void save_checkpoint(const ParameterSet& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, 8);
  for (int i = 0; i < params.count(); ++i) {
    const std::string& name = params.name(i);
    const Tensor& t = params.tensor(i);
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<uint32_t>(t.shape().size()));
    for (int d : t.shape()) put_u64(os, static_cast<uint64_t>(d));
    for (double v : t.values()) put_f64(os, v);
  }
  if (!os) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

void load_checkpoint(ParameterSet& params, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: '" + path + "' has wrong magic; not a checkpoint file");

  std::set<std::string> seen;
  while (true) {
    uint32_t name_len;
    if (!get_u32(is, name_len)) break;  // clean EOF
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw std::runtime_error("checkpoint: truncated name in '" + path + "'");
    uint32_t rank;
    if (!get_u32(is, rank)) throw std::runtime_error("checkpoint: truncated rank in '" + path + "'");
    Shape shape(rank);
    long numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      uint64_t dim;
      if (!get_u64(is, dim)) throw std::runtime_error("checkpoint: truncated dims in '" + path + "'");
      shape[d] = static_cast<int>(dim);
      numel *= shape[d];
    }
    if (!params.has(name))
      throw std::runtime_error("checkpoint: '" + path + "' contains unknown parameter '" + name +
                               "'");
    Tensor& t = params.at(name);
    if (t.shape() != shape)
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': file has " +
                               shape_str(shape) + ", model has " + shape_str(t.shape()));
    auto dst = t.values_mut();
    for (long k = 0; k < numel; ++k)
      if (!get_f64(is, dst[k]))
        throw std::runtime_error("checkpoint: truncated values for '" + name + "' in '" + path +
                                 "'");
    seen.insert(name);
  }
  for (int i = 0; i < params.count(); ++i)
    if (!seen.count(params.name(i)))
      throw std::runtime_error("checkpoint: '" + path + "' is missing parameter '" +
                               params.name(i) + "'");
}

}  // namespace vdmarl
