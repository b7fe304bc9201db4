#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tavp/common.hpp"

namespace tavp::net {

// Dense row-major f64 tensor. Rank is 1 or 2 everywhere in this project;
// scalars are shape {1}.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d <= 0) fail(ErrorKind::ShapeMismatch, "tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  static Tensor scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
  }

  static Tensor from(std::vector<int64_t> s, std::vector<double> d) {
    Tensor t;
    t.shape = std::move(s);
    if (numel_of(t.shape) != static_cast<int64_t>(d.size()))
      fail(ErrorKind::ShapeMismatch, "tensor data does not match shape");
    t.data = std::move(d);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  int64_t cols() const { return shape.size() == 2 ? shape[1] : shape[0]; }
  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const {
    for (double x : data)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

std::string shape_str(const std::vector<int64_t>& s);

// Named parameter set with matching gradient buffers. Entry order is
// insertion order and defines the checkpoint manifest order.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };

  // Creates a zero-initialized parameter. Fails on duplicate names.
  Tensor& create(const std::string& name, std::vector<int64_t> shape);

  // Adopts an existing tensor as a parameter.
  Tensor& create(const std::string& name, Tensor value);

  // He-style uniform init with bound sqrt(6 / fan_in), seeded by the store
  // seed and the parameter name so layout changes do not reshuffle other
  // parameters' values.
  Tensor& create_he(const std::string& name, std::vector<int64_t> shape, int64_t fan_in);

  // Gaussian init scaled by 1/sqrt(dim), used for embedding tables.
  Tensor& create_gaussian(const std::string& name, std::vector<int64_t> shape, double scale);

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  void zero_grads();

  // Names matching any of the given prefixes, in insertion order.
  std::vector<std::string> names_with_prefix(const std::vector<std::string>& prefixes) const;

  // FNV-1a over name, shape, and raw value bytes of matching parameters.
  uint64_t content_hash(const std::vector<std::string>& prefixes = {}) const;

  // Deep-copies every `src_prefix*` parameter to `dst_prefix` + suffix.
  void copy_prefix(const std::string& src_prefix, const std::string& dst_prefix);

  void set_seed(uint64_t seed) { seed_ = seed; }
  uint64_t seed() const { return seed_; }

 private:
  Entry& emplace(const std::string& name, Tensor value);

  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
  uint64_t seed_ = 0;
};

// Adam with bias correction. Moment buffers are keyed by parameter name and
// stepped only for the names passed in, in the given order.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store, const std::vector<std::string>& names, double lr);

 private:
  struct Moments {
    Tensor m;
    Tensor v;
    int64_t t = 0;
  };
  double beta1_, beta2_, eps_;
  std::unordered_map<std::string, Moments> state_;
};

// Cosine decay from lr to 0 over total steps; constant when schedule is
// "constant".
double scheduled_lr(double base_lr, const std::string& schedule, int64_t step, int64_t total);

}  // namespace tavp::net
