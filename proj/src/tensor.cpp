#include "tavp/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace tavp::net {

std::string shape_str(const std::vector<int64_t>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

ParamStore::Entry& ParamStore::emplace(const std::string& name, Tensor value) {
  if (index_.count(name)) fail(ErrorKind::InvalidInput, "duplicate parameter name " + name);
  Entry e;
  e.name = name;
  e.grad = Tensor(value.shape);
  e.value = std::move(value);
  index_[name] = entries_.size();
  entries_.push_back(std::move(e));
  return entries_.back();
}

Tensor& ParamStore::create(const std::string& name, std::vector<int64_t> shape) {
  return emplace(name, Tensor(std::move(shape))).value;
}

Tensor& ParamStore::create(const std::string& name, Tensor value) {
  return emplace(name, std::move(value)).value;
}

Tensor& ParamStore::create_he(const std::string& name, std::vector<int64_t> shape,
                              int64_t fan_in) {
  Tensor t(std::move(shape));
  Rng rng(derive_seed(seed_, name));
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<int64_t>(fan_in, 1)));
  for (auto& x : t.data) x = rng.uniform(-bound, bound);
  return emplace(name, std::move(t)).value;
}

Tensor& ParamStore::create_gaussian(const std::string& name, std::vector<int64_t> shape,
                                    double scale) {
  Tensor t(std::move(shape));
  Rng rng(derive_seed(seed_, name));
  for (auto& x : t.data) x = rng.normal() * scale;
  return emplace(name, std::move(t)).value;
}

Tensor& ParamStore::value(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::InvalidInput, "unknown parameter " + name);
  return entries_[it->second].value;
}

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::InvalidInput, "unknown parameter " + name);
  return entries_[it->second].value;
}

Tensor& ParamStore::grad(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::InvalidInput, "unknown parameter " + name);
  return entries_[it->second].grad;
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

std::vector<std::string> ParamStore::names_with_prefix(
    const std::vector<std::string>& prefixes) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (prefixes.empty()) {
      out.push_back(e.name);
      continue;
    }
    for (const auto& p : prefixes) {
      if (e.name.rfind(p, 0) == 0) {
        out.push_back(e.name);
        break;
      }
    }
  }
  return out;
}

uint64_t ParamStore::content_hash(const std::vector<std::string>& prefixes) const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& e : entries_) {
    bool match = prefixes.empty();
    for (const auto& p : prefixes)
      if (e.name.rfind(p, 0) == 0) match = true;
    if (!match) continue;
    h = fnv1a(e.name, h);
    h = fnv1a(e.value.shape.data(), e.value.shape.size() * sizeof(int64_t), h);
    h = fnv1a(e.value.data.data(), e.value.data.size() * sizeof(double), h);
  }
  return h;
}

void ParamStore::copy_prefix(const std::string& src_prefix, const std::string& dst_prefix) {
  // Collect first: emplace invalidates iteration over entries_.
  std::vector<std::pair<std::string, Tensor>> to_add;
  for (const auto& e : entries_) {
    if (e.name.rfind(src_prefix, 0) == 0)
      to_add.emplace_back(dst_prefix + e.name.substr(src_prefix.size()), e.value);
  }
  for (auto& [name, value] : to_add) {
    if (has(name))
      this->value(name) = value;
    else
      emplace(name, std::move(value));
  }
}

void Adam::step(ParamStore& store, const std::vector<std::string>& names, double lr) {
  for (const auto& name : names) {
    Tensor& value = store.value(name);
    Tensor& grad = store.grad(name);
    auto& mom = state_[name];
    if (mom.m.numel() == 0) {
      mom.m = Tensor(value.shape);
      mom.v = Tensor(value.shape);
    }
    mom.t += 1;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(mom.t));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(mom.t));
    for (size_t i = 0; i < value.data.size(); ++i) {
      const double g = grad.data[i];
      mom.m.data[i] = beta1_ * mom.m.data[i] + (1.0 - beta1_) * g;
      mom.v.data[i] = beta2_ * mom.v.data[i] + (1.0 - beta2_) * g * g;
      const double mhat = mom.m.data[i] / bc1;
      const double vhat = mom.v.data[i] / bc2;
      value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
    if (!value.all_finite())
      fail(ErrorKind::Divergence, "non-finite parameter after optimizer step: " + name);
  }
}

double scheduled_lr(double base_lr, const std::string& schedule, int64_t step, int64_t total) {
  if (schedule == "constant" || total <= 1) return base_lr;
  if (schedule == "cosine") {
    const double t = static_cast<double>(std::min(step, total - 1)) / static_cast<double>(total - 1);
    return base_lr * 0.5 * (1.0 + std::cos(kPi * t));
  }
  fail(ErrorKind::ConfigRange, "unknown lr schedule " + schedule);
}

}  // namespace tavp::net
