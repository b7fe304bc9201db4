#pragma once

#include <functional>
#include <span>

#include "tavp/tensor.hpp"

namespace tavp::net {

// Reverse-mode autodiff over a dynamic tape. Nodes are appended by the op
// builders below; backward() sweeps them in reverse creation order. There is
// no broadcasting beyond what each op defines. One tape instance is built
// per forward pass and discarded (or reset) afterwards.
class Tape {
 public:
  using Id = int32_t;

  // Constant leaf; gradients stop here.
  Id input(Tensor t);
  Id scalar_input(double v) { return input(Tensor::scalar(v)); }

  // Differentiable leaf not bound to a store (tests, probes).
  Id leaf(Tensor t);

  // Differentiable leaf reading a store parameter; accumulate_param_grads()
  // adds its gradient back into the store.
  Id param(ParamStore& store, const std::string& name);

  const Tensor& value(Id id) const { return nodes_[id].value; }
  const Tensor& grad(Id id) const { return nodes_[id].grad; }

  // --- elementwise and arithmetic ---
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id relu(Id x);
  Id sigmoid_op(Id x);
  Id exp_op(Id x);
  Id neg(Id x);
  Id scale(Id x, double c);
  Id add_const(Id x, double c);
  Id clamp(Id x, double lo, double hi);
  Id square(Id x) { return mul(x, x); }
  // tensor * scalar-node
  Id mul_scalar(Id x, Id s);
  // min(a, b) for scalars; picks a's branch on ties.
  Id minimum(Id a, Id b);

  // --- shape/selection ---
  Id concat(std::span<const Id> parts);
  Id slice(Id x, int64_t offset, int64_t len);
  Id reshape(Id x, std::vector<int64_t> shape);
  Id gather(Id x, std::vector<int64_t> indices);

  // --- linear algebra ---
  // x:[n,i] or [i]; w:[i,o]; b:[o] -> [n,o] or [o]
  Id affine(Id x, Id w, Id b);
  // a:[n,k] x b:[k,m] -> [n,m]
  Id matmul(Id a, Id b);
  // M:[t,d] x v:[d] -> [t]
  Id matvec(Id m, Id v);
  // w:[t] x M:[t,d] -> [d]
  Id vecmat(Id w, Id m);

  // --- reductions / structured ---
  Id sum(Id x);
  Id mean(Id x);
  Id rows_max(Id x);   // [n,d] -> [d], argmax rows backprop, first index wins ties
  Id rows_mean(Id x);  // [n,d] -> [d]
  Id softmax(Id x);    // over the flattened tensor
  Id entropy_of_softmax(Id logits);  // scalar, nats
  Id normalize_sum(Id x);            // x / sum(x)
  Id mean_of(std::span<const Id> scalars);

  // --- losses ---
  // -sum(target * log softmax(logits)); target is a constant distribution.
  Id cross_entropy_logits(Id logits, const Tensor& target);
  // Binary cross-entropy from a single logit against a constant target.
  Id bce_logit(Id logit, double target);
  // -sum(target * log(clamp(p, eps, 1))) on an explicit distribution.
  Id cross_entropy_probs(Id probs, const Tensor& target, double eps);

  // --- resampling ---
  // [gh,gw] -> [h,w] bilinear, align-corners.
  Id bilinear_upsample(Id x, int64_t h, int64_t w);

  // Constant copy of a node's current value.
  Id detach(Id x);

  // Seeds d(root)=1 (root must be scalar) and sweeps the tape in reverse.
  void backward(Id root);

  // Adds gradients of all param-bound leaves into the store. Call after
  // backward(); safe to call once per built tape.
  void accumulate_param_grads();

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> backward;
  };

  Id push(Tensor value, std::function<void(Tape&)> back = nullptr);
  Tensor& g(Id id) { return nodes_[id].grad; }
  const Tensor& v(Id id) const { return nodes_[id].value; }

  std::vector<Node> nodes_;
  std::vector<std::pair<Id, std::pair<ParamStore*, std::string>>> param_bindings_;
  Id cursor_ = -1;  // id of the node whose backward closure is running
};

}  // namespace tavp::net
