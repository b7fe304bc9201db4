#include "tavp/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace tavp::net {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

static ConstMatMap mat(const Tensor& t, int64_t r, int64_t c) {
  return ConstMatMap(t.data.data(), r, c);
}
static MatMap mat(Tensor& t, int64_t r, int64_t c) { return MatMap(t.data.data(), r, c); }

static void require(bool cond, const std::string& msg) {
  if (!cond) fail(ErrorKind::ShapeMismatch, msg);
}

Tape::Id Tape::push(Tensor value, std::function<void(Tape&)> back) {
  Node n;
  n.grad = Tensor(value.shape);
  n.value = std::move(value);
  n.backward = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::input(Tensor t) { return push(std::move(t)); }

Tape::Id Tape::leaf(Tensor t) { return push(std::move(t)); }

Tape::Id Tape::param(ParamStore& store, const std::string& name) {
  Id id = push(store.value(name));
  param_bindings_.push_back({id, {&store, name}});
  return id;
}

Tape::Id Tape::add(Id a, Id b) {
  require(v(a).same_shape(v(b)), "add: shape mismatch");
  Tensor out = v(a);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += v(b).data[i];
  return push(std::move(out), [a, b](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i) {
      t.g(a).data[i] += go.data[i];
      t.g(b).data[i] += go.data[i];
    }
  });
}

Tape::Id Tape::sub(Id a, Id b) {
  require(v(a).same_shape(v(b)), "sub: shape mismatch");
  Tensor out = v(a);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= v(b).data[i];
  return push(std::move(out), [a, b](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i) {
      t.g(a).data[i] += go.data[i];
      t.g(b).data[i] -= go.data[i];
    }
  });
}

Tape::Id Tape::mul(Id a, Id b) {
  require(v(a).same_shape(v(b)), "mul: shape mismatch");
  Tensor out = v(a);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= v(b).data[i];
  return push(std::move(out), [a, b](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i) {
      t.g(a).data[i] += go.data[i] * t.v(b).data[i];
      t.g(b).data[i] += go.data[i] * t.v(a).data[i];
    }
  });
}

Tape::Id Tape::relu(Id x) {
  Tensor out = v(x);
  for (auto& e : out.data) e = e > 0.0 ? e : 0.0;
  return push(std::move(out), [x](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i)
      if (t.v(x).data[i] > 0.0) t.g(x).data[i] += go.data[i];
  });
}

Tape::Id Tape::sigmoid_op(Id x) {
  Tensor out = v(x);
  for (auto& e : out.data) e = e >= 0.0 ? 1.0 / (1.0 + std::exp(-e))
                                        : std::exp(e) / (1.0 + std::exp(e));
  return push(std::move(out), [x](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    const Tensor& y = t.v(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i)
      t.g(x).data[i] += go.data[i] * y.data[i] * (1.0 - y.data[i]);
  });
}

Tape::Id Tape::exp_op(Id x) {
  Tensor out = v(x);
  for (auto& e : out.data) e = std::exp(e);
  return push(std::move(out), [x](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    const Tensor& y = t.v(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i) t.g(x).data[i] += go.data[i] * y.data[i];
  });
}

Tape::Id Tape::neg(Id x) {
  Tensor out = v(x);
  for (auto& e : out.data) e = -e;
  return push(std::move(out), [x](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i) t.g(x).data[i] -= go.data[i];
  });
}

Tape::Id Tape::scale(Id x, double c) {
  Tensor out = v(x);
  for (auto& e : out.data) e *= c;
  return push(std::move(out), [x, c](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i) t.g(x).data[i] += c * go.data[i];
  });
}

Tape::Id Tape::add_const(Id x, double c) {
  Tensor out = v(x);
  for (auto& e : out.data) e += c;
  return push(std::move(out), [x](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i) t.g(x).data[i] += go.data[i];
  });
}

Tape::Id Tape::clamp(Id x, double lo, double hi) {
  Tensor out = v(x);
  for (auto& e : out.data) e = std::min(std::max(e, lo), hi);
  return push(std::move(out), [x, lo, hi](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i) {
      const double xv = t.v(x).data[i];
      if (xv > lo && xv < hi) t.g(x).data[i] += go.data[i];
    }
  });
}

Tape::Id Tape::mul_scalar(Id x, Id s) {
  require(v(s).numel() == 1, "mul_scalar: s must be scalar");
  const double sv = v(s).data[0];
  Tensor out = v(x);
  for (auto& e : out.data) e *= sv;
  return push(std::move(out), [x, s](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    const double sv = t.v(s).data[0];
    double acc = 0.0;
    for (size_t i = 0; i < go.data.size(); ++i) {
      t.g(x).data[i] += go.data[i] * sv;
      acc += go.data[i] * t.v(x).data[i];
    }
    t.g(s).data[0] += acc;
  });
}

Tape::Id Tape::minimum(Id a, Id b) {
  require(v(a).numel() == 1 && v(b).numel() == 1, "minimum: scalar operands expected");
  const bool pick_a = v(a).data[0] <= v(b).data[0];
  Tensor out = Tensor::scalar(pick_a ? v(a).data[0] : v(b).data[0]);
  return push(std::move(out), [a, b, pick_a](Tape& t) {
    t.g(pick_a ? a : b).data[0] += t.g(t.cursor_).data[0];
  });
}

Tape::Id Tape::concat(std::span<const Id> parts) {
  require(!parts.empty(), "concat: empty part list");
  int64_t n = 0;
  for (Id p : parts) n += v(p).numel();
  Tensor out({n});
  int64_t off = 0;
  for (Id p : parts) {
    std::copy(v(p).data.begin(), v(p).data.end(), out.data.begin() + off);
    off += v(p).numel();
  }
  std::vector<Id> ps(parts.begin(), parts.end());
  return push(std::move(out), [ps](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    int64_t off = 0;
    for (Id p : ps) {
      Tensor& gp = t.g(p);
      for (size_t i = 0; i < gp.data.size(); ++i) gp.data[i] += go.data[off + i];
      off += gp.numel();
    }
  });
}

Tape::Id Tape::slice(Id x, int64_t offset, int64_t len) {
  require(offset >= 0 && len > 0 && offset + len <= v(x).numel(), "slice: out of range");
  Tensor out({len});
  std::copy(v(x).data.begin() + offset, v(x).data.begin() + offset + len, out.data.begin());
  return push(std::move(out), [x, offset, len](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (int64_t i = 0; i < len; ++i) t.g(x).data[offset + i] += go.data[i];
  });
}

Tape::Id Tape::reshape(Id x, std::vector<int64_t> shape) {
  require(Tensor::numel_of(shape) == v(x).numel(), "reshape: element count mismatch");
  Tensor out;
  out.shape = std::move(shape);
  out.data = v(x).data;
  return push(std::move(out), [x](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (size_t i = 0; i < go.data.size(); ++i) t.g(x).data[i] += go.data[i];
  });
}

Tape::Id Tape::gather(Id x, std::vector<int64_t> indices) {
  Tensor out({static_cast<int64_t>(indices.size())});
  for (size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < v(x).numel(), "gather: index out of range");
    out.data[i] = v(x).data[indices[i]];
  }
  return push(std::move(out), [x, indices](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (size_t i = 0; i < indices.size(); ++i) t.g(x).data[indices[i]] += go.data[i];
  });
}

Tape::Id Tape::affine(Id x, Id w, Id b) {
  const Tensor& xv = v(x);
  const Tensor& wv = v(w);
  const Tensor& bv = v(b);
  require(wv.shape.size() == 2, "affine: weight must be rank 2");
  const int64_t in = wv.shape[0];
  const int64_t out_dim = wv.shape[1];
  require(bv.numel() == out_dim, "affine: bias dimension mismatch");
  const bool vec = xv.shape.size() == 1;
  const int64_t n = vec ? 1 : xv.shape[0];
  require(xv.cols() == in || (vec && xv.numel() == in), "affine: input dimension mismatch");

  Tensor out(vec ? std::vector<int64_t>{out_dim} : std::vector<int64_t>{n, out_dim});
  mat(out, n, out_dim).noalias() = mat(xv, n, in) * mat(wv, in, out_dim);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < out_dim; ++c) out.data[r * out_dim + c] += bv.data[c];

  return push(std::move(out), [x, w, b, n, in, out_dim](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    auto gom = mat(go, n, out_dim);
    mat(t.g(x), n, in).noalias() += gom * mat(t.v(w), in, out_dim).transpose();
    mat(t.g(w), in, out_dim).noalias() += mat(t.v(x), n, in).transpose() * gom;
    Tensor& gb = t.g(b);
    for (int64_t r = 0; r < n; ++r)
      for (int64_t c = 0; c < out_dim; ++c) gb.data[c] += go.data[r * out_dim + c];
  });
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& av = v(a);
  const Tensor& bv = v(b);
  require(av.shape.size() == 2 && bv.shape.size() == 2 && av.shape[1] == bv.shape[0],
          "matmul: incompatible shapes");
  const int64_t n = av.shape[0], k = av.shape[1], m = bv.shape[1];
  Tensor out({n, m});
  mat(out, n, m).noalias() = mat(av, n, k) * mat(bv, k, m);
  return push(std::move(out), [a, b, n, k, m](Tape& t) {
    auto gom = mat(t.g(t.cursor_), n, m);
    mat(t.g(a), n, k).noalias() += gom * mat(t.v(b), k, m).transpose();
    mat(t.g(b), k, m).noalias() += mat(t.v(a), n, k).transpose() * gom;
  });
}

Tape::Id Tape::matvec(Id m_id, Id v_id) {
  const Tensor& mv = v(m_id);
  const Tensor& vv = v(v_id);
  require(mv.shape.size() == 2 && vv.numel() == mv.shape[1], "matvec: incompatible shapes");
  const int64_t t_dim = mv.shape[0], d = mv.shape[1];
  Tensor out({t_dim});
  for (int64_t r = 0; r < t_dim; ++r) {
    double s = 0.0;
    for (int64_t c = 0; c < d; ++c) s += mv.data[r * d + c] * vv.data[c];
    out.data[r] = s;
  }
  return push(std::move(out), [m_id, v_id, t_dim, d](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (int64_t r = 0; r < t_dim; ++r) {
      const double gr = go.data[r];
      for (int64_t c = 0; c < d; ++c) {
        t.g(m_id).data[r * d + c] += gr * t.v(v_id).data[c];
        t.g(v_id).data[c] += gr * t.v(m_id).data[r * d + c];
      }
    }
  });
}

Tape::Id Tape::vecmat(Id w_id, Id m_id) {
  const Tensor& wv = v(w_id);
  const Tensor& mv = v(m_id);
  require(mv.shape.size() == 2 && wv.numel() == mv.shape[0], "vecmat: incompatible shapes");
  const int64_t t_dim = mv.shape[0], d = mv.shape[1];
  Tensor out({d});
  for (int64_t r = 0; r < t_dim; ++r) {
    const double wr = wv.data[r];
    for (int64_t c = 0; c < d; ++c) out.data[c] += wr * mv.data[r * d + c];
  }
  return push(std::move(out), [w_id, m_id, t_dim, d](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (int64_t r = 0; r < t_dim; ++r) {
      double acc = 0.0;
      for (int64_t c = 0; c < d; ++c) {
        acc += go.data[c] * t.v(m_id).data[r * d + c];
        t.g(m_id).data[r * d + c] += t.v(w_id).data[r] * go.data[c];
      }
      t.g(w_id).data[r] += acc;
    }
  });
}

Tape::Id Tape::sum(Id x) {
  double s = 0.0;
  for (double e : v(x).data) s += e;
  return push(Tensor::scalar(s), [x](Tape& t) {
    const double go = t.g(t.cursor_).data[0];
    for (auto& e : t.g(x).data) e += go;
  });
}

Tape::Id Tape::mean(Id x) {
  const double n = static_cast<double>(v(x).numel());
  double s = 0.0;
  for (double e : v(x).data) s += e;
  return push(Tensor::scalar(s / n), [x, n](Tape& t) {
    const double go = t.g(t.cursor_).data[0] / n;
    for (auto& e : t.g(x).data) e += go;
  });
}

Tape::Id Tape::rows_max(Id x) {
  const Tensor& xv = v(x);
  require(xv.shape.size() == 2, "rows_max: rank-2 input expected");
  const int64_t n = xv.shape[0], d = xv.shape[1];
  Tensor out({d});
  std::vector<int64_t> arg(d, 0);
  for (int64_t c = 0; c < d; ++c) {
    double best = xv.data[c];
    for (int64_t r = 1; r < n; ++r) {
      const double e = xv.data[r * d + c];
      if (e > best) {
        best = e;
        arg[c] = r;
      }
    }
    out.data[c] = best;
  }
  return push(std::move(out), [x, d, arg](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (int64_t c = 0; c < d; ++c) t.g(x).data[arg[c] * d + c] += go.data[c];
  });
}

Tape::Id Tape::rows_mean(Id x) {
  const Tensor& xv = v(x);
  require(xv.shape.size() == 2, "rows_mean: rank-2 input expected");
  const int64_t n = xv.shape[0], d = xv.shape[1];
  Tensor out({d});
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < d; ++c) out.data[c] += xv.data[r * d + c];
  for (auto& e : out.data) e /= static_cast<double>(n);
  return push(std::move(out), [x, n, d](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    for (int64_t r = 0; r < n; ++r)
      for (int64_t c = 0; c < d; ++c) t.g(x).data[r * d + c] += go.data[c] / static_cast<double>(n);
  });
}

Tape::Id Tape::softmax(Id x) {
  Tensor out = v(x);
  double mx = out.data[0];
  for (double e : out.data) mx = std::max(mx, e);
  double sum = 0.0;
  for (auto& e : out.data) {
    e = std::exp(e - mx);
    sum += e;
  }
  for (auto& e : out.data) e /= sum;
  return push(std::move(out), [x](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    const Tensor& y = t.v(t.cursor_);
    double dot = 0.0;
    for (size_t i = 0; i < go.data.size(); ++i) dot += go.data[i] * y.data[i];
    for (size_t i = 0; i < go.data.size(); ++i)
      t.g(x).data[i] += y.data[i] * (go.data[i] - dot);
  });
}

Tape::Id Tape::entropy_of_softmax(Id logits) {
  const Tensor& z = v(logits);
  double mx = z.data[0];
  for (double e : z.data) mx = std::max(mx, e);
  double sum = 0.0;
  std::vector<double> p(z.data.size());
  for (size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(z.data[i] - mx);
    sum += p[i];
  }
  double h = 0.0;
  for (auto& e : p) {
    e /= sum;
    if (e > 0.0) h -= e * std::log(e);
  }
  return push(Tensor::scalar(h), [logits, p, h](Tape& t) {
    const double go = t.g(t.cursor_).data[0];
    for (size_t i = 0; i < p.size(); ++i) {
      const double lp = p[i] > 0.0 ? std::log(p[i]) : -745.0;
      t.g(logits).data[i] += go * (-p[i] * (lp + h));
    }
  });
}

Tape::Id Tape::normalize_sum(Id x) {
  const Tensor& xv = v(x);
  double s = 0.0;
  for (double e : xv.data) s += e;
  require(std::abs(s) > 1e-300, "normalize_sum: zero total");
  Tensor out = xv;
  for (auto& e : out.data) e /= s;
  return push(std::move(out), [x, s](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    const Tensor& y = t.v(t.cursor_);
    double dot = 0.0;
    for (size_t i = 0; i < go.data.size(); ++i) dot += go.data[i] * y.data[i];
    for (size_t i = 0; i < go.data.size(); ++i) t.g(x).data[i] += (go.data[i] - dot) / s;
  });
}

Tape::Id Tape::mean_of(std::span<const Id> scalars) {
  require(!scalars.empty(), "mean_of: empty list");
  double s = 0.0;
  for (Id id : scalars) {
    require(v(id).numel() == 1, "mean_of: non-scalar element");
    s += v(id).data[0];
  }
  const double n = static_cast<double>(scalars.size());
  std::vector<Id> ids(scalars.begin(), scalars.end());
  return push(Tensor::scalar(s / n), [ids, n](Tape& t) {
    const double go = t.g(t.cursor_).data[0] / n;
    for (Id id : ids) t.g(id).data[0] += go;
  });
}

Tape::Id Tape::cross_entropy_logits(Id logits, const Tensor& target) {
  const Tensor& z = v(logits);
  require(z.numel() == target.numel(), "cross_entropy_logits: size mismatch");
  double mx = z.data[0];
  for (double e : z.data) mx = std::max(mx, e);
  double sum = 0.0;
  for (double e : z.data) sum += std::exp(e - mx);
  const double lse = mx + std::log(sum);
  double dot = 0.0;
  for (size_t i = 0; i < target.data.size(); ++i) dot += target.data[i] * z.data[i];
  // Valid for normalized target distributions: CE = lse(z) - <t, z>.
  Tensor tgt = target;
  return push(Tensor::scalar(lse - dot), [logits, tgt, mx, sum](Tape& t) {
    const double go = t.g(t.cursor_).data[0];
    const Tensor& z = t.v(logits);
    for (size_t i = 0; i < z.data.size(); ++i) {
      const double p = std::exp(z.data[i] - mx) / sum;
      t.g(logits).data[i] += go * (p - tgt.data[i]);
    }
  });
}

Tape::Id Tape::bce_logit(Id logit, double target) {
  require(v(logit).numel() == 1, "bce_logit: scalar logit expected");
  const double z = v(logit).data[0];
  const double loss = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - target * z;
  return push(Tensor::scalar(loss), [logit, target](Tape& t) {
    const double go = t.g(t.cursor_).data[0];
    const double z = t.v(logit).data[0];
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    t.g(logit).data[0] += go * (s - target);
  });
}

Tape::Id Tape::cross_entropy_probs(Id probs, const Tensor& target, double eps) {
  const Tensor& p = v(probs);
  require(p.numel() == target.numel(), "cross_entropy_probs: size mismatch");
  double loss = 0.0;
  for (size_t i = 0; i < p.data.size(); ++i) {
    if (target.data[i] == 0.0) continue;
    const double pc = std::min(std::max(p.data[i], eps), 1.0);
    loss -= target.data[i] * std::log(pc);
  }
  Tensor tgt = target;
  return push(Tensor::scalar(loss), [probs, tgt, eps](Tape& t) {
    const double go = t.g(t.cursor_).data[0];
    const Tensor& p = t.v(probs);
    for (size_t i = 0; i < p.data.size(); ++i) {
      if (tgt.data[i] == 0.0) continue;
      if (p.data[i] > eps && p.data[i] <= 1.0)
        t.g(probs).data[i] -= go * tgt.data[i] / p.data[i];
    }
  });
}

Tape::Id Tape::bilinear_upsample(Id x, int64_t h, int64_t w) {
  const Tensor& xv = v(x);
  require(xv.shape.size() == 2, "bilinear_upsample: rank-2 input expected");
  const int64_t gh = xv.shape[0], gw = xv.shape[1];
  require(h >= gh && w >= gw, "bilinear_upsample: output smaller than input");
  Tensor out({h, w});
  const double sy = h > 1 ? static_cast<double>(gh - 1) / static_cast<double>(h - 1) : 0.0;
  const double sx = w > 1 ? static_cast<double>(gw - 1) / static_cast<double>(w - 1) : 0.0;
  for (int64_t y = 0; y < h; ++y) {
    const double gy = y * sy;
    const int64_t y0 = static_cast<int64_t>(gy);
    const int64_t y1 = std::min(y0 + 1, gh - 1);
    const double fy = gy - y0;
    for (int64_t xo = 0; xo < w; ++xo) {
      const double gx = xo * sx;
      const int64_t x0 = static_cast<int64_t>(gx);
      const int64_t x1 = std::min(x0 + 1, gw - 1);
      const double fx = gx - x0;
      out.data[y * w + xo] = xv.data[y0 * gw + x0] * (1 - fy) * (1 - fx) +
                             xv.data[y0 * gw + x1] * (1 - fy) * fx +
                             xv.data[y1 * gw + x0] * fy * (1 - fx) +
                             xv.data[y1 * gw + x1] * fy * fx;
    }
  }
  return push(std::move(out), [x, h, w, gh, gw, sy, sx](Tape& t) {
    const Tensor& go = t.g(t.cursor_);
    Tensor& gx_t = t.g(x);
    for (int64_t y = 0; y < h; ++y) {
      const double gy = y * sy;
      const int64_t y0 = static_cast<int64_t>(gy);
      const int64_t y1 = std::min(y0 + 1, gh - 1);
      const double fy = gy - y0;
      for (int64_t xo = 0; xo < w; ++xo) {
        const double gxc = xo * sx;
        const int64_t x0 = static_cast<int64_t>(gxc);
        const int64_t x1 = std::min(x0 + 1, gw - 1);
        const double fx = gxc - x0;
        const double g = go.data[y * w + xo];
        gx_t.data[y0 * gw + x0] += g * (1 - fy) * (1 - fx);
        gx_t.data[y0 * gw + x1] += g * (1 - fy) * fx;
        gx_t.data[y1 * gw + x0] += g * fy * (1 - fx);
        gx_t.data[y1 * gw + x1] += g * fy * fx;
      }
    }
  });
}

Tape::Id Tape::detach(Id x) { return push(v(x)); }

void Tape::backward(Id root) {
  require(v(root).numel() == 1, "backward: root must be scalar");
  g(root).data[0] = 1.0;
  for (Id i = root; i >= 0; --i) {
    if (nodes_[i].backward) {
      cursor_ = i;
      nodes_[i].backward(*this);
    }
  }
}

void Tape::accumulate_param_grads() {
  for (const auto& [id, binding] : param_bindings_) {
    Tensor& dst = binding.first->grad(binding.second);
    const Tensor& src = g(id);
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
  }
}

}  // namespace tavp::net
