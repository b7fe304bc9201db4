#include "tavp/net_ops.hpp"

#include <cmath>

namespace tavp::net {

void ensure_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec) {
  if (spec.dims.size() < 2) fail(ErrorKind::InvalidInput, "mlp spec needs at least two dims");
  for (size_t l = 0; l + 1 < spec.dims.size(); ++l) {
    const std::string w = prefix + ".w" + std::to_string(l);
    if (store.has(w)) continue;
    store.create_he(w, {spec.dims[l], spec.dims[l + 1]}, spec.dims[l]);
    store.create(prefix + ".b" + std::to_string(l), {spec.dims[l + 1]});
  }
}

Tape::Id mlp_forward(Tape& tape, Tape::Id x, ParamStore& store, const std::string& prefix,
                     const MlpSpec& spec) {
  Tape::Id h = x;
  for (size_t l = 0; l + 1 < spec.dims.size(); ++l) {
    const Tape::Id w = tape.param(store, prefix + ".w" + std::to_string(l));
    const Tape::Id b = tape.param(store, prefix + ".b" + std::to_string(l));
    h = tape.affine(h, w, b);
    const bool last = l + 2 == spec.dims.size();
    if (!last || spec.relu_output) h = tape.relu(h);
  }
  return h;
}

void ensure_attention(ParamStore& store, const std::string& prefix, int64_t embed) {
  if (store.has(prefix + ".wq")) return;
  for (const char* n : {".wq", ".wk", ".wv", ".wo"})
    store.create_he(prefix + n, {embed, embed}, embed);
  for (const char* n : {".bq", ".bk", ".bv", ".bo"}) store.create(prefix + n, {embed});
}

Tape::Id cross_attention(Tape& tape, Tape::Id query, Tape::Id tokens, ParamStore& store,
                         const std::string& prefix, int64_t embed) {
  const Tape::Id q = tape.affine(query, tape.param(store, prefix + ".wq"),
                                 tape.param(store, prefix + ".bq"));
  const Tape::Id k = tape.affine(tokens, tape.param(store, prefix + ".wk"),
                                 tape.param(store, prefix + ".bk"));
  const Tape::Id val = tape.affine(tokens, tape.param(store, prefix + ".wv"),
                                   tape.param(store, prefix + ".bv"));
  Tape::Id scores = tape.matvec(k, q);
  scores = tape.scale(scores, 1.0 / std::sqrt(static_cast<double>(embed)));
  const Tape::Id attn = tape.softmax(scores);
  const Tape::Id mixed = tape.vecmat(attn, val);
  const Tape::Id projected = tape.affine(mixed, tape.param(store, prefix + ".wo"),
                                         tape.param(store, prefix + ".bo"));
  return tape.add(projected, query);
}

void ensure_film(ParamStore& store, const std::string& prefix, int64_t cond_dim,
                 int64_t feat_dim) {
  if (store.has(prefix + ".w")) return;
  store.create_he(prefix + ".w", {cond_dim, 2 * feat_dim}, cond_dim);
  // Bias starts at gamma=1, beta=0 so an untrained layer is the identity.
  Tensor& b = store.create(prefix + ".b", {2 * feat_dim});
  for (int64_t i = 0; i < feat_dim; ++i) b.data[i] = 1.0;
}

static std::pair<Tape::Id, Tape::Id> film_params(Tape& tape, Tape::Id condition,
                                                 ParamStore& store, const std::string& prefix) {
  const Tape::Id gb = tape.affine(condition, tape.param(store, prefix + ".w"),
                                  tape.param(store, prefix + ".b"));
  const int64_t feat = tape.value(gb).numel() / 2;
  return {tape.slice(gb, 0, feat), tape.slice(gb, feat, feat)};
}

Tape::Id film(Tape& tape, Tape::Id features, Tape::Id condition, ParamStore& store,
              const std::string& prefix) {
  auto [gamma, beta] = film_params(tape, condition, store, prefix);
  if (tape.value(gamma).numel() != tape.value(features).numel())
    fail(ErrorKind::ShapeMismatch, "film: feature dimension mismatch");
  return tape.add(tape.mul(features, gamma), beta);
}

Tape::Id film_rows(Tape& tape, Tape::Id features, Tape::Id condition, ParamStore& store,
                   const std::string& prefix) {
  // Copy the shape up front: growing the tape below may reallocate node
  // storage and invalidate references returned by value().
  const std::vector<int64_t> fshape = tape.value(features).shape;
  if (fshape.size() != 2) fail(ErrorKind::ShapeMismatch, "film_rows: rank-2 features expected");
  auto [gamma, beta] = film_params(tape, condition, store, prefix);
  const int64_t n = fshape[0], d = fshape[1];
  if (tape.value(gamma).numel() != d)
    fail(ErrorKind::ShapeMismatch, "film_rows: feature dimension mismatch");
  // Tile gamma/beta across rows through ones-matmul-free composition: reshape
  // to [1,d] and rely on matmul with a constant ones column [n,1].
  Tensor ones({n, 1});
  for (auto& e : ones.data) e = 1.0;
  const Tape::Id ones_id = tape.input(std::move(ones));
  const Tape::Id gamma_rows = tape.matmul(ones_id, tape.reshape(gamma, {1, d}));
  const Tape::Id beta_rows = tape.matmul(ones_id, tape.reshape(beta, {1, d}));
  return tape.add(tape.mul(features, gamma_rows), beta_rows);
}

Tape::Id sample_reparam(Tape& tape, Tape::Id mu, Tape::Id log_sigma, const Tensor& eps) {
  if (!tape.value(mu).same_shape(tape.value(log_sigma)) ||
      tape.value(mu).numel() != eps.numel())
    fail(ErrorKind::ShapeMismatch, "sample_reparam: shape mismatch");
  const Tape::Id sigma = tape.exp_op(log_sigma);
  const Tape::Id eps_id = tape.input(eps);
  return tape.add(mu, tape.mul(sigma, eps_id));
}

Tape::Id gaussian_log_prob(Tape& tape, Tape::Id mu, Tape::Id log_sigma, const Tensor& x) {
  if (!tape.value(mu).same_shape(tape.value(log_sigma)) ||
      tape.value(mu).numel() != x.numel())
    fail(ErrorKind::ShapeMismatch, "gaussian_log_prob: shape mismatch");
  const int64_t n = x.numel();
  const Tape::Id x_id = tape.input(x);
  const Tape::Id diff = tape.sub(x_id, mu);
  const Tape::Id inv_sigma = tape.exp_op(tape.neg(log_sigma));
  const Tape::Id z = tape.mul(diff, inv_sigma);
  const Tape::Id quad = tape.scale(tape.sum(tape.square(z)), -0.5);
  const Tape::Id logdet = tape.neg(tape.sum(log_sigma));
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  const Tape::Id constant = tape.scalar_input(-0.5 * kLog2Pi * static_cast<double>(n));
  return tape.add(tape.add(quad, logdet), constant);
}

Tape::Id gaussian_entropy(Tape& tape, Tape::Id log_sigma) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  const double per_dim = 0.5 * (1.0 + kLog2Pi);
  const int64_t n = tape.value(log_sigma).numel();
  return tape.add_const(tape.sum(log_sigma), per_dim * static_cast<double>(n));
}

}  // namespace tavp::net
