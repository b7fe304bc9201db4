#pragma once

#include "tavp/tape.hpp"

namespace tavp::net {

// Fully connected stack. dims = {in, h1, ..., out}; ReLU between layers,
// optional ReLU after the last. Parameters are <prefix>.w<i>/<prefix>.b<i>.
struct MlpSpec {
  std::vector<int64_t> dims;
  bool relu_output = false;
};

void ensure_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec);
Tape::Id mlp_forward(Tape& tape, Tape::Id x, ParamStore& store, const std::string& prefix,
                     const MlpSpec& spec);

// Single-head scaled dot-product attention of one query vector over a token
// matrix, with projections on q/k/v, an output projection, and the raw query
// added back as a residual. All dims equal embed.
void ensure_attention(ParamStore& store, const std::string& prefix, int64_t embed);
Tape::Id cross_attention(Tape& tape, Tape::Id query, Tape::Id tokens, ParamStore& store,
                         const std::string& prefix, int64_t embed);

// FiLM: an affine layer maps the condition to (gamma, beta) and the features
// are transformed elementwise to gamma * x + beta.
void ensure_film(ParamStore& store, const std::string& prefix, int64_t cond_dim,
                 int64_t feat_dim);
Tape::Id film(Tape& tape, Tape::Id features, Tape::Id condition, ParamStore& store,
              const std::string& prefix);
// Same modulation applied to every row of a [n, feat] matrix.
Tape::Id film_rows(Tape& tape, Tape::Id features, Tape::Id condition, ParamStore& store,
                   const std::string& prefix);

// x = mu + exp(log_sigma) * eps with eps a constant draw.
Tape::Id sample_reparam(Tape& tape, Tape::Id mu, Tape::Id log_sigma, const Tensor& eps);

// Diagonal Gaussian log-density of a constant observation x:
// sum_i [ -0.5*((x_i-mu_i)/sigma_i)^2 - log sigma_i - 0.5*log(2*pi) ].
Tape::Id gaussian_log_prob(Tape& tape, Tape::Id mu, Tape::Id log_sigma, const Tensor& x);

// Entropy of the diagonal Gaussian: sum_i [log sigma_i + 0.5*(1+log(2*pi))].
Tape::Id gaussian_entropy(Tape& tape, Tape::Id log_sigma);

constexpr double kLogSigmaMin = -5.0;
constexpr double kLogSigmaMax = 2.0;

}  // namespace tavp::net
