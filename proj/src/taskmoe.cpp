#include "tavp/taskmoe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tavp {

using net::MlpSpec;
using net::ParamStore;
using net::Tape;
using net::Tensor;

MoeSettings MoeSettings::from(const RunConfig& cfg) {
  MoeSettings s;
  s.n_tasks = cfg.n_tasks();
  s.n_gates = cfg.n_gates;
  s.n_experts = cfg.n_experts;
  s.top_k = cfg.top_k;
  s.embed_dim = cfg.embed_dim;
  s.use_router = cfg.use_taskmoe;
  return s;
}

void MoeSettings::validate() const {
  if (n_tasks < 1 || embed_dim < 1) fail(ErrorKind::ConfigRange, "moe: empty task set or embed");
  if (!use_router) return;
  if (n_gates < 1 || n_experts < 1 || top_k < 1 || top_k > n_experts)
    fail(ErrorKind::ConfigRange, "moe: need 1 <= top_k <= n_experts and n_gates >= 1");
  if (n_gates >= n_tasks)
    fail(ErrorKind::ConfigRange,
         "moe: n_gates must be smaller than the task count so gates are shared, got n_gates=" +
             std::to_string(n_gates) + " n_tasks=" + std::to_string(n_tasks));
}

namespace {

MlpSpec expert_spec(int64_t embed) { return MlpSpec{{embed, embed, embed}, false}; }

}  // namespace

void TaskMoe::ensure(ParamStore& p, const std::string& prefix) const {
  if (!p.has("instr.table"))
    p.create_gaussian("instr.table", {s_.n_tasks, s_.embed_dim},
                      1.0 / std::sqrt(static_cast<double>(s_.embed_dim)));
  const std::string m = prefix + "moe.";
  net::ensure_attention(p, m + "attn", s_.embed_dim);
  net::ensure_film(p, m + "film", s_.embed_dim, s_.embed_dim);
  if (s_.use_router) {
    if (!p.has(m + "gate.w")) {
      p.create_he(m + "gate.w", {s_.embed_dim, s_.n_gates}, s_.embed_dim);
      p.create(m + "gate.b", {s_.n_gates});
    }
    for (int64_t g = 0; g < s_.n_gates; ++g) {
      const std::string r = m + "route" + std::to_string(g);
      if (p.has(r + ".w")) continue;
      p.create_he(r + ".w", {s_.embed_dim, s_.n_experts}, s_.embed_dim);
      p.create(r + ".b", {s_.n_experts});
    }
    for (int64_t e = 0; e < s_.n_experts; ++e)
      net::ensure_mlp(p, m + "expert" + std::to_string(e), expert_spec(s_.embed_dim));
  } else {
    net::ensure_mlp(p, m + "solo", expert_spec(s_.embed_dim));
  }
}

std::pair<std::vector<int64_t>, Tape::Id> topk_renormalize(Tape& t, Tape::Id probs, int64_t k) {
  const Tensor& pv = t.value(probs);
  if (k < 1 || k > pv.numel()) fail(ErrorKind::InvalidInput, "topk: k out of range");
  std::vector<int64_t> order(pv.data.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return pv.data[a] > pv.data[b]; });
  order.resize(static_cast<size_t>(k));
  const Tape::Id picked = t.gather(probs, order);
  return {order, t.normalize_sum(picked)};
}

RoutingDecision TaskMoe::forward(Tape& t, ParamStore& p, Tape::Id view_tokens, int64_t task_id,
                                 const std::string& prefix) const {
  if (task_id < 0 || task_id >= s_.n_tasks)
    fail(ErrorKind::InvalidInput, "moe: task id " + std::to_string(task_id) + " out of range");
  const std::string m = prefix + "moe.";

  const Tape::Id table = t.param(p, "instr.table");
  const Tape::Id task_emb = t.slice(table, task_id * s_.embed_dim, s_.embed_dim);
  const Tape::Id attended = net::cross_attention(t, task_emb, view_tokens, p, m + "attn",
                                                 s_.embed_dim);
  const Tape::Id fused = net::film(t, attended, task_emb, p, m + "film");

  RoutingDecision d;
  d.task = task_id;
  d.fused = fused;
  if (!s_.use_router) {
    d.context = net::mlp_forward(t, fused, p, m + "solo", expert_spec(s_.embed_dim));
    return d;
  }

  // Hard gate pick with a straight-through factor: the multiplier is worth
  // exactly 1, so values are unchanged while the gate logits stay reachable
  // from every downstream loss.
  const Tape::Id gate_scores =
      t.softmax(t.affine(fused, t.param(p, m + "gate.w"), t.param(p, m + "gate.b")));
  const Tensor& gv = t.value(gate_scores);
  d.gate = static_cast<int64_t>(
      std::max_element(gv.data.begin(), gv.data.end()) - gv.data.begin());
  const Tape::Id picked_score = t.slice(gate_scores, d.gate, 1);
  const Tape::Id unit = t.add_const(t.sub(picked_score, t.detach(picked_score)), 1.0);
  const Tape::Id routed = t.mul_scalar(fused, unit);

  const std::string r = m + "route" + std::to_string(d.gate);
  const Tape::Id expert_probs =
      t.softmax(t.affine(routed, t.param(p, r + ".w"), t.param(p, r + ".b")));
  auto [ids, weights] = topk_renormalize(t, expert_probs, s_.top_k);
  d.experts = ids;
  d.weights = t.value(weights).data;

  Tape::Id mix = -1;
  for (size_t i = 0; i < ids.size(); ++i) {
    const Tape::Id out = net::mlp_forward(t, routed, p, m + "expert" + std::to_string(ids[i]),
                                          expert_spec(s_.embed_dim));
    const Tape::Id term = t.mul_scalar(out, t.slice(weights, static_cast<int64_t>(i), 1));
    mix = (mix < 0) ? term : t.add(mix, term);
  }
  d.context = mix;
  return d;
}

std::vector<std::string> TaskMoe::trainable_prefixes(const std::string& prefix) {
  return {prefix + "moe."};
}

void RoutingStats::observe(const RoutingDecision& d) {
  if (d.gate >= 0) {
    if (static_cast<size_t>(d.gate) >= gate_counts.size())
      gate_counts.resize(static_cast<size_t>(d.gate) + 1, 0);
    gate_counts[static_cast<size_t>(d.gate)] += 1;
  }
  for (size_t i = 0; i < d.experts.size(); ++i) {
    const size_t e = static_cast<size_t>(d.experts[i]);
    if (e >= expert_mass.size()) expert_mass.resize(e + 1, 0.0);
    expert_mass[e] += d.weights[i];
  }
}

}  // namespace tavp
