#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tavp/config.hpp"
#include "tavp/net_ops.hpp"

namespace tavp {

// Task-conditioned context head: a frozen instruction embedding queries the
// per-view tokens through cross attention, FiLM re-modulates the result, and
// a hierarchical router (task gate -> per-gate expert distribution, top-k,
// renormalize) mixes expert MLPs into a single context vector. With
// use_router = false the same fuse path feeds one shared expert instead.
struct MoeSettings {
  int64_t n_tasks = 0;
  int64_t n_gates = 0;
  int64_t n_experts = 0;
  int64_t top_k = 0;
  int64_t embed_dim = 0;
  bool use_router = true;

  static MoeSettings from(const RunConfig& cfg);
  void validate() const;
};

struct RoutingDecision {
  int64_t task = -1;
  int64_t gate = -1;                // -1 when the router is disabled
  std::vector<int64_t> experts;     // selected ids, highest weight first
  std::vector<double> weights;      // renormalized, sums to 1
  net::Tape::Id fused = -1;         // [embed] attention+FiLM output
  net::Tape::Id context = -1;       // [embed] mixed expert output
};

class TaskMoe {
 public:
  explicit TaskMoe(MoeSettings s) : s_(s) { s_.validate(); }

  // Creates instr.table plus every <prefix>moe.* parameter that is missing.
  void ensure(net::ParamStore& p, const std::string& prefix = "") const;

  // view_tokens: [n_views, embed] tape node. The gate choice is a hard
  // argmax; a straight-through unit factor keeps the gate scores on the
  // backward path.
  RoutingDecision forward(net::Tape& t, net::ParamStore& p, net::Tape::Id view_tokens,
                          int64_t task_id, const std::string& prefix = "") const;

  const MoeSettings& settings() const { return s_; }

  // Parameter name prefixes that stage 1 and 3 train (excludes instr.).
  static std::vector<std::string> trainable_prefixes(const std::string& prefix = "");

 private:
  MoeSettings s_;
};

// Top-k of a probability vector, renormalized on the tape to sum to one.
// Selection is by value, ties to the lower index; indices come back ordered
// by descending weight.
std::pair<std::vector<int64_t>, net::Tape::Id> topk_renormalize(net::Tape& t, net::Tape::Id probs,
                                                                int64_t k);

// Usage accumulator feeding routing_stats.jsonl.
struct RoutingStats {
  std::vector<int64_t> gate_counts;
  std::vector<double> expert_mass;

  RoutingStats() = default;
  RoutingStats(int64_t n_gates, int64_t n_experts)
      : gate_counts(static_cast<size_t>(n_gates), 0),
        expert_mass(static_cast<size_t>(n_experts), 0.0) {}
  void observe(const RoutingDecision& d);
};

}  // namespace tavp
