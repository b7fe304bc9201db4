#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace tavp {

// Run-directory writer for training curves.
//
//   metrics.csv       long format `step,stage,metric,value`, byte-identical
//                     across reruns with the same seed (no timestamps)
//   metrics.jsonl     same records plus wall_clock_ms, for humans and plots
//   routing_stats.jsonl  gate/expert usage per logged step
//
// Steps must be non-decreasing within a stage; going backwards is a bug in
// the caller and is rejected.
class MetricsSink {
 public:
  explicit MetricsSink(const std::string& out_dir);

  void log(int64_t step, const std::string& stage, const std::string& metric, double value);
  // One line per routing decision: which gate and experts served a task.
  void log_routing(int64_t step, const std::string& stage, int64_t task, int64_t gate,
                   const std::vector<int64_t>& experts, const std::vector<double>& weights);
  void flush();

 private:
  std::ofstream csv_;
  std::ofstream jsonl_;
  std::ofstream routing_;
  std::unordered_map<std::string, int64_t> last_step_;
  std::chrono::steady_clock::time_point start_;
};

// Canonical shortest round-trip double formatting shared by every artifact
// that must be byte-stable.
std::string format_double(double v);

}  // namespace tavp
