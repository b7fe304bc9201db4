#include "tavp/metrics.hpp"

#include <cstdio>
#include <filesystem>

#include "tavp/common.hpp"

namespace tavp {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

MetricsSink::MetricsSink(const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  csv_.open(dir / "metrics.csv", std::ios::trunc);
  jsonl_.open(dir / "metrics.jsonl", std::ios::trunc);
  routing_.open(dir / "routing_stats.jsonl", std::ios::trunc);
  if (!csv_ || !jsonl_ || !routing_)
    fail(ErrorKind::LoadError, "cannot open metrics files under " + out_dir);
  csv_ << "step,stage,metric,value\n";
  start_ = std::chrono::steady_clock::now();
}

void MetricsSink::log(int64_t step, const std::string& stage, const std::string& metric,
                      double value) {
  auto it = last_step_.find(stage);
  if (it != last_step_.end() && step < it->second)
    fail(ErrorKind::InvalidInput, "metrics step went backwards in stage " + stage + ": " +
                                      std::to_string(step) + " after " + std::to_string(it->second));
  last_step_[stage] = step;
  csv_ << step << ',' << stage << ',' << metric << ',' << format_double(value) << '\n';
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - start_)
                      .count();
  jsonl_ << "{\"metric\":\"" << metric << "\",\"stage\":\"" << stage << "\",\"step\":" << step
         << ",\"value\":" << format_double(value) << ",\"wall_clock_ms\":" << ms << "}\n";
}

void MetricsSink::log_routing(int64_t step, const std::string& stage, int64_t task, int64_t gate,
                              const std::vector<int64_t>& experts,
                              const std::vector<double>& weights) {
  routing_ << "{\"experts\":[";
  for (size_t i = 0; i < experts.size(); ++i) routing_ << (i ? "," : "") << experts[i];
  routing_ << "],\"gate\":" << gate << ",\"stage\":\"" << stage << "\",\"step\":" << step
           << ",\"task\":" << task << ",\"weights\":[";
  for (size_t i = 0; i < weights.size(); ++i) routing_ << (i ? "," : "") << format_double(weights[i]);
  routing_ << "]}\n";
}

void MetricsSink::flush() {
  csv_.flush();
  jsonl_.flush();
  routing_.flush();
}

}  // namespace tavp
