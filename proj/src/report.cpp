#include "binquant/report.hpp"

#include <cstdio>

namespace binquant {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void CsvReport::add(std::size_t layer, std::size_t block, int iter,
                    const std::string& metric, double value) {
  rows.push_back(std::to_string(layer) + "," + std::to_string(block) + "," +
                 std::to_string(iter) + "," + metric + "," + format_double(value));
}

void CsvReport::add_trace(std::size_t layer, const SolveTrace& trace) {
  for (const TraceStep& s : trace.steps) {
    const std::string kind = step_kind_name(s.kind);
    add(layer, s.block, s.iter, "obj_" + kind, s.objective);
    add(layer, s.block, s.iter, "amp_" + kind, s.amp_objective);
    add(layer, s.block, s.iter, "acc_" + kind, s.accept_ratio);
  }
}

void CsvReport::add_metrics(const std::vector<MetricRow>& metrics) {
  for (const MetricRow& m : metrics) add(m.layer, m.block, 0, m.metric, m.value);
}

std::string CsvReport::str() const {
  std::string out = "layer,block,iter,metric,value\n";
  for (const std::string& r : rows) {
    out += r;
    out += '\n';
  }
  return out;
}

}  // namespace binquant
