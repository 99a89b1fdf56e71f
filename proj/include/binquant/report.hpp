#pragma once

#include <string>
#include <vector>

#include "binquant/pipeline.hpp"
#include "binquant/solver.hpp"

namespace binquant {

// Shortest round-trip decimal representation ("%.17g").
std::string format_double(double v);

// Frozen CSV layout: header "layer,block,iter,metric,value", one row per
// metric sample. Metric rows carry iter 0.
struct CsvReport {
  std::vector<std::string> rows;

  void add(std::size_t layer, std::size_t block, int iter,
           const std::string& metric, double value);
  void add_trace(std::size_t layer, const SolveTrace& trace);
  void add_metrics(const std::vector<MetricRow>& metrics);
  std::string str() const;
};

}  // namespace binquant
