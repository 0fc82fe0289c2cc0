#pragma once

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "fedpat/metrics.hpp"

namespace fedpat {

struct EvalRow {
  std::string name;
  ClusterMetrics metrics;
};

namespace detail {

inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
  return buf;
}

}  // namespace detail

inline ClusterMetrics mean_metrics(const std::vector<EvalRow>& rows) {
  ClusterMetrics sum{};
  for (const auto& r : rows) {
    sum.homogeneity += r.metrics.homogeneity;
    sum.completeness += r.metrics.completeness;
    sum.v_measure += r.metrics.v_measure;
    sum.ari += r.metrics.ari;
    sum.ami += r.metrics.ami;
  }
  const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  return {sum.homogeneity / n, sum.completeness / n, sum.v_measure / n,
          sum.ari / n, sum.ami / n};
}

// Prints one row per entry (metrics as percentages, 2 decimals) and, when
// asked, a final mean row over all entries.
inline void write_eval_table(std::ostream& os, const std::vector<EvalRow>& rows,
                             bool with_mean) {
  std::size_t width = 4;  // "mean"
  for (const auto& r : rows) width = std::max(width, r.name.size());
  os << std::left << std::setw(static_cast<int>(width)) << "" << std::right
     << std::setw(9) << "Homog" << std::setw(9) << "Comp" << std::setw(9)
     << "V_M" << std::setw(9) << "ARI" << std::setw(9) << "AMI" << "\n";
  auto emit = [&](const std::string& name, const ClusterMetrics& m) {
    os << std::left << std::setw(static_cast<int>(width)) << name << std::right
       << std::setw(9) << detail::format_percent(m.homogeneity) << std::setw(9)
       << detail::format_percent(m.completeness) << std::setw(9)
       << detail::format_percent(m.v_measure) << std::setw(9)
       << detail::format_percent(m.ari) << std::setw(9)
       << detail::format_percent(m.ami) << "\n";
  };
  for (const auto& r : rows) emit(r.name, r.metrics);
  if (with_mean) emit("mean", mean_metrics(rows));
}

struct BenchRow {
  std::string mode;  // "pure", "federated-128", "federated-256"
  double validation_seconds = 0.0;
  double clustering_seconds = 0.0;
};

inline void write_bench_table(std::ostream& os,
                              const std::vector<BenchRow>& rows) {
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.mode.size());
  os << std::left << std::setw(static_cast<int>(width)) << "" << std::right
     << std::setw(20) << "Cluster Validation" << std::setw(14) << "Clustering"
     << "\n";
  for (const auto& r : rows) {
    char val[32], clu[32];
    std::snprintf(val, sizeof val, "%.3f", r.validation_seconds);
    std::snprintf(clu, sizeof clu, "%.3f", r.clustering_seconds);
    os << std::left << std::setw(static_cast<int>(width)) << r.mode
       << std::right << std::setw(20) << val << std::setw(14) << clu << "\n";
  }
}

}  // namespace fedpat
