#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <vector>

#include "fedpat/common.hpp"
#include "fedpat/matrix.hpp"

namespace fedpat {

struct DbscanParams {
  double eps = 0.5;
  std::size_t min_pts = 2;
};

// Standard density-based clustering. The eps-neighborhood is closed
// (distance <= eps) and counts the point itself toward min_pts. Expansion
// walks points in index order, so labels are deterministic: a border point
// reachable from two clusters joins the one whose seed index is smaller.
inline std::vector<int> dbscan(const Matrix& data, const DbscanParams& params) {
  if (!(params.eps > 0.0) || !std::isfinite(params.eps)) {
    throw InputError("dbscan: eps must be positive and finite");
  }
  if (params.min_pts < 1) throw InputError("dbscan: min_pts must be >= 1");
  const std::size_t n = data.rows();
  const double eps2 = params.eps * params.eps;
  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);

  auto neighbors_of = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < n; ++q) {
      if (squared_distance(data.row(p), data.row(q)) <= eps2) {
        out.push_back(q);
      }
    }
    return out;
  };

  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    auto seeds = neighbors_of(i);
    if (seeds.size() < params.min_pts) {
      labels[i] = -1;  // noise (may become a border point later)
      continue;
    }
    labels[i] = cluster;
    std::deque<std::size_t> frontier(seeds.begin(), seeds.end());
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (labels[q] == -1) labels[q] = cluster;  // border point
      if (labels[q] != kUnvisited) continue;
      labels[q] = cluster;
      auto qn = neighbors_of(q);
      if (qn.size() >= params.min_pts) {
        frontier.insert(frontier.end(), qn.begin(), qn.end());
      }
    }
    ++cluster;
  }
  return labels;
}

// Picks eps from the k-distance distribution: drop duplicate rows, take each
// distinct point's distance to its k-th nearest neighbor, and average the
// distinct k-distance values (a single shared value d yields d/2). Duplicate
// rows would make every k-distance 0, so they are removed first.
inline double knee_eps(const Matrix& data, std::size_t k = 2) {
  std::set<std::vector<double>> distinct;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto row = data.row(i);
    distinct.insert(std::vector<double>(row.begin(), row.end()));
  }
  const std::size_t n = distinct.size();
  if (n < 2) {
    throw InputError("knee_eps: need at least 2 distinct rows");
  }
  std::vector<std::vector<double>> rows(distinct.begin(), distinct.end());
  const std::size_t k_eff = std::min(k, n - 1);

  std::set<double> kdist;
  std::vector<double> dists(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t t = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dists[t++] = euclidean_distance(
          std::span<const double>(rows[i]), std::span<const double>(rows[j]));
    }
    std::nth_element(dists.begin(), dists.begin() + (k_eff - 1), dists.end());
    kdist.insert(dists[k_eff - 1]);
  }
  if (kdist.size() == 1) return *kdist.begin() / 2.0;
  double sum = 0.0;
  for (double d : kdist) sum += d;
  return sum / static_cast<double>(kdist.size());
}

}  // namespace fedpat
