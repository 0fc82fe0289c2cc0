#pragma once

#include <cfloat>
#include <cmath>
#include <map>
#include <vector>

#include "fedpat/common.hpp"

namespace fedpat {

struct ClusterMetrics {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v_measure = 0.0;
  double ari = 0.0;
  double ami = 0.0;
};

namespace detail {

struct Contingency {
  std::vector<double> cell;  // r × c counts, row-major
  std::vector<double> row_sum;
  std::vector<double> col_sum;
  double n = 0.0;
  std::size_t r = 0, c = 0;
  double at(std::size_t i, std::size_t j) const { return cell[i * c + j]; }
};

inline Contingency contingency_table(const std::vector<int>& truth,
                                     const std::vector<int>& pred) {
  std::map<int, std::size_t> tix, pix;
  for (int t : truth) tix.emplace(t, 0);
  for (int p : pred) pix.emplace(p, 0);
  std::size_t next = 0;
  for (auto& [_, idx] : tix) idx = next++;
  next = 0;
  for (auto& [_, idx] : pix) idx = next++;

  Contingency ct;
  ct.r = tix.size();
  ct.c = pix.size();
  ct.n = static_cast<double>(truth.size());
  ct.cell.assign(ct.r * ct.c, 0.0);
  ct.row_sum.assign(ct.r, 0.0);
  ct.col_sum.assign(ct.c, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::size_t a = tix[truth[i]], b = pix[pred[i]];
    ct.cell[a * ct.c + b] += 1.0;
    ct.row_sum[a] += 1.0;
    ct.col_sum[b] += 1.0;
  }
  return ct;
}

inline double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

inline double mutual_information(const Contingency& ct) {
  double mi = 0.0;
  for (std::size_t i = 0; i < ct.r; ++i) {
    for (std::size_t j = 0; j < ct.c; ++j) {
      const double nij = ct.at(i, j);
      if (nij <= 0.0) continue;
      mi += (nij / ct.n) *
            (std::log(ct.n * nij) - std::log(ct.row_sum[i] * ct.col_sum[j]));
    }
  }
  return mi;
}

// Expected mutual information under the permutation model: for each margin
// pair (a, b), sum the hypergeometric probability of every feasible cell
// value times that cell's MI contribution. Factorials via lgamma.
inline double expected_mutual_information(const Contingency& ct) {
  const double n = ct.n;
  double emi = 0.0;
  for (std::size_t i = 0; i < ct.r; ++i) {
    const double a = ct.row_sum[i];
    for (std::size_t j = 0; j < ct.c; ++j) {
      const double b = ct.col_sum[j];
      const double lo = std::max(1.0, a + b - n);
      const double hi = std::min(a, b);
      for (double nij = lo; nij <= hi; nij += 1.0) {
        const double term =
            (nij / n) * (std::log(n * nij) - std::log(a * b));
        const double log_prob =
            std::lgamma(a + 1) + std::lgamma(b + 1) + std::lgamma(n - a + 1) +
            std::lgamma(n - b + 1) - std::lgamma(n + 1) -
            std::lgamma(nij + 1) - std::lgamma(a - nij + 1) -
            std::lgamma(b - nij + 1) - std::lgamma(n - a - b + nij + 1);
        emi += term * std::exp(log_prob);
      }
    }
  }
  return emi;
}

inline double comb2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace detail

// Five standard external metrics against a reference labeling. Homogeneity,
// completeness, and their harmonic mean (V-measure) come from the
// conditional entropies; ARI and AMI apply chance correction (AMI under the
// permutation model, arithmetic-mean normalizer). Degenerate partitions
// follow the usual conventions: a single-class reference scores
// homogeneity 1, identical trivial partitions score ARI/AMI 1.
inline ClusterMetrics metrics(const std::vector<int>& truth,
                              const std::vector<int>& pred) {
  if (truth.size() != pred.size() || truth.empty()) {
    throw InputError("metrics: label vectors must be non-empty, equal length");
  }
  const auto ct = detail::contingency_table(truth, pred);

  // A one-to-one contingency table means both labelings induce the same
  // partition; every metric is 1 by definition, so return the exact value
  // instead of round-tripping it through logs.
  if (ct.r == ct.c) {
    bool matching = true;
    for (std::size_t i = 0; i < ct.r && matching; ++i) {
      std::size_t nonzero = 0;
      for (std::size_t j = 0; j < ct.c; ++j) {
        if (ct.at(i, j) > 0.0) ++nonzero;
      }
      matching = (nonzero == 1);
    }
    for (std::size_t j = 0; j < ct.c && matching; ++j) {
      std::size_t nonzero = 0;
      for (std::size_t i = 0; i < ct.r; ++i) {
        if (ct.at(i, j) > 0.0) ++nonzero;
      }
      matching = (nonzero == 1);
    }
    if (matching) return ClusterMetrics{1.0, 1.0, 1.0, 1.0, 1.0};
  }

  const double h_true = detail::entropy(ct.row_sum, ct.n);
  const double h_pred = detail::entropy(ct.col_sum, ct.n);
  const double mi = detail::mutual_information(ct);

  ClusterMetrics out;
  out.homogeneity = (h_true > 0.0) ? mi / h_true : 1.0;
  out.completeness = (h_pred > 0.0) ? mi / h_pred : 1.0;
  const double hc = out.homogeneity + out.completeness;
  out.v_measure =
      (hc > 0.0) ? 2.0 * out.homogeneity * out.completeness / hc : 0.0;

  // Adjusted Rand index via pair counts.
  double sum_ab = 0.0;
  for (std::size_t i = 0; i < ct.r; ++i) {
    for (std::size_t j = 0; j < ct.c; ++j) sum_ab += detail::comb2(ct.at(i, j));
  }
  double sum_a = 0.0, sum_b = 0.0;
  for (double a : ct.row_sum) sum_a += detail::comb2(a);
  for (double b : ct.col_sum) sum_b += detail::comb2(b);
  const double total_pairs = detail::comb2(ct.n);
  if ((sum_a == total_pairs && sum_b == total_pairs) ||
      (sum_a == 0.0 && sum_b == 0.0)) {
    // Both partitions trivial (one block, or all singletons): perfect match.
    out.ari = 1.0;
  } else {
    const double expected = sum_a * sum_b / total_pairs;
    const double max_index = (sum_a + sum_b) / 2.0;
    out.ari = (sum_ab - expected) / (max_index - expected);
  }

  // Adjusted mutual information.
  if (ct.r == 1 && ct.c == 1) {
    // Neither side splits the data: zero entropy on both, a perfect match.
    out.ami = 1.0;
  } else if (ct.r == 1 || ct.c == 1) {
    // One side trivial, the other not: no information shared.
    out.ami = 0.0;
  } else {
    const double emi = detail::expected_mutual_information(ct);
    const double normalizer = 0.5 * (h_true + h_pred);
    // Keep signs but clamp both away from 0 so a perfect match — where
    // MI == EMI == normalizer — comes out as exactly 1 instead of 0/0.
    double denom = normalizer - emi;
    denom = (denom < 0.0) ? std::min(denom, -DBL_EPSILON)
                          : std::max(denom, DBL_EPSILON);
    double numer = mi - emi;
    numer = (numer < 0.0) ? std::min(numer, -DBL_EPSILON)
                          : std::max(numer, DBL_EPSILON);
    out.ami = numer / denom;
  }
  return out;
}

}  // namespace fedpat
