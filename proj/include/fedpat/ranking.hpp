#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fedpat/common.hpp"
#include "fedpat/transactions.hpp"

namespace fedpat {

// Suspicion score s = P_len · (I_total / P_supp)²: long patterns score
// higher, frequent ones lower, and the support term is scale-free in the
// total transaction count. Rare multi-log combinations float to the top.
inline double suspicion_score(std::size_t p_len, std::size_t p_supp,
                              std::size_t i_total) {
  if (p_len < 1) throw InputError("suspicion_score: pattern length must be >= 1");
  if (p_supp < 1 || i_total < 1) {
    throw InputError("suspicion_score: support and total must be >= 1");
  }
  if (i_total < p_supp) {
    throw InputError("suspicion_score: support exceeds the transaction total");
  }
  const double ratio =
      static_cast<double>(i_total) / static_cast<double>(p_supp);
  return static_cast<double>(p_len) * ratio * ratio;
}

struct RankedPattern {
  int rank = 0;  // 1 = most suspicious
  Pattern pattern;
  double score = 0.0;
};

// Scores every pattern against the transaction total and orders them by
// descending score. Ties break toward the longer pattern, then the smaller
// support, then lexicographic label lists, so rankings are reproducible.
inline std::vector<RankedPattern> rank_patterns(
    const std::vector<Pattern>& patterns, std::size_t i_total) {
  std::vector<RankedPattern> ranked;
  ranked.reserve(patterns.size());
  for (const auto& p : patterns) {
    RankedPattern r;
    r.pattern = p;
    r.score = suspicion_score(p.labels.size(), p.instances.size(), i_total);
    ranked.push_back(std::move(r));
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedPattern& a, const RankedPattern& b) {
                     if (a.score != b.score) return a.score > b.score;
                     const auto alen = a.pattern.labels.size();
                     const auto blen = b.pattern.labels.size();
                     if (alen != blen) return alen > blen;
                     const auto asupp = a.pattern.instances.size();
                     const auto bsupp = b.pattern.instances.size();
                     if (asupp != bsupp) return asupp < bsupp;
                     return a.pattern.labels < b.pattern.labels;
                   });
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    ranked[i].rank = static_cast<int>(i) + 1;
  }
  return ranked;
}

}  // namespace fedpat
