#pragma once

#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <vector>

#include "fedpat/common.hpp"
#include "fedpat/matrix.hpp"

namespace fedpat {

// Data-driven fuzzifier from the dataset shape (N rows, D columns):
//   m = 1 + (1418/N + 22.05)·D^-2 + (12.33/N + 0.243)·D^(-0.0406·ln N - 0.1134)
// Values that reach 2 are replaced by the reference constant below, keeping
// the fuzzifier in the usable range for small or low-dimensional datasets.
inline constexpr double kFuzzifierCap = 1.380229246586486;

inline double compute_fuzzifier(std::size_t n_rows, std::size_t n_cols) {
  const double n = static_cast<double>(n_rows);
  const double d = static_cast<double>(n_cols);
  const double m = 1.0 + (1418.0 / n + 22.05) * std::pow(d, -2.0) +
                   (12.33 / n + 0.243) *
                       std::pow(d, -0.0406 * std::log(n) - 0.1134);
  return m >= 2.0 ? kFuzzifierCap : m;
}

struct FuzzyModel {
  Matrix centers;  // K × D
  double fuzzifier_m = 2.0;
  std::size_t k = 0;
  double tolerance = 1e-6;
  int max_iter = 300;
  std::uint64_t seed = 0;
};

struct FcmResult {
  FuzzyModel model;
  Matrix membership;  // N × K, rows sum to 1
  std::vector<double> objective_history;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Matrix random_membership(std::size_t n, std::size_t k,
                                std::uint64_t seed) {
  Rng rng(seed);
  Matrix u(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      u(i, j) = rng.next_unit();
      sum += u(i, j);
    }
    if (sum <= 0.0) {  // vanishing draw; fall back to uniform
      for (std::size_t j = 0; j < k; ++j) u(i, j) = 1.0 / static_cast<double>(k);
    } else {
      for (std::size_t j = 0; j < k; ++j) u(i, j) /= sum;
    }
  }
  return u;
}

inline void centers_from_membership(const Matrix& data, const Matrix& u,
                                    double m, Matrix& centers) {
  const std::size_t n = data.rows(), d = data.cols(), k = u.cols();
  for (std::size_t j = 0; j < k; ++j) {
    double denom = 0.0;
    std::vector<double> num(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::pow(u(i, j), m);
      denom += w;
      for (std::size_t c = 0; c < d; ++c) num[c] += w * data(i, c);
    }
    if (denom > 0.0) {
      for (std::size_t c = 0; c < d; ++c) centers(j, c) = num[c] / denom;
    }
    // denom == 0 leaves the previous center untouched (empty cluster).
  }
}

inline void membership_from_centers(const Matrix& data, const Matrix& centers,
                                    double m, Matrix& u) {
  const std::size_t n = data.rows(), k = centers.rows();
  const double inv_exp = 1.0 / (m - 1.0);
  std::vector<double> d2(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t zeros = 0;
    for (std::size_t j = 0; j < k; ++j) {
      d2[j] = squared_distance(data.row(i), centers.row(j));
      if (d2[j] == 0.0) ++zeros;
    }
    if (zeros > 0) {
      // Point sits on a center: full membership there (split if several).
      for (std::size_t j = 0; j < k; ++j) {
        u(i, j) = (d2[j] == 0.0) ? 1.0 / static_cast<double>(zeros) : 0.0;
      }
      continue;
    }
    for (std::size_t j = 0; j < k; ++j) {
      double sum = 0.0;
      for (std::size_t l = 0; l < k; ++l) {
        sum += std::pow(d2[j] / d2[l], inv_exp);
      }
      u(i, j) = 1.0 / sum;
    }
  }
}

inline double fcm_objective(const Matrix& data, const Matrix& centers,
                            const Matrix& u, double m) {
  double j_total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < centers.rows(); ++j) {
      j_total += std::pow(u(i, j), m) *
                 squared_distance(data.row(i), centers.row(j));
    }
  }
  return j_total;
}

inline double max_center_shift(const Matrix& a, const Matrix& b) {
  double shift = 0.0;
  for (std::size_t j = 0; j < a.rows(); ++j) {
    shift = std::max(shift, euclidean_distance(a.row(j), b.row(j)));
  }
  return shift;
}

inline FcmResult fcm_iterate(const Matrix& data, Matrix u, Matrix centers,
                             double m, double tolerance, int max_iter) {
  FcmResult res;
  Matrix prev = centers;
  for (int iter = 1; iter <= max_iter; ++iter) {
    centers_from_membership(data, u, m, centers);
    membership_from_centers(data, centers, m, u);
    res.objective_history.push_back(fcm_objective(data, centers, u, m));
    res.iterations = iter;
    if (max_center_shift(centers, prev) < tolerance) {
      res.converged = true;
      break;
    }
    prev = centers;
  }
  res.model.centers = std::move(centers);
  res.membership = std::move(u);
  return res;
}

}  // namespace detail

inline FcmResult fcm_fit(const Matrix& data, std::size_t k, double m,
                         std::uint64_t seed, double tolerance = 1e-6,
                         int max_iter = 300) {
  if (data.rows() == 0) throw InputError("fcm_fit: empty data");
  if (k < 1 || k > data.rows()) {
    throw InputError("fcm_fit: k must be in [1, N]");
  }
  if (!(m > 1.0)) throw InputError("fcm_fit: fuzzifier must exceed 1");
  Matrix u = detail::random_membership(data.rows(), k, seed);
  FcmResult res = detail::fcm_iterate(data, std::move(u),
                                      Matrix(k, data.cols()), m, tolerance,
                                      max_iter);
  res.model.fuzzifier_m = m;
  res.model.k = k;
  res.model.tolerance = tolerance;
  res.model.max_iter = max_iter;
  res.model.seed = seed;
  return res;
}

// Continues the alternating updates from a given set of centers (the warm
// start used when a shared model comes back from an aggregation round).
inline FcmResult fcm_fit_from_centers(const Matrix& data,
                                      const Matrix& centers0, double m,
                                      double tolerance = 1e-6,
                                      int max_iter = 300) {
  if (data.rows() == 0) throw InputError("fcm_fit_from_centers: empty data");
  if (centers0.rows() < 1 || centers0.cols() != data.cols()) {
    throw InputError("fcm_fit_from_centers: center shape mismatch");
  }
  const std::size_t k = centers0.rows();
  Matrix u(data.rows(), k);
  detail::membership_from_centers(data, centers0, m, u);
  FcmResult res =
      detail::fcm_iterate(data, std::move(u), centers0, m, tolerance, max_iter);
  res.model.fuzzifier_m = m;
  res.model.k = k;
  res.model.tolerance = tolerance;
  res.model.max_iter = max_iter;
  return res;
}

// Membership of data against a fixed set of centers (no iteration); used to
// label points with a model that was fitted elsewhere.
inline Matrix membership_for(const Matrix& data, const Matrix& centers,
                             double m) {
  if (centers.cols() != data.cols()) {
    throw InputError("membership_for: center shape mismatch");
  }
  Matrix u(data.rows(), centers.rows());
  detail::membership_from_centers(data, centers, m, u);
  return u;
}

// Hard assignment: argmax membership per row, ties to the lowest index.
inline std::vector<int> hard_labels(const Matrix& membership) {
  std::vector<int> labels(membership.rows());
  for (std::size_t i = 0; i < membership.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < membership.cols(); ++j) {
      if (membership(i, j) > membership(i, best)) best = j;
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

// Cluster-validity score: the smallest squared distance between any two
// centers. Well-separated center sets score high; once k exceeds the real
// cluster count two centers land in one group and the score collapses.
inline double mcd(const Matrix& centers) {
  if (centers.rows() < 2) throw InputError("mcd: need at least 2 centers");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < centers.rows(); ++i) {
    for (std::size_t j = i + 1; j < centers.rows(); ++j) {
      best = std::min(best, squared_distance(centers.row(i), centers.row(j)));
    }
  }
  return best;
}

// The k immediately before the largest drop in the validity curve.
// curve[t] is the score for k = k_min + t; ties go to the smallest k.
inline std::size_t largest_drop_k(const std::vector<double>& mcd_curve,
                                  std::size_t k_min = 2) {
  if (mcd_curve.size() < 2) {
    throw InputError("largest_drop_k: curve needs at least 2 entries");
  }
  std::size_t best_t = 0;
  double best_drop = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < mcd_curve.size(); ++t) {
    const double drop = mcd_curve[t] - mcd_curve[t + 1];
    if (drop > best_drop) {
      best_drop = drop;
      best_t = t;
    }
  }
  return k_min + best_t;
}

struct KSelection {
  std::size_t k_star = 0;
  std::vector<double> mcd_curve;  // entry t is the score for k = 2 + t
};

// Sweeps k = 2..floor(sqrt(N)), scoring each fit, and picks the k before the
// largest drop. Per-k seeds derive from the base seed, so evaluating the
// candidates in parallel gives the same answer as the sequential sweep.
inline KSelection select_cluster_count(const Matrix& data, double m,
                                       std::uint64_t seed,
                                       unsigned threads = 1) {
  const std::size_t n = data.rows();
  const std::size_t k_max =
      static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  if (n < 9 || k_max < 3) {
    throw InputError("select_cluster_count: need at least 9 rows");
  }
  KSelection sel;
  sel.mcd_curve.resize(k_max - 1);
  auto score_one = [&](std::size_t k) {
    FcmResult fit = fcm_fit(data, k, m, derive_seed(seed, k));
    return mcd(fit.model.centers);
  };
  if (threads <= 1) {
    for (std::size_t k = 2; k <= k_max; ++k) {
      sel.mcd_curve[k - 2] = score_one(k);
    }
  } else {
    std::vector<std::future<double>> jobs;
    for (std::size_t k = 2; k <= k_max; ++k) {
      jobs.push_back(std::async(std::launch::async, score_one, k));
    }
    for (std::size_t t = 0; t < jobs.size(); ++t) {
      sel.mcd_curve[t] = jobs[t].get();
    }
  }
  sel.k_star = largest_drop_k(sel.mcd_curve, 2);
  return sel;
}

}  // namespace fedpat
