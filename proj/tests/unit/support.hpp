#pragma once

// Shared builders and independent oracles for the unit tests. The oracles
// deliberately avoid the library's code paths: direct products instead of log
// space, plain grids and candidate scans instead of closed forms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "maci/core.hpp"

namespace testing {

inline maci::Document make_doc(const std::string& id, const std::string& group, const std::vector<double>& scores,
                               const std::vector<int>& labels = {}) {
  maci::Document d;
  d.id = id;
  d.group = group;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    maci::Claim c;
    c.index = j;
    c.scores = {scores[j]};
    if (!labels.empty()) c.label = labels[j] == 1;
    d.claims.push_back(c);
  }
  return d;
}

// Descending order, ties by index.
inline std::vector<std::size_t> naive_order(const std::vector<double>& p) {
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  return idx;
}

// Randomized oracle filter with direct products and the inclusive u <= gamma rule.
inline std::vector<std::size_t> naive_filter(const std::vector<double>& p, double tau, double u) {
  const auto idx = naive_order(p);
  const std::size_t n = p.size();
  std::vector<double> g(n + 2, 0.0);
  g[0] = 1.0;
  for (std::size_t k = 1; k <= n; ++k) g[k] = g[k - 1] * p[idx[k - 1]];
  g[n + 1] = 0.0;
  std::size_t k_star = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    if (g[k] >= tau) k_star = k;
  }
  double gamma = 0.0;
  if (k_star < n && g[k_star] - g[k_star + 1] > 0.0) gamma = (g[k_star] - tau) / (g[k_star] - g[k_star + 1]);
  std::size_t keep = k_star + ((k_star < n && u <= gamma) ? 1 : 0);
  std::vector<std::size_t> out(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(out.begin(), out.end());
  return out;
}

inline bool subset_of_true(const std::vector<std::size_t>& kept, const std::vector<int>& labels) {
  return std::all_of(kept.begin(), kept.end(), [&](std::size_t j) { return labels[j] == 1; });
}

// Smallest grid point at which the naive filter keeps only true claims.
inline double grid_conformity(const std::vector<double>& p, const std::vector<int>& labels, double u,
                              std::size_t points = 10000) {
  for (std::size_t i = 0; i <= points; ++i) {
    const double tau = static_cast<double>(i) / static_cast<double>(points);
    if (subset_of_true(naive_filter(p, tau, u), labels)) return tau;
  }
  return 1.0;
}

// Smallest candidate q in values ∪ {1} with #{v <= q} >= (1 - alpha)(n + 1).
inline double scan_quantile(std::vector<double> values, double alpha) {
  const double need = (1.0 - alpha) * static_cast<double>(values.size() + 1);
  std::vector<double> cands = values;
  cands.push_back(1.0);
  std::sort(cands.begin(), cands.end());
  for (double q : cands) {
    const auto below = std::count_if(values.begin(), values.end(), [&](double v) { return v <= q; });
    if (static_cast<double>(below) >= need - 1e-9) return q;
  }
  return 1.0;
}

}  // namespace testing
