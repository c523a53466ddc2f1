#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "maci/core.hpp"

namespace maci {

/// Claims ordered by decreasing combined score (ties by ascending index) and
/// the prefix aggregates of that ordering.
///
/// `values` has N+2 entries: values[0] is the aggregate identity (1) and
/// values[N+1] the floor (0). Every supported convention produces a weakly
/// decreasing sequence on [0,1], so the cutoff machinery is shared:
///   product     running product of clamped scores, accumulated in log space
///   log_sum     log of the running mean, rescaled by 1 - log(m)/log(eps)
///   power_mean  (running mean of p^lambda)^(1/lambda)
///   worst_case  the sorted scores themselves (claim-wise thresholding)
struct PrefixAggregate {
  std::vector<std::size_t> order;
  std::vector<double> values;
  bool randomized = true;

  std::size_t size() const { return order.size(); }
};

struct Cutoff {
  std::size_t k_star = 0;
  double gamma = 0.0;
};

PrefixAggregate prefix_aggregate(std::span<const double> scores, const ConformityConvention& conv);

/// K* = max{k in [0,N] : G_k >= tau} and the boundary inclusion probability.
Cutoff cutoff_and_gamma(const PrefixAggregate& agg, double tau);

/// Number of leading claims (in aggregate order) retained at (tau, u).
///
/// The boundary claim K*+1 is included iff u < gamma. The comparison is
/// evaluated as tau < G_K - u (G_K - G_{K+1}), the same expression used by
/// the conformity score, so {E <= tau} and {retained subset of A} agree
/// exactly in floating point.
std::size_t retained_count(const PrefixAggregate& agg, double tau, double u);

/// Threshold below which the boundary claim between aggregates `upper` and
/// `lower` is included for draw u.
inline double boundary_level(double upper, double lower, double u) {
  return upper - u * (upper - lower);
}

/// Randomized oracle-form filter. Returns retained claim positions in
/// ascending order. Under worst_case the draw is ignored and the result is
/// the claim-wise threshold filter.
std::vector<std::size_t> apply_multiplicative_filter(std::span<const double> scores, double tau,
                                                     double u, const ConformityConvention& conv);

/// {j : scores[j] >= tau}, ascending.
std::vector<std::size_t> apply_threshold_filter(std::span<const double> scores, double tau);

/// Alternate complement-budget rule: claims taken in ascending score order
/// while sum of -log(1 - p + eps) stays within `budget`. Not the default
/// filter; its selection semantics differ from the descending-product rule.
std::vector<std::size_t> complement_budget_filter(std::span<const double> scores, double budget,
                                                  double epsilon = ConformityConvention::kDefaultEpsilon);

}  // namespace maci
