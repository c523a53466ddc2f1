#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maci/core.hpp"

namespace maci {

struct WeightSearchConfig {
  double delta = 0.1;        // TPR tolerance: mean TPR must stay >= 1 - delta
  std::size_t budget = 512;  // Dirichlet(1) candidates on top of vertices + uniform
  std::size_t polish_steps = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DocRates {
  double tpr = 0.0;
  double fpr = 0.0;
};

struct WeightEvaluation {
  std::vector<double> weights;
  double tau = 0.0;  // delta-quantile of true-claim ensemble scores
  double mean_tpr = 0.0;
  double mean_fpr = 0.0;
  double pooled_tpr = 0.0;  // retained true claims / all true claims
  bool feasible = false;    // pooled_tpr >= 1 - delta
};

struct WeightSearchResult {
  std::vector<double> weights;
  double tau = 0.0;
  double mean_tpr = 0.0;
  double mean_fpr = 0.0;
  double pooled_tpr = 0.0;
  bool feasible = false;          // false: no candidate met the TPR floor, uniform returned
  std::size_t candidates_evaluated = 0;
};

/// Convex combination of a claim's scorer outputs.
double ensemble_score(std::span<const double> scorer_scores, std::span<const double> weights);

/// Combined score for every claim of a document.
std::vector<double> ensemble_scores(const Document& doc, std::span<const double> weights);

/// Same, over an explicit N x M row-major score matrix.
std::vector<double> ensemble_scores(std::span<const std::vector<double>> score_rows,
                                    std::span<const double> weights);

/// Smallest observed true-claim ensemble score t with empirical CDF(t) >= delta.
double delta_threshold(std::span<const Document> docs, std::span<const double> weights, double delta);

/// Per-document TPR/FPR of the claim-wise threshold filter, with 1-or-count
/// denominators.
DocRates doc_rates(const Document& doc, std::span<const double> combined, double tau);

/// Objective and constraint for one weight vector on a labeled group. The
/// objective is the mean of per-document FPRs; the TPR floor is checked on
/// the pooled true-claim population, which is the population the
/// delta-threshold is taken over.
WeightEvaluation evaluate_weights(std::span<const Document> docs, std::span<const double> weights,
                                  double delta);

/// Minimize mean FPR subject to mean TPR >= 1 - delta over the simplex.
///
/// Candidates: the M vertices, the barycenter and `budget` Dirichlet(1)
/// draws, followed by pairwise mass-transfer polishing with step halving.
/// Ordering: lower FPR, then higher TPR, then closer to uniform, then
/// lexicographically smaller weights.
WeightSearchResult optimize_weights(std::span<const Document> docs, const WeightSearchConfig& config);

}  // namespace maci
