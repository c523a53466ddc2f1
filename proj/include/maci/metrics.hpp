#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "maci/calibration.hpp"
#include "maci/core.hpp"

namespace maci {

/// One filtered document: what was kept, what was true, how many claims.
struct FilterResult {
  std::vector<std::size_t> retained;
  std::vector<std::size_t> true_set;
  std::size_t n_claims = 0;
};

struct RateSummary {
  std::size_t n_docs = 0;
  std::size_t n_claims = 0;
  double coverage = 0.0;
  double retention = 0.0;        // mean over documents of |retained| / N
  double claim_retention = 0.0;  // pooled over claims
  double tpr = 0.0;              // pooled retained-true / true
  double fpr = 0.0;              // pooled retained-false / false
  double rho = 0.0;              // pooled true-claim prevalence
};

struct EvalReport {
  double alpha = 0.0;
  std::string convention;
  std::string mode;
  RateSummary overall;
  std::map<std::string, RateSummary> groups;
  std::size_t fallback_docs = 0;
  std::optional<std::vector<double>> mse_per_scorer;
  std::optional<std::vector<std::vector<double>>> jaccard;
};

bool is_covered(const FilterResult& r);

double coverage(std::span<const FilterResult> results);
double retention(std::span<const FilterResult> results);

RateSummary summarize(std::span<const FilterResult> results);

/// Mean squared deviation between estimated and oracle scores.
double mse_vs_oracle(std::span<const double> scores, std::span<const double> oracle);

/// Per-scorer MSE over every claim carrying an oracle score.
std::vector<double> mse_per_scorer(std::span<const Document> docs);

double jaccard_distance(const std::set<std::size_t>& a, const std::set<std::size_t>& b);

/// Pairwise Jaccard distances between scorers' false-claim detections
/// (score < flag_threshold), restricted to ground-truth false claims.
std::vector<std::vector<double>> jaccard_matrix(std::span<const Document> docs,
                                                double flag_threshold = 0.5);

FilterResult make_result(const Document& doc, std::vector<std::size_t> retained);

/// Coverage/retention overall and per group for filtered labeled documents.
/// `outcomes` aligns with `docs`.
EvalReport evaluate(std::span<const Document> docs, std::span<const FilterOutcome> outcomes,
                    const CalibrationModel& model);

}  // namespace maci
