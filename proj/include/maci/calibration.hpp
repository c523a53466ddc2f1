#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maci/core.hpp"
#include "maci/filter.hpp"

namespace maci {

struct ConformityRecord {
  std::string doc_id;
  std::string group;
  double score = 0.0;  // E in [0,1]
  double u = 0.0;
};

/// Per-group and global ensemble weights fed to calibration. Missing groups
/// and an empty global vector fall back to uniform weights.
struct WeightTable {
  std::vector<double> global;
  std::map<std::string, std::vector<double>> per_group;

  const std::vector<double>* find(const std::string& group) const;
};

struct CalibrationOptions {
  double alpha = 0.1;
  ConformityConvention convention;
  CalibrationMode mode = CalibrationMode::marginal;
  WeightTable weights;
  std::uint64_t seed = 0;
  std::optional<double> delta;
  /// Optional per-document importance weights; switches the quantile to the
  /// weighted form instead of the rank rule.
  std::optional<std::vector<double>> importance_weights;
};

struct CalibrationResult {
  CalibrationModel model;
  std::vector<ConformityRecord> records;
  std::vector<std::string> warnings;
};

struct FilterOutcome {
  std::vector<std::size_t> retained;  // ascending claim positions
  double threshold = 1.0;
  std::string group_used;  // empty when the marginal threshold applied
  bool fallback = false;   // document's group unknown to a group-mode model
};

/// Deterministic draw in (0,1) from (seed, key, salt). Key is normally the
/// document id; salt separates calibration draws (position + 1) from
/// filtering draws (0).
double randomization_draw(std::uint64_t seed, std::string_view key, std::uint64_t salt = 0);

/// SplitMix64 finalizer, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

/// Smallest threshold at which the filtered set holds only true claims.
double conformity_score(const Document& doc, std::span<const double> combined, double u,
                        const ConformityConvention& conv);

/// Same, from a precomputed aggregate and the claim labels in input order.
double conformity_score(const PrefixAggregate& agg, const std::vector<bool>& labels, double u);

/// The ceil((1 - alpha)(n + 1))-th order statistic, or 1 when that rank
/// exceeds n.
double conformal_quantile(std::span<const double> values, double alpha);

/// True when the rank rule runs past the sample, i.e. the quantile is forced to 1.
bool conformal_rank_exceeds(std::size_t n, double alpha);

/// inf{q : sum w_i 1{S_i > q} / sum w_i <= alpha} over observed scores and 1.
double weighted_conformal_quantile(std::span<const double> scores, std::span<const double> weights,
                                   double alpha);

CalibrationResult calibrate(std::span<const Document> docs, const CalibrationOptions& options);

/// Filter one document with a frozen model, using the draw `u`.
FilterOutcome filter_with_model(const CalibrationModel& model, const Document& doc, double u);

/// Filter with the draw derived from (seed, document id), so results do not
/// depend on document order.
FilterOutcome filter_document(const CalibrationModel& model, const Document& doc,
                              std::uint64_t seed);

}  // namespace maci
