#pragma once

// Covariate-shift correction: a logistic source-vs-target classifier on
// label-free document features gives odds that estimate the density ratio,
// and the calibration corpus is importance-resampled by those ratios.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maci/core.hpp"

namespace maci {

struct FeatureVector {
  double mean_score = 0.0;
  double std_score = 0.0;
  double prompt_len = 0.0;
  double response_len = 0.0;
  double bias = 1.0;

  std::array<double, 5> as_array() const {
    return {mean_score, std_score, prompt_len, response_len, bias};
  }
};

struct RatioFitConfig {
  std::size_t iters = 500;
  double step = 0.1;
  double clip_low = 0.01;
  double clip_high = 100.0;
};

struct RatioModel {
  std::array<double, 5> coefficients{};     // last entry multiplies the bias
  std::array<double, 4> feature_mean{};     // standardization of the non-bias features
  std::array<double, 4> feature_scale{1.0, 1.0, 1.0, 1.0};
  double clip_low = 0.01;
  double clip_high = 100.0;

  /// Clipped odds p(target | x) / p(source | x).
  double ratio(const FeatureVector& x) const;
  std::vector<double> ratios(std::span<const Document> docs) const;
  void validate() const;
};

/// Per-claim score = mean over scorers; then mean and population std over
/// claims. Missing lengths become 0.
FeatureVector extract_features(const Document& doc);

/// Class-balanced logistic regression by full-batch gradient descent
/// (label 0 = source, 1 = target) on standardized features.
RatioModel fit_density_ratio(std::span<const Document> source, std::span<const Document> target,
                             const RatioFitConfig& config = {});

/// n indices drawn with replacement, P(i) proportional to ratios[i].
std::vector<std::size_t> resample_indices(std::span<const double> ratios, std::size_t n,
                                          std::uint64_t seed);

/// Resampled corpus of the same size as `docs`.
std::vector<Document> resample_calibration(std::span<const Document> docs,
                                           std::span<const double> ratios, std::uint64_t seed);

}  // namespace maci
