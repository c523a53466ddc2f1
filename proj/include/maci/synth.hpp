#pragma once

// Synthetic oracle corpora and Monte-Carlo harnesses. Labels are independent
// Bernoulli draws from a known oracle score, so every coverage and retention
// statement can be checked against ground truth.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "maci/calibration.hpp"
#include "maci/core.hpp"
#include "maci/ensemble.hpp"
#include "maci/metrics.hpp"

namespace maci::synth {

struct GroupSpec {
  std::string name;
  double proportion = 1.0;
  double beta_a = 2.0;  // oracle score p* ~ Beta(a, b)
  double beta_b = 2.0;
};

struct SplitFractions {
  double opt = 0.4;
  double cal = 0.4;
  double test = 0.2;
};

struct SimConfig {
  std::size_t n_docs = 1000;
  std::size_t min_claims = 3;
  std::size_t max_claims = 10;
  std::vector<GroupSpec> groups{{"all", 1.0, 2.0, 2.0}};
  std::vector<double> scorer_noise{0.0};  // Gaussian sigma per scorer
  std::uint64_t seed = 0;
  std::vector<double> alphas{0.1};
  std::size_t trials = 30;
  double epsilon = ConformityConvention::kDefaultEpsilon;
  SplitFractions split;
  bool stratified = false;  // exact group counts and per-group partitioning
  double delta = 0.1;
  std::size_t budget = 512;
  std::size_t polish_steps = 3;

  void validate() const;
};

Corpus generate_corpus(const SimConfig& config);
Corpus generate_corpus(const SimConfig& config, std::uint64_t seed);

struct Partitions {
  Corpus opt;
  Corpus cal;
  Corpus test;
};

Partitions partition_corpus(const Corpus& corpus, const SimConfig& config);

struct PipelineOptions {
  double alpha = 0.1;
  CalibrationMode mode = CalibrationMode::group;
  ConformityConvention convention;
  bool use_ensemble = false;
  WeightSearchConfig search;
  std::uint64_t seed = 0;
};

struct PipelineRun {
  CalibrationModel model;
  EvalReport report;
  std::vector<std::string> warnings;
};

/// Weight optimization on `opt` (when enabled), calibration on `cal`,
/// filtering and evaluation on `test`.
WeightTable fit_weights(std::span<const Document> opt, const PipelineOptions& options,
                        std::size_t num_scorers);
PipelineRun run_pipeline(const Partitions& parts, const PipelineOptions& options);

struct TrialStats {
  std::size_t trials = 0;
  double mean_coverage = 0.0;
  double sd_coverage = 0.0;
  double se_coverage = 0.0;
  double mean_retention = 0.0;
  double sd_retention = 0.0;
  double se_retention = 0.0;
  std::size_t degenerate_trials = 0;
};

struct ExperimentReport {
  double alpha = 0.0;
  std::string mode;
  std::string convention;
  bool use_ensemble = false;
  std::size_t trials = 0;
  TrialStats overall;
  std::map<std::string, TrialStats> groups;
};

/// Repeated fresh-corpus trials of the full pipeline. Each trial uses seed
/// mix_seed(config.seed, trial), so results do not depend on trial order.
ExperimentReport coverage_experiment(const SimConfig& config, double alpha, CalibrationMode mode,
                                     const ConformityConvention& convention, bool use_ensemble);

/// sup_t |F_n(t) - t| against Unif[0,1].
double ks_statistic(std::span<const double> values);

/// Pearson chi-square statistic of observed counts against expected counts.
double chi_square_statistic(std::span<const double> observed, std::span<const double> expected);

struct GapRow {
  double sigma = 0.0;
  double mse = 0.0;
  double retention_estimated = 0.0;
  double retention_oracle = 0.0;
  double gap = 0.0;
};

/// For each noise level in config.scorer_noise, single-scorer corpora over
/// config.trials seeds; claim-wise threshold retention of the noisy and the
/// oracle score at tau. Seeds are shared across levels.
std::vector<GapRow> retention_gap_sweep(const SimConfig& config, double tau);

struct ShiftReport {
  std::size_t trials = 0;
  double mean_deviation_plain = 0.0;  // mean over trials of mean_g |cov_g - (1 - alpha)|
  double mean_deviation_dre = 0.0;
  std::vector<double> deviation_plain;
  std::vector<double> deviation_dre;
  std::map<std::string, double> coverage_plain;  // mean over trials
  std::map<std::string, double> coverage_dre;
};

/// Calibration pool favours high mean-score documents, test pool low ones:
/// a document joins the calibration pool with probability
/// sigmoid(strength * (s - median(s)) / sd(s)). Compares group-mode MACI on
/// the raw calibration pool with MACI on the density-ratio resampled pool.
ShiftReport shift_experiment(const SimConfig& config, double alpha, double strength,
                             const ConformityConvention& convention = {});

}  // namespace maci::synth
