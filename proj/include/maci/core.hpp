#pragma once

// Domain types shared by every stage of the filtering pipeline: claims,
// documents, the conformity convention, and the frozen calibration model.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace maci {

/// Raised for any malformed input: out-of-range scores, missing labels,
/// inconsistent scorer counts, bad configuration values.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Claim {
  std::size_t index = 0;
  std::optional<bool> label;  // true = factual claim
  std::vector<double> scores;  // one per base scorer, each in [0,1]
  std::optional<double> oracle_score;
};

struct Document {
  std::string id;
  std::string group;
  std::optional<std::int64_t> prompt_len;
  std::optional<std::int64_t> response_len;
  std::vector<Claim> claims;

  std::size_t size() const { return claims.size(); }
  bool fully_labeled() const;
  /// Positions of factual claims; throws if any label is absent.
  std::vector<std::size_t> true_claims() const;
};

using Corpus = std::vector<Document>;

enum class Variant { product, log_sum, power_mean, worst_case };

struct ConformityConvention {
  static constexpr double kDefaultEpsilon = 1e-12;

  Variant variant = Variant::product;
  double lambda = 1.0;  // power_mean exponent only
  double epsilon = kDefaultEpsilon;

  static ConformityConvention product(double eps = kDefaultEpsilon) {
    return {Variant::product, 1.0, eps};
  }
  static ConformityConvention log_sum(double eps = kDefaultEpsilon) {
    return {Variant::log_sum, 1.0, eps};
  }
  static ConformityConvention power_mean(double lambda, double eps = kDefaultEpsilon) {
    return {Variant::power_mean, lambda, eps};
  }
  static ConformityConvention worst_case(double eps = kDefaultEpsilon) {
    return {Variant::worst_case, 1.0, eps};
  }

  /// Only the worst-case (single extremal claim) convention skips boundary
  /// randomization.
  bool randomized() const { return variant != Variant::worst_case; }

  void validate() const;
  /// "product", "log-sum", "power-mean:<lambda>", "worst-case".
  std::string tag() const;
  static ConformityConvention parse(const std::string& text, double eps = kDefaultEpsilon);

  bool operator==(const ConformityConvention&) const = default;
};

enum class CalibrationMode { marginal, group };

std::string to_string(CalibrationMode mode);
CalibrationMode parse_mode(const std::string& text);

struct GroupCalibration {
  std::vector<double> weights;
  double threshold = 1.0;
  std::size_t count = 0;
  bool degenerate = false;  // rank exceeded the group size, threshold forced to 1
};

struct CalibrationModel {
  double alpha = 0.1;
  ConformityConvention convention;
  CalibrationMode mode = CalibrationMode::marginal;
  std::size_t num_scorers = 0;
  std::vector<double> global_weights;
  double marginal_threshold = 1.0;
  std::size_t marginal_count = 0;
  bool marginal_degenerate = false;
  std::map<std::string, GroupCalibration> groups;  // empty in marginal mode
  std::uint64_t seed = 0;
  std::optional<double> delta;

  void validate() const;
  /// Every threshold that filtering could apply equals 1 (nothing retained).
  bool fully_degenerate() const;
};

struct CorpusStats {
  std::size_t n_docs = 0;
  std::size_t n_claims = 0;
  std::size_t num_scorers = 0;
  std::map<std::string, std::size_t> group_counts;
  std::size_t labeled_claims = 0;
  std::size_t true_claims = 0;
  std::optional<double> rho;  // true-claim prevalence over labeled claims
};

CorpusStats validate_corpus(std::span<const Document> docs, bool require_labels);

/// Throws unless weights are nonnegative and sum to one within 1e-9.
void check_simplex(std::span<const double> weights);
std::vector<double> uniform_weights(std::size_t m);

}  // namespace maci
