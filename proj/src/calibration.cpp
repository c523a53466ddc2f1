#include "maci/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maci/ensemble.hpp"

namespace maci {
namespace {

std::uint64_t fnv1a(std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  // Guard against (1 - alpha)(n + 1) landing a hair above an integer.
  const double raw = (1.0 - alpha) * static_cast<double>(n + 1);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
}

const std::vector<double>& resolve_weights(const std::vector<double>* w,
                                           const std::vector<double>& fallback, std::size_t m,
                                           const std::string& what) {
  const std::vector<double>& chosen = w ? *w : fallback;
  if (chosen.size() != m) {
    throw ValidationError(what + " weights have length " + std::to_string(chosen.size()) +
                          ", expected " + std::to_string(m));
  }
  check_simplex(chosen);
  return chosen;
}

double quantile_for(std::span<const double> scores, std::span<const double> weights, bool weighted,
                    double alpha) {
  return weighted ? weighted_conformal_quantile(scores, weights, alpha)
                  : conformal_quantile(scores, alpha);
}

}  // namespace

const std::vector<double>* WeightTable::find(const std::string& group) const {
  const auto it = per_group.find(group);
  return it == per_group.end() ? nullptr : &it->second;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double randomization_draw(std::uint64_t seed, std::string_view key, std::uint64_t salt) {
  const std::uint64_t bits = mix_seed(mix_seed(seed, fnv1a(key)), salt);
  // Midpoint of a 2^-53 grid cell: never 0, never 1.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double conformity_score(const PrefixAggregate& agg, const std::vector<bool>& labels, double u) {
  if (labels.size() != agg.size()) throw ValidationError("label count differs from claim count");
  if (!(u >= 0.0 && u < 1.0)) throw ValidationError("randomization draw must lie in [0,1)");

  std::size_t first_false = agg.size();  // 0-based rank of the first false claim
  for (std::size_t r = 0; r < agg.size(); ++r) {
    if (!labels[agg.order[r]]) {
      first_false = r;
      break;
    }
  }
  if (first_false == agg.size()) return 0.0;

  // Covered iff at most `first_false` claims are retained.
  const double upper = agg.values[first_false];
  const double lower = agg.values[first_false + 1];
  const double just_above_lower = std::min(1.0, std::nextafter(lower, 2.0));
  if (!agg.randomized || !(upper > lower)) return just_above_lower;
  return std::min(1.0, std::max(boundary_level(upper, lower, u), just_above_lower));
}

double conformity_score(const Document& doc, std::span<const double> combined, double u,
                        const ConformityConvention& conv) {
  if (combined.size() != doc.claims.size()) {
    throw ValidationError("combined score length differs from claim count");
  }
  std::vector<bool> labels(doc.claims.size());
  for (std::size_t j = 0; j < doc.claims.size(); ++j) {
    if (!doc.claims[j].label) {
      throw ValidationError("document '" + doc.id + "': conformity score needs labels");
    }
    labels[j] = *doc.claims[j].label;
  }
  return conformity_score(prefix_aggregate(combined, conv), labels, u);
}

bool conformal_rank_exceeds(std::size_t n, double alpha) {
  check_alpha(alpha);
  return conformal_rank(n, alpha) > n;
}

double conformal_quantile(std::span<const double> values, double alpha) {
  check_alpha(alpha);
  if (values.empty()) throw ValidationError("conformal quantile of an empty list");
  const std::size_t k = conformal_rank(values.size(), alpha);
  if (k > values.size()) return 1.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return sorted[k - 1];
}

double weighted_conformal_quantile(std::span<const double> scores, std::span<const double> weights,
                                   double alpha) {
  check_alpha(alpha);
  if (scores.size() != weights.size()) {
    throw ValidationError("weighted quantile: scores and weights differ in length");
  }
  if (scores.empty()) throw ValidationError("weighted quantile of an empty list");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("weighted quantile: all weights are zero");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Tail mass above candidate q = total minus the mass at or below q.
  double at_or_below = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    const double q = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == q) at_or_below += weights[idx[i++]];
    if ((total - at_or_below) / total <= alpha + 1e-12) return std::min(q, 1.0);
  }
  return 1.0;
}

CalibrationResult calibrate(std::span<const Document> docs, const CalibrationOptions& options) {
  check_alpha(options.alpha);
  options.convention.validate();
  const CorpusStats stats = validate_corpus(docs, /*require_labels=*/true);
  const std::size_t m = stats.num_scorers;
  const bool weighted = options.importance_weights.has_value();
  if (weighted && options.importance_weights->size() != docs.size()) {
    throw ValidationError("importance weights must align with calibration documents");
  }

  CalibrationResult result;
  CalibrationModel& model = result.model;
  model.alpha = options.alpha;
  model.convention = options.convention;
  model.mode = options.mode;
  model.num_scorers = m;
  model.seed = options.seed;
  model.delta = options.delta;
  const std::vector<double> uniform = uniform_weights(m);
  model.global_weights = options.weights.global.empty()
                             ? uniform
                             : resolve_weights(&options.weights.global, uniform, m, "global");

  std::map<std::string, std::vector<double>> group_weights;
  if (options.mode == CalibrationMode::group) {
    for (const auto& [name, _] : stats.group_counts) {
      group_weights[name] =
          resolve_weights(options.weights.find(name), model.global_weights, m, "group '" + name + "'");
    }
  }

  result.records.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const Document& doc = docs[i];
    const auto& w = options.mode == CalibrationMode::group ? group_weights.at(doc.group)
                                                           : model.global_weights;
    const auto combined = ensemble_scores(doc, w);
    const double u = randomization_draw(options.seed, doc.id, i + 1);
    result.records.push_back({doc.id, doc.group, conformity_score(doc, combined, u, options.convention), u});
  }

  // The marginal threshold serves documents filtered with the global weights
  // (marginal mode, or unseen groups in group mode), so it is calibrated on
  // scores computed with those weights.
  std::vector<double> all_scores;
  all_scores.reserve(result.records.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const bool same = options.mode == CalibrationMode::marginal ||
                      group_weights.at(docs[i].group) == model.global_weights;
    all_scores.push_back(same ? result.records[i].score
                              : conformity_score(docs[i], ensemble_scores(docs[i], model.global_weights),
                                                 result.records[i].u, options.convention));
  }
  const std::vector<double> no_weights;
  const std::span<const double> all_weights =
      weighted ? std::span<const double>(*options.importance_weights) : std::span<const double>(no_weights);

  model.marginal_count = docs.size();
  model.marginal_threshold = quantile_for(all_scores, all_weights, weighted, options.alpha);
  model.marginal_degenerate = !weighted && conformal_rank_exceeds(docs.size(), options.alpha);
  if (model.marginal_degenerate) {
    result.warnings.push_back("marginal calibration: rank exceeds n=" + std::to_string(docs.size()) +
                              "; threshold forced to 1");
  }

  if (options.mode == CalibrationMode::group) {
    for (const auto& [name, count] : stats.group_counts) {
      std::vector<double> scores, w;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        if (docs[i].group != name) continue;
        scores.push_back(result.records[i].score);
        if (weighted) w.push_back((*options.importance_weights)[i]);
      }
      GroupCalibration g;
      g.weights = group_weights.at(name);
      g.count = count;
      g.threshold = quantile_for(scores, w, weighted, options.alpha);
      g.degenerate = !weighted && conformal_rank_exceeds(count, options.alpha);
      if (g.degenerate) {
        result.warnings.push_back("group '" + name + "': rank exceeds n=" + std::to_string(count) +
                                  "; threshold forced to 1 (nothing retained)");
      }
      model.groups.emplace(name, std::move(g));
    }
  }
  model.validate();
  return result;
}

FilterOutcome filter_with_model(const CalibrationModel& model, const Document& doc, double u) {
  FilterOutcome out;
  const std::vector<double>* weights = &model.global_weights;
  out.threshold = model.marginal_threshold;
  if (model.mode == CalibrationMode::group) {
    const auto it = model.groups.find(doc.group);
    if (it != model.groups.end()) {
      weights = &it->second.weights;
      out.threshold = it->second.threshold;
      out.group_used = doc.group;
    } else {
      out.fallback = true;
    }
  }
  for (const auto& c : doc.claims) {
    if (c.scores.size() != model.num_scorers) {
      throw ValidationError("document '" + doc.id + "': model expects M=" +
                            std::to_string(model.num_scorers) + " scores per claim, got M=" +
                            std::to_string(c.scores.size()));
    }
  }
  const auto combined = ensemble_scores(doc, *weights);
  out.retained = apply_multiplicative_filter(combined, out.threshold, u, model.convention);
  return out;
}

FilterOutcome filter_document(const CalibrationModel& model, const Document& doc,
                              std::uint64_t seed) {
  return filter_with_model(model, doc, randomization_draw(seed, doc.id, 0));
}

}  // namespace maci
