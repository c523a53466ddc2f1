#include "maci/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "maci/filter.hpp"

namespace maci {
namespace {

constexpr double kTieTolerance = 1e-12;

double distance_to_uniform(std::span<const double> w) {
  const double u = 1.0 / static_cast<double>(w.size());
  double d = 0.0;
  for (double x : w) d += (x - u) * (x - u);
  return d;
}

// True when `a` is preferred over `b`.
bool better(const WeightEvaluation& a, const WeightEvaluation& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (std::fabs(a.mean_fpr - b.mean_fpr) > kTieTolerance) return a.mean_fpr < b.mean_fpr;
  if (std::fabs(a.mean_tpr - b.mean_tpr) > kTieTolerance) return a.mean_tpr > b.mean_tpr;
  const double da = distance_to_uniform(a.weights);
  const double db = distance_to_uniform(b.weights);
  if (std::fabs(da - db) > kTieTolerance) return da < db;
  return std::lexicographical_compare(a.weights.begin(), a.weights.end(), b.weights.begin(),
                                      b.weights.end());
}

std::vector<double> normalized(std::vector<double> w) {
  double sum = 0.0;
  for (double& x : w) {
    x = std::max(x, 0.0);
    sum += x;
  }
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace

void WeightSearchConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0,1)");
  if (budget < 1) throw ValidationError("weight search budget must be at least 1");
}

double ensemble_score(std::span<const double> scorer_scores, std::span<const double> weights) {
  if (scorer_scores.size() != weights.size()) {
    throw ValidationError("scorer count " + std::to_string(scorer_scores.size()) +
                          " does not match weight length " + std::to_string(weights.size()));
  }
  double s = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m) s += weights[m] * scorer_scores[m];
  return std::clamp(s, 0.0, 1.0);
}

std::vector<double> ensemble_scores(const Document& doc, std::span<const double> weights) {
  check_simplex(weights);
  std::vector<double> out;
  out.reserve(doc.claims.size());
  for (const auto& c : doc.claims) out.push_back(ensemble_score(c.scores, weights));
  return out;
}

std::vector<double> ensemble_scores(std::span<const std::vector<double>> score_rows,
                                    std::span<const double> weights) {
  check_simplex(weights);
  std::vector<double> out;
  out.reserve(score_rows.size());
  for (const auto& row : score_rows) out.push_back(ensemble_score(row, weights));
  return out;
}

double delta_threshold(std::span<const Document> docs, std::span<const double> weights, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("delta must lie in (0,1]");
  std::vector<double> true_scores;
  for (const auto& doc : docs) {
    const auto combined = ensemble_scores(doc, weights);
    for (std::size_t j = 0; j < doc.claims.size(); ++j) {
      const auto& label = doc.claims[j].label;
      if (!label) throw ValidationError("document '" + doc.id + "': missing label");
      if (*label) true_scores.push_back(combined[j]);
    }
  }
  if (true_scores.empty()) throw ValidationError("delta threshold needs at least one true claim");
  std::sort(true_scores.begin(), true_scores.end());
  const double n1 = static_cast<double>(true_scores.size());
  // Smallest rank k with k / N1 >= delta.
  auto k = static_cast<std::size_t>(std::ceil(delta * n1 - 1e-9));
  k = std::clamp<std::size_t>(k, 1, true_scores.size());
  return true_scores[k - 1];
}

DocRates doc_rates(const Document& doc, std::span<const double> combined, double tau) {
  if (combined.size() != doc.claims.size()) {
    throw ValidationError("combined score length differs from claim count");
  }
  std::size_t n_true = 0, n_false = 0, kept_true = 0, kept_false = 0;
  for (std::size_t j = 0; j < doc.claims.size(); ++j) {
    const auto& label = doc.claims[j].label;
    if (!label) throw ValidationError("document '" + doc.id + "': missing label");
    const bool kept = combined[j] >= tau;
    if (*label) {
      ++n_true;
      kept_true += kept;
    } else {
      ++n_false;
      kept_false += kept;
    }
  }
  return {static_cast<double>(kept_true) / static_cast<double>(std::max<std::size_t>(1, n_true)),
          static_cast<double>(kept_false) / static_cast<double>(std::max<std::size_t>(1, n_false))};
}

WeightEvaluation evaluate_weights(std::span<const Document> docs, std::span<const double> weights,
                                  double delta) {
  WeightEvaluation ev;
  ev.weights.assign(weights.begin(), weights.end());
  ev.tau = delta_threshold(docs, weights, delta);
  double tpr = 0.0, fpr = 0.0;
  std::size_t n_true = 0, kept_true = 0;
  for (const auto& doc : docs) {
    const auto combined = ensemble_scores(doc, weights);
    const DocRates r = doc_rates(doc, combined, ev.tau);
    tpr += r.tpr;
    fpr += r.fpr;
    for (std::size_t j = 0; j < combined.size(); ++j) {
      if (*doc.claims[j].label) {
        ++n_true;
        kept_true += combined[j] >= ev.tau;
      }
    }
  }
  const double n = static_cast<double>(docs.size());
  ev.mean_tpr = tpr / n;
  ev.mean_fpr = fpr / n;
  ev.pooled_tpr = static_cast<double>(kept_true) / static_cast<double>(n_true);
  ev.feasible = ev.pooled_tpr >= 1.0 - delta - 1e-12;
  return ev;
}

WeightSearchResult optimize_weights(std::span<const Document> docs, const WeightSearchConfig& config) {
  config.validate();
  if (docs.empty()) throw ValidationError("weight search needs a nonempty group");
  const std::size_t m = docs.front().claims.front().scores.size();

  std::vector<std::vector<double>> candidates;
  candidates.reserve(m + 1 + config.budget);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> vertex(m, 0.0);
    vertex[i] = 1.0;
    candidates.push_back(std::move(vertex));
  }
  candidates.push_back(uniform_weights(m));
  std::mt19937_64 rng(config.seed);
  std::exponential_distribution<double> unit_exp(1.0);  // Dirichlet(1) via normalized Exp(1)
  for (std::size_t b = 0; b < config.budget; ++b) {
    std::vector<double> w(m);
    for (double& x : w) x = unit_exp(rng);
    candidates.push_back(normalized(std::move(w)));
  }

  std::vector<WeightEvaluation> evals;
  evals.reserve(candidates.size());
  for (const auto& w : candidates) evals.push_back(evaluate_weights(docs, w, config.delta));
  std::size_t evaluated = evals.size();

  const auto best_it = std::min_element(evals.begin(), evals.end(),
                                        [](const auto& a, const auto& b) { return better(a, b); });
  WeightEvaluation best = *best_it;

  if (!best.feasible) {
    const auto uniform = evaluate_weights(docs, uniform_weights(m), config.delta);
    return {uniform.weights, uniform.tau, uniform.mean_tpr, uniform.mean_fpr, uniform.pooled_tpr, false, evaluated};
  }

  double step = 0.25;
  for (std::size_t round = 0; round < config.polish_steps && m > 1; ++round, step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t to = 0; to < m; ++to) {
        for (std::size_t from = 0; from < m; ++from) {
          if (to == from || best.weights[from] <= 0.0) continue;
          std::vector<double> w = best.weights;
          const double moved = std::min(step, w[from]);
          w[from] -= moved;
          w[to] += moved;
          auto ev = evaluate_weights(docs, normalized(std::move(w)), config.delta);
          ++evaluated;
          if (ev.feasible && better(ev, best) &&
              ev.mean_fpr < best.mean_fpr - kTieTolerance) {
            best = std::move(ev);
            improved = true;
          }
        }
      }
    }
  }
  return {best.weights, best.tau, best.mean_tpr, best.mean_fpr, best.pooled_tpr, true, evaluated};
}

}  // namespace maci
