#include "maci/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace maci {
namespace {

void check_scores(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("filter needs at least one claim");
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("score out of range [0,1]");
  }
}

void check_tau(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ValidationError("threshold " + std::to_string(tau) + " outside [0,1]");
  }
}

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<std::size_t> leading(const PrefixAggregate& agg, std::size_t count) {
  std::vector<std::size_t> out(agg.order.begin(), agg.order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

PrefixAggregate prefix_aggregate(std::span<const double> scores, const ConformityConvention& conv) {
  check_scores(scores);
  conv.validate();
  const std::size_t n = scores.size();
  const double eps = conv.epsilon;

  PrefixAggregate agg;
  agg.order = descending_order(scores);
  agg.randomized = conv.randomized();
  agg.values.assign(n + 2, 0.0);
  agg.values[0] = 1.0;

  auto clamped = [&](std::size_t rank) { return std::clamp(scores[agg.order[rank]], eps, 1.0 - eps); };

  switch (conv.variant) {
    case Variant::product: {
      // Budget form: -log Pi_k = sum of -log p. Exponentiated back to [0,1].
      double budget = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        budget += -std::log(clamped(k));
        agg.values[k + 1] = std::exp(-budget);
      }
      break;
    }
    case Variant::log_sum: {
      const double log_eps = std::log(eps);
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        sum += clamped(k);
        const double mean = std::max(sum / static_cast<double>(k + 1), eps);
        agg.values[k + 1] = std::clamp(1.0 - std::log(mean) / log_eps, 0.0, 1.0);
      }
      break;
    }
    case Variant::power_mean: {
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        sum += std::pow(clamped(k), conv.lambda);
        agg.values[k + 1] = std::pow(sum / static_cast<double>(k + 1), 1.0 / conv.lambda);
      }
      break;
    }
    case Variant::worst_case:
      for (std::size_t k = 0; k < n; ++k) agg.values[k + 1] = scores[agg.order[k]];
      break;
  }
  // Rounding in running means can nudge a tied prefix upward by an ulp.
  for (std::size_t k = 1; k <= n; ++k) agg.values[k] = std::min(agg.values[k], agg.values[k - 1]);
  agg.values[n + 1] = 0.0;
  return agg;
}

Cutoff cutoff_and_gamma(const PrefixAggregate& agg, double tau) {
  check_tau(tau);
  const std::size_t n = agg.size();
  std::size_t k = 0;
  while (k < n && agg.values[k + 1] >= tau) ++k;

  Cutoff cut{k, 0.0};
  if (!agg.randomized || k == n) return cut;
  const double upper = agg.values[k];
  const double lower = agg.values[k + 1];
  const double gap = upper - lower;
  if (gap > 0.0) cut.gamma = std::clamp((upper - tau) / gap, 0.0, 1.0);
  return cut;
}

std::size_t retained_count(const PrefixAggregate& agg, double tau, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw ValidationError("randomization draw must lie in [0,1)");
  const Cutoff cut = cutoff_and_gamma(agg, tau);
  const std::size_t k = cut.k_star;
  if (!agg.randomized || k == agg.size()) return k;
  const double upper = agg.values[k];
  const double lower = agg.values[k + 1];
  return tau < boundary_level(upper, lower, u) ? k + 1 : k;
}

std::vector<std::size_t> apply_multiplicative_filter(std::span<const double> scores, double tau,
                                                     double u, const ConformityConvention& conv) {
  const PrefixAggregate agg = prefix_aggregate(scores, conv);
  return leading(agg, retained_count(agg, tau, u));
}

std::vector<std::size_t> apply_threshold_filter(std::span<const double> scores, double tau) {
  check_tau(tau);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] >= tau) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> complement_budget_filter(std::span<const double> scores, double budget,
                                                  double epsilon) {
  check_scores(scores);
  if (!(budget >= 0.0)) throw ValidationError("budget must be nonnegative");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<std::size_t> out;
  double spent = 0.0;
  for (std::size_t idx : order) {
    spent += -std::log(1.0 - scores[idx] + epsilon);
    if (spent > budget) break;
    out.push_back(idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace maci
