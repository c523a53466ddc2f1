#include "maci/metrics.hpp"

#include <algorithm>

namespace maci {

bool is_covered(const FilterResult& r) {
  return std::includes(r.true_set.begin(), r.true_set.end(), r.retained.begin(), r.retained.end());
}

double coverage(std::span<const FilterResult> results) {
  if (results.empty()) throw ValidationError("coverage of an empty result list");
  std::size_t covered = 0;
  for (const auto& r : results) covered += is_covered(r);
  return static_cast<double>(covered) / static_cast<double>(results.size());
}

double retention(std::span<const FilterResult> results) {
  if (results.empty()) throw ValidationError("retention of an empty result list");
  double sum = 0.0;
  for (const auto& r : results) {
    if (r.n_claims == 0) throw ValidationError("retention needs documents with claims");
    sum += static_cast<double>(r.retained.size()) / static_cast<double>(r.n_claims);
  }
  return sum / static_cast<double>(results.size());
}

RateSummary summarize(std::span<const FilterResult> results) {
  RateSummary s;
  if (results.empty()) return s;
  s.n_docs = results.size();
  s.coverage = coverage(results);
  s.retention = retention(results);
  std::size_t n_true = 0, kept = 0, kept_true = 0;
  for (const auto& r : results) {
    s.n_claims += r.n_claims;
    n_true += r.true_set.size();
    kept += r.retained.size();
    for (std::size_t j : r.retained) {
      kept_true += std::binary_search(r.true_set.begin(), r.true_set.end(), j);
    }
  }
  const std::size_t n_false = s.n_claims - n_true;
  const std::size_t kept_false = kept - kept_true;
  s.claim_retention = static_cast<double>(kept) / static_cast<double>(s.n_claims);
  s.rho = static_cast<double>(n_true) / static_cast<double>(s.n_claims);
  s.tpr = n_true ? static_cast<double>(kept_true) / static_cast<double>(n_true) : 0.0;
  s.fpr = n_false ? static_cast<double>(kept_false) / static_cast<double>(n_false) : 0.0;
  return s;
}

double mse_vs_oracle(std::span<const double> scores, std::span<const double> oracle) {
  if (scores.size() != oracle.size()) throw ValidationError("mse: length mismatch");
  if (scores.empty()) throw ValidationError("mse of an empty list");
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double d = scores[i] - oracle[i];
    sum += d * d;
  }
  return sum / static_cast<double>(scores.size());
}

std::vector<double> mse_per_scorer(std::span<const Document> docs) {
  std::vector<std::vector<double>> est;
  std::vector<double> oracle;
  for (const auto& doc : docs) {
    for (const auto& c : doc.claims) {
      if (!c.oracle_score) throw ValidationError("document '" + doc.id + "': missing oracle score");
      if (est.empty()) est.resize(c.scores.size());
      for (std::size_t m = 0; m < c.scores.size(); ++m) est[m].push_back(c.scores[m]);
      oracle.push_back(*c.oracle_score);
    }
  }
  std::vector<double> out;
  for (const auto& column : est) out.push_back(mse_vs_oracle(column, oracle));
  return out;
}

double jaccard_distance(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (std::size_t x : a) inter += b.count(x);
  const std::size_t uni = a.size() + b.size() - inter;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::vector<double>> jaccard_matrix(std::span<const Document> docs, double flag_threshold) {
  std::vector<std::set<std::size_t>> flagged;
  std::size_t claim_id = 0;
  for (const auto& doc : docs) {
    for (const auto& c : doc.claims) {
      if (flagged.empty()) flagged.resize(c.scores.size());
      if (c.label && !*c.label) {
        for (std::size_t m = 0; m < c.scores.size(); ++m) {
          if (c.scores[m] < flag_threshold) flagged[m].insert(claim_id);
        }
      }
      ++claim_id;
    }
  }
  std::vector<std::vector<double>> out(flagged.size(), std::vector<double>(flagged.size(), 0.0));
  for (std::size_t a = 0; a < flagged.size(); ++a) {
    for (std::size_t b = 0; b < flagged.size(); ++b) out[a][b] = jaccard_distance(flagged[a], flagged[b]);
  }
  return out;
}

FilterResult make_result(const Document& doc, std::vector<std::size_t> retained) {
  std::sort(retained.begin(), retained.end());
  return {std::move(retained), doc.true_claims(), doc.claims.size()};
}

EvalReport evaluate(std::span<const Document> docs, std::span<const FilterOutcome> outcomes,
                    const CalibrationModel& model) {
  if (docs.size() != outcomes.size()) throw ValidationError("evaluate: outcome count mismatch");
  if (docs.empty()) throw ValidationError("evaluate: empty corpus");
  EvalReport report;
  report.alpha = model.alpha;
  report.convention = model.convention.tag();
  report.mode = to_string(model.mode);

  std::vector<FilterResult> all;
  std::map<std::string, std::vector<FilterResult>> by_group;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    FilterResult r = make_result(docs[i], outcomes[i].retained);
    by_group[docs[i].group].push_back(r);
    all.push_back(std::move(r));
    report.fallback_docs += outcomes[i].fallback;
  }
  report.overall = summarize(all);
  for (const auto& [name, results] : by_group) report.groups[name] = summarize(results);

  const bool has_oracle = std::all_of(docs.begin(), docs.end(), [](const Document& d) {
    return std::all_of(d.claims.begin(), d.claims.end(),
                       [](const Claim& c) { return c.oracle_score.has_value(); });
  });
  if (has_oracle) report.mse_per_scorer = mse_per_scorer(docs);
  report.jaccard = jaccard_matrix(docs);
  return report;
}

}  // namespace maci
