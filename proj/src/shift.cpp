#include "maci/shift.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace maci {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::array<double, 5> standardized(const RatioModel& model, const FeatureVector& f) {
  const auto raw = f.as_array();
  std::array<double, 5> x{};
  for (std::size_t k = 0; k < 4; ++k) x[k] = (raw[k] - model.feature_mean[k]) / model.feature_scale[k];
  x[4] = 1.0;
  return x;
}

}  // namespace

FeatureVector extract_features(const Document& doc) {
  if (doc.claims.empty()) throw ValidationError("document '" + doc.id + "' has no claims");
  std::vector<double> per_claim;
  per_claim.reserve(doc.claims.size());
  for (const auto& c : doc.claims) {
    if (c.scores.empty()) throw ValidationError("document '" + doc.id + "': claim without scores");
    double s = 0.0;
    for (double v : c.scores) s += v;
    per_claim.push_back(s / static_cast<double>(c.scores.size()));
  }
  const double n = static_cast<double>(per_claim.size());
  double mean = 0.0;
  for (double v : per_claim) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : per_claim) var += (v - mean) * (v - mean);
  var /= n;

  FeatureVector f;
  f.mean_score = mean;
  f.std_score = std::sqrt(var);
  f.prompt_len = doc.prompt_len ? static_cast<double>(*doc.prompt_len) : 0.0;
  f.response_len = doc.response_len ? static_cast<double>(*doc.response_len) : 0.0;
  return f;
}

double RatioModel::ratio(const FeatureVector& f) const {
  const auto x = standardized(*this, f);
  double z = 0.0;
  for (std::size_t k = 0; k < 5; ++k) z += coefficients[k] * x[k];
  // Odds of the logistic model are exp(z); clip in log space to avoid overflow.
  return std::exp(std::clamp(z, std::log(clip_low), std::log(clip_high)));
}

std::vector<double> RatioModel::ratios(std::span<const Document> docs) const {
  std::vector<double> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(ratio(extract_features(d)));
  return out;
}

void RatioModel::validate() const {
  for (double s : feature_scale) {
    if (!(s > 0.0)) throw ValidationError("ratio model scales must be positive");
  }
  if (!(clip_low > 0.0 && clip_low < clip_high)) throw ValidationError("ratio clip bounds invalid");
}

RatioModel fit_density_ratio(std::span<const Document> source, std::span<const Document> target,
                             const RatioFitConfig& config) {
  if (source.empty() || target.empty()) {
    throw ValidationError("density ratio fit needs nonempty source and target sets");
  }
  RatioModel model;
  model.clip_low = config.clip_low;
  model.clip_high = config.clip_high;
  model.validate();

  std::vector<FeatureVector> feats;
  std::vector<double> labels;
  for (const auto& d : source) {
    feats.push_back(extract_features(d));
    labels.push_back(0.0);
  }
  for (const auto& d : target) {
    feats.push_back(extract_features(d));
    labels.push_back(1.0);
  }
  const double n = static_cast<double>(feats.size());

  for (std::size_t k = 0; k < 4; ++k) {
    double mean = 0.0;
    for (const auto& f : feats) mean += f.as_array()[k];
    mean /= n;
    double var = 0.0;
    for (const auto& f : feats) {
      const double d = f.as_array()[k] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    model.feature_mean[k] = mean;
    model.feature_scale[k] = sd > 0.0 ? sd : 1.0;
  }

  // Balanced priors: each class carries half of the total sample weight.
  const double w_source = 0.5 / static_cast<double>(source.size());
  const double w_target = 0.5 / static_cast<double>(target.size());

  std::vector<std::array<double, 5>> xs;
  xs.reserve(feats.size());
  for (const auto& f : feats) xs.push_back(standardized(model, f));

  for (std::size_t it = 0; it < config.iters; ++it) {
    std::array<double, 5> grad{};
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double z = 0.0;
      for (std::size_t k = 0; k < 5; ++k) z += model.coefficients[k] * xs[i][k];
      const double w = labels[i] > 0.5 ? w_target : w_source;
      const double residual = w * (sigmoid(z) - labels[i]);
      for (std::size_t k = 0; k < 5; ++k) grad[k] += residual * xs[i][k];
    }
    for (std::size_t k = 0; k < 5; ++k) model.coefficients[k] -= config.step * grad[k];
  }
  return model;
}

std::vector<std::size_t> resample_indices(std::span<const double> ratios, std::size_t n,
                                          std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("ratios must be finite and nonnegative");
    total += r;
  }
  if (!(total > 0.0)) throw ValidationError("resampling needs at least one positive ratio");
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(ratios.begin(), ratios.end());
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::vector<Document> resample_calibration(std::span<const Document> docs,
                                           std::span<const double> ratios, std::uint64_t seed) {
  if (docs.size() != ratios.size()) throw ValidationError("ratios must align with documents");
  if (docs.empty()) throw ValidationError("cannot resample an empty corpus");
  std::vector<Document> out;
  out.reserve(docs.size());
  for (std::size_t i : resample_indices(ratios, docs.size(), seed)) out.push_back(docs[i]);
  return out;
}

}  // namespace maci
