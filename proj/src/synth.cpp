#include "maci/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "maci/shift.hpp"

namespace maci::synth {
namespace {

std::string doc_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "doc-%07zu", i);
  return buf;
}

double draw_beta(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  const double s = x + y;
  return s > 0.0 ? x / s : 0.5;
}

// Largest-remainder apportionment of n items over proportions.
std::vector<std::size_t> exact_counts(const std::vector<GroupSpec>& groups, std::size_t n) {
  std::vector<std::size_t> counts(groups.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double exact = groups[g].proportion * static_cast<double>(n);
    counts[g] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    used += counts[g];
    rema.emplace_back(-(exact - static_cast<double>(counts[g])), g);
  }
  std::sort(rema.begin(), rema.end());
  for (std::size_t k = 0; used < n; ++k, ++used) ++counts[rema[k % rema.size()].second];
  return counts;
}

std::size_t rounded(double fraction, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
}

void split_into(const std::vector<const Document*>& docs, const SplitFractions& f, Partitions& out) {
  const std::size_t n = docs.size();
  const std::size_t n_opt = rounded(f.opt, n);
  const std::size_t n_cal = std::min(n - n_opt, rounded(f.cal, n));
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_opt) {
      out.opt.push_back(*docs[i]);
    } else if (i < n_opt + n_cal) {
      out.cal.push_back(*docs[i]);
    } else {
      out.test.push_back(*docs[i]);
    }
  }
}

struct Accumulator {
  std::vector<double> coverage;
  std::vector<double> retention;
  std::size_t degenerate = 0;
};

TrialStats finish(const Accumulator& acc) {
  TrialStats s;
  s.trials = acc.coverage.size();
  s.degenerate_trials = acc.degenerate;
  if (s.trials == 0) return s;
  auto moments = [&](const std::vector<double>& v, double& mean, double& sd, double& se) {
    const double n = static_cast<double>(v.size());
    mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    se = sd / std::sqrt(n);
  };
  moments(acc.coverage, s.mean_coverage, s.sd_coverage, s.se_coverage);
  moments(acc.retention, s.mean_retention, s.sd_retention, s.se_retention);
  return s;
}

double group_deviation(const EvalReport& report, double target) {
  double sum = 0.0;
  for (const auto& [_, g] : report.groups) sum += std::fabs(g.coverage - target);
  return report.groups.empty() ? 0.0 : sum / static_cast<double>(report.groups.size());
}

}  // namespace

void SimConfig::validate() const {
  if (n_docs < 1) throw ValidationError("n_docs must be positive");
  if (min_claims < 1 || max_claims < min_claims) {
    throw ValidationError("claims_per_doc range must satisfy 1 <= min <= max");
  }
  if (groups.empty()) throw ValidationError("at least one group is required");
  double total = 0.0;
  for (const auto& g : groups) {
    if (!(g.beta_a > 0.0 && g.beta_b > 0.0)) {
      throw ValidationError("group '" + g.name + "': Beta parameters must be positive");
    }
    if (!(g.proportion >= 0.0)) throw ValidationError("group proportions must be nonnegative");
    total += g.proportion;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ValidationError("group proportions must sum to 1");
  if (scorer_noise.empty()) throw ValidationError("at least one scorer is required");
  for (double s : scorer_noise) {
    if (!(s >= 0.0)) throw ValidationError("scorer noise must be nonnegative");
  }
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  }
  if (!(epsilon > 0.0 && epsilon <= 1e-3)) throw ValidationError("epsilon must lie in (0, 1e-3]");
  if (split.opt < 0.0 || split.cal < 0.0 || split.test < 0.0 ||
      std::fabs(split.opt + split.cal + split.test - 1.0) > 1e-9) {
    throw ValidationError("split fractions must be nonnegative and sum to 1");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0,1)");
}

Corpus generate_corpus(const SimConfig& config) { return generate_corpus(config, config.seed); }

Corpus generate_corpus(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const double eps = config.epsilon;

  std::vector<std::size_t> assignment;
  if (config.stratified) {
    const auto counts = exact_counts(config.groups, config.n_docs);
    for (std::size_t g = 0; g < counts.size(); ++g) assignment.insert(assignment.end(), counts[g], g);
    std::shuffle(assignment.begin(), assignment.end(), rng);
  }
  std::vector<double> props;
  for (const auto& g : config.groups) props.push_back(g.proportion);
  std::discrete_distribution<std::size_t> pick_group(props.begin(), props.end());
  std::uniform_int_distribution<std::size_t> pick_n(config.min_claims, config.max_claims);
  std::uniform_int_distribution<std::int64_t> prompt_len(10, 200);
  std::uniform_int_distribution<std::int64_t> filler(0, 40);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Corpus corpus;
  corpus.reserve(config.n_docs);
  for (std::size_t i = 0; i < config.n_docs; ++i) {
    const std::size_t g = config.stratified ? assignment[i] : pick_group(rng);
    const GroupSpec& spec = config.groups[g];
    Document doc;
    doc.id = doc_id(i);
    doc.group = spec.name;
    const std::size_t n = pick_n(rng);
    doc.prompt_len = prompt_len(rng);
    doc.response_len = static_cast<std::int64_t>(12 * n) + filler(rng);
    doc.claims.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      Claim c;
      c.index = j;
      const double oracle = std::clamp(draw_beta(rng, spec.beta_a, spec.beta_b), eps, 1.0 - eps);
      c.oracle_score = oracle;
      c.label = unit(rng) < oracle;
      c.scores.reserve(config.scorer_noise.size());
      for (double sigma : config.scorer_noise) {
        const double z = gauss(rng);
        c.scores.push_back(sigma == 0.0 ? oracle : std::clamp(oracle + sigma * z, eps, 1.0 - eps));
      }
      doc.claims.push_back(std::move(c));
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

Partitions partition_corpus(const Corpus& corpus, const SimConfig& config) {
  Partitions parts;
  if (config.stratified) {
    std::map<std::string, std::vector<const Document*>> by_group;
    for (const auto& d : corpus) by_group[d.group].push_back(&d);
    for (const auto& [_, docs] : by_group) split_into(docs, config.split, parts);
  } else {
    std::vector<const Document*> all;
    for (const auto& d : corpus) all.push_back(&d);
    split_into(all, config.split, parts);
  }
  return parts;
}

WeightTable fit_weights(std::span<const Document> opt, const PipelineOptions& options,
                        std::size_t num_scorers) {
  WeightTable table;
  table.global = uniform_weights(num_scorers);
  if (!options.use_ensemble || opt.empty()) return table;

  auto search = [&](std::span<const Document> docs, std::uint64_t salt) {
    WeightSearchConfig cfg = options.search;
    cfg.seed = mix_seed(options.search.seed, salt);
    try {
      return optimize_weights(docs, cfg).weights;
    } catch (const ValidationError&) {
      return uniform_weights(num_scorers);  // e.g. no true claims in this slice
    }
  };
  table.global = search(opt, 0);
  if (options.mode == CalibrationMode::group) {
    std::map<std::string, Corpus> by_group;
    for (const auto& d : opt) by_group[d.group].push_back(d);
    std::uint64_t salt = 1;
    for (const auto& [name, docs] : by_group) table.per_group[name] = search(docs, salt++);
  }
  return table;
}

PipelineRun run_pipeline(const Partitions& parts, const PipelineOptions& options) {
  if (parts.cal.empty() || parts.test.empty()) {
    throw ValidationError("pipeline needs nonempty calibration and test partitions");
  }
  const std::size_t m = parts.cal.front().claims.front().scores.size();
  CalibrationOptions copts;
  copts.alpha = options.alpha;
  copts.convention = options.convention;
  copts.mode = options.mode;
  copts.weights = fit_weights(parts.opt, options, m);
  copts.seed = options.seed;
  if (options.use_ensemble) copts.delta = options.search.delta;

  CalibrationResult cal = calibrate(parts.cal, copts);
  std::vector<FilterOutcome> outcomes;
  outcomes.reserve(parts.test.size());
  for (const auto& doc : parts.test) outcomes.push_back(filter_document(cal.model, doc, options.seed));
  PipelineRun run;
  run.report = evaluate(parts.test, outcomes, cal.model);
  run.model = std::move(cal.model);
  run.warnings = std::move(cal.warnings);
  return run;
}

ExperimentReport coverage_experiment(const SimConfig& config, double alpha, CalibrationMode mode,
                                     const ConformityConvention& convention, bool use_ensemble) {
  config.validate();
  ExperimentReport out;
  out.alpha = alpha;
  out.mode = to_string(mode);
  out.convention = convention.tag();
  out.use_ensemble = use_ensemble;
  out.trials = config.trials;

  Accumulator overall;
  std::map<std::string, Accumulator> groups;
  for (std::size_t t = 0; t < config.trials; ++t) {
    const std::uint64_t trial_seed = mix_seed(config.seed, t);
    const Corpus corpus = generate_corpus(config, trial_seed);
    const Partitions parts = partition_corpus(corpus, config);

    PipelineOptions opts;
    opts.alpha = alpha;
    opts.mode = mode;
    opts.convention = convention;
    opts.use_ensemble = use_ensemble;
    opts.search = {config.delta, config.budget, config.polish_steps, mix_seed(trial_seed, 7)};
    opts.seed = trial_seed;
    const PipelineRun run = run_pipeline(parts, opts);

    overall.coverage.push_back(run.report.overall.coverage);
    overall.retention.push_back(run.report.overall.retention);
    if (run.model.marginal_degenerate) ++overall.degenerate;
    for (const auto& [name, summary] : run.report.groups) {
      auto& acc = groups[name];
      acc.coverage.push_back(summary.coverage);
      acc.retention.push_back(summary.retention);
      const auto it = run.model.groups.find(name);
      const bool degenerate = it != run.model.groups.end() ? it->second.degenerate
                                                           : run.model.marginal_degenerate;
      if (degenerate) ++acc.degenerate;
    }
  }
  out.overall = finish(overall);
  for (const auto& [name, acc] : groups) out.groups[name] = finish(acc);
  return out;
}

double ks_statistic(std::span<const double> values) {
  if (values.empty()) throw ValidationError("KS statistic of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = std::clamp(sorted[i], 0.0, 1.0);
    const double i_d = static_cast<double>(i);
    d = std::max({d, (i_d + 1.0) / n - x, x - i_d / n});
  }
  return d;
}

double chi_square_statistic(std::span<const double> observed, std::span<const double> expected) {
  if (observed.size() != expected.size() || observed.empty()) {
    throw ValidationError("chi-square: observed and expected must be nonempty and aligned");
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) throw ValidationError("chi-square: expected counts must be positive");
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  return stat;
}

std::vector<GapRow> retention_gap_sweep(const SimConfig& config, double tau) {
  config.validate();
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in [0,1]");
  std::vector<GapRow> rows;
  for (double sigma : config.scorer_noise) {
    SimConfig level = config;
    level.scorer_noise = {sigma};
    GapRow row;
    row.sigma = sigma;
    for (std::size_t s = 0; s < config.trials; ++s) {
      const Corpus corpus = generate_corpus(level, mix_seed(config.seed, s));
      std::size_t n = 0, kept_est = 0, kept_oracle = 0;
      double sq = 0.0;
      for (const auto& doc : corpus) {
        for (const auto& c : doc.claims) {
          const double est = c.scores.front();
          const double oracle = *c.oracle_score;
          kept_est += est >= tau;
          kept_oracle += oracle >= tau;
          sq += (est - oracle) * (est - oracle);
          ++n;
        }
      }
      const double r_est = static_cast<double>(kept_est) / static_cast<double>(n);
      const double r_oracle = static_cast<double>(kept_oracle) / static_cast<double>(n);
      row.mse += sq / static_cast<double>(n);
      row.retention_estimated += r_est;
      row.retention_oracle += r_oracle;
      row.gap += std::fabs(r_est - r_oracle);
    }
    const double k = static_cast<double>(std::max<std::size_t>(1, config.trials));
    row.mse /= k;
    row.retention_estimated /= k;
    row.retention_oracle /= k;
    row.gap /= k;
    rows.push_back(row);
  }
  return rows;
}

ShiftReport shift_experiment(const SimConfig& config, double alpha, double strength,
                             const ConformityConvention& convention) {
  config.validate();
  ShiftReport out;
  out.trials = config.trials;
  const double target = 1.0 - alpha;
  std::map<std::string, std::pair<double, std::size_t>> cov_plain, cov_dre;

  for (std::size_t t = 0; t < config.trials; ++t) {
    const std::uint64_t trial_seed = mix_seed(config.seed, t);
    const Corpus corpus = generate_corpus(config, trial_seed);

    std::vector<double> s;
    s.reserve(corpus.size());
    for (const auto& d : corpus) s.push_back(extract_features(d).mean_score);
    std::vector<double> sorted = s;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                     sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    double var = 0.0;
    for (double x : s) var += (x - mean) * (x - mean);
    const double sd = std::max(std::sqrt(var / static_cast<double>(s.size())), 1e-12);

    std::mt19937_64 rng(mix_seed(trial_seed, 11));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Partitions parts;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const double p_source = 1.0 / (1.0 + std::exp(-strength * (s[i] - median) / sd));
      (unit(rng) < p_source ? parts.cal : parts.test).push_back(corpus[i]);
    }
    if (parts.cal.empty() || parts.test.empty()) continue;

    PipelineOptions opts;
    opts.alpha = alpha;
    opts.mode = CalibrationMode::group;
    opts.convention = convention;
    opts.seed = trial_seed;
    const PipelineRun plain = run_pipeline(parts, opts);

    const RatioModel ratio_model = fit_density_ratio(parts.cal, parts.test);
    Partitions resampled;
    resampled.cal = resample_calibration(parts.cal, ratio_model.ratios(parts.cal), mix_seed(trial_seed, 13));
    resampled.test = parts.test;
    const PipelineRun dre = run_pipeline(resampled, opts);

    out.deviation_plain.push_back(group_deviation(plain.report, target));
    out.deviation_dre.push_back(group_deviation(dre.report, target));
    for (const auto& [name, g] : plain.report.groups) {
      cov_plain[name].first += g.coverage;
      ++cov_plain[name].second;
    }
    for (const auto& [name, g] : dre.report.groups) {
      cov_dre[name].first += g.coverage;
      ++cov_dre[name].second;
    }
  }
  auto mean_of = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  out.trials = out.deviation_plain.size();
  out.mean_deviation_plain = mean_of(out.deviation_plain);
  out.mean_deviation_dre = mean_of(out.deviation_dre);
  for (const auto& [name, acc] : cov_plain) out.coverage_plain[name] = acc.first / static_cast<double>(acc.second);
  for (const auto& [name, acc] : cov_dre) out.coverage_dre[name] = acc.first / static_cast<double>(acc.second);
  return out;
}

}  // namespace maci::synth
