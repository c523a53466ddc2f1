#include "maci/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "maci/calibration.hpp"
#include "maci/core.hpp"
#include "maci/ensemble.hpp"
#include "maci/io.hpp"
#include "maci/metrics.hpp"
#include "maci/shift.hpp"
#include "maci/synth.hpp"

namespace maci::cli {
namespace {

using io::json;
namespace fs = std::filesystem;

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    io::write_text(path, text);
  }
}

std::size_t scorer_count(const Corpus& docs) { return docs.front().claims.front().scores.size(); }

// --- calibrate -------------------------------------------------------------

struct CalibrateArgs {
  std::string input;
  double alpha = 0.1;
  std::string mode = "marginal";
  std::string convention = "product";
  double epsilon = ConformityConvention::kDefaultEpsilon;
  double delta = 0.1;
  std::string ensemble = "off";
  std::string opt_input;
  double opt_fraction = 0.5;
  std::size_t budget = 512;
  std::size_t polish_steps = 3;
  std::uint64_t seed = 0;
  std::string out;
};

int run_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  synth::PipelineOptions popts;
  popts.alpha = a.alpha;
  popts.mode = parse_mode(a.mode);
  popts.convention = ConformityConvention::parse(a.convention, a.epsilon);
  popts.use_ensemble = a.ensemble == "on";
  popts.search = {a.delta, a.budget, a.polish_steps, a.seed};
  popts.seed = a.seed;
  popts.search.validate();

  Corpus cal = io::parse_corpus(fs::path(a.input), true);
  validate_corpus(cal, true);
  const std::size_t m = scorer_count(cal);

  Corpus opt;
  if (popts.use_ensemble) {
    if (!a.opt_input.empty()) {
      opt = io::parse_corpus(fs::path(a.opt_input), true);
      if (scorer_count(opt) != m) {
        throw ValidationError("optimization corpus has M=" + std::to_string(scorer_count(opt)) +
                              ", calibration corpus has M=" + std::to_string(m));
      }
    } else {
      if (!(a.opt_fraction > 0.0 && a.opt_fraction < 1.0)) {
        throw ValidationError("--opt-fraction must lie in (0,1)");
      }
      std::vector<std::size_t> order(cal.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng(mix_seed(a.seed, 0x6f7074));
      std::shuffle(order.begin(), order.end(), rng);
      const auto n_opt = static_cast<std::size_t>(std::llround(a.opt_fraction * static_cast<double>(cal.size())));
      if (n_opt == 0 || n_opt >= cal.size()) throw ValidationError("corpus too small to split for weight search");
      std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_opt));
      std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_opt), order.end());
      Corpus rest;
      for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_opt ? opt : rest).push_back(std::move(cal[order[i]]));
      }
      cal = std::move(rest);
    }
  }

  CalibrationOptions copts;
  copts.alpha = popts.alpha;
  copts.convention = popts.convention;
  copts.mode = popts.mode;
  copts.weights = synth::fit_weights(opt, popts, m);
  copts.seed = a.seed;
  if (popts.use_ensemble) copts.delta = a.delta;
  const CalibrationResult result = calibrate(cal, copts);
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';

  emit(a.out, dump(io::model_to_json(result.model)), out);
  if (result.model.fully_degenerate()) {
    err << "degenerate calibration: every threshold is 1.0\n";
    return kDegenerate;
  }
  return kOk;
}

// --- filter ----------------------------------------------------------------

struct FilterArgs {
  std::string model;
  std::string input;
  std::optional<std::uint64_t> seed;
  std::string out;
};

std::vector<FilterOutcome> filter_all(const CalibrationModel& model, const Corpus& docs, std::uint64_t seed) {
  std::vector<FilterOutcome> outcomes;
  outcomes.reserve(docs.size());
  for (const auto& d : docs) outcomes.push_back(filter_document(model, d, seed));
  return outcomes;
}

int run_filter(const FilterArgs& a, std::ostream& out) {
  const CalibrationModel model = io::load_model(a.model);
  const Corpus docs = io::parse_corpus(fs::path(a.input), false);
  const auto outcomes = filter_all(model, docs, a.seed.value_or(model.seed));
  std::ostringstream os;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    os << io::filter_outcome_to_json(docs[i].id, outcomes[i]).dump() << '\n';
  }
  emit(a.out, os.str(), out);
  return kOk;
}

// --- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string input;
  std::optional<std::uint64_t> seed;
  std::string filtered;
  std::string out;
  std::string csv;
};

int run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const CalibrationModel model = io::load_model(a.model);
  const Corpus docs = io::parse_corpus(fs::path(a.input), true);
  std::vector<FilterOutcome> outcomes;
  if (a.filtered.empty()) {
    outcomes = filter_all(model, docs, a.seed.value_or(model.seed));
  } else {
    std::ifstream in(a.filtered);
    if (!in) throw ValidationError("cannot open filtered file '" + a.filtered + "'");
    auto replay = io::parse_filter_output(in);
    if (replay.size() != docs.size()) {
      throw ValidationError("filtered file has " + std::to_string(replay.size()) + " records, corpus has " +
                            std::to_string(docs.size()));
    }
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (replay[i].first != docs[i].id) {
        throw ValidationError("filtered record " + std::to_string(i + 1) + " has id '" + replay[i].first +
                              "', corpus has '" + docs[i].id + "'");
      }
      for (std::size_t k : replay[i].second.retained) {
        if (k >= docs[i].claims.size()) throw ValidationError("document '" + docs[i].id + "': retained index out of range");
      }
      outcomes.push_back(std::move(replay[i].second));
    }
  }
  const EvalReport report = evaluate(docs, outcomes, model);
  emit(a.out, dump(io::report_to_json(report)), out);
  if (!a.csv.empty()) io::write_text(a.csv, io::report_to_csv(report));
  return kOk;
}

// --- optimize --------------------------------------------------------------

struct OptimizeArgs {
  std::string input;
  std::string mode = "group";
  double delta = 0.1;
  std::size_t budget = 512;
  std::size_t polish_steps = 3;
  std::uint64_t seed = 0;
  std::string out;
};

int run_optimize(const OptimizeArgs& a, std::ostream& out) {
  const CalibrationMode mode = parse_mode(a.mode);
  const Corpus docs = io::parse_corpus(fs::path(a.input), true);
  WeightSearchConfig base{a.delta, a.budget, a.polish_steps, a.seed};
  base.validate();

  // Same seed derivation as the calibrate --ensemble path.
  auto search = [&](std::span<const Document> slice, std::uint64_t salt) {
    WeightSearchConfig cfg = base;
    cfg.seed = mix_seed(a.seed, salt);
    return io::weight_search_to_json(optimize_weights(slice, cfg));
  };
  json j;
  j["mode"] = to_string(mode);
  j["delta"] = a.delta;
  j["global"] = search(docs, 0);
  json groups = json::object();
  if (mode == CalibrationMode::group) {
    std::map<std::string, Corpus> by_group;
    for (const auto& d : docs) by_group[d.group].push_back(d);
    std::uint64_t salt = 1;
    for (const auto& [name, slice] : by_group) groups[name] = search(slice, salt++);
  }
  j["groups"] = std::move(groups);
  emit(a.out, dump(j), out);
  return kOk;
}

// --- shift-resample --------------------------------------------------------

struct ShiftArgs {
  std::string source;
  std::string target;
  std::uint64_t seed = 0;
  std::size_t iters = 500;
  double step = 0.1;
  std::string out;
  std::string audit;
};

int run_shift(const ShiftArgs& a, std::ostream& out) {
  const Corpus source = io::parse_corpus(fs::path(a.source), false);
  const Corpus target = io::parse_corpus(fs::path(a.target), false);
  RatioFitConfig cfg;
  cfg.iters = a.iters;
  cfg.step = a.step;
  if (!(cfg.step > 0.0)) throw ValidationError("--step must be positive");
  const RatioModel model = fit_density_ratio(source, target, cfg);
  const std::vector<double> ratios = model.ratios(source);
  const std::vector<std::size_t> picks = resample_indices(ratios, source.size(), a.seed);

  std::ostringstream os;
  std::vector<std::size_t> draws(source.size(), 0);
  for (std::size_t i : picks) {
    ++draws[i];
    os << io::document_to_json(source[i]).dump() << '\n';
  }
  emit(a.out, os.str(), out);

  double sum = 0.0, sum_sq = 0.0;
  std::size_t clipped_low = 0, clipped_high = 0;
  json per_doc = json::array();
  for (std::size_t i = 0; i < source.size(); ++i) {
    sum += ratios[i];
    sum_sq += ratios[i] * ratios[i];
    clipped_low += ratios[i] <= model.clip_low * (1.0 + 1e-12);
    clipped_high += ratios[i] >= model.clip_high * (1.0 - 1e-12);
    per_doc.push_back({{"id", source[i].id}, {"ratio", ratios[i]}, {"draws", draws[i]}});
  }
  json audit;
  audit["seed"] = a.seed;
  audit["n_source"] = source.size();
  audit["n_target"] = target.size();
  audit["ratio_model"] = io::ratio_model_to_json(model);
  audit["effective_sample_size"] = sum * sum / sum_sq;
  audit["clipped_low"] = clipped_low;
  audit["clipped_high"] = clipped_high;
  audit["documents"] = std::move(per_doc);

  std::string audit_path = a.audit;
  if (audit_path.empty()) audit_path = a.out.empty() || a.out == "-" ? "" : a.out + ".audit.json";
  if (audit_path.empty()) throw ValidationError("--audit is required when writing resampled documents to stdout");
  io::write_text(audit_path, dump(audit));
  return kOk;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
};

const char* kSimCsvHeader =
    "alpha,mode,convention,ensemble,scope,trials,mean_coverage,se_coverage,mean_retention,se_retention,"
    "degenerate_trials\n";

void csv_row(std::ostringstream& os, const synth::ExperimentReport& r, const std::string& scope,
             const synth::TrialStats& s) {
  os << r.alpha << ',' << r.mode << ',' << r.convention << ',' << (r.use_ensemble ? "on" : "off") << ','
     << scope << ',' << s.trials << ',' << s.mean_coverage << ',' << s.se_coverage << ',' << s.mean_retention
     << ',' << s.se_retention << ',' << s.degenerate_trials << '\n';
}

int run_simulate(const SimulateArgs& a) {
  const json raw = io::read_json(a.config);
  const synth::SimConfig config = io::sim_config_from_json(raw);

  std::vector<CalibrationMode> modes{CalibrationMode::marginal, CalibrationMode::group};
  std::vector<ConformityConvention> conventions{ConformityConvention::product(config.epsilon)};
  bool use_ensemble = false;
  try {
    if (raw.contains("modes")) {
      modes.clear();
      for (const auto& m : raw["modes"]) modes.push_back(parse_mode(m.get<std::string>()));
    }
    if (raw.contains("conventions")) {
      conventions.clear();
      for (const auto& c : raw["conventions"]) {
        conventions.push_back(ConformityConvention::parse(c.get<std::string>(), config.epsilon));
      }
    }
    use_ensemble = raw.value("ensemble", false);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed simulation config: ") + e.what());
  }

  json report;
  report["config"] = io::sim_config_to_json(config);
  json experiments = json::array();
  std::ostringstream csv;
  csv << std::setprecision(17) << kSimCsvHeader;
  for (double alpha : config.alphas) {
    for (auto mode : modes) {
      for (const auto& conv : conventions) {
        const auto r = synth::coverage_experiment(config, alpha, mode, conv, use_ensemble);
        experiments.push_back(io::experiment_to_json(r));
        csv_row(csv, r, "overall", r.overall);
        for (const auto& [name, s] : r.groups) csv_row(csv, r, "group:" + name, s);
      }
    }
  }
  report["experiments"] = std::move(experiments);

  try {
    if (raw.contains("gap_sweep")) {
      const auto& g = raw["gap_sweep"];
      synth::SimConfig sweep = config;
      if (g.contains("levels")) sweep.scorer_noise = g["levels"].get<std::vector<double>>();
      if (g.contains("seeds")) sweep.trials = g["seeds"].get<std::size_t>();
      const double tau = g.value("tau", 0.7);
      json rows = json::array();
      for (const auto& row : synth::retention_gap_sweep(sweep, tau)) {
        rows.push_back({{"sigma", row.sigma},
                        {"mse", row.mse},
                        {"retention_estimated", row.retention_estimated},
                        {"retention_oracle", row.retention_oracle},
                        {"gap", row.gap}});
      }
      report["gap_sweep"] = {{"tau", tau}, {"seeds", sweep.trials}, {"rows", rows}};
    }
    if (raw.contains("shift")) {
      const auto& s = raw["shift"];
      const double alpha = s.value("alpha", 0.1);
      const double strength = s.value("strength", 1.5);
      synth::SimConfig sc = config;
      if (s.contains("trials")) sc.trials = s["trials"].get<std::size_t>();
      const auto r = synth::shift_experiment(sc, alpha, strength, conventions.front());
      report["shift"] = {{"alpha", alpha},
                         {"strength", strength},
                         {"trials", r.trials},
                         {"mean_deviation_plain", r.mean_deviation_plain},
                         {"mean_deviation_dre", r.mean_deviation_dre},
                         {"coverage_plain", r.coverage_plain},
                         {"coverage_dre", r.coverage_dre}};
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed simulation config: ") + e.what());
  }

  const fs::path dir(a.out);
  io::write_text(dir / "report.json", dump(report));
  io::write_text(dir / "report.csv", csv.str());
  return kOk;
}

// --- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run_generate(const GenerateArgs& a, std::ostream& out) {
  const synth::SimConfig config = io::sim_config_from_json(io::read_json(a.config));
  const Corpus corpus = synth::generate_corpus(config, a.seed.value_or(config.seed));
  std::ostringstream os;
  io::write_corpus(os, corpus);
  emit(a.out, os.str(), out);
  return kOk;
}

}  // namespace

int run_command(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-scorer conformal claim filtering", "maci"};
  app.require_subcommand(1);

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Fit thresholds (and optionally ensemble weights) on labeled data");
  cal->add_option("--input", ca.input, "Labeled calibration corpus (JSONL)")->required();
  cal->add_option("--alpha", ca.alpha, "Miscoverage level");
  cal->add_option("--mode", ca.mode)->check(CLI::IsMember({"marginal", "group"}));
  cal->add_option("--convention", ca.convention, "product | log-sum | power-mean:<lambda> | worst-case");
  cal->add_option("--epsilon", ca.epsilon, "Score clamp");
  cal->add_option("--delta", ca.delta, "TPR tolerance for the weight search");
  cal->add_option("--ensemble", ca.ensemble)->check(CLI::IsMember({"on", "off"}));
  cal->add_option("--opt-input", ca.opt_input, "Separate labeled corpus for the weight search");
  cal->add_option("--opt-fraction", ca.opt_fraction, "Share of --input used for the weight search");
  cal->add_option("--budget", ca.budget);
  cal->add_option("--polish-steps", ca.polish_steps);
  cal->add_option("--seed", ca.seed);
  cal->add_option("--out", ca.out, "Model JSON path")->required();

  FilterArgs fa;
  auto* filt = app.add_subcommand("filter", "Filter claims with a frozen model");
  filt->add_option("--model", fa.model)->required();
  filt->add_option("--input", fa.input)->required();
  filt->add_option("--seed", fa.seed, "Defaults to the model seed");
  filt->add_option("--out", fa.out);

  EvaluateArgs ea;
  auto* eval = app.add_subcommand("evaluate", "Coverage and retention on labeled data");
  eval->add_option("--model", ea.model)->required();
  eval->add_option("--input", ea.input)->required();
  eval->add_option("--seed", ea.seed, "Defaults to the model seed");
  eval->add_option("--filtered", ea.filtered, "Replay an existing filter output instead of filtering");
  eval->add_option("--out", ea.out);
  eval->add_option("--csv", ea.csv);

  OptimizeArgs oa;
  auto* opt = app.add_subcommand("optimize", "Standalone ensemble weight search");
  opt->add_option("--input", oa.input)->required();
  opt->add_option("--mode", oa.mode)->check(CLI::IsMember({"marginal", "group"}));
  opt->add_option("--delta", oa.delta);
  opt->add_option("--budget", oa.budget);
  opt->add_option("--polish-steps", oa.polish_steps);
  opt->add_option("--seed", oa.seed);
  opt->add_option("--out", oa.out);

  ShiftArgs sa;
  auto* shift = app.add_subcommand("shift-resample", "Density-ratio resampling of a calibration corpus");
  shift->add_option("--source", sa.source)->required();
  shift->add_option("--target", sa.target)->required();
  shift->add_option("--seed", sa.seed);
  shift->add_option("--iters", sa.iters);
  shift->add_option("--step", sa.step);
  shift->add_option("--out", sa.out);
  shift->add_option("--audit", sa.audit, "Defaults to <out>.audit.json");

  SimulateArgs ma;
  auto* sim = app.add_subcommand("simulate", "Synthetic coverage experiments");
  sim->add_option("--config", ma.config)->required();
  sim->add_option("--out", ma.out, "Report directory")->required();

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Write a synthetic oracle corpus");
  gen->add_option("--config", ga.config, "Simulation config JSON")->required();
  gen->add_option("--seed", ga.seed, "Defaults to the config seed");
  gen->add_option("--out", ga.out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }

  try {
    if (*cal) return run_calibrate(ca, out, err);
    if (*filt) return run_filter(fa, out);
    if (*eval) return run_evaluate(ea, out);
    if (*opt) return run_optimize(oa, out);
    if (*shift) return run_shift(sa, out);
    if (*sim) return run_simulate(ma);
    if (*gen) return run_generate(ga, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace maci::cli
