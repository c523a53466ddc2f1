#include "maci/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace maci::io {
namespace {

std::optional<std::int64_t> optional_length(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw ValidationError(std::string(key) + " must be an integer");
  const auto v = it->get<std::int64_t>();
  if (v < 0) throw ValidationError(std::string(key) + " must be nonnegative");
  return v;
}

Claim claim_from_json(const json& j, std::size_t index, bool require_labels) {
  if (!j.is_object()) throw ValidationError("claim " + std::to_string(index) + " is not an object");
  Claim c;
  c.index = index;
  const auto label = j.find("label");
  if (label != j.end() && !label->is_null()) {
    if (label->is_boolean()) {
      c.label = label->get<bool>();
    } else if (label->is_number_integer() && (label->get<int>() == 0 || label->get<int>() == 1)) {
      c.label = label->get<int>() == 1;
    } else {
      throw ValidationError("claim " + std::to_string(index) + ": label must be 0, 1 or null");
    }
  } else if (require_labels) {
    throw ValidationError("claim " + std::to_string(index) + ": missing label");
  }
  const auto scores = j.find("scores");
  if (scores == j.end() || !scores->is_array() || scores->empty()) {
    throw ValidationError("claim " + std::to_string(index) + ": scores must be a nonempty array");
  }
  for (const auto& s : *scores) {
    if (!s.is_number()) throw ValidationError("claim " + std::to_string(index) + ": non-numeric score");
    const double v = s.get<double>();
    if (!(v >= 0.0 && v <= 1.0)) {
      std::ostringstream os;
      os << "claim " << index << ": score " << v << " out of range [0,1]";
      throw ValidationError(os.str());
    }
    c.scores.push_back(v);
  }
  const auto oracle = j.find("oracle");
  if (oracle != j.end() && !oracle->is_null()) {
    if (!oracle->is_number()) throw ValidationError("claim " + std::to_string(index) + ": oracle must be a number");
    const double v = oracle->get<double>();
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("claim " + std::to_string(index) + ": oracle score out of range [0,1]");
    }
    c.oracle_score = v;
  }
  return c;
}

json rates_to_json(const RateSummary& s) {
  return {{"n_docs", s.n_docs},       {"n_claims", s.n_claims},
          {"coverage", s.coverage},   {"retention", s.retention},
          {"claim_retention", s.claim_retention},
          {"tpr", s.tpr},             {"fpr", s.fpr},
          {"rho", s.rho}};
}

json trial_stats_to_json(const synth::TrialStats& s) {
  return {{"trials", s.trials},
          {"mean_coverage", s.mean_coverage},
          {"sd_coverage", s.sd_coverage},
          {"se_coverage", s.se_coverage},
          {"mean_retention", s.mean_retention},
          {"sd_retention", s.sd_retention},
          {"se_retention", s.se_retention},
          {"degenerate_trials", s.degenerate_trials}};
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

}  // namespace

Document document_from_json(const json& j, bool require_labels) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  Document doc;
  const auto id = j.find("id");
  if (id == j.end() || !id->is_string()) throw ValidationError("missing string field 'id'");
  doc.id = id->get<std::string>();
  const auto group = j.find("group");
  if (group == j.end() || !group->is_string()) throw ValidationError("missing string field 'group'");
  doc.group = group->get<std::string>();
  doc.prompt_len = optional_length(j, "prompt_len");
  doc.response_len = optional_length(j, "response_len");
  const auto claims = j.find("claims");
  if (claims == j.end() || !claims->is_array()) throw ValidationError("missing array field 'claims'");
  if (claims->empty()) throw ValidationError("empty claim list");
  for (std::size_t k = 0; k < claims->size(); ++k) {
    doc.claims.push_back(claim_from_json((*claims)[k], k, require_labels));
  }
  return doc;
}

Corpus parse_corpus(std::istream& in, bool require_labels) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  std::size_t m = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      Document doc = document_from_json(j, require_labels);
      for (const auto& c : doc.claims) {
        if (m == 0) m = c.scores.size();
        if (c.scores.size() != m) {
          throw ValidationError("inconsistent scorer count: expected M=" + std::to_string(m) +
                                ", got M=" + std::to_string(c.scores.size()));
        }
      }
      corpus.push_back(std::move(doc));
    } catch (const CorpusError&) {
      throw;
    } catch (const ValidationError& e) {
      throw CorpusError(line_no, e.what());
    } catch (const json::exception& e) {
      throw CorpusError(line_no, std::string("schema violation: ") + e.what());
    }
  }
  if (corpus.empty()) throw ValidationError("empty corpus");
  return corpus;
}

Corpus parse_corpus(const std::filesystem::path& path, bool require_labels) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file '" + path.string() + "'");
  return parse_corpus(in, require_labels);
}

json document_to_json(const Document& doc) {
  json j;
  j["id"] = doc.id;
  j["group"] = doc.group;
  if (doc.prompt_len) j["prompt_len"] = *doc.prompt_len;
  if (doc.response_len) j["response_len"] = *doc.response_len;
  json claims = json::array();
  for (const auto& c : doc.claims) {
    json cj;
    cj["label"] = c.label ? json(*c.label ? 1 : 0) : json(nullptr);
    cj["scores"] = c.scores;
    if (c.oracle_score) cj["oracle"] = *c.oracle_score;
    claims.push_back(std::move(cj));
  }
  j["claims"] = std::move(claims);
  return j;
}

void write_corpus(std::ostream& out, std::span<const Document> docs) {
  for (const auto& d : docs) out << document_to_json(d).dump() << '\n';
}

void write_corpus(const std::filesystem::path& path, std::span<const Document> docs) {
  std::ostringstream os;
  write_corpus(os, docs);
  write_text(path, os.str());
}

json convention_to_json(const ConformityConvention& conv) {
  json j{{"variant", conv.tag()}, {"epsilon", conv.epsilon}};
  if (conv.variant == Variant::power_mean) j["lambda"] = conv.lambda;
  return j;
}

ConformityConvention convention_from_json(const json& j) {
  const double eps = value_or(j, "epsilon", ConformityConvention::kDefaultEpsilon);
  auto conv = ConformityConvention::parse(j.at("variant").get<std::string>(), eps);
  if (conv.variant == Variant::power_mean && j.contains("lambda")) conv.lambda = j["lambda"].get<double>();
  conv.validate();
  return conv;
}

json model_to_json(const CalibrationModel& model) {
  json j;
  j["alpha"] = model.alpha;
  j["convention"] = convention_to_json(model.convention);
  j["mode"] = to_string(model.mode);
  j["num_scorers"] = model.num_scorers;
  j["global_weights"] = model.global_weights;
  j["marginal_threshold"] = model.marginal_threshold;
  j["marginal_count"] = model.marginal_count;
  j["marginal_degenerate"] = model.marginal_degenerate;
  j["seed"] = model.seed;
  j["delta"] = model.delta ? json(*model.delta) : json(nullptr);
  json groups = json::object();
  for (const auto& [name, g] : model.groups) {
    groups[name] = {{"weights", g.weights},
                    {"threshold", g.threshold},
                    {"count", g.count},
                    {"degenerate", g.degenerate}};
  }
  j["groups"] = std::move(groups);
  return j;
}

CalibrationModel model_from_json(const json& j) {
  try {
    CalibrationModel model;
    model.alpha = j.at("alpha").get<double>();
    model.convention = convention_from_json(j.at("convention"));
    model.mode = parse_mode(j.at("mode").get<std::string>());
    model.num_scorers = j.at("num_scorers").get<std::size_t>();
    model.global_weights = j.at("global_weights").get<std::vector<double>>();
    model.marginal_threshold = j.at("marginal_threshold").get<double>();
    model.marginal_count = value_or<std::size_t>(j, "marginal_count", 0);
    model.marginal_degenerate = value_or(j, "marginal_degenerate", false);
    model.seed = value_or<std::uint64_t>(j, "seed", 0);
    if (j.contains("delta") && !j["delta"].is_null()) model.delta = j["delta"].get<double>();
    for (const auto& [name, g] : j.at("groups").items()) {
      GroupCalibration gc;
      gc.weights = g.at("weights").get<std::vector<double>>();
      gc.threshold = g.at("threshold").get<double>();
      gc.count = g.at("count").get<std::size_t>();
      gc.degenerate = value_or(g, "degenerate", false);
      model.groups.emplace(name, std::move(gc));
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
}

CalibrationModel load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

json filter_outcome_to_json(const std::string& doc_id, const FilterOutcome& outcome) {
  json j;
  j["id"] = doc_id;
  j["retained_indices"] = outcome.retained;
  j["threshold"] = outcome.threshold;
  j["group_used"] = outcome.group_used.empty() ? json(nullptr) : json(outcome.group_used);
  j["fallback_flag"] = outcome.fallback;
  return j;
}

std::vector<std::pair<std::string, FilterOutcome>> parse_filter_output(std::istream& in) {
  std::vector<std::pair<std::string, FilterOutcome>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      FilterOutcome o;
      o.retained = j.at("retained_indices").get<std::vector<std::size_t>>();
      o.threshold = j.at("threshold").get<double>();
      if (!j.at("group_used").is_null()) o.group_used = j["group_used"].get<std::string>();
      o.fallback = j.at("fallback_flag").get<bool>();
      out.emplace_back(j.at("id").get<std::string>(), std::move(o));
    } catch (const json::exception& e) {
      throw CorpusError(line_no, std::string("malformed filter record: ") + e.what());
    }
  }
  return out;
}

json report_to_json(const EvalReport& report) {
  json j;
  j["alpha"] = report.alpha;
  j["convention"] = report.convention;
  j["mode"] = report.mode;
  j["overall"] = rates_to_json(report.overall);
  json groups = json::object();
  for (const auto& [name, s] : report.groups) groups[name] = rates_to_json(s);
  j["groups"] = std::move(groups);
  j["fallback_docs"] = report.fallback_docs;
  if (report.mse_per_scorer) j["mse_per_scorer"] = *report.mse_per_scorer;
  if (report.jaccard) j["jaccard"] = *report.jaccard;
  return j;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "scope,group,n_docs,n_claims,coverage,retention,claim_retention,tpr,fpr,rho\n";
  auto row = [&](const std::string& scope, const std::string& group, const RateSummary& s) {
    os << scope << ',' << group << ',' << s.n_docs << ',' << s.n_claims << ',' << s.coverage << ','
       << s.retention << ',' << s.claim_retention << ',' << s.tpr << ',' << s.fpr << ',' << s.rho << '\n';
  };
  row("overall", "", report.overall);
  for (const auto& [name, s] : report.groups) row("group", name, s);
  return os.str();
}

json ratio_model_to_json(const RatioModel& model) {
  return {{"coefficients", model.coefficients},
          {"feature_names", {"mean_score", "std_score", "prompt_len", "response_len", "bias"}},
          {"feature_mean", model.feature_mean},
          {"feature_scale", model.feature_scale},
          {"clip_bounds", {model.clip_low, model.clip_high}}};
}

json weight_search_to_json(const WeightSearchResult& r) {
  return {{"weights", r.weights},   {"tau", r.tau},           {"mean_tpr", r.mean_tpr},
          {"mean_fpr", r.mean_fpr}, {"pooled_tpr", r.pooled_tpr}, {"feasible", r.feasible}, {"candidates_evaluated", r.candidates_evaluated}};
}

synth::SimConfig sim_config_from_json(const json& j) {
  try {
    synth::SimConfig c;
    c.n_docs = value_or<std::size_t>(j, "n_docs", c.n_docs);
    if (j.contains("claims_per_doc")) {
      const auto range = j["claims_per_doc"].get<std::vector<std::size_t>>();
      if (range.size() != 2) throw ValidationError("claims_per_doc must be [min, max]");
      c.min_claims = range[0];
      c.max_claims = range[1];
    }
    if (j.contains("groups")) {
      c.groups.clear();
      for (const auto& g : j["groups"]) {
        const auto beta = g.at("beta").get<std::vector<double>>();
        if (beta.size() != 2) throw ValidationError("group beta must be [a, b]");
        c.groups.push_back({g.at("name").get<std::string>(), g.at("proportion").get<double>(), beta[0], beta[1]});
      }
    }
    c.scorer_noise = value_or(j, "scorers", c.scorer_noise);
    c.seed = value_or<std::uint64_t>(j, "seed", c.seed);
    c.alphas = value_or(j, "alphas", c.alphas);
    c.trials = value_or<std::size_t>(j, "trials", c.trials);
    c.epsilon = value_or(j, "epsilon", c.epsilon);
    if (j.contains("split")) {
      const auto& s = j["split"];
      c.split = {s.at("opt").get<double>(), s.at("cal").get<double>(), s.at("test").get<double>()};
    }
    c.stratified = value_or(j, "stratified", c.stratified);
    c.delta = value_or(j, "delta", c.delta);
    c.budget = value_or<std::size_t>(j, "budget", c.budget);
    c.polish_steps = value_or<std::size_t>(j, "polish_steps", c.polish_steps);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed simulation config: ") + e.what());
  }
}

json sim_config_to_json(const synth::SimConfig& c) {
  json groups = json::array();
  for (const auto& g : c.groups) {
    groups.push_back({{"name", g.name}, {"proportion", g.proportion}, {"beta", {g.beta_a, g.beta_b}}});
  }
  return {{"n_docs", c.n_docs},
          {"claims_per_doc", {c.min_claims, c.max_claims}},
          {"groups", groups},
          {"scorers", c.scorer_noise},
          {"seed", c.seed},
          {"alphas", c.alphas},
          {"trials", c.trials},
          {"epsilon", c.epsilon},
          {"split", {{"opt", c.split.opt}, {"cal", c.split.cal}, {"test", c.split.test}}},
          {"stratified", c.stratified},
          {"delta", c.delta},
          {"budget", c.budget},
          {"polish_steps", c.polish_steps}};
}

json experiment_to_json(const synth::ExperimentReport& r) {
  json groups = json::object();
  for (const auto& [name, s] : r.groups) groups[name] = trial_stats_to_json(s);
  return {{"alpha", r.alpha},
          {"mode", r.mode},
          {"convention", r.convention},
          {"ensemble", r.use_ensemble},
          {"trials", r.trials},
          {"overall", trial_stats_to_json(r.overall)},
          {"groups", groups}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

}  // namespace maci::io
