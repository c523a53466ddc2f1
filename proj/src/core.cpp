#include "maci/core.hpp"

#include <cmath>
#include <sstream>

namespace maci {

bool Document::fully_labeled() const {
  for (const auto& c : claims) {
    if (!c.label) return false;
  }
  return true;
}

std::vector<std::size_t> Document::true_claims() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < claims.size(); ++j) {
    if (!claims[j].label) {
      throw ValidationError("document '" + id + "': claim " + std::to_string(j) +
                            " has no label");
    }
    if (*claims[j].label) out.push_back(j);
  }
  return out;
}

void ConformityConvention::validate() const {
  if (!(epsilon > 0.0) || epsilon > 1e-3) {
    throw ValidationError("convention epsilon must lie in (0, 1e-3]");
  }
  if (variant == Variant::power_mean && !(lambda > 0.0 && std::isfinite(lambda))) {
    throw ValidationError("power-mean exponent must be positive");
  }
}

std::string ConformityConvention::tag() const {
  switch (variant) {
    case Variant::product:
      return "product";
    case Variant::log_sum:
      return "log-sum";
    case Variant::worst_case:
      return "worst-case";
    case Variant::power_mean: {
      std::ostringstream os;
      os.precision(17);
      os << "power-mean:" << lambda;
      return os.str();
    }
  }
  return "unknown";
}

ConformityConvention ConformityConvention::parse(const std::string& text, double eps) {
  ConformityConvention conv;
  conv.epsilon = eps;
  if (text == "product") {
    conv.variant = Variant::product;
  } else if (text == "log-sum" || text == "log_sum") {
    conv.variant = Variant::log_sum;
  } else if (text == "worst-case" || text == "worst_case" || text == "bci") {
    conv.variant = Variant::worst_case;
  } else if (text.rfind("power-mean", 0) == 0 || text.rfind("power_mean", 0) == 0) {
    conv.variant = Variant::power_mean;
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
      throw ValidationError("power-mean convention needs an exponent, e.g. power-mean:2");
    }
    try {
      std::size_t used = 0;
      conv.lambda = std::stod(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError("bad power-mean exponent in '" + text + "'");
    }
  } else {
    throw ValidationError("unknown conformity convention '" + text + "'");
  }
  conv.validate();
  return conv;
}

std::string to_string(CalibrationMode mode) {
  return mode == CalibrationMode::marginal ? "marginal" : "group";
}

CalibrationMode parse_mode(const std::string& text) {
  if (text == "marginal") return CalibrationMode::marginal;
  if (text == "group") return CalibrationMode::group;
  throw ValidationError("unknown calibration mode '" + text + "'");
}

void check_simplex(std::span<const double> weights) {
  if (weights.empty()) throw ValidationError("weight vector is empty");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("weights must be finite and nonnegative");
    }
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw ValidationError("weights must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

std::vector<double> uniform_weights(std::size_t m) {
  if (m == 0) throw ValidationError("need at least one scorer");
  return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

void CalibrationModel::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  convention.validate();
  if (num_scorers == 0) throw ValidationError("model has no scorers");
  if (global_weights.size() != num_scorers) {
    throw ValidationError("global weight vector length differs from scorer count");
  }
  check_simplex(global_weights);
  if (!(marginal_threshold >= 0.0 && marginal_threshold <= 1.0)) {
    throw ValidationError("marginal threshold outside [0,1]");
  }
  for (const auto& [name, g] : groups) {
    if (g.weights.size() != num_scorers) {
      throw ValidationError("group '" + name + "' weight length differs from scorer count");
    }
    check_simplex(g.weights);
    if (!(g.threshold >= 0.0 && g.threshold <= 1.0)) {
      throw ValidationError("group '" + name + "' threshold outside [0,1]");
    }
    if (g.count < 1) throw ValidationError("group '" + name + "' has no calibration documents");
  }
  if (delta && !(*delta > 0.0 && *delta < 1.0)) throw ValidationError("delta must lie in (0,1)");
}

bool CalibrationModel::fully_degenerate() const {
  if (mode == CalibrationMode::marginal || groups.empty()) return marginal_threshold >= 1.0;
  for (const auto& [_, g] : groups) {
    if (g.threshold < 1.0) return false;
  }
  return true;
}

CorpusStats validate_corpus(std::span<const Document> docs, bool require_labels) {
  if (docs.empty()) throw ValidationError("empty corpus");
  CorpusStats stats;
  stats.n_docs = docs.size();
  for (const auto& doc : docs) {
    if (doc.claims.empty()) {
      throw ValidationError("document '" + doc.id + "' has an empty claim list");
    }
    if (doc.prompt_len && *doc.prompt_len < 0) {
      throw ValidationError("document '" + doc.id + "' has negative prompt_len");
    }
    if (doc.response_len && *doc.response_len < 0) {
      throw ValidationError("document '" + doc.id + "' has negative response_len");
    }
    ++stats.group_counts[doc.group];
    for (const auto& claim : doc.claims) {
      if (claim.scores.empty()) {
        throw ValidationError("document '" + doc.id + "': claim without scores");
      }
      if (stats.num_scorers == 0) {
        stats.num_scorers = claim.scores.size();
      } else if (claim.scores.size() != stats.num_scorers) {
        throw ValidationError("document '" + doc.id + "': inconsistent scorer count (expected " +
                              std::to_string(stats.num_scorers) + ", got " +
                              std::to_string(claim.scores.size()) + ")");
      }
      for (double s : claim.scores) {
        if (!(s >= 0.0 && s <= 1.0)) {
          throw ValidationError("document '" + doc.id + "': score out of range [0,1]");
        }
      }
      if (claim.oracle_score && !(*claim.oracle_score >= 0.0 && *claim.oracle_score <= 1.0)) {
        throw ValidationError("document '" + doc.id + "': oracle score out of range [0,1]");
      }
      if (claim.label) {
        ++stats.labeled_claims;
        if (*claim.label) ++stats.true_claims;
      } else if (require_labels) {
        throw ValidationError("document '" + doc.id + "': missing label");
      }
      ++stats.n_claims;
    }
  }
  if (stats.labeled_claims > 0) {
    stats.rho = static_cast<double>(stats.true_claims) / static_cast<double>(stats.labeled_claims);
  }
  return stats;
}

}  // namespace maci
