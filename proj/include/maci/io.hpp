#pragma once

// File formats: corpus JSONL, model JSON, evaluation report JSON/CSV,
// filter output JSONL, simulation config and report.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "maci/calibration.hpp"
#include "maci/core.hpp"
#include "maci/ensemble.hpp"
#include "maci/metrics.hpp"
#include "maci/shift.hpp"
#include "maci/synth.hpp"

namespace maci::io {

using nlohmann::json;

/// Validation failure while reading a corpus file; carries the 1-based line.
class CorpusError : public ValidationError {
 public:
  CorpusError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

Corpus parse_corpus(std::istream& in, bool require_labels);
Corpus parse_corpus(const std::filesystem::path& path, bool require_labels);

json document_to_json(const Document& doc);
Document document_from_json(const json& j, bool require_labels);
void write_corpus(std::ostream& out, std::span<const Document> docs);
void write_corpus(const std::filesystem::path& path, std::span<const Document> docs);

json convention_to_json(const ConformityConvention& conv);
ConformityConvention convention_from_json(const json& j);

json model_to_json(const CalibrationModel& model);
CalibrationModel model_from_json(const json& j);
CalibrationModel load_model(const std::filesystem::path& path);

json filter_outcome_to_json(const std::string& doc_id, const FilterOutcome& outcome);
/// Reads filter output lines back; ids returned alongside, in file order.
std::vector<std::pair<std::string, FilterOutcome>> parse_filter_output(std::istream& in);

json report_to_json(const EvalReport& report);
/// Flat CSV: scope,group,n_docs,n_claims,coverage,retention,claim_retention,tpr,fpr,rho
std::string report_to_csv(const EvalReport& report);

json ratio_model_to_json(const RatioModel& model);
json weight_search_to_json(const WeightSearchResult& result);

synth::SimConfig sim_config_from_json(const json& j);
json sim_config_to_json(const synth::SimConfig& config);
json experiment_to_json(const synth::ExperimentReport& report);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
json read_json(const std::filesystem::path& path);

}  // namespace maci::io
