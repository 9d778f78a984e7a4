#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "calibkit/calibration_metrics.hpp"
#include "calibkit/ngram_lm.hpp"
#include "calibkit/records.hpp"

namespace calibkit {

// ---------------------------------------------------------------------------
// Input perplexity vs. confidence/accuracy coupling

struct CouplingPoint {
  double perplexity = 0.0;
  double confidence = 0.0;
  bool correct = false;
  std::string example_id;
};

struct CouplingBin {
  double mean_perplexity = 0.0;
  double mean_confidence = 0.0;
  double mean_accuracy = 0.0;
  std::size_t sample_count = 0;
};

struct CouplingOptions {
  // Fit the lines over individual examples instead of bin means.
  bool per_example_regression = false;
  // Examples with perplexity above the cap are dropped. Off by default.
  std::optional<double> perplexity_cap;
};

struct CouplingReport {
  std::vector<CouplingBin> bins;
  double slope_confidence = 0.0;
  double slope_accuracy = 0.0;
  double coupling_gap = 0.0;
  bool per_example_regression = false;
  std::size_t excluded_by_cap = 0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Weighted ordinary least squares of y on x. Throws Error when fewer than two
// distinct x values carry weight.
LineFit weighted_least_squares(std::span<const double> x, std::span<const double> y,
                               std::span<const double> weights);

// Bins points by confidence with the calibration binning machinery, averages
// perplexity/confidence/accuracy per bin and fits both lines against mean
// perplexity, weighted by bin size. Throws Error with fewer than two bins.
CouplingReport coupling_from_points(std::span<const CouplingPoint> points,
                                    const BinningConfig& binning,
                                    const CouplingOptions& options = {});

// Where each record's input perplexity comes from: the stored
// input_perplexity field (model == nullptr) or an n-gram model scoring the
// joined input context.
struct PerplexitySource {
  const NGramModel* model = nullptr;
};

// The input context joined with single spaces.
std::string input_text(const PredictionRecord& record);

// Sequence confidences use min aggregation; correctness is exact match.
CouplingReport coupling_analysis(std::span<const PredictionRecord> records,
                                 const PerplexitySource& source, const BinningConfig& binning,
                                 const ScoringOptions& scoring = {},
                                 const CouplingOptions& options = {});

nlohmann::ordered_json coupling_to_json(const CouplingReport& report);

// ---------------------------------------------------------------------------
// Difficulty-stratified sequence ECE

struct StratumResult {
  double ece = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
  // The stratum held fewer samples than one adaptive bin, so it was scored
  // as a single bin.
  bool single_bin_fallback = false;
  CalibrationReport report;
};

// Independent sequence-level reports per `difficulty` label. Throws
// ValidationError listing records that carry no label.
std::map<std::string, StratumResult> stratified_ece(std::span<const PredictionRecord> records,
                                                    Aggregation method,
                                                    const BinningConfig& binning,
                                                    const ScoringOptions& scoring = {});

nlohmann::ordered_json strata_to_json(const std::map<std::string, StratumResult>& strata);

// ---------------------------------------------------------------------------
// Accuracy vs. ECE trade-off

struct ParetoEntry {
  std::string model_id;
  double overall_accuracy = 0.0;
  double ece = 0.0;
  bool on_front = false;
};

// Flags an entry iff no other entry has accuracy >= and ECE <= with at least
// one strict. Output is sorted by accuracy (descending), then ECE, then id.
std::vector<ParetoEntry> pareto_table(std::span<const ParetoEntry> entries);

nlohmann::ordered_json pareto_to_json(std::span<const ParetoEntry> table);

}  // namespace calibkit
