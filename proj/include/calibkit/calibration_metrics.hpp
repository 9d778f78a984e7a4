#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calibkit/program_tokenize.hpp"
#include "calibkit/records.hpp"

namespace calibkit {

// One (confidence, correctness) pair. example_id and position only order ties
// so that chunking is deterministic; weight_key carries the token identity for
// spike analysis.
struct Sample {
  double confidence = 0.0;
  bool correct = false;
  std::string example_id;
  std::size_t position = 0;
  std::optional<std::string> weight_key;
};

enum class BinningStrategy { kAdaptive, kFixed };

std::string_view to_string(BinningStrategy strategy);
BinningStrategy parse_binning_strategy(std::string_view name);

struct BinningConfig {
  BinningStrategy strategy = BinningStrategy::kAdaptive;
  double alpha = 0.05;
  double epsilon = 0.1;
  std::size_t fixed_bin_count = 10;

  // Standard-normal quantile at 1 - alpha/2.
  double z_score() const;
  // Samples per adaptive bin: ceil(0.25 * (z / epsilon)^2).
  std::size_t adaptive_bin_size() const;
  // Throws Error when a parameter is out of range.
  void validate() const;
};

struct CalibrationBin {
  std::size_t sample_count = 0;
  double mean_confidence = 0.0;
  double mean_accuracy = 0.0;
  double confidence_lo = 0.0;
  double confidence_hi = 0.0;
};

enum class ReportLevel { kToken, kSequence };

std::string_view to_string(ReportLevel level);

struct CalibrationReport {
  ReportLevel level = ReportLevel::kToken;
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  double overall_accuracy = 0.0;
  std::size_t total_samples = 0;
  BinningConfig binning;
};

// Sorts by (confidence, example_id, position) and chunks into groups of
// adaptive_bin_size(). A trailing remainder smaller than half a bin joins the
// last full bin; otherwise it forms its own bin. Ranges span the members.
std::vector<CalibrationBin> adaptive_bins(std::span<const Sample> samples,
                                          const BinningConfig& config);

// Equal-width bins over [0, 1]; a confidence of exactly 1 falls in the top
// bin. Empty bins are dropped. Ranges are the bin edges.
std::vector<CalibrationBin> fixed_bins(std::span<const Sample> samples,
                                       const BinningConfig& config);

// Bin membership as indices into `samples`, in ascending confidence order.
struct BinMembers {
  std::vector<std::size_t> indices;
  double confidence_lo = 0.0;
  double confidence_hi = 0.0;
};

// The grouping behind adaptive_bins / fixed_bins (dispatch on strategy), for
// analyses that aggregate other per-sample quantities over the same bins.
std::vector<BinMembers> partition_samples(std::span<const Sample> samples,
                                          const BinningConfig& config);

// Dispatches on config.strategy.
std::vector<CalibrationBin> bin_samples(std::span<const Sample> samples,
                                        const BinningConfig& config);

// 100 * sum_i (|B_i| / total_samples) * |acc_i - conf_i|
double ece(std::span<const CalibrationBin> bins, std::size_t total_samples);

CalibrationReport build_report(std::span<const Sample> samples, ReportLevel level,
                               const BinningConfig& binning);

struct ScoringOptions {
  ProgramDialect dialect = ProgramDialect::kLispLike;
  NormalizationConfig normalization;
};

bool exact_match(std::string_view predicted, std::string_view gold, ProgramDialect dialect,
                 const NormalizationConfig& normalization = {});

// True iff any of beam[0..k-1] exact-matches the gold program.
bool accuracy_at_k(const PredictionRecord& record, std::size_t k, ProgramDialect dialect,
                   const NormalizationConfig& normalization = {});

// Token confidence = method over the token's subwords; sequence confidence =
// the same method over the predicted-side token confidences.
double token_confidence(const TokenRecord& token, Aggregation method);
double sequence_confidence(const PredictionRecord& record, Aggregation method);

std::vector<Sample> token_samples(std::span<const PredictionRecord> records, Aggregation method);
std::vector<Sample> sequence_samples(std::span<const PredictionRecord> records,
                                     Aggregation method, const ScoringOptions& scoring);

CalibrationReport token_level_report(std::span<const PredictionRecord> records,
                                     Aggregation method, const BinningConfig& binning);

// Correctness is exact match of predicted vs gold program.
CalibrationReport sequence_level_report(std::span<const PredictionRecord> records,
                                        Aggregation method, const BinningConfig& binning,
                                        const ScoringOptions& scoring = {});

// Sequence-level report with correctness = accuracy@k over the beam.
CalibrationReport accuracy_at_k_report(std::span<const PredictionRecord> records, std::size_t k,
                                       Aggregation method, const BinningConfig& binning,
                                       const ScoringOptions& scoring = {});

// Sequence-level report with correctness = recorded exec_correct.
CalibrationReport execution_report(std::span<const PredictionRecord> records, Aggregation method,
                                   const BinningConfig& binning);

}  // namespace calibkit
