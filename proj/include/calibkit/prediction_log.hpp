#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "calibkit/program_tokenize.hpp"
#include "calibkit/records.hpp"

namespace calibkit {

// Optional first line of a log file:
//   {"schema_version":1,"kind":"header","model_id":...,"dataset_id":...,
//    "dialect":"sql","marker_prefixes":["Ġ"],
//    "normalization":{"unify_quotes":true,"case_fold":false,"collapse_whitespace":false}}
// dataset_id, dialect and normalization may be omitted. normalization is the
// mode under which every TokenRecord.match was computed; absent means strict.
struct LogHeader {
  std::string model_id;
  std::optional<std::string> dataset_id;
  std::optional<ProgramDialect> dialect;
  std::vector<std::string> marker_prefixes;
  NormalizationConfig normalization;

  bool operator==(const LogHeader&) const = default;
};

// One log file: exactly one (model_id, dataset_id).
struct PredictionLog {
  std::optional<LogHeader> header;
  std::vector<PredictionRecord> records;

  // Taken from the first record, or the header for an empty log.
  std::string model_id() const;
  std::string dataset_id() const;
  std::optional<ProgramDialect> dialect() const;
  std::span<const std::string> marker_prefixes() const;
  // The header's match mode, strict when there is no header.
  NormalizationConfig normalization() const;
};

struct ReadOptions {
  // Overrides the header's dialect. When neither is known, gold/predicted
  // token records are checked against the programs whitespace-insensitively
  // instead of against an exact re-tokenization.
  std::optional<ProgramDialect> dialect;
  // Overrides the header's mode when re-deriving and checking
  // TokenRecord.match.
  std::optional<NormalizationConfig> normalization;
};

// Reads a JSON Lines log. Blank lines are skipped. Throws IoError, ParseError
// (with 1-based line number) or ValidationError (naming line, example_id and
// field).
PredictionLog read_log(const std::filesystem::path& path, const ReadOptions& options = {});
PredictionLog parse_log(std::istream& in, const ReadOptions& options = {});

// Checks every invariant of an in-memory log; throws ValidationError.
void validate_log(const PredictionLog& log, const ReadOptions& options = {});

// Canonical form: fixed key order, shortest round-trip floats, optional fields
// omitted when unset, one record per line with a trailing newline.
std::string record_to_json_line(const PredictionRecord& record);
std::string header_to_json_line(const LogHeader& header);
std::string serialize_log(const PredictionLog& log);
void write_log(const PredictionLog& log, const std::filesystem::path& path);

struct AlignmentReport {
  std::set<std::string> intersection;
  std::set<std::string> only_in_a;
  std::set<std::string> only_in_b;

  bool aligned() const { return only_in_a.empty() && only_in_b.empty(); }
};

// Compares example_id sets of two logs over the same dataset. Throws
// ValidationError when the dataset ids differ.
AlignmentReport validate_pair(std::span<const PredictionRecord> log_a,
                              std::span<const PredictionRecord> log_b);

}  // namespace calibkit
