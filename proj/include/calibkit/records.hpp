#pragma once

#include <optional>
#include <string>
#include <vector>

namespace calibkit {

inline constexpr int kSchemaVersion = 1;

// One decoding step: the emitted subword and the maximum probability over the
// output vocabulary at that step.
struct SubwordRecord {
  std::string text;
  double confidence = 0.0;

  bool operator==(const SubwordRecord&) const = default;
};

// One program token. `subwords` are the emitted subwords at this token's
// decoding steps and spell predicted_token. On the gold side these are
// teacher-forced: every step was conditioned on the gold prefix, so `match` is
// a per-token accuracy.
struct TokenRecord {
  std::string gold_token;
  std::string predicted_token;
  std::vector<SubwordRecord> subwords;
  bool match = false;

  bool operator==(const TokenRecord&) const = default;
};

struct PredictionRecord {
  std::string example_id;
  std::string model_id;
  std::string dataset_id;
  std::vector<std::string> input_context;
  std::string gold_program;
  std::string predicted_program;
  // Teacher-forced, aligned to the gold program's tokens.
  std::vector<TokenRecord> token_records;
  // Free-decoded, aligned to the predicted program's tokens. gold_token holds
  // the gold token at the same position (empty past the end of the gold
  // program). Required only for sequence-level analyses.
  std::vector<TokenRecord> predicted_token_records;
  std::vector<std::string> beam;
  std::optional<bool> exec_correct;
  std::optional<std::string> difficulty;
  std::optional<double> input_perplexity;

  bool operator==(const PredictionRecord&) const = default;
};

}  // namespace calibkit
