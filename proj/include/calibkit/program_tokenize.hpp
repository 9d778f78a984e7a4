#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calibkit/records.hpp"

namespace calibkit {

enum class ProgramDialect { kLispLike, kSql };

std::string_view to_string(ProgramDialect dialect);
// Accepts "lisp_like" / "lisp" and "sql". Throws ParseError (line 0) otherwise.
ProgramDialect parse_dialect(std::string_view name);

struct NormalizationConfig {
  bool unify_quotes = false;
  bool case_fold = false;
  bool collapse_whitespace = false;

  bool operator==(const NormalizationConfig&) const = default;
};

enum class SqlLexemeKind { kKeyword, kIdentifier, kNumber, kString, kOperator, kPunctuation };

struct SqlLexeme {
  SqlLexemeKind kind;
  std::string text;  // surface form, quotes included for literals
  std::size_t offset;
};

// Lexes SQL into keywords, identifiers (optionally dotted, e.g. T1.name),
// numbers, quoted literals, operators and punctuation. Keywords are classified
// case-insensitively; surface text is preserved.
// Throws TokenizeError on an unterminated quoted literal.
std::vector<SqlLexeme> lex_sql(std::string_view text);

bool is_sql_keyword(std::string_view word);

// Splits a program into program tokens.
//  lisp_like: parentheses are standalone tokens, everything else is
//             whitespace-delimited. Parentheses need not balance.
//  sql:       the lexemes of lex_sql().
std::vector<std::string> tokenize_program(std::string_view text, ProgramDialect dialect);

// Joins tokens with single spaces. tokenize_program(detokenize(t)) == t for
// any t produced by tokenize_program.
std::string detokenize(std::span<const std::string> tokens);

std::string normalize_token(std::string_view token, const NormalizationConfig& config);
std::vector<std::string> normalize(std::span<const std::string> tokens,
                                   const NormalizationConfig& config);

enum class Aggregation { kMin, kMean };

std::string_view to_string(Aggregation method);
Aggregation parse_aggregation(std::string_view name);

// Reduces subword confidences to one confidence. Throws Error on empty input.
double aggregate_confidence(std::span<const double> confidences, Aggregation method);
double aggregate_confidence(std::span<const SubwordRecord> subwords, Aggregation method);

// Strips the first matching marker prefix (longest first) and all whitespace.
std::string strip_subword(std::string_view text, std::span<const std::string> marker_prefixes);

struct AlignedToken {
  std::string token;
  std::vector<SubwordRecord> subwords;
};

// Partitions the subword stream into contiguous slices, one per program token.
// Matching is on characters after marker stripping, ignoring whitespace.
// Subwords that strip to nothing attach to the token being built (or the first
// token when they lead the stream).
// Throws AlignmentError naming the first subword that crosses a token boundary
// or does not match.
std::vector<AlignedToken> align_subwords(std::span<const std::string> program_tokens,
                                         std::span<const SubwordRecord> subword_stream,
                                         std::span<const std::string> marker_prefixes = {});

// Builds teacher-forced token records. gold_subwords is the reference
// segmentation fed as the prefix; emitted holds, at each of those positions,
// the argmax subword and its probability. The gold segmentation fixes the
// partition into tokens; predicted_token is the decoded emitted text of each
// slice. Stored subwords are the emitted ones.
std::vector<TokenRecord> assemble_gold_token_records(
    std::span<const std::string> gold_tokens, std::span<const std::string> gold_subwords,
    std::span<const SubwordRecord> emitted, std::span<const std::string> marker_prefixes,
    const NormalizationConfig& normalization = {});

// Decodes emitted subword texts into one token: markers stripped, a single
// space inserted at word boundaries.
std::string decode_subwords(std::span<const SubwordRecord> subwords,
                            std::span<const std::string> marker_prefixes);

// Builds free-decoded token records for the predicted program.
std::vector<TokenRecord> assemble_predicted_token_records(
    std::span<const std::string> predicted_tokens, std::span<const std::string> gold_tokens,
    std::span<const SubwordRecord> predicted_subwords,
    std::span<const std::string> marker_prefixes, const NormalizationConfig& normalization = {});

}  // namespace calibkit
