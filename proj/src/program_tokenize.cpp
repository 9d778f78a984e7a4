#include "calibkit/program_tokenize.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>

#include "calibkit/error.hpp"

namespace calibkit {
namespace {

constexpr std::string_view kSqlKeywords[] = {
    "ADD",      "ALL",       "ALTER",   "AND",     "ANY",      "AS",       "ASC",
    "AVG",      "BETWEEN",   "BY",      "CASE",    "CAST",     "COUNT",    "CREATE",
    "CROSS",    "DELETE",    "DESC",    "DISTINCT", "DROP",    "ELSE",     "END",
    "EXCEPT",   "EXISTS",    "FALSE",   "FROM",    "FULL",     "GLOB",     "GROUP",
    "HAVING",   "IN",        "INNER",   "INSERT",  "INTERSECT", "INTO",    "IS",
    "JOIN",     "LEFT",      "LIKE",    "LIMIT",   "MAX",      "MIN",      "NATURAL",
    "NOT",      "NULL",      "OFFSET",  "ON",      "OR",       "ORDER",    "OUTER",
    "RIGHT",    "SELECT",    "SET",     "SUM",     "TABLE",    "THEN",     "TRUE",
    "UNION",    "UPDATE",    "USING",   "VALUES",  "WHEN",     "WHERE",    "WITH",
    "INDEX",    "PRIMARY",   "KEY",     "FOREIGN", "REFERENCES", "VIEW",   "COLLATE",
    "ESCAPE",   "REPLACE",   "IF",      "NOCASE",  "ROWID",    "ABS",
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_ident_start(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalpha(u) != 0 || c == '_' || u >= 0x80;
}

bool is_ident_char(char c) {
  return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c)) != 0 || c == '$';
}

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string remove_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    if (!is_space(c)) out.push_back(c);
  return out;
}

// Scans a quoted run starting at text[begin] (the opening quote). A doubled
// quote character inside the run is an escaped quote.
std::size_t scan_quoted(std::string_view text, std::size_t begin) {
  const char quote = text[begin];
  std::size_t i = begin + 1;
  while (i < text.size()) {
    if (text[i] == quote) {
      if (i + 1 < text.size() && text[i + 1] == quote) {
        i += 2;
        continue;
      }
      return i + 1;
    }
    ++i;
  }
  throw TokenizeError("unterminated quoted literal", begin);
}

std::vector<std::string> tokenize_lisp(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (c == '(' || c == ')') {
      flush();
      tokens.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

bool has_prefix(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

// Returns the marker-stripped, trimmed text and whether the raw piece opened a
// new word (leading marker or leading whitespace).
std::pair<std::string, bool> decode_piece(std::string_view text,
                                          std::span<const std::string> marker_prefixes) {
  bool boundary = !text.empty() && is_space(text.front());
  std::string_view rest = text;
  while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
  std::size_t best = 0;
  for (const auto& marker : marker_prefixes)
    if (!marker.empty() && marker.size() > best && has_prefix(rest, marker)) best = marker.size();
  if (best > 0) {
    boundary = true;
    rest.remove_prefix(best);
  }
  while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
  while (!rest.empty() && is_space(rest.back())) rest.remove_suffix(1);
  return {std::string(rest), boundary};
}

std::string decode_pieces(std::span<const std::string> pieces,
                          std::span<const std::string> marker_prefixes) {
  std::string out;
  for (const auto& piece : pieces) {
    auto [text, boundary] = decode_piece(piece, marker_prefixes);
    if (text.empty()) continue;
    if (boundary && !out.empty()) out.push_back(' ');
    out += text;
  }
  return out;
}

bool tokens_match(std::string_view a, std::string_view b, const NormalizationConfig& config) {
  return normalize_token(a, config) == normalize_token(b, config);
}

}  // namespace

std::string_view to_string(ProgramDialect dialect) {
  return dialect == ProgramDialect::kSql ? "sql" : "lisp_like";
}

ProgramDialect parse_dialect(std::string_view name) {
  if (name == "sql") return ProgramDialect::kSql;
  if (name == "lisp_like" || name == "lisp") return ProgramDialect::kLispLike;
  throw ParseError("unknown dialect '" + std::string(name) + "'", 0);
}

bool is_sql_keyword(std::string_view word) {
  const std::string key = upper(word);
  return std::find(std::begin(kSqlKeywords), std::end(kSqlKeywords), key) != std::end(kSqlKeywords);
}

std::vector<SqlLexeme> lex_sql(std::string_view text) {
  std::vector<SqlLexeme> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (c == '\'' || c == '"') {
      i = scan_quoted(text, i);
      out.push_back({SqlLexemeKind::kString, std::string(text.substr(start, i - start)), start});
    } else if (c == '`') {
      i = scan_quoted(text, i);
      out.push_back(
          {SqlLexemeKind::kIdentifier, std::string(text.substr(start, i - start)), start});
    } else if (is_digit(c) || (c == '.' && i + 1 < n && is_digit(text[i + 1]))) {
      while (i < n && is_digit(text[i])) ++i;
      if (i < n && text[i] == '.' && i + 1 < n && is_digit(text[i + 1])) {
        ++i;
        while (i < n && is_digit(text[i])) ++i;
      }
      if (i < n && (text[i] == 'e' || text[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < n && (text[j] == '+' || text[j] == '-')) ++j;
        if (j < n && is_digit(text[j])) {
          i = j;
          while (i < n && is_digit(text[i])) ++i;
        }
      }
      out.push_back({SqlLexemeKind::kNumber, std::string(text.substr(start, i - start)), start});
    } else if (is_ident_start(c)) {
      bool dotted = false;
      while (i < n && is_ident_char(text[i])) ++i;
      while (i + 1 < n && text[i] == '.' && (is_ident_start(text[i + 1]) || text[i + 1] == '*')) {
        dotted = true;
        ++i;
        if (text[i] == '*') {
          ++i;
          break;
        }
        while (i < n && is_ident_char(text[i])) ++i;
      }
      std::string word(text.substr(start, i - start));
      const auto kind =
          !dotted && is_sql_keyword(word) ? SqlLexemeKind::kKeyword : SqlLexemeKind::kIdentifier;
      out.push_back({kind, std::move(word), start});
    } else {
      static constexpr std::array<std::string_view, 6> kTwoChar = {">=", "<=", "!=",
                                                                   "<>", "==", "||"};
      const auto two = text.substr(i, 2);
      if (two.size() == 2 && std::find(kTwoChar.begin(), kTwoChar.end(), two) != kTwoChar.end()) {
        i += 2;
        out.push_back({SqlLexemeKind::kOperator, std::string(two), start});
      } else {
        ++i;
        const bool op = std::string_view("=<>+-*/%").find(c) != std::string_view::npos;
        out.push_back({op ? SqlLexemeKind::kOperator : SqlLexemeKind::kPunctuation,
                       std::string(1, c), start});
      }
    }
  }
  return out;
}

std::vector<std::string> tokenize_program(std::string_view text, ProgramDialect dialect) {
  if (dialect == ProgramDialect::kLispLike) return tokenize_lisp(text);
  std::vector<std::string> tokens;
  for (auto& lexeme : lex_sql(text)) tokens.push_back(std::move(lexeme.text));
  return tokens;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

std::string normalize_token(std::string_view token, const NormalizationConfig& config) {
  std::string out(token);
  if (config.collapse_whitespace) {
    std::string collapsed;
    bool pending_space = false;
    for (char c : out) {
      if (is_space(c)) {
        pending_space = !collapsed.empty();
        continue;
      }
      if (pending_space) collapsed.push_back(' ');
      pending_space = false;
      collapsed.push_back(c);
    }
    out = std::move(collapsed);
  }
  if (config.unify_quotes && out.size() >= 2 && out.front() == '\'' && out.back() == '\'') {
    std::string unified = "\"";
    for (std::size_t i = 1; i + 1 < out.size(); ++i) {
      if (out[i] == '\'' && i + 2 < out.size() && out[i + 1] == '\'') {
        unified.push_back('\'');
        ++i;
      } else if (out[i] == '"') {
        unified += "\"\"";
      } else {
        unified.push_back(out[i]);
      }
    }
    unified.push_back('"');
    out = std::move(unified);
  }
  if (config.case_fold)
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> normalize(std::span<const std::string> tokens,
                                   const NormalizationConfig& config) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(normalize_token(t, config));
  return out;
}

std::string_view to_string(Aggregation method) {
  return method == Aggregation::kMin ? "min" : "mean";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "min") return Aggregation::kMin;
  if (name == "mean") return Aggregation::kMean;
  throw ParseError("unknown aggregation '" + std::string(name) + "'", 0);
}

double aggregate_confidence(std::span<const double> confidences, Aggregation method) {
  if (confidences.empty()) throw Error("cannot aggregate an empty confidence list");
  if (method == Aggregation::kMin) return *std::min_element(confidences.begin(), confidences.end());
  const double sum = std::accumulate(confidences.begin(), confidences.end(), 0.0);
  // Clamp guards the last ulp of rounding so the result stays a probability.
  return std::clamp(sum / static_cast<double>(confidences.size()),
                    *std::min_element(confidences.begin(), confidences.end()),
                    *std::max_element(confidences.begin(), confidences.end()));
}

double aggregate_confidence(std::span<const SubwordRecord> subwords, Aggregation method) {
  std::vector<double> values;
  values.reserve(subwords.size());
  for (const auto& s : subwords) values.push_back(s.confidence);
  return aggregate_confidence(values, method);
}

std::string strip_subword(std::string_view text, std::span<const std::string> marker_prefixes) {
  return remove_whitespace(decode_piece(text, marker_prefixes).first);
}

std::vector<AlignedToken> align_subwords(std::span<const std::string> program_tokens,
                                         std::span<const SubwordRecord> subword_stream,
                                         std::span<const std::string> marker_prefixes) {
  std::vector<std::string> targets;
  targets.reserve(program_tokens.size());
  for (std::size_t t = 0; t < program_tokens.size(); ++t) {
    targets.push_back(remove_whitespace(program_tokens[t]));
    if (targets.back().empty())
      throw AlignmentError("program token " + std::to_string(t + 1) + " is blank", 0);
  }

  std::vector<AlignedToken> out;
  std::vector<SubwordRecord> pending;  // blank subwords waiting for the next token
  AlignedToken current;
  std::size_t token_index = 0;
  std::size_t consumed = 0;

  for (std::size_t j = 0; j < subword_stream.size(); ++j) {
    const auto& subword = subword_stream[j];
    const std::string piece = strip_subword(subword.text, marker_prefixes);
    const std::string label = "subword " + std::to_string(j + 1) + " (\"" + subword.text + "\")";
    if (piece.empty()) {
      if (consumed > 0)
        current.subwords.push_back(subword);
      else
        pending.push_back(subword);
      continue;
    }
    if (token_index >= targets.size())
      throw AlignmentError("alignment failure at " + label + ": extends past the last token", j);
    const std::string_view remaining = std::string_view(targets[token_index]).substr(consumed);
    if (!has_prefix(remaining, piece)) {
      if (has_prefix(piece, remaining))
        throw AlignmentError("alignment failure at " + label + ": crosses the boundary after token " +
                                 std::to_string(token_index + 1) + " (\"" +
                                 program_tokens[token_index] + "\")",
                             j);
      throw AlignmentError("alignment failure at " + label + ": does not match token " +
                               std::to_string(token_index + 1) + " (\"" +
                               program_tokens[token_index] + "\") at character " +
                               std::to_string(consumed),
                           j);
    }
    if (consumed == 0) {
      current.token = program_tokens[token_index];
      current.subwords = std::move(pending);
      pending.clear();
    }
    current.subwords.push_back(subword);
    consumed += piece.size();
    if (consumed == targets[token_index].size()) {
      out.push_back(std::move(current));
      current = AlignedToken{};
      ++token_index;
      consumed = 0;
    }
  }
  if (token_index < targets.size())
    throw AlignmentError("alignment failure: subword stream ends inside token " +
                             std::to_string(token_index + 1) + " (\"" +
                             program_tokens[token_index] + "\")",
                         subword_stream.size());
  if (!pending.empty()) {
    if (out.empty()) throw AlignmentError("alignment failure: no program tokens", 0);
    for (auto& s : pending) out.back().subwords.push_back(std::move(s));
  }
  return out;
}

std::string decode_subwords(std::span<const SubwordRecord> subwords,
                            std::span<const std::string> marker_prefixes) {
  std::vector<std::string> texts;
  texts.reserve(subwords.size());
  for (const auto& s : subwords) texts.push_back(s.text);
  return decode_pieces(texts, marker_prefixes);
}

std::vector<TokenRecord> assemble_gold_token_records(
    std::span<const std::string> gold_tokens, std::span<const std::string> gold_subwords,
    std::span<const SubwordRecord> emitted, std::span<const std::string> marker_prefixes,
    const NormalizationConfig& normalization) {
  if (emitted.size() != gold_subwords.size())
    throw ValidationError("emitted stream has " + std::to_string(emitted.size()) +
                          " subwords but the gold stream has " +
                          std::to_string(gold_subwords.size()));
  std::vector<SubwordRecord> reference;
  reference.reserve(gold_subwords.size());
  for (const auto& text : gold_subwords) reference.push_back({text, 1.0});
  const auto aligned = align_subwords(gold_tokens, reference, marker_prefixes);
  std::vector<TokenRecord> out;
  out.reserve(aligned.size());
  std::size_t cursor = 0;
  for (const auto& slice : aligned) {
    const auto own = emitted.subspan(cursor, slice.subwords.size());
    cursor += slice.subwords.size();
    TokenRecord rec;
    rec.gold_token = slice.token;
    rec.predicted_token = decode_subwords(own, marker_prefixes);
    rec.subwords.assign(own.begin(), own.end());
    rec.match = tokens_match(rec.predicted_token, rec.gold_token, normalization);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TokenRecord> assemble_predicted_token_records(
    std::span<const std::string> predicted_tokens, std::span<const std::string> gold_tokens,
    std::span<const SubwordRecord> predicted_subwords,
    std::span<const std::string> marker_prefixes, const NormalizationConfig& normalization) {
  auto aligned = align_subwords(predicted_tokens, predicted_subwords, marker_prefixes);
  std::vector<TokenRecord> out;
  out.reserve(aligned.size());
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    TokenRecord rec;
    rec.gold_token = i < gold_tokens.size() ? gold_tokens[i] : std::string();
    rec.predicted_token = std::move(aligned[i].token);
    rec.subwords = std::move(aligned[i].subwords);
    rec.match = tokens_match(rec.predicted_token, rec.gold_token, normalization);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace calibkit
