#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "calibkit/error.hpp"
#include "calibkit/program_tokenize.hpp"
#include "support/synthetic.hpp"

using namespace calibkit;

namespace {

std::vector<std::string> toks(std::initializer_list<const char*> list) {
  return {list.begin(), list.end()};
}

std::vector<SubwordRecord> subs(std::initializer_list<std::pair<const char*, double>> list) {
  std::vector<SubwordRecord> out;
  for (const auto& [t, c] : list) out.push_back({t, c});
  return out;
}

}  // namespace

TEST_CASE("lisp tokens split parentheses off") {
  CHECK(tokenize_program("(Yield (size (Event)))", ProgramDialect::kLispLike) ==
        toks({"(", "Yield", "(", "size", "(", "Event", ")", ")", ")"}));
  CHECK(tokenize_program("  (a   b)\n", ProgramDialect::kLispLike) == toks({"(", "a", "b", ")"}));
  CHECK(tokenize_program("", ProgramDialect::kLispLike).empty());
  // unbalanced input is still tokenized
  CHECK(tokenize_program("((x", ProgramDialect::kLispLike) == toks({"(", "(", "x"}));
  CHECK(tokenize_program("#(String \"a b\")", ProgramDialect::kLispLike) ==
        toks({"#", "(", "String", "\"a", "b\"", ")"}));
}

TEST_CASE("sql lexer classifies lexemes") {
  const auto lex = lex_sql("SELECT T1.name, count(*) FROM singer AS T1 WHERE age >= 20.5 AND c = 'it''s'");
  std::vector<std::string> texts;
  for (const auto& l : lex) texts.push_back(l.text);
  CHECK(texts == toks({"SELECT", "T1.name", ",", "count", "(", "*", ")", "FROM", "singer", "AS",
                       "T1", "WHERE", "age", ">=", "20.5", "AND", "c", "=", "'it''s'"}));
  CHECK(lex[0].kind == SqlLexemeKind::kKeyword);
  CHECK(lex[1].kind == SqlLexemeKind::kIdentifier);
  CHECK(lex[2].kind == SqlLexemeKind::kPunctuation);
  CHECK(lex[13].kind == SqlLexemeKind::kOperator);
  CHECK(lex[14].kind == SqlLexemeKind::kNumber);
  CHECK(lex.back().kind == SqlLexemeKind::kString);
  CHECK(lex[1].offset == 7);
}

TEST_CASE("sql keywords are case-insensitive but keep their surface") {
  const auto lex = lex_sql("select Name from T");
  CHECK(lex[0].kind == SqlLexemeKind::kKeyword);
  CHECK(lex[0].text == "select");
  CHECK(lex[1].kind == SqlLexemeKind::kIdentifier);
  CHECK(is_sql_keyword("GrOuP"));
  CHECK_FALSE(is_sql_keyword("singer"));
}

TEST_CASE("sql operators and quoted forms") {
  CHECK(tokenize_program("a<>b", ProgramDialect::kSql) == toks({"a", "<>", "b"}));
  CHECK(tokenize_program("a!=b", ProgramDialect::kSql) == toks({"a", "!=", "b"}));
  CHECK(tokenize_program("x<=-1", ProgramDialect::kSql) == toks({"x", "<=", "-", "1"}));
  CHECK(tokenize_program("\"LA\"", ProgramDialect::kSql) == toks({"\"LA\""}));
  CHECK(tokenize_program("`order id`", ProgramDialect::kSql) == toks({"`order id`"}));
  CHECK(tokenize_program("T1.*", ProgramDialect::kSql) == toks({"T1.*"}));
}

TEST_CASE("unterminated sql literal reports its offset") {
  try {
    lex_sql("SELECT 'abc");
    FAIL("expected TokenizeError");
  } catch (const TokenizeError& e) {
    CHECK(e.offset() == 7);
  }
}

TEST_CASE("detokenize round-trips tokenization") {
  for (const char* program : {"SELECT count(*) FROM t WHERE a = 'x y' AND b >= 3",
                              "SELECT T1.a FROM t AS T1 JOIN u ON T1.id = u.id"}) {
    const auto t = tokenize_program(program, ProgramDialect::kSql);
    CHECK(tokenize_program(detokenize(t), ProgramDialect::kSql) == t);
  }
  const auto t = tokenize_program("(Yield (Event.start (x)))", ProgramDialect::kLispLike);
  CHECK(tokenize_program(detokenize(t), ProgramDialect::kLispLike) == t);
}

TEST_CASE("normalization steps") {
  NormalizationConfig quotes{true, false, false};
  CHECK(normalize_token("'LA'", quotes) == "\"LA\"");
  CHECK(normalize_token("'it''s'", quotes) == "\"it's\"");
  CHECK(normalize_token("'say \"hi\"'", quotes) == "\"say \"\"hi\"\"\"");
  CHECK(normalize_token("\"LA\"", quotes) == "\"LA\"");
  NormalizationConfig fold{false, true, false};
  CHECK(normalize_token("SeLeCt", fold) == "select");
  NormalizationConfig ws{false, false, true};
  CHECK(normalize_token("'a \t  b'", ws) == "'a b'");
  CHECK(normalize_token("x", NormalizationConfig{}) == "x");
}

TEST_CASE("normalization is idempotent") {
  std::mt19937_64 rng(testing::seed_from_env(11));
  const std::string alphabet = "aB'\" \t`x";
  for (int trial = 0; trial < 500; ++trial) {
    std::string token;
    const auto len = rng() % 10;
    for (std::size_t i = 0; i < len; ++i) token.push_back(alphabet[rng() % alphabet.size()]);
    NormalizationConfig cfg{(rng() & 1) != 0, (rng() & 2) != 0, (rng() & 4) != 0};
    const auto once = normalize_token(token, cfg);
    CHECK(normalize_token(once, cfg) == once);
  }
}

TEST_CASE("aggregation") {
  const std::vector<double> c{0.9, 0.5, 0.7};
  CHECK(aggregate_confidence(c, Aggregation::kMin) == doctest::Approx(0.5));
  CHECK(aggregate_confidence(c, Aggregation::kMean) == doctest::Approx(0.7));
  CHECK_THROWS_AS(aggregate_confidence(std::vector<double>{}, Aggregation::kMin), Error);
  CHECK(parse_aggregation("mean") == Aggregation::kMean);
  CHECK_THROWS(parse_aggregation("max"));
}

TEST_CASE("min never exceeds mean, mean never exceeds max") {
  std::mt19937_64 rng(testing::seed_from_env(12));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> c(1 + rng() % 12);
    for (auto& x : c) x = u(rng);
    const double lo = aggregate_confidence(c, Aggregation::kMin);
    const double mean = aggregate_confidence(c, Aggregation::kMean);
    CHECK(lo <= mean);
    CHECK(mean <= *std::max_element(c.begin(), c.end()));
  }
}

TEST_CASE("alignment groups subwords per token") {
  const std::vector<std::string> markers{"Ġ"};
  const auto aligned = align_subwords(toks({"(", "Yield", ")"}),
                                      subs({{"(", 0.9}, {"ĠYi", 0.8}, {"eld", 0.7}, {")", 0.6}}),
                                      markers);
  REQUIRE(aligned.size() == 3);
  CHECK(aligned[1].token == "Yield");
  CHECK(aligned[1].subwords.size() == 2);
  CHECK(aligned[1].subwords[1].confidence == 0.7);
}

TEST_CASE("alignment failure names the first offending subword") {
  try {
    align_subwords(toks({"ab", "c"}), subs({{"a", 0.5}, {"bc", 0.5}}));
    FAIL("expected AlignmentError");
  } catch (const AlignmentError& e) {
    CHECK(e.subword_index() == 1);
    CHECK(std::string(e.what()).find("subword 2") != std::string::npos);
  }
  CHECK_THROWS_AS(align_subwords(toks({"ab"}), subs({{"a", 0.5}, {"x", 0.5}})), AlignmentError);
  CHECK_THROWS_AS(align_subwords(toks({"ab"}), subs({{"a", 0.5}})), AlignmentError);
}

TEST_CASE("alignment reconstructs the tokens") {
  std::mt19937_64 rng(testing::seed_from_env(13));
  const std::vector<std::string> markers{"▁"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> tokens(1 + rng() % 6);
    std::vector<SubwordRecord> stream;
    for (auto& t : tokens) {
      const auto len = 1 + rng() % 7;
      for (std::size_t i = 0; i < len; ++i) t.push_back(static_cast<char>('a' + rng() % 26));
      std::size_t at = 0;
      bool first = true;
      while (at < t.size()) {
        const auto piece = 1 + rng() % (t.size() - at);
        stream.push_back({(first ? markers[0] : "") + t.substr(at, piece), 0.5});
        at += piece;
        first = false;
      }
    }
    const auto aligned = align_subwords(tokens, stream, markers);
    REQUIRE(aligned.size() == tokens.size());
    std::size_t consumed = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      std::string spelled;
      for (const auto& s : aligned[i].subwords) spelled += strip_subword(s.text, markers);
      CHECK(spelled == tokens[i]);
      consumed += aligned[i].subwords.size();
    }
    CHECK(consumed == stream.size());
  }
}

TEST_CASE("teacher-forced records carry emitted subwords") {
  const std::vector<std::string> markers{"Ġ"};
  const auto gold = toks({"(", "size", ")"});
  const std::vector<std::string> gold_subs{"(", "Ġsi", "ze", ")"};
  const auto emitted = subs({{"(", 0.9}, {"Ġsi", 0.8}, {"de", 0.4}, {")", 0.95}});
  const auto records = assemble_gold_token_records(gold, gold_subs, emitted, markers);
  REQUIRE(records.size() == 3);
  CHECK(records[1].gold_token == "size");
  CHECK(records[1].predicted_token == "side");
  CHECK_FALSE(records[1].match);
  CHECK(records[0].match);
  CHECK(records[1].subwords[1].text == "de");
}

TEST_CASE("free-decoded records pair tokens positionally") {
  const std::vector<std::string> markers{"▁"};
  const auto pred = toks({"SELECT", "a", "b"});
  const auto gold = toks({"SELECT", "a"});
  const auto records = assemble_predicted_token_records(
      pred, gold, subs({{"SELECT", 0.9}, {"▁a", 0.8}, {"▁b", 0.3}}), markers);
  REQUIRE(records.size() == 3);
  CHECK(records[1].match);
  CHECK(records[2].gold_token.empty());
  CHECK_FALSE(records[2].match);
}
