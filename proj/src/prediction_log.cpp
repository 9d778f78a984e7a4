#include "calibkit/prediction_log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "calibkit/error.hpp"

namespace calibkit {
namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

const std::vector<std::string> kRecordKeys = {
    "schema_version", "example_id",   "model_id",     "dataset_id",
    "input_context",  "gold_program", "predicted_program", "token_records",
    "predicted_token_records", "beam", "exec_correct", "difficulty",
    "input_perplexity"};
const std::vector<std::string> kHeaderKeys = {"schema_version", "kind", "model_id",
                                              "dataset_id", "dialect", "marker_prefixes",
                                              "normalization"};
const std::vector<std::string> kNormalizationKeys = {"unify_quotes", "case_fold",
                                                     "collapse_whitespace"};
const std::vector<std::string> kTokenKeys = {"gold_token", "predicted_token", "subwords", "match"};
const std::vector<std::string> kSubwordKeys = {"text", "confidence"};

// Location of the value being decoded, for error messages.
struct Where {
  std::size_t line = 0;
  std::string example_id;

  [[noreturn]] void fail(const std::string& field, const std::string& message) const {
    std::string prefix = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
    if (!example_id.empty()) prefix += "example '" + example_id + "': ";
    throw ValidationError(prefix + "field '" + field + "': " + message);
  }
};

void reject_unknown_keys(const Json& obj, const std::vector<std::string>& allowed,
                         const Where& where, const std::string& path) {
  for (const auto& item : obj.items())
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      where.fail(path.empty() ? item.key() : path + "." + item.key(), "unknown field");
}

const Json& require(const Json& obj, const char* key, const Where& where, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) where.fail(path, "missing required field");
  return *it;
}

std::string as_string(const Json& v, const Where& where, const std::string& path) {
  if (!v.is_string()) where.fail(path, "expected a string");
  return v.get<std::string>();
}

double as_number(const Json& v, const Where& where, const std::string& path) {
  if (!v.is_number()) where.fail(path, "expected a number");
  return v.get<double>();
}

bool as_bool(const Json& v, const Where& where, const std::string& path) {
  if (!v.is_boolean()) where.fail(path, "expected a boolean");
  return v.get<bool>();
}

std::vector<std::string> as_string_list(const Json& v, const Where& where,
                                        const std::string& path) {
  if (!v.is_array()) where.fail(path, "expected an array of strings");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_string(v[i], where, path + "[" + std::to_string(i) + "]"));
  return out;
}

void check_schema_version(const Json& obj, const Where& where) {
  const Json& v = require(obj, "schema_version", where, "schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion)
    where.fail("schema_version", "expected " + std::to_string(kSchemaVersion));
}

std::vector<TokenRecord> decode_tokens(const Json& v, const Where& where, const std::string& path) {
  if (!v.is_array()) where.fail(path, "expected an array");
  std::vector<TokenRecord> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string tpath = path + "[" + std::to_string(i) + "]";
    const Json& t = v[i];
    if (!t.is_object()) where.fail(tpath, "expected an object");
    reject_unknown_keys(t, kTokenKeys, where, tpath);
    TokenRecord rec;
    rec.gold_token = as_string(require(t, "gold_token", where, tpath + ".gold_token"), where,
                               tpath + ".gold_token");
    rec.predicted_token =
        as_string(require(t, "predicted_token", where, tpath + ".predicted_token"), where,
                  tpath + ".predicted_token");
    rec.match = as_bool(require(t, "match", where, tpath + ".match"), where, tpath + ".match");
    const Json& subs = require(t, "subwords", where, tpath + ".subwords");
    if (!subs.is_array()) where.fail(tpath + ".subwords", "expected an array");
    for (std::size_t j = 0; j < subs.size(); ++j) {
      const std::string spath = tpath + ".subwords[" + std::to_string(j) + "]";
      if (!subs[j].is_object()) where.fail(spath, "expected an object");
      reject_unknown_keys(subs[j], kSubwordKeys, where, spath);
      SubwordRecord s;
      s.text = as_string(require(subs[j], "text", where, spath + ".text"), where, spath + ".text");
      s.confidence = as_number(require(subs[j], "confidence", where, spath + ".confidence"),
                               where, spath + ".confidence");
      rec.subwords.push_back(std::move(s));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

PredictionRecord decode_record(const Json& obj, Where& where) {
  reject_unknown_keys(obj, kRecordKeys, where, "");
  PredictionRecord rec;
  rec.example_id = as_string(require(obj, "example_id", where, "example_id"), where, "example_id");
  where.example_id = rec.example_id;
  check_schema_version(obj, where);
  rec.model_id = as_string(require(obj, "model_id", where, "model_id"), where, "model_id");
  rec.dataset_id = as_string(require(obj, "dataset_id", where, "dataset_id"), where, "dataset_id");
  rec.input_context =
      as_string_list(require(obj, "input_context", where, "input_context"), where, "input_context");
  rec.gold_program =
      as_string(require(obj, "gold_program", where, "gold_program"), where, "gold_program");
  rec.predicted_program = as_string(require(obj, "predicted_program", where, "predicted_program"),
                                    where, "predicted_program");
  rec.token_records =
      decode_tokens(require(obj, "token_records", where, "token_records"), where, "token_records");
  if (auto it = obj.find("predicted_token_records"); it != obj.end())
    rec.predicted_token_records = decode_tokens(*it, where, "predicted_token_records");
  rec.beam = as_string_list(require(obj, "beam", where, "beam"), where, "beam");
  if (auto it = obj.find("exec_correct"); it != obj.end())
    rec.exec_correct = as_bool(*it, where, "exec_correct");
  if (auto it = obj.find("difficulty"); it != obj.end())
    rec.difficulty = as_string(*it, where, "difficulty");
  if (auto it = obj.find("input_perplexity"); it != obj.end())
    rec.input_perplexity = as_number(*it, where, "input_perplexity");
  return rec;
}

LogHeader decode_header(const Json& obj, const Where& where) {
  reject_unknown_keys(obj, kHeaderKeys, where, "");
  check_schema_version(obj, where);
  LogHeader header;
  header.model_id = as_string(require(obj, "model_id", where, "model_id"), where, "model_id");
  if (auto it = obj.find("dataset_id"); it != obj.end())
    header.dataset_id = as_string(*it, where, "dataset_id");
  if (auto it = obj.find("dialect"); it != obj.end()) {
    const auto name = as_string(*it, where, "dialect");
    if (name != "sql" && name != "lisp_like") where.fail("dialect", "unknown dialect '" + name + "'");
    header.dialect = parse_dialect(name);
  }
  header.marker_prefixes = as_string_list(require(obj, "marker_prefixes", where, "marker_prefixes"),
                                          where, "marker_prefixes");
  if (auto it = obj.find("normalization"); it != obj.end()) {
    if (!it->is_object()) where.fail("normalization", "expected an object");
    reject_unknown_keys(*it, kNormalizationKeys, where, "normalization");
    auto flag = [&](const char* key) {
      auto f = it->find(key);
      return f == it->end() ? false : as_bool(*f, where, std::string("normalization.") + key);
    };
    header.normalization = {flag("unify_quotes"), flag("case_fold"), flag("collapse_whitespace")};
  }
  return header;
}

std::string squash(std::string_view s) { return strip_subword(s, {}); }

std::string concat_squashed(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) out += squash(t);
  return out;
}

void validate_token_side(const std::vector<TokenRecord>& tokens, const std::string& program,
                         bool gold_side, const std::optional<ProgramDialect>& dialect,
                         std::span<const std::string> markers,
                         const NormalizationConfig& normalization, const Where& where) {
  const std::string field = gold_side ? "token_records" : "predicted_token_records";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    const std::string tpath = field + "[" + std::to_string(i) + "]";
    if (t.subwords.empty()) where.fail(tpath + ".subwords", "must not be empty");
    std::string spelled;
    for (std::size_t j = 0; j < t.subwords.size(); ++j) {
      const auto& s = t.subwords[j];
      const std::string spath = tpath + ".subwords[" + std::to_string(j) + "]";
      if (s.text.empty()) where.fail(spath + ".text", "must not be empty");
      if (!(s.confidence >= 0.0 && s.confidence <= 1.0)) {
        std::ostringstream os;
        os << "confidence " << s.confidence << " is outside [0, 1]";
        where.fail(spath + ".confidence", os.str());
      }
      spelled += strip_subword(s.text, markers);
    }
    if (spelled != squash(t.predicted_token))
      where.fail(tpath + ".subwords",
                 "subwords spell '" + spelled + "' but predicted_token is '" + t.predicted_token +
                     "'");
    const bool expected = normalize_token(t.predicted_token, normalization) ==
                          normalize_token(t.gold_token, normalization);
    if (expected != t.match)
      where.fail(tpath + ".match", std::string("stored ") + (t.match ? "true" : "false") +
                                       " disagrees with the token comparison");
  }
  if (tokens.empty()) return;

  std::vector<std::string> side;
  side.reserve(tokens.size());
  for (const auto& t : tokens) side.push_back(gold_side ? t.gold_token : t.predicted_token);
  const std::string program_field = gold_side ? "gold_program" : "predicted_program";
  if (dialect) {
    std::vector<std::string> expected;
    try {
      expected = tokenize_program(program, *dialect);
    } catch (const TokenizeError& e) {
      where.fail(program_field, e.what());
    }
    if (expected != side)
      where.fail(field, "tokens do not reconstruct the " + std::string(to_string(*dialect)) +
                            " tokenization of " + program_field + " (" +
                            std::to_string(side.size()) + " vs " +
                            std::to_string(expected.size()) + " tokens)");
  } else if (concat_squashed(side) != squash(program)) {
    where.fail(field, "tokens do not spell " + program_field);
  }
}

void validate_record(const PredictionRecord& rec, const std::optional<ProgramDialect>& dialect,
                     std::span<const std::string> markers, const NormalizationConfig& normalization,
                     const Where& where) {
  if (rec.example_id.empty()) where.fail("example_id", "must not be empty");
  validate_token_side(rec.token_records, rec.gold_program, true, dialect, markers, normalization,
                      where);
  validate_token_side(rec.predicted_token_records, rec.predicted_program, false, dialect, markers,
                      normalization, where);
  if (!rec.beam.empty() && rec.beam.front() != rec.predicted_program)
    where.fail("beam[0]", "does not equal predicted_program");
  if (rec.input_perplexity && !(*rec.input_perplexity > 0.0 && std::isfinite(*rec.input_perplexity)))
    where.fail("input_perplexity", "must be a positive finite number");
}

OrderedJson encode_tokens(const std::vector<TokenRecord>& tokens) {
  OrderedJson arr = OrderedJson::array();
  for (const auto& t : tokens) {
    OrderedJson subs = OrderedJson::array();
    for (const auto& s : t.subwords) {
      OrderedJson sj;
      sj["text"] = s.text;
      sj["confidence"] = s.confidence;
      subs.push_back(std::move(sj));
    }
    OrderedJson tj;
    tj["gold_token"] = t.gold_token;
    tj["predicted_token"] = t.predicted_token;
    tj["subwords"] = std::move(subs);
    tj["match"] = t.match;
    arr.push_back(std::move(tj));
  }
  return arr;
}

}  // namespace

std::string PredictionLog::model_id() const {
  if (!records.empty()) return records.front().model_id;
  return header ? header->model_id : std::string();
}

std::string PredictionLog::dataset_id() const {
  if (!records.empty()) return records.front().dataset_id;
  return header && header->dataset_id ? *header->dataset_id : std::string();
}

std::optional<ProgramDialect> PredictionLog::dialect() const {
  return header ? header->dialect : std::nullopt;
}

NormalizationConfig PredictionLog::normalization() const {
  return header ? header->normalization : NormalizationConfig{};
}

std::span<const std::string> PredictionLog::marker_prefixes() const {
  if (!header) return {};
  return header->marker_prefixes;
}

PredictionLog parse_log(std::istream& in, const ReadOptions& options) {
  PredictionLog log;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json obj;
    try {
      obj = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object()) throw ParseError("expected a JSON object", line_no);
    Where where{line_no, {}};

    const bool is_header = obj.contains("kind");
    if (is_header) {
      if (!first_content) where.fail("kind", "a header is only allowed on the first line");
      if (obj["kind"] != "header") where.fail("kind", "expected \"header\"");
      log.header = decode_header(obj, where);
      first_content = false;
      continue;
    }
    first_content = false;

    PredictionRecord rec = decode_record(obj, where);
    const std::string& expect_model =
        log.records.empty() ? (log.header ? log.header->model_id : rec.model_id)
                            : log.records.front().model_id;
    if (rec.model_id != expect_model)
      where.fail("model_id", "'" + rec.model_id + "' differs from the log's '" + expect_model +
                                 "'; a log covers one model");
    std::string expect_dataset = rec.dataset_id;
    if (!log.records.empty())
      expect_dataset = log.records.front().dataset_id;
    else if (log.header && log.header->dataset_id)
      expect_dataset = *log.header->dataset_id;
    if (rec.dataset_id != expect_dataset)
      where.fail("dataset_id", "'" + rec.dataset_id + "' differs from the log's '" +
                                   expect_dataset + "'; a log covers one dataset");
    if (!seen.insert(rec.example_id).second) where.fail("example_id", "duplicate example_id");

    const auto dialect = options.dialect ? options.dialect : log.dialect();
    validate_record(rec, dialect, log.marker_prefixes(),
                    options.normalization.value_or(log.normalization()), where);
    log.records.push_back(std::move(rec));
  }
  return log;
}

PredictionLog read_log(const std::filesystem::path& path, const ReadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open log file '" + path.string() + "'");
  return parse_log(in, options);
}

void validate_log(const PredictionLog& log, const ReadOptions& options) {
  std::unordered_set<std::string> seen;
  const auto dialect = options.dialect ? options.dialect : log.dialect();
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& rec = log.records[i];
    Where where{0, rec.example_id};
    if (rec.model_id != log.model_id()) where.fail("model_id", "a log covers one model");
    if (rec.dataset_id != log.dataset_id()) where.fail("dataset_id", "a log covers one dataset");
    if (!seen.insert(rec.example_id).second) where.fail("example_id", "duplicate example_id");
    validate_record(rec, dialect, log.marker_prefixes(),
                    options.normalization.value_or(log.normalization()), where);
  }
}

std::string record_to_json_line(const PredictionRecord& rec) {
  OrderedJson j;
  j["schema_version"] = kSchemaVersion;
  j["example_id"] = rec.example_id;
  j["model_id"] = rec.model_id;
  j["dataset_id"] = rec.dataset_id;
  j["input_context"] = rec.input_context;
  j["gold_program"] = rec.gold_program;
  j["predicted_program"] = rec.predicted_program;
  j["token_records"] = encode_tokens(rec.token_records);
  if (!rec.predicted_token_records.empty())
    j["predicted_token_records"] = encode_tokens(rec.predicted_token_records);
  j["beam"] = rec.beam;
  if (rec.exec_correct) j["exec_correct"] = *rec.exec_correct;
  if (rec.difficulty) j["difficulty"] = *rec.difficulty;
  if (rec.input_perplexity) j["input_perplexity"] = *rec.input_perplexity;
  return j.dump(-1, ' ', false, Json::error_handler_t::strict);
}

std::string header_to_json_line(const LogHeader& header) {
  OrderedJson j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "header";
  j["model_id"] = header.model_id;
  if (header.dataset_id) j["dataset_id"] = *header.dataset_id;
  if (header.dialect) j["dialect"] = std::string(to_string(*header.dialect));
  j["marker_prefixes"] = header.marker_prefixes;
  if (header.normalization != NormalizationConfig{})
    j["normalization"] = OrderedJson{{"unify_quotes", header.normalization.unify_quotes},
                                     {"case_fold", header.normalization.case_fold},
                                     {"collapse_whitespace", header.normalization.collapse_whitespace}};
  return j.dump();
}

std::string serialize_log(const PredictionLog& log) {
  std::string out;
  if (log.header) out += header_to_json_line(*log.header) + "\n";
  for (const auto& rec : log.records) out += record_to_json_line(rec) + "\n";
  return out;
}

void write_log(const PredictionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write log file '" + path.string() + "'");
  out << serialize_log(log);
  if (!out) throw IoError("failed writing log file '" + path.string() + "'");
}

AlignmentReport validate_pair(std::span<const PredictionRecord> log_a,
                              std::span<const PredictionRecord> log_b) {
  if (!log_a.empty() && !log_b.empty() && log_a.front().dataset_id != log_b.front().dataset_id)
    throw ValidationError("logs cover different datasets: '" + log_a.front().dataset_id +
                          "' vs '" + log_b.front().dataset_id + "'");
  std::set<std::string> ids_a;
  std::set<std::string> ids_b;
  for (const auto& r : log_a) ids_a.insert(r.example_id);
  for (const auto& r : log_b) ids_b.insert(r.example_id);
  AlignmentReport report;
  std::set_intersection(ids_a.begin(), ids_a.end(), ids_b.begin(), ids_b.end(),
                        std::inserter(report.intersection, report.intersection.end()));
  std::set_difference(ids_a.begin(), ids_a.end(), ids_b.begin(), ids_b.end(),
                      std::inserter(report.only_in_a, report.only_in_a.end()));
  std::set_difference(ids_b.begin(), ids_b.end(), ids_a.begin(), ids_a.end(),
                      std::inserter(report.only_in_b, report.only_in_b.end()));
  return report;
}

}  // namespace calibkit
