// Acceptance suite. Prints one PASS/FAIL line per criterion followed by the
// measured values, and exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "calibkit/analysis.hpp"
#include "calibkit/calibration_metrics.hpp"
#include "calibkit/reliability_svg.hpp"
#include "calibkit/report_json.hpp"
#include "calibkit/splits.hpp"
#include "support/synthetic.hpp"

using namespace calibkit;
namespace ct = calibkit::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool condition, const std::string& what) {
    detail << "    " << (condition ? "ok   " : "FAIL ") << what << "\n";
    pass = pass && condition;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome ece_oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(ct::seed_from_env(1001));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BinningConfig cfg;
  cfg.epsilon = 0.2;  // n = 25, so sets of up to 200 samples span several bins
  double worst = 0.0;
  const auto start = Clock::now();
  for (int set = 0; set < 50; ++set) {
    std::vector<Sample> samples(1 + rng() % 200);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double c = (set % 2 == 0) ? u(rng) : std::round(u(rng) * 10.0) / 10.0;
      samples[i] = {c, u(rng) < c, ct::padded_id("x", rng() % 50), i, {}};
    }
    const double got = build_report(samples, ReportLevel::kToken, cfg).ece;
    const double want = ct::oracle_adaptive_ece(samples, cfg.alpha, cfg.epsilon);
    worst = std::max(worst, std::abs(got - want));
  }
  const double elapsed = seconds_since(start);
  o.expect(worst <= 1e-9, "max |module - oracle| over 50 sets = " + num(worst));
  o.expect(elapsed < 1.0, "runtime " + num(elapsed) + " s < 1 s");
  return o;
}

Outcome adaptive_bin_sizing() {
  Outcome o;
  BinningConfig cfg;
  const auto capacity = cfg.adaptive_bin_size();
  o.expect(capacity == 97, "capacity = " + std::to_string(capacity));
  o.expect(ct::oracle_bin_size(0.05, 0.1) == 97, "independent quantile gives 97");

  std::mt19937_64 rng(ct::seed_from_env(1002));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Sample> samples(10000);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = {u(rng), u(rng) < 0.5, "s", i, {}};
  const auto bins = adaptive_bins(samples, cfg);
  bool all_full = true;
  for (std::size_t b = 0; b + 1 < bins.size(); ++b) all_full = all_full && bins[b].sample_count == 97;
  o.expect(all_full, std::to_string(bins.size()) + " bins, all but the last hold 97; last holds " +
                         std::to_string(bins.back().sample_count));
  return o;
}

Outcome calibration_sanity() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(ct::seed_from_env(1003));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<Sample> calibrated(100000);
  for (std::size_t i = 0; i < calibrated.size(); ++i) {
    const double c = u(rng);
    calibrated[i] = {c, u(rng) < c, "t", i, {}};
  }
  const double calibrated_ece = build_report(calibrated, ReportLevel::kToken, BinningConfig{}).ece;
  o.expect(calibrated_ece < 1.0,
           "Bernoulli(confidence), 100000 tokens, default binning: ECE = " + num(calibrated_ece) +
               " (< 1.0 required)");

  std::vector<Sample> over(100000);
  for (std::size_t i = 0; i < over.size(); ++i) {
    const double c = 0.2 + 0.8 * u(rng);
    over[i] = {c, u(rng) < c - 0.2, "t", i, {}};
  }
  const double over_ece = build_report(over, ReportLevel::kToken, BinningConfig{}).ece;
  o.expect(std::abs(over_ece - 20.0) <= 0.5, "0.2 over-confident: ECE = " + num(over_ece) + " (20 +/- 0.5)");

  const double elapsed = seconds_since(start);
  o.expect(elapsed < 5.0, "runtime " + num(elapsed) + " s < 5 s");
  return o;
}

Outcome min_vs_mean_separation() {
  Outcome o;
  std::mt19937_64 rng(ct::seed_from_env(1004));
  std::vector<PredictionRecord> records;
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t length = 20 + rng() % 11;
    const bool wrong = i % 2 == 1;
    std::vector<double> conf(length, 0.99);
    if (wrong) conf[rng() % length] = 0.1;
    auto rec = ct::sequence_record(ct::padded_id("q", i), conf, !wrong);
    records.push_back(std::move(rec));
  }
  const double min_ece = sequence_level_report(records, Aggregation::kMin, BinningConfig{}).ece;
  const double mean_ece = sequence_level_report(records, Aggregation::kMean, BinningConfig{}).ece;
  o.expect(mean_ece - min_ece >= 5.0,
           "mean ECE " + num(mean_ece) + " - min ECE " + num(min_ece) + " >= 5");
  return o;
}

PredictionLog random_model(const std::string& model, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PredictionLog log;
  for (std::size_t i = 0; i < 400; ++i)
    log.records.push_back(ct::sequence_record(ct::padded_id("ex", i), {u(rng), u(rng)}, true, model));
  return log;
}

Outcome split_properties() {
  Outcome o;
  std::mt19937_64 rng(ct::seed_from_env(1005));
  std::vector<PredictionLog> logs{random_model("m1", rng), random_model("m2", rng),
                                  random_model("m3", rng)};
  const auto m = build_splits(logs);

  std::set<std::string> unioned;
  for (const auto& log : logs)
    for (const auto& rec : log.records)
      if (sequence_confidence(rec, Aggregation::kMin) < m.threshold) unioned.insert(rec.example_id);
  o.expect(m.hard_ids == unioned, "HARD equals the union of per-model below-threshold sets (" +
                                      std::to_string(m.hard_ids.size()) + " ids)");
  o.expect(m.hard_ids.size() + m.easy_ids.size() == 400, "|EASY| + |HARD| = " +
                                                              std::to_string(m.hard_ids.size() + m.easy_ids.size()));

  bool never_shrinks = true;
  for (int trial = 0; trial < 20; ++trial) {
    auto four = logs;
    four.push_back(random_model("m4", rng));
    const auto bigger = extract_splits(four, m.threshold);
    for (const auto& id : m.hard_ids) never_shrinks = never_shrinks && bigger.hard_ids.contains(id);
  }
  o.expect(never_shrinks, "adding a fourth model at the same threshold never shrinks HARD (20 trials)");

  PredictionLog solo;
  std::vector<double> conf(400);
  for (std::size_t i = 0; i < conf.size(); ++i) conf[i] = (static_cast<double>(i) + 1.0) / 401.0;
  std::shuffle(conf.begin(), conf.end(), rng);
  for (std::size_t i = 0; i < conf.size(); ++i)
    solo.records.push_back(ct::sequence_record(ct::padded_id("ex", i), {conf[i]}, true, "solo"));
  std::vector<PredictionLog> single{solo};
  const auto s = build_splits(single);
  const auto hard = static_cast<long>(s.hard_ids.size());
  o.expect(std::abs(hard - 100) <= 1, "single model: |HARD| = " + std::to_string(hard) + " of 400");
  return o;
}

Outcome exact_match_strictness() {
  Outcome o;
  const ProgramDialect sql = ProgramDialect::kSql;
  o.expect(!exact_match("x > 0 AND x < 5", "x < 5 AND x > 0", sql),
           "reordered conjunction is not an exact match");
  const std::string single = "SELECT name FROM people WHERE name = 'Janessa'";
  const std::string dbl = "SELECT name FROM people WHERE name = \"Janessa\"";
  NormalizationConfig off;
  NormalizationConfig others{false, true, true};
  NormalizationConfig on{true, false, false};
  o.expect(!exact_match(single, dbl, sql, off), "quote styles differ with normalization off");
  o.expect(!exact_match(single, dbl, sql, others), "quote styles differ with only case/whitespace on");
  o.expect(exact_match(single, dbl, sql, on), "quote styles match with unify_quotes on");
  return o;
}

std::vector<PredictionRecord> coupling_suite(std::mt19937_64& rng,
                                             const std::function<double(double)>& confidence,
                                             const std::function<double(double)>& accuracy) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PredictionRecord> records;
  for (std::size_t i = 0; i < 20000; ++i) {
    const double ppl = 1.0 + 9.0 * u(rng);
    auto rec = ct::sequence_record(ct::padded_id("c", i), {confidence(ppl)}, u(rng) < accuracy(ppl));
    rec.input_perplexity = ppl;
    records.push_back(std::move(rec));
  }
  return records;
}

Outcome coupling_directionality() {
  Outcome o;
  std::mt19937_64 rng(ct::seed_from_env(1006));
  const auto linear = [](double p) { return 0.95 - 0.08 * (p - 1.0); };
  const auto tied = coupling_suite(rng, linear, linear);
  const auto a = coupling_analysis(tied, PerplexitySource{}, BinningConfig{});
  o.expect(a.coupling_gap < 0.01, "coupled suite: slopes " + num(a.slope_confidence) + " / " +
                                      num(a.slope_accuracy) + ", gap " + num(a.coupling_gap) + " < 0.01");

  const auto split = coupling_suite(
      rng, [](double p) { return 0.5 + 0.04 * (p - 1.0); },
      [](double p) { return 0.9 - 0.06 * (p - 1.0); });
  const auto b = coupling_analysis(split, PerplexitySource{}, BinningConfig{});
  o.expect(b.slope_confidence > 0.0 && b.slope_accuracy < 0.0,
           "diverging suite: slope_confidence " + num(b.slope_confidence) + " > 0 > slope_accuracy " +
               num(b.slope_accuracy));
  return o;
}

Outcome stratified_ece_monotonicity() {
  Outcome o;
  std::vector<PredictionRecord> records;
  const std::vector<std::pair<std::string, int>> strata{
      {"easy", 90}, {"medium", 80}, {"hard", 70}, {"extra", 60}};
  for (const auto& [label, correct] : strata)
    for (int i = 0; i < 100; ++i) {
      auto rec = ct::sequence_record(label + ct::padded_id("_", i), {0.9}, i < correct);
      rec.difficulty = label;
      records.push_back(std::move(rec));
    }
  const auto result = stratified_ece(records, Aggregation::kMin, BinningConfig{});
  double previous = -1.0;
  bool increasing = true;
  bool near = true;
  std::string values;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    const double e = result.at(strata[i].first).ece;
    increasing = increasing && e > previous;
    near = near && std::abs(e - 10.0 * static_cast<double>(i)) <= 0.5;
    previous = e;
    values += (i ? ", " : "") + num(e);
  }
  o.expect(increasing, "strictly increasing: " + values);
  o.expect(near, "within 0.5 of 0, 10, 20, 30");
  return o;
}

Outcome execution_vs_em_leniency() {
  Outcome o;
  std::mt19937_64 rng(ct::seed_from_env(1007));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PredictionRecord> records;
  for (std::size_t i = 0; i < 2000; ++i) {
    const double c = 0.3 + 0.7 * u(rng);
    const bool em = u(rng) < c - 0.15;
    auto rec = ct::sequence_record(ct::padded_id("e", i), {c}, em);
    rec.exec_correct = em;
    records.push_back(std::move(rec));
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (!*records[i].exec_correct && sequence_confidence(records[i], Aggregation::kMin) >= 0.8)
      candidates.push_back(i);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const std::size_t flips = candidates.size() / 10;
  for (std::size_t j = 0; j < flips; ++j) records[candidates[j]].exec_correct = true;

  const double em_ece = sequence_level_report(records, Aggregation::kMin, BinningConfig{}).ece;
  const double exec_ece = execution_report(records, Aggregation::kMin, BinningConfig{}).ece;
  o.expect(flips > 0, std::to_string(flips) + " of " + std::to_string(candidates.size()) +
                          " high-confidence EM-false records flipped");
  o.expect(exec_ece < em_ece, "execution ECE " + num(exec_ece) + " < EM ECE " + num(em_ece));
  return o;
}

Outcome rendering_determinism() {
  Outcome o;
  std::mt19937_64 rng(ct::seed_from_env(1008));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Sample> samples(1000);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double c = u(rng);
    samples[i] = {c, u(rng) < c, "r", i, {}};
  }
  const auto report = build_report(samples, ReportLevel::kToken, BinningConfig{});
  RenderStyle style;
  style.title = "synthetic";
  const auto first = render_reliability(report, style);
  const auto second = render_reliability(report, style);
  const auto reloaded = render_reliability(report_from_json(nlohmann::json::parse(report_to_json(report).dump())), style);
  o.expect(first == second, "two renders are byte-identical");
  o.expect(first == reloaded, "render after a JSON round-trip of the report is byte-identical");
  static const std::regex circle("<circle class=\"bin\"");
  const auto circles = static_cast<std::size_t>(
      std::distance(std::sregex_iterator(first.begin(), first.end(), circle), std::sregex_iterator()));
  o.expect(circles == report.bins.size(),
           std::to_string(circles) + " circles for " + std::to_string(report.bins.size()) + " bins");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ece_oracle_equivalence", ece_oracle_equivalence},
      {"adaptive_bin_sizing", adaptive_bin_sizing},
      {"calibration_sanity", calibration_sanity},
      {"min_vs_mean_separation", min_vs_mean_separation},
      {"split_properties", split_properties},
      {"exact_match_strictness", exact_match_strictness},
      {"coupling_directionality", coupling_directionality},
      {"stratified_ece_monotonicity", stratified_ece_monotonicity},
      {"execution_vs_em_leniency", execution_vs_em_leniency},
      {"rendering_determinism", rendering_determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail << "    threw: " << e.what() << "\n";
    }
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << name << "\n" << outcome.detail.str();
    failures += outcome.pass ? 0 : 1;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
            << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}
