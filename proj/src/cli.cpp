#include "calibkit/cli.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "calibkit/analysis.hpp"
#include "calibkit/error.hpp"
#include "calibkit/ngram_lm.hpp"
#include "calibkit/prediction_log.hpp"
#include "calibkit/reliability_svg.hpp"
#include "calibkit/report_json.hpp"
#include "calibkit/splits.hpp"

namespace calibkit {
namespace {

namespace fs = std::filesystem;
using OrderedJson = nlohmann::ordered_json;

// Raw flag values; converted to RunConfig after parsing.
struct Flags {
  std::vector<std::string> logs;
  std::string dialect;
  bool unify_quotes = false;
  bool case_fold = false;
  bool collapse_whitespace = false;
  std::string aggregation = "min";
  std::string binning = "adaptive";
  double alpha = 0.05;
  double epsilon = 0.1;
  std::size_t fixed_bins = 10;
  std::string out_dir = ".";
  std::string name;

  // ece / reliability
  std::string level = "token";
  std::size_t k = 1;
  bool standard_axes = false;
  std::string title;

  // splits
  double percentile = 25.0;
  std::optional<double> threshold;

  // coupling
  std::string lm_train;
  std::string lm_load;
  std::string lm_save;
  std::size_t lm_order = 3;
  double lm_k = 0.1;
  bool per_example = false;
  std::optional<double> perplexity_cap;
};

void add_common(CLI::App* cmd, Flags& f, bool scoring, bool binning) {
  cmd->add_option("logs", f.logs, "Prediction log files (JSON Lines)")->required();
  cmd->add_option("--out", f.out_dir, "Output directory")->capture_default_str();
  if (scoring) {
    cmd->add_option("--dialect", f.dialect, "Program dialect (default: log header, else lisp_like)")
        ->check(CLI::IsMember({"lisp_like", "sql"}));
    cmd->add_flag("--unify-quotes", f.unify_quotes, "Treat single- and double-quoted literals alike");
    cmd->add_flag("--case-fold", f.case_fold, "Compare tokens case-insensitively");
    cmd->add_flag("--collapse-whitespace", f.collapse_whitespace,
                  "Collapse whitespace runs inside tokens");
  }
  if (binning) {
    cmd->add_option("--agg", f.aggregation, "Subword/token aggregation")
        ->check(CLI::IsMember({"min", "mean"}))
        ->capture_default_str();
    cmd->add_option("--binning", f.binning, "Binning strategy")
        ->check(CLI::IsMember({"adaptive", "fixed"}))
        ->capture_default_str();
    cmd->add_option("--alpha", f.alpha, "Adaptive binning significance level")
        ->check(CLI::Range(1e-12, 1.0 - 1e-12))
        ->capture_default_str();
    cmd->add_option("--epsilon", f.epsilon, "Adaptive binning tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--bins", f.fixed_bins, "Bin count for fixed binning")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--name", f.name, "Output base name (single log only)");
  }
}

RunConfig to_run_config(const std::string& subcommand, const Flags& f) {
  RunConfig rc;
  rc.subcommand = subcommand;
  rc.log_paths = f.logs;
  if (!f.dialect.empty()) rc.dialect = parse_dialect(f.dialect);
  rc.normalization = {f.unify_quotes, f.case_fold, f.collapse_whitespace};
  rc.aggregation = parse_aggregation(f.aggregation);
  rc.binning.strategy = parse_binning_strategy(f.binning);
  rc.binning.alpha = f.alpha;
  rc.binning.epsilon = f.epsilon;
  rc.binning.fixed_bin_count = f.fixed_bins;
  rc.binning.validate();
  rc.output_dir = f.out_dir;
  return rc;
}

OrderedJson run_config_json(const RunConfig& rc, const Flags& f) {
  OrderedJson j;
  j["subcommand"] = rc.subcommand;
  j["log_paths"] = rc.log_paths;
  j["dialect"] = rc.dialect ? OrderedJson(std::string(to_string(*rc.dialect))) : nullptr;
  j["normalization"] = {{"unify_quotes", rc.normalization.unify_quotes},
                        {"case_fold", rc.normalization.case_fold},
                        {"collapse_whitespace", rc.normalization.collapse_whitespace}};
  j["aggregation"] = std::string(to_string(rc.aggregation));
  j["binning"] = binning_to_json(rc.binning);
  j["output_dir"] = rc.output_dir;
  if (rc.subcommand == "ece" || rc.subcommand == "reliability" || rc.subcommand == "pareto")
    j["level"] = f.level;
  if (f.level == "topk") j["k"] = f.k;
  if (rc.subcommand == "splits") j["percentile"] = f.percentile;
  return j;
}

ScoringOptions scoring_for(const RunConfig& rc, const PredictionLog& log) {
  ScoringOptions s;
  s.dialect = rc.dialect.value_or(log.dialect().value_or(ProgramDialect::kLispLike));
  s.normalization = rc.normalization;
  return s;
}

std::vector<PredictionLog> load_logs(const RunConfig& rc) {
  ReadOptions options;
  options.dialect = rc.dialect;
  std::vector<PredictionLog> logs;
  for (const auto& path : rc.log_paths) {
    try {
      logs.push_back(read_log(path, options));
    } catch (const IoError&) {
      throw;
    } catch (const Error& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }
  return logs;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const OrderedJson& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_out_dir(const RunConfig& rc) {
  fs::path dir(rc.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

CalibrationReport level_report(const PredictionLog& log, const RunConfig& rc, const Flags& f) {
  const auto scoring = scoring_for(rc, log);
  if (f.level == "token") return token_level_report(log.records, rc.aggregation, rc.binning);
  if (f.level == "sequence")
    return sequence_level_report(log.records, rc.aggregation, rc.binning, scoring);
  if (f.level == "execution") return execution_report(log.records, rc.aggregation, rc.binning);
  return accuracy_at_k_report(log.records, f.k, rc.aggregation, rc.binning, scoring);
}

std::string base_name(const PredictionLog& log, const Flags& f, const std::string& suffix) {
  if (!f.name.empty()) return f.name;
  return log.model_id() + "." + log.dataset_id() + (suffix.empty() ? "" : "." + suffix);
}

int cmd_validate(const RunConfig& rc, std::ostream& out) {
  const auto logs = load_logs(rc);
  for (std::size_t i = 0; i < logs.size(); ++i)
    out << rc.log_paths[i] << ": ok, " << logs[i].records.size() << " records (model "
        << logs[i].model_id() << ", dataset " << logs[i].dataset_id() << ")\n";
  for (std::size_t i = 1; i < logs.size(); ++i) {
    const auto report = validate_pair(logs.front().records, logs[i].records);
    out << rc.log_paths.front() << " vs " << rc.log_paths[i] << ": " << report.intersection.size()
        << " shared, " << report.only_in_a.size() << " only in first, " << report.only_in_b.size()
        << " only in second" << (report.aligned() ? " (aligned)" : "") << "\n";
  }
  return 0;
}

int cmd_report(const RunConfig& rc, const Flags& f, bool render, std::ostream& out) {
  if (!f.name.empty() && rc.log_paths.size() > 1)
    throw CLI::ValidationError("--name", "only valid with a single log");
  const auto logs = load_logs(rc);
  const auto dir = prepare_out_dir(rc);
  const std::string suffix = f.level == "topk" ? "acc@" + std::to_string(f.k) : f.level;

  std::vector<std::future<CalibrationReport>> jobs;
  for (const auto& log : logs)
    jobs.push_back(std::async(std::launch::async, [&, ptr = &log] { return level_report(*ptr, rc, f); }));

  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto report = jobs[i].get();
    const std::string name = base_name(logs[i], f, suffix);
    OrderedJson j;
    j["model_id"] = logs[i].model_id();
    j["dataset_id"] = logs[i].dataset_id();
    j["aggregation"] = std::string(to_string(rc.aggregation));
    j["report"] = report_to_json(report);
    j["run_config"] = run_config_json(rc, f);
    write_json(dir / (name + ".report.json"), j);
    out << name << ": ECE " << report.ece << ", accuracy " << report.overall_accuracy << ", "
        << report.bins.size() << " bins, " << report.total_samples << " samples\n";
    if (render) {
      RenderStyle style;
      style.standard_axes = f.standard_axes;
      style.title = f.title.empty() ? logs[i].model_id() + " / " + logs[i].dataset_id() : f.title;
      write_text(dir / (name + ".svg"), render_reliability(report, style));
    }
  }
  return 0;
}

int cmd_splits(const RunConfig& rc, const Flags& f, std::ostream& out) {
  const auto logs = load_logs(rc);
  const auto dir = prepare_out_dir(rc);
  const SplitManifest manifest = f.threshold ? extract_splits(logs, *f.threshold, f.percentile)
                                             : build_splits(logs, f.percentile);
  const auto stats = split_report(manifest, logs, scoring_for(rc, logs.front()));
  write_manifest(manifest, dir / (manifest.dataset_id + ".manifest.json"));
  OrderedJson j;
  j["dataset_id"] = manifest.dataset_id;
  j["threshold"] = manifest.threshold;
  j["percentile"] = manifest.percentile;
  j["hard_count"] = manifest.hard_ids.size();
  j["easy_count"] = manifest.easy_ids.size();
  j["models"] = split_report_to_json(stats);
  j["run_config"] = run_config_json(rc, f);
  write_json(dir / (manifest.dataset_id + ".splits.report.json"), j);
  out << manifest.dataset_id << ": threshold " << manifest.threshold << ", HARD "
      << manifest.hard_ids.size() << ", EASY " << manifest.easy_ids.size() << "\n";
  return 0;
}

int cmd_coupling(const RunConfig& rc, const Flags& f, std::ostream& out) {
  if (rc.log_paths.size() != 1) throw CLI::ValidationError("logs", "coupling takes exactly one log");
  if (!f.lm_train.empty() && !f.lm_load.empty())
    throw CLI::ValidationError("--lm-train", "excludes --lm-load");
  const auto logs = load_logs(rc);
  const auto& log = logs.front();

  std::optional<NGramModel> model;
  if (!f.lm_load.empty()) {
    model = NGramModel::load(f.lm_load);
  } else if (!f.lm_train.empty()) {
    std::ifstream in(f.lm_train);
    if (!in) throw IoError("cannot open training corpus '" + f.lm_train + "'");
    std::vector<std::string> corpus;
    for (std::string line; std::getline(in, line);) corpus.push_back(line);
    model = NGramModel::train(corpus, f.lm_order, f.lm_k);
  }
  if (model && !f.lm_save.empty()) model->save(f.lm_save);

  CouplingOptions options;
  options.per_example_regression = f.per_example;
  options.perplexity_cap = f.perplexity_cap;
  PerplexitySource source;
  if (model) source.model = &*model;
  const auto report = coupling_analysis(log.records, source, rc.binning, scoring_for(rc, log), options);

  const auto dir = prepare_out_dir(rc);
  OrderedJson j;
  j["model_id"] = log.model_id();
  j["dataset_id"] = log.dataset_id();
  j["perplexity_source"] = model ? "ngram" : "stored";
  j["coupling"] = coupling_to_json(report);
  j["run_config"] = run_config_json(rc, f);
  const std::string name = base_name(log, f, "coupling");
  write_json(dir / (name + ".report.json"), j);
  out << name << ": slope_confidence " << report.slope_confidence << ", slope_accuracy "
      << report.slope_accuracy << ", gap " << report.coupling_gap << "\n";
  return 0;
}

int cmd_stratify(const RunConfig& rc, const Flags& f, std::ostream& out) {
  if (rc.log_paths.size() != 1) throw CLI::ValidationError("logs", "stratify takes exactly one log");
  const auto logs = load_logs(rc);
  const auto& log = logs.front();
  const auto strata = stratified_ece(log.records, rc.aggregation, rc.binning, scoring_for(rc, log));
  const auto dir = prepare_out_dir(rc);
  OrderedJson j;
  j["model_id"] = log.model_id();
  j["dataset_id"] = log.dataset_id();
  j["strata"] = strata_to_json(strata);
  j["run_config"] = run_config_json(rc, f);
  const std::string name = base_name(log, f, "strata");
  write_json(dir / (name + ".report.json"), j);
  for (const auto& [label, s] : strata)
    out << label << ": ECE " << s.ece << ", accuracy " << s.accuracy << ", n=" << s.count
        << (s.single_bin_fallback ? " (single bin)" : "") << "\n";
  return 0;
}

int cmd_pareto(const RunConfig& rc, const Flags& f, std::ostream& out) {
  const auto logs = load_logs(rc);
  std::vector<std::future<ParetoEntry>> jobs;
  for (const auto& log : logs) {
    jobs.push_back(std::async(std::launch::async, [&, ptr = &log] {
      const auto scoring = scoring_for(rc, *ptr);
      ParetoEntry e;
      e.model_id = ptr->model_id();
      std::size_t correct = 0;
      for (const auto& rec : ptr->records)
        correct += exact_match(rec.predicted_program, rec.gold_program, scoring.dialect,
                               scoring.normalization)
                       ? 1
                       : 0;
      e.overall_accuracy = ptr->records.empty()
                               ? 0.0
                               : static_cast<double>(correct) / static_cast<double>(ptr->records.size());
      e.ece = level_report(*ptr, rc, f).ece;
      return e;
    }));
  }
  std::vector<ParetoEntry> entries;
  for (auto& job : jobs) entries.push_back(job.get());
  const auto table = pareto_table(entries);
  const auto dir = prepare_out_dir(rc);
  OrderedJson j;
  j["table"] = pareto_to_json(table);
  j["run_config"] = run_config_json(rc, f);
  write_json(dir / ((f.name.empty() ? std::string("pareto") : f.name) + ".report.json"), j);
  for (const auto& e : table)
    out << (e.on_front ? "* " : "  ") << e.model_id << ": EM " << e.overall_accuracy << ", ECE "
        << e.ece << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"calibkit: calibration reports for semantic parser prediction logs", "calibkit"};
  app.require_subcommand(1);
  Flags f;

  auto* validate = app.add_subcommand("validate", "Validate logs and report example-id alignment");
  add_common(validate, f, true, false);

  auto* ece = app.add_subcommand("ece", "Write a calibration report per log");
  add_common(ece, f, true, true);
  auto* reliability = app.add_subcommand("reliability", "Calibration report plus SVG diagram");
  add_common(reliability, f, true, true);
  for (auto* cmd : {ece, reliability}) {
    cmd->add_option("--level", f.level, "token | sequence | execution | topk")
        ->check(CLI::IsMember({"token", "sequence", "execution", "topk"}))
        ->capture_default_str();
    cmd->add_option("--k", f.k, "k for --level topk")->check(CLI::PositiveNumber);
  }
  reliability->add_flag("--standard-axes", f.standard_axes,
                        "Confidence on x, accuracy on y (default is the reverse)");
  reliability->add_option("--title", f.title, "Diagram title");

  auto* splits = app.add_subcommand("splits", "Extract EASY/HARD splits from aligned model logs");
  add_common(splits, f, true, false);
  splits->add_option("--percentile", f.percentile, "Pooled confidence percentile")
      ->check(CLI::Range(0.0, 100.0))
      ->capture_default_str();
  splits->add_option("--threshold", f.threshold, "Use this threshold instead of the percentile");

  auto* coupling = app.add_subcommand("coupling", "Input perplexity vs confidence/accuracy slopes");
  add_common(coupling, f, true, true);
  coupling->add_option("--lm-train", f.lm_train, "Train an n-gram LM on this file (one input per line)");
  coupling->add_option("--lm-load", f.lm_load, "Load an n-gram count table");
  coupling->add_option("--lm-save", f.lm_save, "Save the n-gram count table here");
  coupling->add_option("--lm-order", f.lm_order, "n-gram order")->check(CLI::PositiveNumber);
  coupling->add_option("--lm-k", f.lm_k, "Add-k smoothing constant")->check(CLI::PositiveNumber);
  coupling->add_flag("--per-example", f.per_example, "Regress over examples instead of bins");
  coupling->add_option("--perplexity-cap", f.perplexity_cap, "Drop inputs above this perplexity");

  auto* stratify = app.add_subcommand("stratify", "Sequence ECE per difficulty label");
  add_common(stratify, f, true, true);

  auto* pareto = app.add_subcommand("pareto", "Accuracy vs ECE table with Pareto-front flags");
  add_common(pareto, f, true, true);
  pareto->add_option("--level", f.level, "ECE level: token | sequence")
      ->check(CLI::IsMember({"token", "sequence"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 2;
  }

  try {
    CLI::App* chosen = app.get_subcommands().front();
    const RunConfig rc = to_run_config(chosen->get_name(), f);
    if (chosen == validate) return cmd_validate(rc, out);
    if (chosen == ece) return cmd_report(rc, f, false, out);
    if (chosen == reliability) return cmd_report(rc, f, true, out);
    if (chosen == splits) return cmd_splits(rc, f, out);
    if (chosen == coupling) return cmd_coupling(rc, f, out);
    if (chosen == stratify) return cmd_stratify(rc, f, out);
    return cmd_pareto(rc, f, out);
  } catch (const CLI::ValidationError& e) {
    err << "calibkit: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "calibkit: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace calibkit
