#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "calibkit/cli.hpp"
#include "json.hpp"
#include "support/synthetic.hpp"

using namespace calibkit;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "calibkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const char* name) { return std::string(CALIBKIT_FIXTURES) + "/" + name; }

nlohmann::json load_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("validate reports counts") {
  const auto r = run({"validate", fixture("spider_tiny.jsonl"), fixture("smcalflow_tiny.jsonl")});
  CHECK(r.code == 1);  // different datasets cannot be paired
  const auto ok = run({"validate", fixture("spider_tiny.jsonl")});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("4 records") != std::string::npos);
}

TEST_CASE("ece writes a report per log") {
  testing::TempDir dir;
  const auto r = run({"ece", fixture("spider_tiny.jsonl"), "--level", "sequence", "--out",
                      dir.path().string()});
  REQUIRE(r.code == 0);
  const auto j = load_json(dir.path() / "t5-base.spider-dev.sequence.report.json");
  CHECK(j["report"]["total_samples"] == 4);
  CHECK(j["report"]["level"] == "sequence");
  CHECK(j["run_config"]["binning"]["strategy"] == "adaptive");
}

TEST_CASE("normalization flags change exact match") {
  testing::TempDir dir;
  REQUIRE(run({"ece", fixture("spider_tiny.jsonl"), "--level", "sequence", "--name", "plain",
               "--out", dir.path().string()}).code == 0);
  REQUIRE(run({"ece", fixture("spider_tiny.jsonl"), "--level", "sequence", "--name", "quotes",
               "--unify-quotes", "--out", dir.path().string()}).code == 0);
  const double plain = load_json(dir.path() / "plain.report.json")["report"]["overall_accuracy"];
  const double quotes = load_json(dir.path() / "quotes.report.json")["report"]["overall_accuracy"];
  CHECK(quotes > plain);
}

TEST_CASE("reliability writes an svg") {
  testing::TempDir dir;
  const auto r = run({"reliability", fixture("smcalflow_tiny.jsonl"), "--level", "token", "--out",
                      dir.path().string()});
  REQUIRE(r.code == 0);
  bool found = false;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path()))
    found = found || entry.path().extension() == ".svg";
  CHECK(found);
}

TEST_CASE("execution level needs labels") {
  testing::TempDir dir;
  CHECK(run({"ece", fixture("spider_tiny.jsonl"), "--level", "execution", "--out",
             dir.path().string()}).code == 0);
  CHECK(run({"ece", fixture("smcalflow_tiny.jsonl"), "--level", "execution", "--out",
             dir.path().string()}).code == 1);
}

TEST_CASE("stratify and coupling run on fixtures") {
  testing::TempDir dir;
  CHECK(run({"stratify", fixture("spider_tiny.jsonl"), "--out", dir.path().string()}).code == 0);
  const auto c = run({"coupling", fixture("smcalflow_tiny.jsonl"), "--epsilon", "0.8", "--out",
                      dir.path().string()});
  CHECK(c.code == 0);
}

TEST_CASE("error exit codes") {
  const auto missing = run({"ece", "/nonexistent/none.jsonl"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("none.jsonl") != std::string::npos);
  CHECK(run({"ece", fixture("spider_tiny.jsonl"), "--no-such-flag"}).code == 2);
  CHECK(run({"ece", fixture("spider_tiny.jsonl"), "--binning", "weird"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);
}
