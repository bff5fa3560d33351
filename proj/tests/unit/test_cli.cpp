#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "reap/cli.hpp"
#include "reap/engine.hpp"
#include "reap/retrieval.hpp"
#include "support/harness.hpp"

using namespace reap;
using reap::testing::TempDir;
using reap::testing::fixture_path;
using reap::testing::read_file;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  CliResult result;
  result.code = cli_main(std::move(args), out, err);
  result.out = out.str();
  result.err = err.str();
  return result;
}

std::string cli_fixture(const std::string& name) { return fixture_path("cli/" + name); }

std::vector<std::string> nonempty_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

Trace parse_trace_line(const std::string& line) {
  return Trace::from_json(nlohmann::ordered_json::parse(line));
}

// Runs `ask` with an optional gold and returns the single trace line it wrote.
std::string ask_trace_line(TempDir& dir, const std::string& name,
                           const std::vector<std::string>& extra) {
  const std::string trace_path = dir.file(name);
  std::vector<std::string> args = {"ask", "What color is the mineral veldspar?",
                                   "--config", cli_fixture("config.json"),
                                   "--trace", trace_path};
  args.insert(args.end(), extra.begin(), extra.end());
  const auto result = run_cli(args);
  REQUIRE(result.code == 0);
  const auto lines = nonempty_lines(read_file(trace_path));
  REQUIRE(lines.size() == 1);
  return lines[0];
}

}  // namespace

TEST_CASE("cli ingest reports corpus statistics and saves a loadable index") {
  TempDir dir;
  const std::string index_path = dir.file("index.json");
  const auto result =
      run_cli({"ingest", cli_fixture("corpus.jsonl"), "-o", index_path});
  CHECK(result.code == 0);
  CHECK(result.out == "2 documents, 14 tokens, vocabulary 10\n");
  CHECK(result.err.empty());

  const auto index = CorpusIndex::load(index_path);
  const auto hits = index.lexical_search("blue mineral", 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].doc_id == "c1");
}

TEST_CASE("cli ingest rejects a malformed corpus") {
  TempDir dir;
  const std::string corpus = dir.write(
      "dupes.jsonl",
      R"({"id": "d1", "contents": "one"})" "\n" R"({"id": "d1", "contents": "two"})" "\n");
  auto result = run_cli({"ingest", corpus, "-o", dir.file("index.json")});
  CHECK(result.code == 2);
  CHECK(result.out.empty());
  CHECK(result.err == "error: duplicate doc id 'd1' on lines 1 and 2\n");

  result = run_cli({"ingest", dir.file("missing.jsonl"), "-o", dir.file("index.json")});
  CHECK(result.code == 2);
  CHECK(result.err.find("cannot open corpus file") != std::string::npos);
}

TEST_CASE("cli ingest fails at runtime when the index cannot be written") {
  TempDir dir;
  const auto result = run_cli(
      {"ingest", cli_fixture("corpus.jsonl"), "-o", dir.file("no/such/dir/index.json")});
  CHECK(result.code == 1);
  CHECK(result.err.find("error: cannot write index file") != std::string::npos);
}

TEST_CASE("cli ask answers a scripted question") {
  const auto result = run_cli({"ask", "What color is the mineral veldspar?",
                               "--config", cli_fixture("config.json")});
  CHECK(result.code == 0);
  CHECK(result.out == "blue\n");
  CHECK(result.err.empty());
}

TEST_CASE("cli ask writes a replayable trace and scores against gold") {
  TempDir dir;
  const auto line = ask_trace_line(dir, "trace.jsonl", {"--gold", "blue"});
  const auto raw = nlohmann::json::parse(line);
  // Trace files keep timestamps; only exported trajectories strip them.
  REQUIRE(raw.contains("events"));
  REQUIRE(!raw["events"].empty());
  CHECK(raw["events"][0].contains("ts_ms"));
  CHECK(raw["config"]["engine"]["max_iterations"] == 5);

  const auto trace = parse_trace_line(line);
  CHECK(trace.question == "What color is the mineral veldspar?");
  CHECK(trace.answer == "blue");
  CHECK(trace.iterations == 1);
  CHECK(trace.termination == "resolved");
  REQUIRE(trace.correct.has_value());
  CHECK(*trace.correct);
}

TEST_CASE("cli ask applies engine and backend overrides") {
  TempDir dir;
  const std::string trace_path = dir.file("trace.jsonl");
  const auto result = run_cli({"ask", "What color is the mineral veldspar?",
                               "--config", cli_fixture("config.json"),
                               "--max-iterations", "4",
                               "--backend", "synthesize=alt",
                               "--trace", trace_path});
  CHECK(result.code == 0);
  CHECK(result.out == "azure\n");

  const auto lines = nonempty_lines(read_file(trace_path));
  REQUIRE(lines.size() == 1);
  const auto raw = nlohmann::json::parse(lines[0]);
  CHECK(raw["config"]["engine"]["max_iterations"] == 4);
  CHECK(raw["config"]["backends"]["synthesize"]["name"] == "alt");
}

TEST_CASE("cli ask loads a prebuilt index when --index is given") {
  TempDir dir;
  const std::string index_path = dir.file("index.json");
  REQUIRE(run_cli({"ingest", cli_fixture("corpus.jsonl"), "-o", index_path}).code == 0);

  const auto result = run_cli({"ask", "What color is the mineral veldspar?",
                               "--config", cli_fixture("config.json"),
                               "--index", index_path});
  CHECK(result.code == 0);
  CHECK(result.out == "blue\n");
}

TEST_CASE("cli ask rejects bad inputs with exit 2") {
  auto result = run_cli({"ask", "q", "--config", "/no/such/config.json"});
  CHECK(result.code == 2);
  CHECK(result.err.find("error: ") == 0);

  result = run_cli({"ask", "q", "--config", cli_fixture("config.json"),
                    "--backend", "oracle=alt"});
  CHECK(result.code == 2);
  CHECK(result.err.find("unknown role") != std::string::npos);

  result = run_cli({"ask", "q", "--config", cli_fixture("config.json"),
                    "--backend", "nonsense"});
  CHECK(result.code == 2);
  CHECK(result.err.find("must look like role=name") != std::string::npos);
}

TEST_CASE("cli ask reports engine failures and keeps the partial trace") {
  TempDir dir;
  const std::string trace_path = dir.file("trace.jsonl");
  const auto result = run_cli({"ask", "Which moon is largest?",
                               "--config", cli_fixture("config.json"),
                               "--trace", trace_path});
  CHECK(result.code == 1);
  CHECK(result.err.find("error: decompose") == 0);

  const auto lines = nonempty_lines(read_file(trace_path));
  REQUIRE(lines.size() == 1);
  const auto trace = parse_trace_line(lines[0]);
  CHECK(trace.question == "Which moon is largest?");
  CHECK(trace.termination == "aborted");
}

TEST_CASE("cli bench prints the summary table") {
  const auto result = run_cli({"bench", fixture_path("bench/dataset.jsonl"),
                               "--config", fixture_path("bench/config.json")});
  CHECK(result.code == 0);
  CHECK(result.out ==
        "examples: 3   errors: 1\n"
        "CEM: 100.0%   F1: 90.0%   avg iterations: 1.00\n");
  CHECK(result.err.empty());
}

TEST_CASE("cli bench writes report and trace files") {
  TempDir dir;
  const std::string report_path = dir.file("report.json");
  const std::string trace_path = dir.file("traces.jsonl");
  const auto result = run_cli({"bench", fixture_path("bench/dataset.jsonl"),
                               "--config", fixture_path("bench/config.json"),
                               "--parallel", "2",
                               "--report", report_path,
                               "--trace", trace_path});
  CHECK(result.code == 0);
  CHECK(result.out.find("examples: 3   errors: 1\n") == 0);

  const auto report = nlohmann::json::parse(read_file(report_path));
  CHECK(report["aggregates"]["examples"] == 3);
  CHECK(report["aggregates"]["errors"] == 1);
  CHECK(report["aggregates"]["cem_pct"].get<double>() == doctest::Approx(100.0));
  CHECK(report["aggregates"]["f1_pct"].get<double>() == doctest::Approx(90.0));
  CHECK(!report["aggregates"].contains("acc_pct"));
  REQUIRE(report["records"].size() == 3);
  CHECK(!report["records"][0].contains("error"));
  CHECK(report["records"][2].contains("error"));
  CHECK(report["config"]["engine"]["max_iterations"] == 3);

  // Only the non-errored examples leave traces, in dataset order.
  const auto lines = nonempty_lines(read_file(trace_path));
  REQUIRE(lines.size() == 2);
  CHECK(parse_trace_line(lines[0]).question == "What color is the mineral veldspar?");
  CHECK(parse_trace_line(lines[1]).question == "What is the tallest tower in Norvik?");
}

TEST_CASE("cli bench rejects bad invocations") {
  auto result = run_cli({"bench", fixture_path("bench/dataset.jsonl"),
                         "--config", fixture_path("bench/config.json"),
                         "--parallel", "0"});
  CHECK(result.code == 2);
  CHECK(result.err.find("error: ") == 0);

  result = run_cli({"bench", "/no/such/dataset.jsonl",
                    "--config", fixture_path("bench/config.json")});
  CHECK(result.code == 2);
  CHECK(result.err.find("cannot open dataset file") != std::string::npos);
}

TEST_CASE("cli export filters traces") {
  TempDir dir;
  const auto correct = ask_trace_line(dir, "t1.jsonl", {"--gold", "blue"});
  const auto incorrect = ask_trace_line(dir, "t2.jsonl", {"--gold", "crimson"});
  const auto unjudged = ask_trace_line(dir, "t3.jsonl", {});
  const std::string traces_path =
      dir.write("traces.jsonl", correct + "\n" + incorrect + "\n" + unjudged + "\n");

  SUBCASE("defaults keep only correct traces") {
    const std::string out_path = dir.file("kept.jsonl");
    const auto result = run_cli({"export", traces_path, "-o", out_path});
    CHECK(result.code == 0);
    CHECK(result.out ==
          "kept 1 of 3 traces (dropped: 1 incorrect, 1 without verdict, 0 too long)\n");
    const auto lines = nonempty_lines(read_file(out_path));
    REQUIRE(lines.size() == 1);
    CHECK(lines[0] == parse_trace_line(correct).comparable_form());
  }

  SUBCASE("--no-require-correct keeps everything below the length cap") {
    const std::string out_path = dir.file("kept.jsonl");
    const auto result =
        run_cli({"export", traces_path, "-o", out_path, "--no-require-correct"});
    CHECK(result.code == 0);
    CHECK(result.out ==
          "kept 3 of 3 traces (dropped: 0 incorrect, 0 without verdict, 0 too long)\n");
    CHECK(nonempty_lines(read_file(out_path)).size() == 3);
  }

  SUBCASE("--max-chars drops oversized traces") {
    const auto result = run_cli({"export", traces_path, "-o", dir.file("kept.jsonl"),
                                 "--no-require-correct", "--max-chars", "10"});
    CHECK(result.code == 0);
    CHECK(result.out ==
          "kept 0 of 3 traces (dropped: 0 incorrect, 0 without verdict, 3 too long)\n");
  }
}

TEST_CASE("cli export rejects unreadable input") {
  TempDir dir;
  auto result = run_cli({"export", dir.file("missing.jsonl"), "-o", dir.file("out.jsonl")});
  CHECK(result.code == 2);
  CHECK(result.err.find("cannot open traces file") != std::string::npos);

  const std::string bad = dir.write("bad.jsonl", "not json\n");
  result = run_cli({"export", bad, "-o", dir.file("out.jsonl")});
  CHECK(result.code == 2);
  CHECK(result.err.find("error: line 1: ") == 0);
}

TEST_CASE("cli trace summarizes a trace file") {
  TempDir dir;
  const auto line = ask_trace_line(dir, "trace.jsonl", {"--gold", "blue"});
  const auto trace = parse_trace_line(line);

  const auto result = run_cli({"trace", dir.file("trace.jsonl")});
  CHECK(result.code == 0);
  // One-hop run: init + resolve plan ops; decompose, extract, synthesize attempts.
  const std::string expected =
      "Q: What color is the mineral veldspar?\n"
      "A: blue\n"
      "   iterations=1 termination=resolved events=" + std::to_string(trace.events.size()) +
      " correct=yes\n"
      "   plan_ops=2 backend_attempts=3\n";
  CHECK(result.out == expected);

  const auto missing = run_cli({"trace", dir.file("missing.jsonl")});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("cannot open trace file") != std::string::npos);
}

TEST_CASE("cli help and parse errors") {
  auto result = run_cli({"--help"});
  CHECK(result.code == 0);
  CHECK(result.out.find("reap") != std::string::npos);
  CHECK(result.out.find("ask") != std::string::npos);

  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);

  result = run_cli({"ingest", cli_fixture("corpus.jsonl")});
  CHECK(result.code == 2);
  CHECK(result.err.find("error: ") == 0);

  result = run_cli({"ask", "q"});
  CHECK(result.code == 2);
  CHECK(result.err.find("error: ") == 0);
}
