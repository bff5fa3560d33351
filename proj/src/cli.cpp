#include "reap/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "reap/bench.hpp"
#include "reap/config.hpp"
#include "reap/engine.hpp"
#include "reap/retrieval.hpp"

namespace reap {

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kInputError = 2;

struct CommonOpts {
  std::string config_path;
  std::string index_path;
  int max_iterations = 0;  // 0 = not given
  int top_k = 0;
  std::vector<std::string> backend_overrides;
};

void add_common_options(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Config file (JSON)")->required();
  cmd->add_option("--index", opts.index_path, "Override the lexical index path");
  cmd->add_option("--max-iterations", opts.max_iterations, "Override engine.max_iterations");
  cmd->add_option("--top-k", opts.top_k, "Override engine.top_k");
  cmd->add_option("--backend", opts.backend_overrides,
                  "Assign a catalog backend to a role, as role=name (repeatable)");
}

FullConfig effective_config(const CommonOpts& opts) {
  FullConfig config = load_config(opts.config_path);
  if (!opts.index_path.empty()) {
    config.retriever.kind = "lexical";
    config.retriever.index_path = opts.index_path;
  }
  if (opts.max_iterations > 0) config.engine.max_iterations = opts.max_iterations;
  if (opts.top_k > 0) config.engine.top_k = opts.top_k;
  for (const auto& spec : opts.backend_overrides) apply_backend_override(config, spec);
  return config;
}

bool write_trace_file(const std::string& path, const std::vector<Trace>& traces,
                      std::ostream& err) {
  std::ofstream out(path);
  if (!out) {
    err << "error: cannot write trace file '" << path << "'\n";
    return false;
  }
  for (const auto& trace : traces) out << trace.to_json().dump() << "\n";
  return bool(out);
}

int cmd_ingest(const std::string& corpus_path, const std::string& out_path, std::ostream& out,
               std::ostream& err) {
  CorpusIndex index;
  try {
    index = CorpusIndex::ingest_file(corpus_path);
  } catch (const RetrievalError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  try {
    index.save(out_path);
  } catch (const RetrievalError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  const auto stats = index.stats();
  out << stats.doc_count << " documents, " << stats.total_tokens << " tokens, vocabulary "
      << stats.vocabulary_size << "\n";
  return kOk;
}

int cmd_ask(const std::string& question, const CommonOpts& opts, const std::string& trace_path,
            const std::vector<std::string>& golds, std::ostream& out, std::ostream& err) {
  FullConfig config;
  std::shared_ptr<Retriever> retriever;
  std::shared_ptr<LlmGateway> gateway;
  try {
    config = effective_config(opts);
    retriever = make_retriever(config);
    gateway = make_gateway(config);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  Engine engine(config.engine, gateway, retriever);
  engine.set_config_echo(config.echo());
  try {
    const auto result = engine.run(question, golds);
    out << result.answer << "\n";
    if (!trace_path.empty() && !write_trace_file(trace_path, {result.trace}, err))
      return kRuntimeFailure;
    return kOk;
  } catch (const EngineError& e) {
    err << "error: " << e.what() << "\n";
    if (!trace_path.empty()) write_trace_file(trace_path, {engine.last_trace()}, err);
    return kRuntimeFailure;
  }
}

int cmd_bench(const std::string& dataset_path, const CommonOpts& opts, int parallel,
              const std::string& report_path, const std::string& trace_path, std::ostream& out,
              std::ostream& err) {
  FullConfig config;
  std::vector<EvalExample> examples;
  std::shared_ptr<Retriever> retriever;
  try {
    config = effective_config(opts);
    examples = load_dataset(dataset_path);
    retriever = make_retriever(config);
    // Backends are validated now so a broken config fails fast instead of
    // erroring on every example.
    make_gateway(config);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  const auto echo = config.echo();
  EngineFactory factory = [&config, &retriever, &echo]() {
    auto engine = std::make_unique<Engine>(config.engine, make_gateway(config), retriever);
    engine->set_config_echo(echo);
    return engine;
  };
  BenchOptions options;
  options.parallel = parallel;
  options.judge_configured = config.judge_configured();

  std::vector<Trace> traces;
  Report report = run_benchmark(examples, factory, options,
                                trace_path.empty() ? nullptr : &traces);
  report.config = echo;
  out << report.table();
  if (!report_path.empty()) {
    std::ofstream report_out(report_path);
    if (!report_out) {
      err << "error: cannot write report file '" << report_path << "'\n";
      return kRuntimeFailure;
    }
    report_out << report.to_json().dump(2) << "\n";
  }
  if (!trace_path.empty() && !write_trace_file(trace_path, traces, err)) return kRuntimeFailure;
  return kOk;
}

int cmd_export(const std::string& traces_path, const std::string& out_path,
               const ExportFilters& filters, std::ostream& out, std::ostream& err) {
  std::ifstream in(traces_path);
  if (!in) {
    err << "error: cannot open traces file '" << traces_path << "'\n";
    return kInputError;
  }
  std::vector<Trace> traces;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      traces.push_back(Trace::from_json(nlohmann::ordered_json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      err << "error: line " << line_no << ": " << e.what() << "\n";
      return kInputError;
    }
  }
  try {
    const auto report = export_traces(traces, out_path, filters);
    out << "kept " << report.kept << " of " << report.total << " traces (dropped: "
        << report.dropped_incorrect << " incorrect, " << report.dropped_no_verdict
        << " without verdict, " << report.dropped_too_long << " too long)\n";
    return kOk;
  } catch (const EngineError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

int cmd_trace(const std::string& path, std::ostream& out, std::ostream& err) {
  std::ifstream in(path);
  if (!in) {
    err << "error: cannot open trace file '" << path << "'\n";
    return kInputError;
  }
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    Trace trace;
    try {
      trace = Trace::from_json(nlohmann::ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      err << "error: line " << line_no << ": " << e.what() << "\n";
      return kInputError;
    }
    out << "Q: " << trace.question << "\n";
    out << "A: " << trace.answer << "\n";
    out << "   iterations=" << trace.iterations << " termination=" << trace.termination
        << " events=" << trace.events.size();
    if (trace.correct.has_value()) out << " correct=" << (*trace.correct ? "yes" : "no");
    out << "\n";
    size_t plan_ops = 0;
    size_t attempts = 0;
    for (const auto& event : trace.events) {
      const std::string type = event.value("type", std::string{});
      if (type == "plan_op") ++plan_ops;
      if (type == "attempt") ++attempts;
    }
    out << "   plan_ops=" << plan_ops << " backend_attempts=" << attempts << "\n";
  }
  return kOk;
}

}  // namespace

int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recursive plan-and-extract question answering"};
  app.name("reap");
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "Build and save a lexical corpus index");
  std::string corpus_path;
  std::string index_out;
  ingest->add_option("corpus", corpus_path, "Corpus file (JSONL: id, title, contents)")
      ->required();
  ingest->add_option("-o,--out", index_out, "Index output path")->required();

  auto* ask = app.add_subcommand("ask", "Answer one question");
  std::string question;
  CommonOpts ask_opts;
  std::string ask_trace;
  std::vector<std::string> ask_golds;
  ask->add_option("question", question, "The question")->required();
  add_common_options(ask, ask_opts);
  ask->add_option("--trace", ask_trace, "Write the run trace to this file (JSONL)");
  ask->add_option("--gold", ask_golds, "Gold answer for scoring (repeatable)");

  auto* bench = app.add_subcommand("bench", "Run a benchmark dataset");
  std::string dataset_path;
  CommonOpts bench_opts;
  int parallel = 1;
  std::string report_path;
  std::string bench_trace;
  bench->add_option("dataset", dataset_path, "Dataset file (JSONL: id, question, golden_answers)")
      ->required();
  add_common_options(bench, bench_opts);
  bench->add_option("--parallel", parallel, "Worker count")->check(CLI::PositiveNumber);
  bench->add_option("--report", report_path, "Write the full report to this file (JSON)");
  bench->add_option("--trace", bench_trace, "Write all traces to this file (JSONL)");

  auto* exp = app.add_subcommand("export", "Filter traces into training trajectories");
  std::string export_in;
  std::string export_out;
  ExportFilters filters;
  exp->add_option("traces", export_in, "Trace file to filter (JSONL)")->required();
  exp->add_option("-o,--out", export_out, "Output path (JSONL)")->required();
  exp->add_flag("--require-correct,!--no-require-correct", filters.require_correct,
                "Keep only traces with a correct answer (default: on)");
  exp->add_option("--max-chars", filters.max_chars,
                  "Drop traces whose serialized form is not below this length");

  auto* trace = app.add_subcommand("trace", "Summarize a trace file");
  std::string trace_in;
  trace->add_option("file", trace_in, "Trace file (JSONL)")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(corpus_path, index_out, out, err);
    if (ask->parsed()) return cmd_ask(question, ask_opts, ask_trace, ask_golds, out, err);
    if (bench->parsed())
      return cmd_bench(dataset_path, bench_opts, parallel, report_path, bench_trace, out, err);
    if (exp->parsed()) return cmd_export(export_in, export_out, filters, out, err);
    if (trace->parsed()) return cmd_trace(trace_in, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  err << "error: no command given\n";
  return kInputError;
}

}  // namespace reap
