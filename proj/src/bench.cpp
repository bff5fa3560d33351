#include "reap/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "reap/metrics.hpp"

namespace reap {

std::vector<EvalExample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw EngineError(EngineError::Kind::DatasetMalformed,
                      "cannot open dataset file '" + path + "'");
  std::vector<EvalExample> examples;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw EngineError(EngineError::Kind::DatasetMalformed,
                        "line " + std::to_string(line_no) + ": not valid JSON: " + e.what());
    }
    EvalExample example;
    try {
      example.example_id = record.at("id").get<std::string>();
      example.question = record.at("question").get<std::string>();
      example.golden_answers = record.at("golden_answers").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw EngineError(EngineError::Kind::DatasetMalformed,
                        "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (example.golden_answers.empty())
      throw EngineError(EngineError::Kind::DatasetMalformed,
                        "line " + std::to_string(line_no) + ": golden_answers is empty");
    examples.push_back(std::move(example));
  }
  return examples;
}

size_t Report::errors() const {
  size_t n = 0;
  for (const auto& record : records) {
    if (record.errored) ++n;
  }
  return n;
}

namespace {

template <typename Value>
double mean_over_ok(const std::vector<ExampleRecord>& records, Value value) {
  double sum = 0.0;
  size_t count = 0;
  for (const auto& record : records) {
    if (record.errored) continue;
    sum += value(record);
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace

double Report::cem_pct() const {
  return 100.0 * mean_over_ok(records, [](const ExampleRecord& r) { return r.cem_hit ? 1.0 : 0.0; });
}

double Report::f1_pct() const {
  return 100.0 * mean_over_ok(records, [](const ExampleRecord& r) { return r.f1; });
}

std::optional<double> Report::acc_pct() const {
  bool any = false;
  for (const auto& record : records) {
    if (!record.errored && record.acc.has_value()) any = true;
  }
  if (!any) return std::nullopt;
  return 100.0 * mean_over_ok(records, [](const ExampleRecord& r) {
    return r.acc.has_value() && *r.acc ? 1.0 : 0.0;
  });
}

double Report::mean_iterations() const {
  return mean_over_ok(records, [](const ExampleRecord& r) { return static_cast<double>(r.iterations); });
}

nlohmann::ordered_json Report::to_json() const {
  nlohmann::ordered_json j;
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& record : records) {
    nlohmann::ordered_json r;
    r["id"] = record.example_id;
    r["question"] = record.question;
    r["prediction"] = record.prediction;
    r["cem"] = record.cem_hit;
    r["f1"] = record.f1;
    if (record.acc.has_value()) r["acc"] = *record.acc;
    r["iterations"] = record.iterations;
    if (record.errored) r["error"] = record.error;
    j["records"].push_back(std::move(r));
  }
  nlohmann::ordered_json aggregates;
  aggregates["examples"] = total();
  aggregates["errors"] = errors();
  aggregates["cem_pct"] = cem_pct();
  aggregates["f1_pct"] = f1_pct();
  const auto acc = acc_pct();
  if (acc.has_value()) aggregates["acc_pct"] = *acc;
  aggregates["avg_iterations"] = mean_iterations();
  j["aggregates"] = std::move(aggregates);
  j["config"] = config;
  return j;
}

std::string Report::table() const {
  char line[160];
  std::ostringstream out;
  std::snprintf(line, sizeof(line), "examples: %zu   errors: %zu", total(), errors());
  out << line << "\n";
  const auto acc = acc_pct();
  if (acc.has_value()) {
    std::snprintf(line, sizeof(line), "CEM: %.1f%%   F1: %.1f%%   ACC: %.1f%%   avg iterations: %.2f",
                  cem_pct(), f1_pct(), *acc, mean_iterations());
  } else {
    std::snprintf(line, sizeof(line), "CEM: %.1f%%   F1: %.1f%%   avg iterations: %.2f",
                  cem_pct(), f1_pct(), mean_iterations());
  }
  out << line << "\n";
  return out.str();
}

Report run_benchmark(const std::vector<EvalExample>& examples, const EngineFactory& factory,
                     const BenchOptions& options, std::vector<Trace>* traces_out) {
  if (options.parallel < 1)
    throw EngineError(EngineError::Kind::BadConfig, "parallel worker count must be >= 1");

  std::vector<ExampleRecord> records(examples.size());
  std::vector<std::optional<Trace>> traces(examples.size());

  std::atomic<size_t> cursor{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = cursor.fetch_add(1);
      if (i >= examples.size()) return;
      const auto& example = examples[i];
      ExampleRecord record;
      record.example_id = example.example_id;
      record.question = example.question;
      try {
        auto engine = factory();
        const auto result = engine->run(example.question, example.golden_answers);
        record.prediction = result.answer;
        record.cem_hit = cem(result.answer, example.golden_answers);
        record.f1 = token_f1(result.answer, example.golden_answers);
        if (options.judge_configured && result.trace.correct.has_value())
          record.acc = *result.trace.correct;
        record.iterations = result.trace.iterations;
        traces[i] = result.trace;
      } catch (const std::exception& e) {
        record.errored = true;
        record.error = e.what();
      }
      records[i] = std::move(record);
    }
  };

  const size_t worker_count =
      std::min(static_cast<size_t>(options.parallel), std::max<size_t>(examples.size(), 1));
  if (worker_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    for (size_t i = 0; i < worker_count; ++i) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
  }

  if (traces_out != nullptr) {
    for (auto& trace : traces) {
      if (trace.has_value()) traces_out->push_back(std::move(*trace));
    }
  }
  Report report;
  report.records = std::move(records);
  return report;
}

}  // namespace reap
