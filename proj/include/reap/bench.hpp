#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reap/engine.hpp"

namespace reap {

struct EvalExample {
  std::string example_id;
  std::string question;
  std::vector<std::string> golden_answers;
};

/// JSONL, one {"id", "question", "golden_answers": [...]} object per line.
/// Throws EngineError{DatasetMalformed} naming the offending line.
std::vector<EvalExample> load_dataset(const std::string& path);

struct ExampleRecord {
  std::string example_id;
  std::string question;
  std::string prediction;
  bool cem_hit = false;
  double f1 = 0.0;
  std::optional<bool> acc;  // judge verdict; absent when no judge is configured
  int iterations = 0;
  bool errored = false;
  std::string error;
};

/// Per-example records plus aggregates over the non-errored ones. Aggregates
/// are always recomputed from the records, never stored independently.
struct Report {
  std::vector<ExampleRecord> records;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();

  size_t total() const { return records.size(); }
  size_t errors() const;
  double cem_pct() const;
  double f1_pct() const;
  std::optional<double> acc_pct() const;
  double mean_iterations() const;

  nlohmann::ordered_json to_json() const;
  std::string table() const;
};

using EngineFactory = std::function<std::unique_ptr<Engine>()>;

struct BenchOptions {
  int parallel = 1;
  bool judge_configured = false;
};

/// Runs one fresh engine per example, optionally across a worker pool, and
/// assembles records in dataset order. Engine failures are recorded on the
/// example and excluded from aggregates; they never abort the run. When
/// traces_out is given it receives the traces of the non-errored examples,
/// also in dataset order.
Report run_benchmark(const std::vector<EvalExample>& examples, const EngineFactory& factory,
                     const BenchOptions& options, std::vector<Trace>* traces_out = nullptr);

}  // namespace reap
