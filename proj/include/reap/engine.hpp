#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reap/errors.hpp"
#include "reap/facts.hpp"
#include "reap/gateway.hpp"
#include "reap/plan.hpp"
#include "reap/retrieval.hpp"

namespace reap {

struct EngineConfig {
  int max_iterations = 5;
  int top_k = 5;
  int fork_cap = kDefaultForkCap;
  int refine_cap = kDefaultRefineCap;

  nlohmann::ordered_json snapshot() const;
};

enum class RunStatus { Running, Synthesizing, Done, Aborted };

std::string_view to_string(RunStatus status);

struct EngineState {
  std::string question;
  TaskPlan plan;
  FactsList facts;
  int iteration = 0;
  RunStatus status = RunStatus::Running;
};

/// Complete, replayable record of one run. Every plan revision is logged as a
/// plan_op event; replaying those events through the plan operations
/// reproduces the final plan exactly. comparable_form() drops wall-clock
/// fields so two runs of the same scripted episode compare byte for byte.
struct Trace {
  std::string question;
  std::vector<std::string> golds;
  std::string answer;
  int iterations = 0;
  std::string termination;  // resolved | budget | deadlock | aborted
  std::optional<bool> correct;
  double elapsed_ms = 0.0;
  nlohmann::ordered_json events = nlohmann::ordered_json::array();
  nlohmann::ordered_json config = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  std::string comparable_form() const;
  // ordered_json keeps key order, so a reloaded trace compares byte-for-byte.
  static Trace from_json(const nlohmann::ordered_json& j);
};

enum class Route { PlanUpdater, RePlanner };

std::string_view to_string(Route route);

/// DirectAnswer goes to the Plan Updater; PartialClue and Failed go to the
/// Re-Planner. Grounding downgrades happen before this is consulted.
Route dispatch(FulfillmentLevel level);

/// Empty result means the decision can be applied to the plan as-is;
/// otherwise the reason it cannot (unknown target, pruned target, refine cap,
/// id collision, ...).
std::optional<std::string> decision_applicability(const TaskPlan& plan,
                                                  const ReplanDecision& decision,
                                                  int refine_cap);

/// Applies the plan_op events of a trace through the plan operations.
TaskPlan replay_plan_ops(const nlohmann::json& events);

struct RunResult {
  std::string answer;
  Trace trace;
};

/// Runs the full loop for one question: decompose, then per iteration extract
/// a fact for every ready sub-task against the iteration-start facts
/// snapshot, verify grounding, and dispatch each fact in ascending task-id
/// order; stops when all live tasks are resolved, the iteration budget is
/// spent, or the plan deadlocks, then synthesizes a best-effort answer from
/// whatever facts exist.
class Engine {
 public:
  Engine(EngineConfig config, std::shared_ptr<LlmGateway> gateway,
         std::shared_ptr<Retriever> retriever);

  /// golds, when given, are recorded in the trace and scored: by the judge
  /// role when one is configured, by cover exact match otherwise. Throws
  /// EngineError{DecomposeFailed|BackendUnavailable}; the partial trace stays
  /// available through last_trace().
  RunResult run(const std::string& question, const std::vector<std::string>& golds = {});

  const EngineState& state() const { return state_; }
  const Trace& last_trace() const { return trace_; }

  /// Replaces the config object echoed into traces (the CLI passes the full
  /// effective config; the default is the engine section alone).
  void set_config_echo(nlohmann::ordered_json echo) { config_echo_ = std::move(echo); }

 private:
  struct PendingFact {
    std::string task_id;
    Fact fact;
    bool synthetic = false;    // engine-made Failed fact, no extractor call
    bool downgraded = false;   // grounding verification failed
  };

  void record_event(nlohmann::ordered_json event);
  void record_plan_op(nlohmann::ordered_json op);
  std::vector<Document> retrieve_for(const SubTask& task);
  PendingFact extract_for(const SubTask& task, const std::vector<Document>& docs);
  void dispatch_fact(const Fact& fact);
  void apply_plan_update(const Fact& fact);
  void run_replanner(const Fact& trigger);
  bool apply_replan_decision(const ReplanDecision& decision, const Fact& trigger);
  void ground_resolved_placeholders();
  void substitute_all(const std::string& task_id, const std::string& answer);
  std::string next_fact_id();
  std::string fallback_answer() const;

  EngineConfig config_;
  std::shared_ptr<LlmGateway> gateway_;
  std::shared_ptr<Retriever> retriever_;
  EngineState state_;
  Trace trace_;
  int fact_counter_ = 0;
  bool abort_to_synthesis_ = false;
  nlohmann::ordered_json config_echo_;
  std::chrono::steady_clock::time_point run_start_{};
};

struct ExportFilters {
  bool require_correct = true;
  size_t max_chars = 13000;
};

struct ExportReport {
  size_t total = 0;
  size_t kept = 0;
  size_t dropped_incorrect = 0;
  size_t dropped_no_verdict = 0;
  size_t dropped_too_long = 0;

  nlohmann::ordered_json to_json() const;
};

/// Writes one timestamp-stripped record per kept trace. A record is kept when
/// it carries a correct verdict (unless require_correct is off) and its
/// serialized length is strictly below max_chars.
ExportReport export_traces(const std::vector<Trace>& traces, const std::string& out_path,
                           const ExportFilters& filters);

/// Mean iteration count, optionally over correct traces only. Throws
/// EngineError{EmptySet} when no trace qualifies.
double avg_iterations(const std::vector<Trace>& traces, bool correct_only);

}  // namespace reap
