#include "reap/engine.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include "reap/metrics.hpp"
#include "reap/text.hpp"

namespace reap {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

nlohmann::ordered_json EngineConfig::snapshot() const {
  nlohmann::ordered_json j;
  j["max_iterations"] = max_iterations;
  j["top_k"] = top_k;
  j["fork_cap"] = fork_cap;
  j["refine_cap"] = refine_cap;
  return j;
}

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Running: return "running";
    case RunStatus::Synthesizing: return "synthesizing";
    case RunStatus::Done: return "done";
    case RunStatus::Aborted: return "aborted";
  }
  return "running";
}

std::string_view to_string(Route route) {
  return route == Route::PlanUpdater ? "plan_updater" : "replanner";
}

Route dispatch(FulfillmentLevel level) {
  return level == FulfillmentLevel::DirectAnswer ? Route::PlanUpdater : Route::RePlanner;
}

nlohmann::ordered_json Trace::to_json() const {
  nlohmann::ordered_json j;
  j["question"] = question;
  if (!golds.empty()) j["gold"] = golds;
  j["answer"] = answer;
  j["iterations"] = iterations;
  j["termination"] = termination;
  if (correct.has_value()) j["correct"] = *correct;
  j["elapsed_ms"] = elapsed_ms;
  j["events"] = events;
  j["config"] = config;
  return j;
}

std::string Trace::comparable_form() const {
  nlohmann::ordered_json j = to_json();
  j.erase("elapsed_ms");
  for (auto& event : j["events"]) event.erase("ts_ms");
  return j.dump();
}

Trace Trace::from_json(const nlohmann::ordered_json& j) {
  Trace trace;
  trace.question = j.value("question", std::string{});
  if (j.contains("gold")) {
    if (j.at("gold").is_string()) {
      trace.golds.push_back(j.at("gold").get<std::string>());
    } else {
      trace.golds = j.at("gold").get<std::vector<std::string>>();
    }
  }
  trace.answer = j.value("answer", std::string{});
  trace.iterations = j.value("iterations", 0);
  trace.termination = j.value("termination", std::string{});
  if (j.contains("correct") && j.at("correct").is_boolean())
    trace.correct = j.at("correct").get<bool>();
  trace.elapsed_ms = j.value("elapsed_ms", 0.0);
  if (j.contains("events")) trace.events = j.at("events");
  if (j.contains("config")) trace.config = j.at("config");
  return trace;
}

std::optional<std::string> decision_applicability(const TaskPlan& plan,
                                                  const ReplanDecision& decision,
                                                  int refine_cap) {
  try {
    switch (decision.verdict) {
      case ReplanVerdict::SufficientAsIs:
        return std::nullopt;
      case ReplanVerdict::RefineQuery:
        refine_query(plan, decision.target_task, decision.new_query, refine_cap);
        return std::nullopt;
      case ReplanVerdict::Overhaul: {
        TaskPlan probe = prune_branch(plan, decision.prune_root);
        inject_subtasks(std::move(probe), decision.injected_tasks);
        return std::nullopt;
      }
    }
  } catch (const PlanError& e) {
    return std::string(e.what());
  }
  return std::nullopt;
}

TaskPlan replay_plan_ops(const nlohmann::json& events) {
  TaskPlan plan;
  bool initialized = false;
  for (const auto& event : events) {
    if (event.value("type", std::string{}) != "plan_op") continue;
    const std::string op = event.value("op", std::string{});
    if (op == "init") {
      plan = plan_from_json(event.at("plan"));
      initialized = true;
      continue;
    }
    if (!initialized)
      throw PlanError(PlanError::Kind::PlanInvalid, "plan_op before init in trace events");
    if (op == "resolve") {
      plan = resolve_task(std::move(plan), event.at("task").get<std::string>(),
                          event.at("fact_ref").get<std::string>());
    } else if (op == "substitute") {
      plan = substitute_placeholders(std::move(plan), event.at("task").get<std::string>(),
                                     event.at("answer").get<std::string>());
    } else if (op == "fork") {
      plan = fork_branches(std::move(plan), event.at("task").get<std::string>(),
                           event.at("answers").get<std::vector<std::string>>(),
                           event.at("fork_cap").get<int>());
    } else if (op == "prune") {
      plan = prune_branch(std::move(plan), event.at("task").get<std::string>());
    } else if (op == "inject") {
      std::vector<SubTask> tasks;
      for (const auto& item : event.at("tasks")) tasks.push_back(subtask_from_json(item));
      plan = inject_subtasks(std::move(plan), std::move(tasks));
    } else if (op == "refine") {
      plan = refine_query(std::move(plan), event.at("task").get<std::string>(),
                          event.at("new_query").get<std::string>(),
                          event.at("refine_cap").get<int>());
    } else if (op == "mark_failed") {
      plan = mark_failed(std::move(plan), event.at("task").get<std::string>());
    } else {
      throw PlanError(PlanError::Kind::PlanInvalid, "unknown plan_op '" + op + "' in trace");
    }
  }
  return plan;
}

Engine::Engine(EngineConfig config, std::shared_ptr<LlmGateway> gateway,
               std::shared_ptr<Retriever> retriever)
    : config_(config), gateway_(std::move(gateway)), retriever_(std::move(retriever)) {
  if (config_.max_iterations < 1)
    throw EngineError(EngineError::Kind::BadConfig, "max_iterations must be >= 1");
  if (config_.top_k < 1) throw EngineError(EngineError::Kind::BadConfig, "top_k must be >= 1");
  if (config_.fork_cap < 2)
    throw EngineError(EngineError::Kind::BadConfig, "fork_cap must be >= 2");
  if (config_.refine_cap < 1)
    throw EngineError(EngineError::Kind::BadConfig, "refine_cap must be >= 1");
  if (gateway_ == nullptr || retriever_ == nullptr)
    throw EngineError(EngineError::Kind::BadConfig, "engine needs a gateway and a retriever");
}

void Engine::record_event(nlohmann::ordered_json event) {
  event["ts_ms"] = ms_since(run_start_);
  trace_.events.push_back(std::move(event));
}

void Engine::record_plan_op(nlohmann::ordered_json op) {
  nlohmann::ordered_json event;
  event["type"] = "plan_op";
  for (auto& [key, value] : op.items()) event[key] = value;
  record_event(std::move(event));
}

std::string Engine::next_fact_id() { return "f" + std::to_string(++fact_counter_); }

std::vector<Document> Engine::retrieve_for(const SubTask& task) {
  std::vector<Document> docs = retriever_->retrieve(task.query, config_.top_k);
  nlohmann::ordered_json event;
  event["type"] = "retrieval";
  event["task"] = task.id;
  event["query"] = task.query;
  auto ids = nlohmann::ordered_json::array();
  for (const auto& doc : docs) ids.push_back(doc.doc_id);
  event["doc_ids"] = std::move(ids);
  record_event(std::move(event));
  return docs;
}

Engine::PendingFact Engine::extract_for(const SubTask& task, const std::vector<Document>& docs) {
  PendingFact pending;
  pending.task_id = task.id;
  if (docs.empty()) {
    pending.synthetic = true;
    pending.fact.statement = "No documents were retrieved for: " + task.query;
    pending.fact.reasoning = "retrieval returned no documents";
    pending.fact.level = FulfillmentLevel::Failed;
  } else {
    try {
      pending.fact = gateway_->extract_fact(task.query, docs, state_.facts);
    } catch (const GatewayError& e) {
      if (e.kind() != GatewayError::Kind::MalformedOutput) throw;
      pending.synthetic = true;
      pending.fact = Fact{};
      pending.fact.statement = "Extraction failed for: " + task.query;
      pending.fact.reasoning = e.what();
      pending.fact.level = FulfillmentLevel::Failed;
    }
  }
  pending.fact.fact_id = next_fact_id();
  pending.fact.task_id = task.id;
  const auto grounding = verify_grounding(pending.fact, docs);
  if (!grounding.grounded()) {
    pending.downgraded = true;
    pending.fact.level = FulfillmentLevel::Failed;
    pending.fact.answers.clear();
    nlohmann::ordered_json event;
    event["type"] = "grounding_violation";
    event["task"] = task.id;
    event["fact_id"] = pending.fact.fact_id;
    event["ungrounded"] = grounding.ungrounded;
    record_event(std::move(event));
  }
  return pending;
}

bool Engine::apply_replan_decision(const ReplanDecision& decision, const Fact& trigger) {
  switch (decision.verdict) {
    case ReplanVerdict::SufficientAsIs: {
      state_.plan = resolve_task(std::move(state_.plan), trigger.task_id, trigger.fact_id);
      record_plan_op({{"op", "resolve"}, {"task", trigger.task_id}, {"fact_ref", trigger.fact_id}});
      const std::string value =
          trigger.answers.empty() ? trigger.statement : trigger.answers.front();
      substitute_all(trigger.task_id, value);
      return true;
    }
    case ReplanVerdict::RefineQuery: {
      state_.plan = refine_query(std::move(state_.plan), decision.target_task,
                                 decision.new_query, config_.refine_cap);
      record_plan_op({{"op", "refine"},
                      {"task", decision.target_task},
                      {"new_query", decision.new_query},
                      {"refine_cap", config_.refine_cap}});
      ground_resolved_placeholders();
      return true;
    }
    case ReplanVerdict::Overhaul: {
      std::vector<std::string> was_live;
      for (const auto& task : state_.plan.tasks) {
        if (task.status != TaskStatus::Pruned) was_live.push_back(task.id);
      }
      state_.plan = prune_branch(std::move(state_.plan), decision.prune_root);
      record_plan_op({{"op", "prune"}, {"task", decision.prune_root}});
      for (const auto& id : was_live) {
        const SubTask* now = state_.plan.find(id);
        if (now != nullptr && now->status == TaskStatus::Pruned)
          state_.facts.deactivate_for_task(id);
      }
      state_.plan = inject_subtasks(std::move(state_.plan), decision.injected_tasks);
      auto tasks = nlohmann::ordered_json::array();
      for (const auto& task : decision.injected_tasks) {
        SubTask as_injected = task;
        as_injected.status = TaskStatus::Pending;
        as_injected.fact_ref.reset();
        tasks.push_back(subtask_to_json(as_injected));
      }
      record_plan_op({{"op", "inject"}, {"tasks", std::move(tasks)}});
      ground_resolved_placeholders();
      return true;
    }
  }
  return false;
}

void Engine::run_replanner(const Fact& trigger) {
  ReplanDecision decision;
  std::string prior_error;
  for (int round = 0; round < 2; ++round) {
    try {
      decision = gateway_->assess_and_replan(state_.question, state_.plan, state_.facts,
                                             trigger, prior_error);
    } catch (const GatewayError& e) {
      if (e.kind() != GatewayError::Kind::MalformedOutput) throw;
      record_event({{"type", "replan_failed"}, {"task", trigger.task_id}, {"error", e.what()}});
      break;
    }
    nlohmann::ordered_json event;
    event["type"] = "replan_decision";
    event["task"] = trigger.task_id;
    event["verdict"] = std::string(to_string(decision.verdict));
    if (decision.verdict == ReplanVerdict::RefineQuery) {
      event["target_task"] = decision.target_task;
      event["new_query"] = decision.new_query;
    } else if (decision.verdict == ReplanVerdict::Overhaul) {
      event["prune_root"] = decision.prune_root;
      auto tasks = nlohmann::ordered_json::array();
      for (const auto& task : decision.injected_tasks) tasks.push_back(subtask_to_json(task));
      event["injected_tasks"] = std::move(tasks);
    }
    event["justification"] = decision.justification;
    record_event(std::move(event));

    const auto reason = decision_applicability(state_.plan, decision, config_.refine_cap);
    if (!reason) {
      apply_replan_decision(decision, trigger);
      return;
    }
    record_event({{"type", "replan_inapplicable"}, {"task", trigger.task_id}, {"reason", *reason}});
    prior_error = *reason;
  }
  // Two unusable decisions (or an unparseable one): give up on repairing,
  // fail the trigger task and synthesize from what exists.
  const SubTask* task = state_.plan.find(trigger.task_id);
  if (task != nullptr && task->live() && task->status != TaskStatus::Resolved) {
    state_.plan = mark_failed(std::move(state_.plan), trigger.task_id);
    record_plan_op({{"op", "mark_failed"}, {"task", trigger.task_id}});
  }
  abort_to_synthesis_ = true;
}

void Engine::apply_plan_update(const Fact& fact) {
  state_.plan = resolve_task(std::move(state_.plan), fact.task_id, fact.fact_id);
  record_plan_op({{"op", "resolve"}, {"task", fact.task_id}, {"fact_ref", fact.fact_id}});
  if (fact.answers.size() == 1) {
    substitute_all(fact.task_id, fact.answers.front());
    return;
  }
  try {
    // Lvalue on purpose: fork_branches may throw TooManyBranches and the
    // plan must survive for the escalation path below.
    state_.plan = fork_branches(state_.plan, fact.task_id, fact.answers, config_.fork_cap);
    record_plan_op({{"op", "fork"},
                    {"task", fact.task_id},
                    {"answers", fact.answers},
                    {"fork_cap", config_.fork_cap}});
  } catch (const PlanError& e) {
    if (e.kind() != PlanError::Kind::TooManyBranches) throw;
    record_event({{"type", "escalation"},
                  {"task", fact.task_id},
                  {"reason", e.what()},
                  {"answers", fact.answers}});
    Fact coerced = fact;
    coerced.level = FulfillmentLevel::PartialClue;
    run_replanner(coerced);
  }
}

void Engine::substitute_all(const std::string& task_id, const std::string& answer) {
  const std::string needle = placeholder_for(task_id);
  bool referenced = false;
  for (const auto& task : state_.plan.tasks) {
    if (task.status == TaskStatus::Pending && task.query.find(needle) != std::string::npos) {
      referenced = true;
      break;
    }
  }
  if (!referenced) return;
  state_.plan = substitute_placeholders(std::move(state_.plan), task_id, answer);
  record_plan_op({{"op", "substitute"}, {"task", task_id}, {"answer", answer}});
}

void Engine::ground_resolved_placeholders() {
  // Refined or injected queries may reference tasks that resolved earlier;
  // their placeholders never see the Plan Updater, so ground them here.
  for (int pass = 0; pass < 100; ++pass) {
    bool changed = false;
    for (const auto& task : state_.plan.tasks) {
      if (task.status != TaskStatus::Pending) continue;
      for (const auto& ref : scan_placeholders(task.query)) {
        const SubTask* dep = state_.plan.find(ref);
        if (dep == nullptr || dep->status != TaskStatus::Resolved || !dep->fact_ref) continue;
        const Fact* fact = state_.facts.find(*dep->fact_ref);
        if (fact == nullptr) continue;
        const std::string value = fact->answers.empty() ? fact->statement : fact->answers.front();
        if (value.empty() || value.find(placeholder_for(ref)) != std::string::npos) continue;
        substitute_all(ref, value);
        changed = true;
        break;
      }
      if (changed) break;
    }
    if (!changed) return;
  }
}

void Engine::dispatch_fact(const Fact& fact) {
  const Route route = dispatch(fact.level);
  record_event({{"type", "dispatch"},
                {"task", fact.task_id},
                {"fact_id", fact.fact_id},
                {"level", std::string(to_string(fact.level))},
                {"route", std::string(to_string(route))}});
  if (route == Route::PlanUpdater) {
    apply_plan_update(fact);
  } else {
    run_replanner(fact);
  }
}

std::string Engine::fallback_answer() const {
  std::vector<std::string> answers;
  for (const Fact* fact : state_.facts.active_facts()) {
    if (fact->level == FulfillmentLevel::DirectAnswer && !fact->answers.empty())
      answers.push_back(fact->answers.front());
  }
  if (answers.empty()) return "unknown";
  return join(answers, ", ");
}

RunResult Engine::run(const std::string& question, const std::vector<std::string>& golds) {
  run_start_ = Clock::now();
  state_ = EngineState{};
  state_.question = question;
  trace_ = Trace{};
  trace_.question = question;
  trace_.golds = golds;
  if (config_echo_.is_object() && !config_echo_.empty()) {
    trace_.config = config_echo_;
  } else {
    trace_.config["engine"] = config_.snapshot();
  }
  fact_counter_ = 0;
  abort_to_synthesis_ = false;

  gateway_->set_attempt_sink([this](const AttemptRecord& record) {
    nlohmann::ordered_json event;
    event["type"] = "attempt";
    event["role"] = std::string(to_string(record.role));
    event["attempt"] = record.attempt;
    event["context_hash"] = record.context_hash;
    event["completion"] = record.completion;
    if (!record.parse_error.empty()) event["parse_error"] = record.parse_error;
    record_event(std::move(event));
  });

  auto finalize_abort = [this]() {
    state_.status = RunStatus::Aborted;
    trace_.termination = "aborted";
    trace_.iterations = state_.iteration;
    trace_.elapsed_ms = ms_since(run_start_);
  };

  try {
    try {
      state_.plan = gateway_->decompose(question);
    } catch (const GatewayError& e) {
      throw EngineError(e.kind() == GatewayError::Kind::BackendUnavailable
                            ? EngineError::Kind::BackendUnavailable
                            : EngineError::Kind::DecomposeFailed,
                        std::string("decompose: ") + e.what());
    }
    record_plan_op({{"op", "init"}, {"plan", plan_to_json(state_.plan)}});

    while (true) {
      if (abort_to_synthesis_) break;
      if (state_.plan.all_live_resolved()) {
        trace_.termination = "resolved";
        break;
      }
      if (state_.iteration >= config_.max_iterations) {
        trace_.termination = "budget";
        record_event({{"type", "budget_exhausted"}, {"iterations", state_.iteration}});
        break;
      }
      const auto ready = ready_set(state_.plan);
      if (ready.empty()) {
        trace_.termination = "deadlock";
        record_event({{"type", "deadlock"}, {"iteration", state_.iteration}});
        break;
      }
      nlohmann::ordered_json iter_event;
      iter_event["type"] = "iteration";
      iter_event["index"] = state_.iteration + 1;
      auto ready_ids = nlohmann::ordered_json::array();
      for (const auto& task : ready) ready_ids.push_back(task.id);
      iter_event["ready"] = std::move(ready_ids);
      record_event(std::move(iter_event));

      // Phase 1: extract for every ready task against the facts known at the
      // start of the iteration (facts are appended only in phase 2).
      std::vector<PendingFact> batch;
      batch.reserve(ready.size());
      for (const auto& task : ready) {
        const auto docs = retrieve_for(task);
        batch.push_back(extract_for(task, docs));
      }

      // Phase 2: merge facts and dispatch in ascending task-id order.
      for (auto& pending : batch) {
        if (abort_to_synthesis_) break;
        const SubTask* task = state_.plan.find(pending.task_id);
        if (task == nullptr || !task->live()) {
          record_event({{"type", "dispatch_skipped"},
                        {"task", pending.task_id},
                        {"reason", "task pruned earlier in this iteration"}});
          continue;
        }
        const Fact& stored = state_.facts.add(std::move(pending.fact));
        nlohmann::ordered_json fact_event;
        fact_event["type"] = "fact";
        fact_event["fact"] = fact_to_json(stored);
        fact_event["grounded"] = !pending.downgraded;
        if (pending.synthetic) fact_event["synthetic"] = true;
        if (pending.downgraded) fact_event["downgraded"] = true;
        record_event(std::move(fact_event));
        dispatch_fact(stored);
      }
      ++state_.iteration;
    }
    if (abort_to_synthesis_ && trace_.termination.empty()) trace_.termination = "aborted";

    state_.status = abort_to_synthesis_ ? RunStatus::Aborted : RunStatus::Synthesizing;
    std::string answer;
    try {
      answer = gateway_->synthesize(question, state_.facts);
    } catch (const GatewayError& e) {
      if (e.kind() != GatewayError::Kind::MalformedOutput) throw;
      answer = fallback_answer();
      record_event({{"type", "synthesis_fallback"}, {"error", e.what()}});
    }
    record_event({{"type", "synthesis"}, {"answer", answer}});

    trace_.answer = answer;
    trace_.iterations = state_.iteration;
    if (!golds.empty()) {
      bool correct = false;
      if (gateway_->has_role(Role::Judge)) {
        for (const auto& gold : golds) {
          if (gateway_->judge(question, gold, answer)) {
            correct = true;
            break;
          }
        }
      } else {
        correct = cem(answer, golds);
      }
      trace_.correct = correct;
      record_event({{"type", "verdict"}, {"correct", correct}});
    }
    trace_.elapsed_ms = ms_since(run_start_);
    if (state_.status != RunStatus::Aborted) state_.status = RunStatus::Done;
    return RunResult{answer, trace_};
  } catch (const EngineError&) {
    finalize_abort();
    throw;
  } catch (const GatewayError& e) {
    finalize_abort();
    throw EngineError(e.kind() == GatewayError::Kind::BackendUnavailable
                          ? EngineError::Kind::BackendUnavailable
                          : EngineError::Kind::BadConfig,
                      std::string("backend: ") + e.what());
  } catch (const RetrievalError& e) {
    finalize_abort();
    throw EngineError(EngineError::Kind::BackendUnavailable,
                      std::string("retriever: ") + e.what());
  } catch (const PlanError& e) {
    finalize_abort();
    throw EngineError(EngineError::Kind::BadConfig, std::string("plan state: ") + e.what());
  }
}

nlohmann::ordered_json ExportReport::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["kept"] = kept;
  j["dropped_incorrect"] = dropped_incorrect;
  j["dropped_no_verdict"] = dropped_no_verdict;
  j["dropped_too_long"] = dropped_too_long;
  return j;
}

ExportReport export_traces(const std::vector<Trace>& traces, const std::string& out_path,
                           const ExportFilters& filters) {
  std::ofstream out(out_path);
  if (!out)
    throw EngineError(EngineError::Kind::IoFailure, "cannot write export file '" + out_path + "'");
  ExportReport report;
  for (const auto& trace : traces) {
    ++report.total;
    if (filters.require_correct) {
      if (!trace.correct.has_value()) {
        ++report.dropped_no_verdict;
        continue;
      }
      if (!*trace.correct) {
        ++report.dropped_incorrect;
        continue;
      }
    }
    const std::string line = trace.comparable_form();
    if (line.size() >= filters.max_chars) {
      ++report.dropped_too_long;
      continue;
    }
    out << line << "\n";
    ++report.kept;
  }
  if (!out)
    throw EngineError(EngineError::Kind::IoFailure, "failed writing export file '" + out_path + "'");
  return report;
}

double avg_iterations(const std::vector<Trace>& traces, bool correct_only) {
  double sum = 0.0;
  size_t count = 0;
  for (const auto& trace : traces) {
    if (correct_only && !(trace.correct.has_value() && *trace.correct)) continue;
    sum += static_cast<double>(trace.iterations);
    ++count;
  }
  if (count == 0)
    throw EngineError(EngineError::Kind::EmptySet, "no traces selected for avg_iterations");
  return sum / static_cast<double>(count);
}

}  // namespace reap
