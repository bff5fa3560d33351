#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reap/errors.hpp"

namespace reap {

enum class TaskStatus { Pending, Ready, InProgress, Resolved, Failed, Pruned };

std::string_view to_string(TaskStatus status);
std::optional<TaskStatus> task_status_from_string(std::string_view text);

/// One decomposed sub-question. Queries may embed placeholders of the form
/// `{<id>.answer}`; every placeholder must name an id listed in deps.
struct SubTask {
  std::string id;
  std::string query;
  std::vector<std::string> deps;
  TaskStatus status = TaskStatus::Pending;
  std::optional<std::string> fact_ref;
  int retries = 0;

  bool live() const { return status != TaskStatus::Pruned; }
};

/// The global sub-task plan: a DAG of SubTasks plus a revision counter.
/// Plans are values; every transformation below returns a new plan with
/// generation incremented. Equal generations imply identical plans.
struct TaskPlan {
  std::vector<SubTask> tasks;
  std::uint64_t generation = 0;

  const SubTask* find(std::string_view id) const;
  SubTask* find(std::string_view id);
  bool all_live_resolved() const;
};

struct PlanViolation {
  std::string task_id;
  std::string message;
};

struct PlanValidation {
  std::vector<PlanViolation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

inline constexpr int kDefaultForkCap = 4;
inline constexpr int kDefaultRefineCap = 2;

/// Brace-matched scan for `{<id>.answer}` placeholders; returns the referenced
/// ids in order of appearance. Brace spans not matching the pattern are
/// ignored as ordinary text.
std::vector<std::string> scan_placeholders(std::string_view query);

std::string placeholder_for(std::string_view task_id);

/// Checks every SubTask/TaskPlan invariant: unique non-empty ids, deps that
/// exist, acyclicity, placeholders confined to deps, live tasks never
/// depending on pruned ones, and status/fact_ref consistency. Violations are
/// data, not exceptions.
PlanValidation validate_plan(const TaskPlan& plan);

/// Every Pending task whose deps are all Resolved, ascending id order.
/// Throws PlanInvalid if the plan fails validation or if a would-be-ready
/// task still carries an unsubstituted placeholder (substitution must
/// precede readiness).
std::vector<SubTask> ready_set(const TaskPlan& plan);

/// Rewrites `{task_id.answer}` to `answer` in every Pending task's query.
TaskPlan substitute_placeholders(TaskPlan plan, const std::string& task_id,
                                 const std::string& answer);

/// Clones the live transitive dependent closure of task_id once per answer.
/// Clone ids are `<orig>#<k>` (k 1-based); closure-internal deps and
/// placeholders are remapped to sibling clones; placeholders naming task_id
/// are substituted with that branch's answer; the originals become Pruned.
TaskPlan fork_branches(TaskPlan plan, const std::string& task_id,
                       const std::vector<std::string>& answers,
                       int fork_cap = kDefaultForkCap);

/// Marks task_id and its transitive dependents Pruned.
TaskPlan prune_branch(TaskPlan plan, const std::string& task_id);

/// Appends new Pending tasks and revalidates the whole plan.
TaskPlan inject_subtasks(TaskPlan plan, std::vector<SubTask> new_tasks);

/// Replaces a live unresolved task's query and resets it to Pending,
/// spending one retry from its budget.
TaskPlan refine_query(TaskPlan plan, const std::string& task_id,
                      const std::string& new_query,
                      int refine_cap = kDefaultRefineCap);

/// Marks a live task Resolved and records the fact that resolved it.
TaskPlan resolve_task(TaskPlan plan, const std::string& task_id,
                      const std::string& fact_ref);

/// Marks a live unresolved task Failed.
TaskPlan mark_failed(TaskPlan plan, const std::string& task_id);

nlohmann::ordered_json plan_to_json(const TaskPlan& plan);
TaskPlan plan_from_json(const nlohmann::json& j);

nlohmann::ordered_json subtask_to_json(const SubTask& task);
SubTask subtask_from_json(const nlohmann::json& j);

}  // namespace reap
