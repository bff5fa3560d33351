#include "reap/plan.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace reap {

namespace {

std::unordered_map<std::string, size_t> index_by_id(const TaskPlan& plan) {
  std::unordered_map<std::string, size_t> index;
  index.reserve(plan.tasks.size());
  for (size_t i = 0; i < plan.tasks.size(); ++i) index.emplace(plan.tasks[i].id, i);
  return index;
}

// Transitive dependents of root, root excluded. Only live tasks are walked;
// pruned tasks cannot re-enter a live closure.
std::unordered_set<std::string> live_dependent_closure(const TaskPlan& plan,
                                                       const std::string& root) {
  std::unordered_set<std::string> closure;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& task : plan.tasks) {
      if (!task.live() || closure.count(task.id)) continue;
      for (const auto& dep : task.deps) {
        if (dep == root || closure.count(dep)) {
          closure.insert(task.id);
          grew = true;
          break;
        }
      }
    }
  }
  return closure;
}

// Dependents of root including pruned ones, for prune_branch.
std::unordered_set<std::string> dependent_closure(const TaskPlan& plan,
                                                  const std::string& root) {
  std::unordered_set<std::string> closure;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& task : plan.tasks) {
      if (closure.count(task.id)) continue;
      for (const auto& dep : task.deps) {
        if (dep == root || closure.count(dep)) {
          closure.insert(task.id);
          grew = true;
          break;
        }
      }
    }
  }
  return closure;
}

bool has_cycle(const TaskPlan& plan) {
  auto index = index_by_id(plan);
  // 0 = unvisited, 1 = on stack, 2 = done
  std::unordered_map<std::string, int> state;
  for (const auto& t : plan.tasks) state[t.id] = 0;

  std::vector<const SubTask*> stack;
  for (const auto& start : plan.tasks) {
    if (state[start.id] != 0) continue;
    stack.push_back(&start);
    std::vector<size_t> dep_cursor{0};
    state[start.id] = 1;
    while (!stack.empty()) {
      const SubTask* top = stack.back();
      size_t& cursor = dep_cursor.back();
      if (cursor < top->deps.size()) {
        const std::string& dep = top->deps[cursor++];
        auto it = index.find(dep);
        if (it == index.end()) continue;  // dangling dep reported elsewhere
        const SubTask* next = &plan.tasks[it->second];
        int s = state[next->id];
        if (s == 1) return true;
        if (s == 0) {
          state[next->id] = 1;
          stack.push_back(next);
          dep_cursor.push_back(0);
        }
      } else {
        state[top->id] = 2;
        stack.pop_back();
        dep_cursor.pop_back();
      }
    }
  }
  return false;
}

const SubTask& must_find(const TaskPlan& plan, const std::string& task_id) {
  const SubTask* task = plan.find(task_id);
  if (!task) throw PlanError(PlanError::Kind::UnknownTask, "unknown task: " + task_id);
  return *task;
}

std::string replace_all(std::string text, const std::string& needle,
                        const std::string& replacement) {
  if (needle.empty()) return text;
  std::string out;
  out.reserve(text.size());
  size_t pos = 0;
  while (true) {
    size_t hit = text.find(needle, pos);
    if (hit == std::string::npos) {
      out.append(text, pos, std::string::npos);
      return out;
    }
    out.append(text, pos, hit - pos);
    out += replacement;
    pos = hit + needle.size();
  }
}

}  // namespace

std::string_view to_string(TaskStatus status) {
  switch (status) {
    case TaskStatus::Pending: return "Pending";
    case TaskStatus::Ready: return "Ready";
    case TaskStatus::InProgress: return "InProgress";
    case TaskStatus::Resolved: return "Resolved";
    case TaskStatus::Failed: return "Failed";
    case TaskStatus::Pruned: return "Pruned";
  }
  return "Pending";
}

std::optional<TaskStatus> task_status_from_string(std::string_view text) {
  if (text == "Pending") return TaskStatus::Pending;
  if (text == "Ready") return TaskStatus::Ready;
  if (text == "InProgress") return TaskStatus::InProgress;
  if (text == "Resolved") return TaskStatus::Resolved;
  if (text == "Failed") return TaskStatus::Failed;
  if (text == "Pruned") return TaskStatus::Pruned;
  return std::nullopt;
}

const SubTask* TaskPlan::find(std::string_view id) const {
  for (const auto& t : tasks)
    if (t.id == id) return &t;
  return nullptr;
}

SubTask* TaskPlan::find(std::string_view id) {
  for (auto& t : tasks)
    if (t.id == id) return &t;
  return nullptr;
}

bool TaskPlan::all_live_resolved() const {
  for (const auto& t : tasks)
    if (t.live() && t.status != TaskStatus::Resolved) return false;
  return true;
}

std::string PlanValidation::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.task_id.empty() ? v.message : v.task_id + ": " + v.message;
  }
  return out;
}

std::vector<std::string> scan_placeholders(std::string_view query) {
  static constexpr std::string_view kSuffix = ".answer";
  std::vector<std::string> ids;
  size_t pos = 0;
  while (pos < query.size()) {
    size_t open = query.find('{', pos);
    if (open == std::string_view::npos) break;
    size_t close = query.find('}', open + 1);
    if (close == std::string_view::npos) break;
    // Nested '{' restarts the scan at the inner brace.
    size_t inner = query.find('{', open + 1);
    if (inner != std::string_view::npos && inner < close) {
      pos = inner;
      continue;
    }
    std::string_view body = query.substr(open + 1, close - open - 1);
    if (body.size() > kSuffix.size() &&
        body.substr(body.size() - kSuffix.size()) == kSuffix) {
      ids.emplace_back(body.substr(0, body.size() - kSuffix.size()));
    }
    pos = close + 1;
  }
  return ids;
}

std::string placeholder_for(std::string_view task_id) {
  return "{" + std::string(task_id) + ".answer}";
}

PlanValidation validate_plan(const TaskPlan& plan) {
  PlanValidation result;
  auto add = [&](const std::string& id, std::string message) {
    result.violations.push_back({id, std::move(message)});
  };

  std::unordered_map<std::string, size_t> seen;
  for (const auto& task : plan.tasks) {
    if (task.id.empty()) {
      add("", "empty task id");
      continue;
    }
    auto [it, inserted] = seen.emplace(task.id, 1);
    if (!inserted) add(task.id, "duplicate task id");
  }

  for (const auto& task : plan.tasks) {
    for (const auto& dep : task.deps) {
      const SubTask* target = plan.find(dep);
      if (!target) {
        add(task.id, "dangling dep " + dep);
      } else if (task.live() && !target->live()) {
        add(task.id, "live task depends on pruned task " + dep);
      }
    }
    for (const auto& ref : scan_placeholders(task.query)) {
      if (std::find(task.deps.begin(), task.deps.end(), ref) == task.deps.end()) {
        add(task.id, "placeholder {" + ref + ".answer} does not name a dep");
      }
    }
    switch (task.status) {
      case TaskStatus::Resolved:
        if (!task.fact_ref) add(task.id, "resolved task without fact_ref");
        break;
      case TaskStatus::Pending:
      case TaskStatus::Ready:
      case TaskStatus::InProgress:
        if (task.fact_ref) add(task.id, "unresolved task with fact_ref");
        break;
      default:
        break;
    }
  }

  if (has_cycle(plan)) add("", "dependency cycle");
  return result;
}

std::vector<SubTask> ready_set(const TaskPlan& plan) {
  PlanValidation validation = validate_plan(plan);
  if (!validation.ok()) {
    throw PlanError(PlanError::Kind::PlanInvalid, "plan invalid: " + validation.summary());
  }
  std::vector<SubTask> ready;
  for (const auto& task : plan.tasks) {
    if (task.status != TaskStatus::Pending) continue;
    bool deps_resolved = true;
    for (const auto& dep : task.deps) {
      const SubTask* target = plan.find(dep);
      if (!target || target->status != TaskStatus::Resolved) {
        deps_resolved = false;
        break;
      }
    }
    if (!deps_resolved) continue;
    if (!scan_placeholders(task.query).empty()) {
      throw PlanError(PlanError::Kind::PlanInvalid,
                      "task " + task.id +
                          " is ready but still carries unsubstituted placeholders");
    }
    ready.push_back(task);
  }
  std::sort(ready.begin(), ready.end(),
            [](const SubTask& a, const SubTask& b) { return a.id < b.id; });
  return ready;
}

TaskPlan substitute_placeholders(TaskPlan plan, const std::string& task_id,
                                 const std::string& answer) {
  must_find(plan, task_id);
  if (answer.empty()) {
    throw PlanError(PlanError::Kind::PlanInvalid, "empty substitution answer for " + task_id);
  }
  const std::string needle = placeholder_for(task_id);
  for (auto& task : plan.tasks) {
    if (task.status != TaskStatus::Pending) continue;
    if (task.query.find(needle) != std::string::npos) {
      task.query = replace_all(task.query, needle, answer);
    }
  }
  ++plan.generation;
  return plan;
}

TaskPlan fork_branches(TaskPlan plan, const std::string& task_id,
                       const std::vector<std::string>& answers, int fork_cap) {
  const SubTask& root = must_find(plan, task_id);
  if (answers.size() < 2) {
    throw PlanError(PlanError::Kind::PlanInvalid,
                    "fork requires at least 2 answers for " + task_id);
  }
  if (static_cast<int>(answers.size()) > fork_cap) {
    throw PlanError(PlanError::Kind::TooManyBranches,
                    "fork of " + task_id + " with " + std::to_string(answers.size()) +
                        " answers exceeds cap " + std::to_string(fork_cap));
  }
  if (root.status != TaskStatus::Resolved) {
    throw PlanError(PlanError::Kind::PlanInvalid,
                    "fork root " + task_id + " must be Resolved");
  }

  auto closure = live_dependent_closure(plan, task_id);
  if (closure.empty()) {
    ++plan.generation;
    return plan;
  }

  // Closure members in plan order so clone layout is deterministic.
  std::vector<SubTask> originals;
  for (const auto& task : plan.tasks)
    if (closure.count(task.id)) originals.push_back(task);

  std::vector<SubTask> clones;
  for (size_t k = 1; k <= answers.size(); ++k) {
    const std::string suffix = "#" + std::to_string(k);
    for (const auto& orig : originals) {
      SubTask clone = orig;
      clone.id = orig.id + suffix;
      for (auto& dep : clone.deps) {
        if (closure.count(dep)) dep += suffix;
      }
      // Remap placeholders: closure-internal references follow their clone,
      // references to the forked task take this branch's answer.
      for (const auto& ref : scan_placeholders(orig.query)) {
        if (ref == task_id) {
          clone.query = replace_all(clone.query, placeholder_for(ref), answers[k - 1]);
        } else if (closure.count(ref)) {
          clone.query = replace_all(clone.query, placeholder_for(ref),
                                    placeholder_for(ref + suffix));
        }
      }
      clones.push_back(std::move(clone));
    }
  }

  for (auto& task : plan.tasks) {
    if (closure.count(task.id)) task.status = TaskStatus::Pruned;
  }
  for (auto& clone : clones) plan.tasks.push_back(std::move(clone));
  ++plan.generation;
  return plan;
}

TaskPlan prune_branch(TaskPlan plan, const std::string& task_id) {
  const SubTask& root = must_find(plan, task_id);
  if (root.status == TaskStatus::Resolved) {
    throw PlanError(PlanError::Kind::CannotPruneResolved,
                    "cannot prune resolved task " + task_id);
  }
  auto closure = dependent_closure(plan, task_id);
  closure.insert(task_id);
  for (auto& task : plan.tasks) {
    if (closure.count(task.id)) task.status = TaskStatus::Pruned;
  }
  ++plan.generation;
  return plan;
}

TaskPlan inject_subtasks(TaskPlan plan, std::vector<SubTask> new_tasks) {
  for (const auto& task : new_tasks) {
    if (plan.find(task.id)) {
      throw PlanError(PlanError::Kind::IdCollision, "id collision: " + task.id);
    }
  }
  for (auto& task : new_tasks) {
    task.status = TaskStatus::Pending;
    task.fact_ref.reset();
    plan.tasks.push_back(std::move(task));
  }
  PlanValidation validation = validate_plan(plan);
  if (!validation.ok()) {
    throw PlanError(PlanError::Kind::PlanInvalid,
                    "injection leaves plan invalid: " + validation.summary());
  }
  ++plan.generation;
  return plan;
}

TaskPlan refine_query(TaskPlan plan, const std::string& task_id,
                      const std::string& new_query, int refine_cap) {
  SubTask* task = plan.find(task_id);
  if (!task) throw PlanError(PlanError::Kind::UnknownTask, "unknown task: " + task_id);
  if (task->status == TaskStatus::Resolved) {
    throw PlanError(PlanError::Kind::CannotRefineResolved,
                    "cannot refine resolved task " + task_id);
  }
  if (task->status == TaskStatus::Pruned) {
    throw PlanError(PlanError::Kind::CannotRefinePruned,
                    "cannot refine pruned task " + task_id);
  }
  if (new_query.empty()) {
    throw PlanError(PlanError::Kind::PlanInvalid, "empty refined query for " + task_id);
  }
  if (task->retries + 1 > refine_cap) {
    throw PlanError(PlanError::Kind::RetryExhausted,
                    "refine cap " + std::to_string(refine_cap) + " exhausted for " + task_id);
  }
  task->query = new_query;
  task->status = TaskStatus::Pending;
  ++task->retries;
  ++plan.generation;
  return plan;
}

TaskPlan resolve_task(TaskPlan plan, const std::string& task_id,
                      const std::string& fact_ref) {
  SubTask* task = plan.find(task_id);
  if (!task) throw PlanError(PlanError::Kind::UnknownTask, "unknown task: " + task_id);
  if (task->status == TaskStatus::Pruned) {
    throw PlanError(PlanError::Kind::PlanInvalid, "cannot resolve pruned task " + task_id);
  }
  task->status = TaskStatus::Resolved;
  task->fact_ref = fact_ref;
  ++plan.generation;
  return plan;
}

TaskPlan mark_failed(TaskPlan plan, const std::string& task_id) {
  SubTask* task = plan.find(task_id);
  if (!task) throw PlanError(PlanError::Kind::UnknownTask, "unknown task: " + task_id);
  if (task->status == TaskStatus::Pruned || task->status == TaskStatus::Resolved) {
    throw PlanError(PlanError::Kind::PlanInvalid,
                    "cannot mark finalized task failed: " + task_id);
  }
  task->status = TaskStatus::Failed;
  ++plan.generation;
  return plan;
}

nlohmann::ordered_json subtask_to_json(const SubTask& task) {
  nlohmann::ordered_json j;
  j["id"] = task.id;
  j["query"] = task.query;
  j["deps"] = task.deps;
  j["status"] = to_string(task.status);
  if (task.fact_ref) j["fact_ref"] = *task.fact_ref;
  return j;
}

SubTask subtask_from_json(const nlohmann::json& j) {
  SubTask task;
  task.id = j.at("id").get<std::string>();
  task.query = j.at("query").get<std::string>();
  if (j.contains("deps")) task.deps = j.at("deps").get<std::vector<std::string>>();
  if (j.contains("status")) {
    auto status = task_status_from_string(j.at("status").get<std::string>());
    if (!status) {
      throw PlanError(PlanError::Kind::PlanInvalid,
                      "unknown status: " + j.at("status").get<std::string>());
    }
    task.status = *status;
  }
  if (j.contains("fact_ref") && !j.at("fact_ref").is_null()) {
    task.fact_ref = j.at("fact_ref").get<std::string>();
  }
  return task;
}

nlohmann::ordered_json plan_to_json(const TaskPlan& plan) {
  nlohmann::ordered_json j;
  j["tasks"] = nlohmann::ordered_json::array();
  for (const auto& task : plan.tasks) j["tasks"].push_back(subtask_to_json(task));
  j["generation"] = plan.generation;
  return j;
}

TaskPlan plan_from_json(const nlohmann::json& j) {
  TaskPlan plan;
  for (const auto& tj : j.at("tasks")) plan.tasks.push_back(subtask_from_json(tj));
  if (j.contains("generation")) plan.generation = j.at("generation").get<std::uint64_t>();
  return plan;
}

}  // namespace reap
