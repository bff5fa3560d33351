#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "reap/document.hpp"
#include "reap/errors.hpp"
#include "reap/facts.hpp"
#include "reap/plan.hpp"

namespace reap {

enum class Role { Decompose, ExtractFact, Replan, Synthesize, Judge };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view text);

/// One prompt to one role: a fixed-order list of named context sections plus
/// decoding parameters. The section list is the identity of the request; the
/// scripted backend keys fixtures off its hash.
struct RoleRequest {
  Role role = Role::Decompose;
  std::vector<std::pair<std::string, std::string>> sections;
  int max_tokens = 1024;
  double temperature = 0.0;

  const std::string* section(std::string_view name) const;
  /// FNV-1a over role name and the ordered sections, as 16 hex chars.
  std::string context_hash() const;
  /// The user-message body: each section under a "## name" heading.
  std::string render() const;
};

enum class ReplanVerdict { SufficientAsIs, RefineQuery, Overhaul };

std::string_view to_string(ReplanVerdict verdict);
std::optional<ReplanVerdict> replan_verdict_from_string(std::string_view text);

/// Re-Planner outcome. Exactly the fields the verdict calls for are set:
/// RefineQuery carries target_task + new_query, Overhaul carries prune_root +
/// injected_tasks, SufficientAsIs carries neither.
struct ReplanDecision {
  ReplanVerdict verdict = ReplanVerdict::SufficientAsIs;
  std::string target_task;
  std::string new_query;
  std::string prune_root;
  std::vector<SubTask> injected_tasks;
  std::string justification;
};

enum class BackendKind { Remote, Scripted };

struct BackendConfig {
  BackendKind kind = BackendKind::Scripted;
  std::string name;         // catalog label, echoed in traces
  std::string endpoint;     // Remote
  std::string model;        // Remote
  std::string api_key_env;  // Remote
  std::string script_path;  // Scripted
  int max_retries = 2;
  int timeout_seconds = 30;
  int max_tokens = 1024;
  double temperature = 0.0;
};

/// Throws GatewayError{BadConfig} when required fields for the kind are missing.
void validate_backend_config(const BackendConfig& config);

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const RoleRequest& request, const std::vector<ChatMessage>& messages) = 0;
  virtual std::string name() const = 0;
};

std::shared_ptr<Backend> make_backend(const BackendConfig& config);

/// Deterministic fixture replay. The fixture file holds:
///   {"entries": [{"role": "...",
///                 "when": {"<section>": exact, "<section>_contains": substring,
///                          "context_hash": hex},
///                 "respond": string | object | [first, second, ...]},
///                ...],
///    "fallbacks": {"<role>": completion}}
/// Entries are tried in file order, first full match wins; array responses
/// play one element per call and repeat the last once exhausted. A Judge
/// request with no matching entry falls back to comparing the gold and
/// prediction sections after answer normalization.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(const std::string& script_path);
  std::string complete(const RoleRequest& request, const std::vector<ChatMessage>& messages) override;
  std::string name() const override { return "scripted:" + script_path_; }

 private:
  struct Entry {
    std::string role;
    std::vector<std::pair<std::string, std::string>> exact;     // section -> value
    std::vector<std::pair<std::string, std::string>> contains;  // section -> substring
    std::string context_hash;
    std::vector<std::string> responses;
    size_t next = 0;
  };
  bool matches(const Entry& entry, const RoleRequest& request) const;

  std::string script_path_;
  std::vector<Entry> entries_;
  std::map<std::string, std::string> fallbacks_;
  std::mutex mutex_;
};

/// Chat-completion client: POST {model, messages, temperature, max_tokens}
/// with a bearer token read from the configured environment variable; the
/// reply text is the first choice's message content.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(BackendConfig config);
  std::string complete(const RoleRequest& request, const std::vector<ChatMessage>& messages) override;
  std::string name() const override { return "remote:" + config_.model; }

 private:
  BackendConfig config_;
};

/// First machine-readable object in a completion: a fenced ```json block if
/// present, otherwise the first balanced {...} span.
std::optional<std::string> extract_json_payload(std::string_view completion);

/// One backend call, recorded whether or not its output parsed.
struct AttemptRecord {
  Role role = Role::Decompose;
  int attempt = 0;
  std::string context_hash;
  std::string completion;
  std::string parse_error;  // empty on success
};

using AttemptSink = std::function<void(const AttemptRecord&)>;

/// All LLM-backed roles behind typed operations with strict parsing and a
/// bounded repair loop: a parse failure re-prompts with the parser's error
/// appended, at most max_retries times, and every attempt reaches the sink.
class LlmGateway {
 public:
  struct RoleBinding {
    BackendConfig config;
    std::shared_ptr<Backend> backend;
  };

  explicit LlmGateway(std::map<Role, RoleBinding> bindings);

  bool has_role(Role role) const { return bindings_.count(role) > 0; }
  void set_attempt_sink(AttemptSink sink) { sink_ = std::move(sink); }

  TaskPlan decompose(const std::string& question) const;
  /// Fact with statement/answers/evidence/reasoning/level parsed from the
  /// completion and doc_ids taken from docs; fact_id and task_id are bound
  /// by the caller.
  Fact extract_fact(const std::string& query, const std::vector<Document>& docs,
                    const FactsList& facts) const;
  ReplanDecision assess_and_replan(const std::string& question, const TaskPlan& plan,
                                   const FactsList& facts, const Fact& trigger,
                                   const std::string& prior_error = "") const;
  std::string synthesize(const std::string& question, const FactsList& facts) const;
  bool judge(const std::string& question, const std::string& gold,
             const std::string& prediction) const;

  const RoleBinding& binding(Role role) const;

 private:
  /// parse throws GatewayError{MalformedOutput|EmptyPlan} to reject a
  /// completion; the loop re-prompts with that message appended and rethrows
  /// the last rejection once max_retries re-prompts are spent.
  void complete_with_repair(const RoleRequest& request,
                            const std::function<void(const std::string&)>& parse) const;

  std::map<Role, RoleBinding> bindings_;
  AttemptSink sink_;
};

/// Prompt templates are plain data so they can be audited and diffed.
std::string_view system_prompt(Role role);
std::string render_documents(const std::vector<Document>& docs);

}  // namespace reap
