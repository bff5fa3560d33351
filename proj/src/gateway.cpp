#include "reap/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "reap/metrics.hpp"
#include "reap/text.hpp"

namespace reap {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Decompose: return "decompose";
    case Role::ExtractFact: return "extract_fact";
    case Role::Replan: return "replan";
    case Role::Synthesize: return "synthesize";
    case Role::Judge: return "judge";
  }
  return "decompose";
}

std::optional<Role> role_from_string(std::string_view text) {
  if (text == "decompose") return Role::Decompose;
  if (text == "extract_fact") return Role::ExtractFact;
  if (text == "replan") return Role::Replan;
  if (text == "synthesize") return Role::Synthesize;
  if (text == "judge") return Role::Judge;
  return std::nullopt;
}

const std::string* RoleRequest::section(std::string_view name) const {
  for (const auto& [key, value] : sections) {
    if (key == name) return &value;
  }
  return nullptr;
}

std::string RoleRequest::context_hash() const {
  std::string canonical(to_string(role));
  canonical.push_back('\x1f');
  for (const auto& [name, value] : sections) {
    canonical += name;
    canonical.push_back('\x1f');
    canonical += value;
    canonical.push_back('\x1e');
  }
  return to_hex(fnv1a64(canonical));
}

std::string RoleRequest::render() const {
  std::ostringstream out;
  for (const auto& [name, value] : sections) {
    out << "## " << name << "\n" << value << "\n\n";
  }
  return out.str();
}

std::string_view to_string(ReplanVerdict verdict) {
  switch (verdict) {
    case ReplanVerdict::SufficientAsIs: return "SufficientAsIs";
    case ReplanVerdict::RefineQuery: return "RefineQuery";
    case ReplanVerdict::Overhaul: return "Overhaul";
  }
  return "SufficientAsIs";
}

std::optional<ReplanVerdict> replan_verdict_from_string(std::string_view text) {
  if (text == "SufficientAsIs") return ReplanVerdict::SufficientAsIs;
  if (text == "RefineQuery") return ReplanVerdict::RefineQuery;
  if (text == "Overhaul") return ReplanVerdict::Overhaul;
  return std::nullopt;
}

void validate_backend_config(const BackendConfig& config) {
  if (config.kind == BackendKind::Remote) {
    if (config.endpoint.empty() || config.model.empty())
      throw GatewayError(GatewayError::Kind::BadConfig,
                         "remote backend needs both 'endpoint' and 'model'");
  } else {
    if (config.script_path.empty())
      throw GatewayError(GatewayError::Kind::BadConfig, "scripted backend needs 'script_path'");
  }
  if (config.max_retries < 0)
    throw GatewayError(GatewayError::Kind::BadConfig, "max_retries must be >= 0");
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config) {
  validate_backend_config(config);
  if (config.kind == BackendKind::Remote) return std::make_shared<RemoteBackend>(config);
  return std::make_shared<ScriptedBackend>(config.script_path);
}

ScriptedBackend::ScriptedBackend(const std::string& script_path) : script_path_(script_path) {
  std::ifstream in(script_path);
  if (!in)
    throw GatewayError(GatewayError::Kind::BadConfig,
                       "cannot open scripted fixture '" + script_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw GatewayError(GatewayError::Kind::BadConfig,
                       "scripted fixture '" + script_path + "' is not valid JSON: " + e.what());
  }
  auto to_completion = [](const nlohmann::json& value) -> std::string {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
  };
  for (const auto& record : j.value("entries", nlohmann::json::array())) {
    Entry entry;
    entry.role = record.at("role").get<std::string>();
    if (!role_from_string(entry.role))
      throw GatewayError(GatewayError::Kind::BadConfig,
                         "fixture entry has unknown role '" + entry.role + "'");
    // Named local: iterating .items() of a temporary json dangles.
    const auto when = record.value("when", nlohmann::json::object());
    for (const auto& [key, value] : when.items()) {
      if (key == "context_hash") {
        entry.context_hash = value.get<std::string>();
      } else if (key.size() > 9 && key.substr(key.size() - 9) == "_contains") {
        entry.contains.emplace_back(key.substr(0, key.size() - 9), value.get<std::string>());
      } else {
        entry.exact.emplace_back(key, value.get<std::string>());
      }
    }
    const auto& respond = record.at("respond");
    if (respond.is_array()) {
      for (const auto& item : respond) entry.responses.push_back(to_completion(item));
      if (entry.responses.empty())
        throw GatewayError(GatewayError::Kind::BadConfig, "fixture entry has an empty respond list");
    } else {
      entry.responses.push_back(to_completion(respond));
    }
    entries_.push_back(std::move(entry));
  }
  const auto fallbacks = j.value("fallbacks", nlohmann::json::object());
  for (const auto& [role, value] : fallbacks.items()) {
    if (!role_from_string(role))
      throw GatewayError(GatewayError::Kind::BadConfig,
                         "fixture fallback has unknown role '" + role + "'");
    fallbacks_[role] = to_completion(value);
  }
}

bool ScriptedBackend::matches(const Entry& entry, const RoleRequest& request) const {
  if (entry.role != to_string(request.role)) return false;
  if (!entry.context_hash.empty() && entry.context_hash != request.context_hash()) return false;
  for (const auto& [name, expected] : entry.exact) {
    const std::string* actual = request.section(name);
    if (actual == nullptr || *actual != expected) return false;
  }
  for (const auto& [name, needle] : entry.contains) {
    const std::string* actual = request.section(name);
    if (actual == nullptr || actual->find(needle) == std::string::npos) return false;
  }
  return true;
}

std::string ScriptedBackend::complete(const RoleRequest& request,
                                      const std::vector<ChatMessage>&) {
  std::lock_guard<std::mutex> lock(mutex_);
  for (auto& entry : entries_) {
    if (!matches(entry, request)) continue;
    const size_t index = std::min(entry.next, entry.responses.size() - 1);
    ++entry.next;
    return entry.responses[index];
  }
  auto fallback = fallbacks_.find(std::string(to_string(request.role)));
  if (fallback != fallbacks_.end()) return fallback->second;
  if (request.role == Role::Judge) {
    const std::string* gold = request.section("gold");
    const std::string* prediction = request.section("prediction");
    const bool correct = gold != nullptr && prediction != nullptr &&
                         normalize_answer(*gold) == normalize_answer(*prediction);
    nlohmann::ordered_json verdict;
    verdict["verdict"] = correct ? "correct" : "incorrect";
    return verdict.dump();
  }
  std::string names;
  for (const auto& [name, value] : request.sections) {
    if (!names.empty()) names += ", ";
    names += name;
  }
  throw GatewayError(GatewayError::Kind::BackendUnavailable,
                     "scripted fixture '" + script_path_ + "' has no entry for role '" +
                         std::string(to_string(request.role)) + "' (context hash " +
                         request.context_hash() + ", sections: " + names + ")");
}

namespace {

struct EndpointParts {
  std::string base;
  std::string path;
};

EndpointParts split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw GatewayError(GatewayError::Kind::BadConfig,
                       "endpoint '" + endpoint + "' lacks a scheme");
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

RemoteBackend::RemoteBackend(BackendConfig config) : config_(std::move(config)) {
  validate_backend_config(config_);
}

std::string RemoteBackend::complete(const RoleRequest& request,
                                    const std::vector<ChatMessage>& messages) {
  const auto parts = split_endpoint(config_.endpoint);
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::ordered_json::array();
  for (const auto& message : messages) {
    body["messages"].push_back({{"role", message.role}, {"content", message.content}});
  }
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
      throw GatewayError(GatewayError::Kind::BackendUnavailable,
                         "environment variable '" + config_.api_key_env + "' is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    httplib::Client client(parts.base);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    auto res = client.Post(parts.path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "no response from " + config_.endpoint;
      continue;
    }
    if (res->status == 429) {
      const std::string after = res->get_header_value("Retry-After");
      last_error = "rate limited" + (after.empty() ? std::string{} : " (retry-after: " + after + ")");
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw GatewayError(GatewayError::Kind::BackendUnavailable,
                         "HTTP " + std::to_string(res->status) + " from " + config_.endpoint +
                             ": " + res->body);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError(GatewayError::Kind::BackendUnavailable,
                         std::string("chat completion response is not JSON: ") + e.what());
    }
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw GatewayError(GatewayError::Kind::BackendUnavailable,
                         "chat completion response lacks choices[0].message.content");
    }
  }
  throw GatewayError(GatewayError::Kind::BackendUnavailable,
                     "backend unreachable after " + std::to_string(config_.max_retries + 1) +
                         " attempts: " + last_error);
}

std::optional<std::string> extract_json_payload(std::string_view completion) {
  const auto fence = completion.find("```json");
  if (fence != std::string_view::npos) {
    const auto body_start = completion.find('\n', fence);
    if (body_start != std::string_view::npos) {
      const auto fence_end = completion.find("```", body_start);
      if (fence_end != std::string_view::npos) {
        auto inner = completion.substr(body_start + 1, fence_end - body_start - 1);
        return std::string(inner);
      }
    }
  }
  const auto open = completion.find('{');
  if (open == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (size_t i = open; i < completion.size(); ++i) {
    const char ch = completion[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (ch == '\\') {
        escaped = true;
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (ch == '"') {
      in_string = true;
    } else if (ch == '{') {
      ++depth;
    } else if (ch == '}') {
      --depth;
      if (depth == 0) return std::string(completion.substr(open, i - open + 1));
    }
  }
  return std::nullopt;
}

std::string_view system_prompt(Role role) {
  switch (role) {
    case Role::Decompose:
      return "You decompose a multi-hop question into the smallest plan of sub-tasks that "
             "answers it. Reply with one JSON object:\n"
             "{\"subtasks\": [{\"id\": \"p1\", \"query\": \"...\", \"depends_on\": []}]}\n"
             "Write {<id>.answer} inside a query wherever it needs an earlier sub-task's "
             "answer, and list that id in depends_on. Ids must be unique and dependencies "
             "acyclic.";
    case Role::ExtractFact:
      return "You extract one fact that addresses the query from the documents, taking the "
             "known facts into account. Reply with one JSON object:\n"
             "{\"statement\": \"...\", \"answers\": [\"...\"], \"evidence\": [\"...\"], "
             "\"reasoning\": \"...\", \"level\": \"DirectAnswer\"}\n"
             "level is DirectAnswer, PartialClue, or Failed. Evidence strings must be copied "
             "verbatim from the documents. DirectAnswer needs answers and evidence; "
             "PartialClue needs evidence; Failed must have an empty answers list.";
    case Role::Replan:
      return "A sub-task produced the trigger fact below instead of a direct answer. Decide "
             "how to repair the plan. Reply with one JSON object, exactly one of:\n"
             "{\"verdict\": \"SufficientAsIs\", \"justification\": \"...\"}\n"
             "{\"verdict\": \"RefineQuery\", \"target_task\": \"p2\", \"new_query\": \"...\", "
             "\"justification\": \"...\"}\n"
             "{\"verdict\": \"Overhaul\", \"prune_root\": \"p2\", \"injected_tasks\": "
             "[{\"id\": \"q1\", \"query\": \"...\", \"depends_on\": []}], "
             "\"justification\": \"...\"}\n"
             "Choose SufficientAsIs when the trigger fact already satisfies what later "
             "sub-tasks need.";
    case Role::Synthesize:
      return "Produce the final answer to the question from the facts. Reply with one JSON "
             "object: {\"answer\": \"...\"}. Keep the answer short; if the facts are "
             "incomplete, give the best supported answer.";
    case Role::Judge:
      return "Decide whether the prediction answers the question correctly, comparing it "
             "with the gold answer. Accept semantically equivalent phrasings. Reply with one "
             "JSON object: {\"verdict\": \"correct\"} or {\"verdict\": \"incorrect\"}.";
  }
  return "";
}

std::string render_documents(const std::vector<Document>& docs) {
  std::ostringstream out;
  for (size_t i = 0; i < docs.size(); ++i) {
    out << "[D" << (i + 1) << "] id=" << docs[i].doc_id;
    if (!docs[i].title.empty()) out << " title=" << docs[i].title;
    out << "\n" << docs[i].text << "\n";
  }
  return out.str();
}

namespace {

nlohmann::json parse_payload(const std::string& completion) {
  auto payload = extract_json_payload(completion);
  if (!payload)
    throw GatewayError(GatewayError::Kind::MalformedOutput, "completion contains no JSON object");
  try {
    return nlohmann::json::parse(*payload);
  } catch (const nlohmann::json::exception& e) {
    throw GatewayError(GatewayError::Kind::MalformedOutput,
                       std::string("completion JSON does not parse: ") + e.what());
  }
}

std::string require_string(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_string() || j.at(field).get<std::string>().empty())
    throw GatewayError(GatewayError::Kind::MalformedOutput,
                       std::string("field '") + field + "' must be a non-empty string");
  return j.at(field).get<std::string>();
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) return {};
  if (!j.at(field).is_array())
    throw GatewayError(GatewayError::Kind::MalformedOutput,
                       std::string("field '") + field + "' must be a list of strings");
  std::vector<std::string> out;
  for (const auto& item : j.at(field)) {
    if (!item.is_string())
      throw GatewayError(GatewayError::Kind::MalformedOutput,
                         std::string("field '") + field + "' must be a list of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

SubTask parse_llm_subtask(const nlohmann::json& j) {
  SubTask task;
  task.id = require_string(j, "id");
  task.query = require_string(j, "query");
  task.deps = string_list(j, "depends_on");
  task.status = TaskStatus::Pending;
  return task;
}

bool field_absent(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) return true;
  const auto& value = j.at(field);
  if (value.is_null()) return true;
  if (value.is_string()) return value.get<std::string>().empty();
  if (value.is_array()) return value.empty();
  return false;
}

}  // namespace

LlmGateway::LlmGateway(std::map<Role, RoleBinding> bindings) : bindings_(std::move(bindings)) {
  for (const auto& [role, binding] : bindings_) {
    validate_backend_config(binding.config);
    if (binding.backend == nullptr)
      throw GatewayError(GatewayError::Kind::BadConfig,
                         "role '" + std::string(to_string(role)) + "' has no backend instance");
  }
}

const LlmGateway::RoleBinding& LlmGateway::binding(Role role) const {
  auto it = bindings_.find(role);
  if (it == bindings_.end())
    throw GatewayError(GatewayError::Kind::BadConfig,
                       "no backend configured for role '" + std::string(to_string(role)) + "'");
  return it->second;
}

void LlmGateway::complete_with_repair(
    const RoleRequest& request, const std::function<void(const std::string&)>& parse) const {
  const auto& bind = binding(request.role);
  std::vector<ChatMessage> messages;
  messages.push_back({"system", std::string(system_prompt(request.role))});
  messages.push_back({"user", request.render()});
  for (int attempt = 0;; ++attempt) {
    const std::string completion = bind.backend->complete(request, messages);
    AttemptRecord record;
    record.role = request.role;
    record.attempt = attempt;
    record.context_hash = request.context_hash();
    record.completion = completion;
    try {
      parse(completion);
      if (sink_) sink_(record);
      return;
    } catch (const GatewayError& e) {
      if (e.kind() != GatewayError::Kind::MalformedOutput &&
          e.kind() != GatewayError::Kind::EmptyPlan) {
        throw;
      }
      record.parse_error = e.what();
      if (sink_) sink_(record);
      if (attempt >= bind.config.max_retries) throw;
      messages.push_back({"assistant", completion});
      messages.push_back({"user", std::string("Your previous reply could not be used: ") +
                                      e.what() +
                                      ". Reply again following the required format exactly."});
    }
  }
}

namespace {

RoleRequest make_request(Role role, const LlmGateway::RoleBinding& bind,
                         std::vector<std::pair<std::string, std::string>> sections) {
  RoleRequest request;
  request.role = role;
  request.sections = std::move(sections);
  request.max_tokens = bind.config.max_tokens;
  request.temperature = bind.config.temperature;
  return request;
}

}  // namespace

TaskPlan LlmGateway::decompose(const std::string& question) const {
  if (question.empty())
    throw GatewayError(GatewayError::Kind::BadConfig, "decompose requires a non-empty question");
  const auto& bind = binding(Role::Decompose);
  const RoleRequest request = make_request(Role::Decompose, bind, {{"question", question}});
  TaskPlan plan;
  complete_with_repair(request, [&plan](const std::string& completion) {
    const auto j = parse_payload(completion);
    if (!j.contains("subtasks") || !j.at("subtasks").is_array())
      throw GatewayError(GatewayError::Kind::MalformedOutput,
                         "plan object must hold a 'subtasks' list");
    if (j.at("subtasks").empty())
      throw GatewayError(GatewayError::Kind::EmptyPlan, "plan has no subtasks");
    TaskPlan candidate;
    for (const auto& item : j.at("subtasks")) candidate.tasks.push_back(parse_llm_subtask(item));
    const auto verdict = validate_plan(candidate);
    if (!verdict.ok())
      throw GatewayError(GatewayError::Kind::MalformedOutput,
                         "plan fails validation: " + verdict.summary());
    plan = std::move(candidate);
  });
  return plan;
}

Fact LlmGateway::extract_fact(const std::string& query, const std::vector<Document>& docs,
                              const FactsList& facts) const {
  if (docs.empty())
    throw GatewayError(GatewayError::Kind::BadConfig,
                       "extract_fact requires at least one document");
  const auto& bind = binding(Role::ExtractFact);
  const RoleRequest request = make_request(Role::ExtractFact, bind,
                                           {{"query", query},
                                            {"documents", render_documents(docs)},
                                            {"facts", facts.render()}});
  Fact fact;
  complete_with_repair(request, [&fact, &docs](const std::string& completion) {
    const auto j = parse_payload(completion);
    Fact candidate;
    candidate.statement = require_string(j, "statement");
    candidate.answers = string_list(j, "answers");
    candidate.evidence = string_list(j, "evidence");
    candidate.reasoning = j.value("reasoning", std::string{});
    const std::string label =
        j.contains("level") && j.at("level").is_string() ? j.at("level").get<std::string>() : "";
    const auto level = fulfillment_from_string(label);
    if (!level)
      throw GatewayError(GatewayError::Kind::MalformedOutput,
                         "unknown fulfillment level '" + label + "'");
    candidate.level = *level;
    for (const auto& doc : docs) candidate.doc_ids.push_back(doc.doc_id);
    // Level-specific shape rules; binding fields are the caller's, so check
    // with placeholders and strip them after.
    candidate.fact_id = "pending";
    candidate.task_id = "pending";
    const auto problems = check_fact(candidate);
    if (!problems.empty())
      throw GatewayError(GatewayError::Kind::MalformedOutput,
                         "fact violates level rules: " + join(problems, "; "));
    candidate.fact_id.clear();
    candidate.task_id.clear();
    fact = std::move(candidate);
  });
  return fact;
}

ReplanDecision LlmGateway::assess_and_replan(const std::string& question, const TaskPlan& plan,
                                             const FactsList& facts, const Fact& trigger,
                                             const std::string& prior_error) const {
  if (trigger.level == FulfillmentLevel::DirectAnswer)
    throw GatewayError(GatewayError::Kind::BadConfig,
                       "assess_and_replan triggers must be PartialClue or Failed");
  const auto& bind = binding(Role::Replan);
  std::vector<std::pair<std::string, std::string>> sections = {
      {"question", question},
      {"plan", plan_to_json(plan).dump(2)},
      {"facts", facts.render()},
      {"trigger", fact_to_json(trigger).dump(2)},
  };
  if (!prior_error.empty()) sections.emplace_back("prior_error", prior_error);
  const RoleRequest request = make_request(Role::Replan, bind, std::move(sections));
  ReplanDecision decision;
  complete_with_repair(request, [&decision](const std::string& completion) {
    const auto j = parse_payload(completion);
    const std::string label = j.contains("verdict") && j.at("verdict").is_string()
                                  ? j.at("verdict").get<std::string>()
                                  : "";
    const auto verdict = replan_verdict_from_string(label);
    if (!verdict)
      throw GatewayError(GatewayError::Kind::MalformedOutput, "unknown verdict '" + label + "'");
    ReplanDecision candidate;
    candidate.verdict = *verdict;
    candidate.justification = j.value("justification", std::string{});
    switch (*verdict) {
      case ReplanVerdict::SufficientAsIs:
        if (!field_absent(j, "target_task") || !field_absent(j, "new_query") ||
            !field_absent(j, "prune_root") || !field_absent(j, "injected_tasks"))
          throw GatewayError(GatewayError::Kind::MalformedOutput,
                             "SufficientAsIs must not carry repair fields");
        break;
      case ReplanVerdict::RefineQuery:
        candidate.target_task = require_string(j, "target_task");
        candidate.new_query = require_string(j, "new_query");
        if (!field_absent(j, "prune_root") || !field_absent(j, "injected_tasks"))
          throw GatewayError(GatewayError::Kind::MalformedOutput,
                             "RefineQuery must not carry overhaul fields");
        break;
      case ReplanVerdict::Overhaul:
        candidate.prune_root = require_string(j, "prune_root");
        if (!j.contains("injected_tasks") || !j.at("injected_tasks").is_array() ||
            j.at("injected_tasks").empty())
          throw GatewayError(GatewayError::Kind::MalformedOutput,
                             "Overhaul needs a non-empty 'injected_tasks' list");
        for (const auto& item : j.at("injected_tasks"))
          candidate.injected_tasks.push_back(parse_llm_subtask(item));
        if (!field_absent(j, "target_task") || !field_absent(j, "new_query"))
          throw GatewayError(GatewayError::Kind::MalformedOutput,
                             "Overhaul must not carry refine fields");
        break;
    }
    decision = std::move(candidate);
  });
  return decision;
}

std::string LlmGateway::synthesize(const std::string& question, const FactsList& facts) const {
  const auto& bind = binding(Role::Synthesize);
  const RoleRequest request = make_request(Role::Synthesize, bind,
                                           {{"question", question}, {"facts", facts.render()}});
  std::string answer;
  complete_with_repair(request, [&answer](const std::string& completion) {
    const auto j = parse_payload(completion);
    answer = require_string(j, "answer");
  });
  return answer;
}

bool LlmGateway::judge(const std::string& question, const std::string& gold,
                       const std::string& prediction) const {
  const auto& bind = binding(Role::Judge);
  const RoleRequest request = make_request(
      Role::Judge, bind,
      {{"question", question}, {"gold", gold}, {"prediction", prediction}});
  bool correct = false;
  complete_with_repair(request, [&correct](const std::string& completion) {
    const auto j = parse_payload(completion);
    const std::string label = require_string(j, "verdict");
    if (label == "correct") {
      correct = true;
    } else if (label == "incorrect") {
      correct = false;
    } else {
      throw GatewayError(GatewayError::Kind::MalformedOutput,
                         "unknown judge verdict '" + label + "'");
    }
  });
  return correct;
}

}  // namespace reap
