#include "reap/facts.hpp"

#include <sstream>

#include "reap/text.hpp"

namespace reap {

std::string_view to_string(FulfillmentLevel level) {
  switch (level) {
    case FulfillmentLevel::DirectAnswer: return "DirectAnswer";
    case FulfillmentLevel::PartialClue: return "PartialClue";
    case FulfillmentLevel::Failed: return "Failed";
  }
  return "Failed";
}

std::optional<FulfillmentLevel> fulfillment_from_string(std::string_view text) {
  if (text == "DirectAnswer") return FulfillmentLevel::DirectAnswer;
  if (text == "PartialClue") return FulfillmentLevel::PartialClue;
  if (text == "Failed") return FulfillmentLevel::Failed;
  return std::nullopt;
}

std::vector<std::string> check_fact(const Fact& fact) {
  std::vector<std::string> problems;
  if (fact.fact_id.empty()) problems.push_back("fact_id is empty");
  if (fact.task_id.empty()) problems.push_back("task_id is empty");
  if (fact.statement.empty()) problems.push_back("statement is empty");
  switch (fact.level) {
    case FulfillmentLevel::DirectAnswer:
      if (fact.answers.empty())
        problems.push_back("DirectAnswer fact has no answers");
      if (fact.evidence.empty())
        problems.push_back("DirectAnswer fact has no evidence");
      break;
    case FulfillmentLevel::PartialClue:
      if (fact.evidence.empty())
        problems.push_back("PartialClue fact has no evidence");
      break;
    case FulfillmentLevel::Failed:
      if (!fact.answers.empty())
        problems.push_back("Failed fact must not carry answers");
      break;
  }
  for (const auto& answer : fact.answers) {
    if (answer.empty()) {
      problems.push_back("fact has an empty answer string");
      break;
    }
  }
  for (const auto& snippet : fact.evidence) {
    if (snippet.empty()) {
      problems.push_back("fact has an empty evidence snippet");
      break;
    }
  }
  return problems;
}

GroundingReport verify_grounding(const Fact& fact, const std::vector<Document>& docs) {
  GroundingReport report;
  std::vector<std::string> normalized_docs;
  normalized_docs.reserve(docs.size());
  for (const auto& doc : docs) normalized_docs.push_back(collapse_whitespace(doc.text));
  for (const auto& snippet : fact.evidence) {
    const std::string needle = collapse_whitespace(snippet);
    bool found = false;
    if (!needle.empty()) {
      for (const auto& haystack : normalized_docs) {
        if (haystack.find(needle) != std::string::npos) {
          found = true;
          break;
        }
      }
    }
    if (!found) report.ungrounded.push_back(snippet);
  }
  return report;
}

const Fact& FactsList::add(Fact fact) {
  auto problems = check_fact(fact);
  if (!problems.empty())
    throw FactError(FactError::Kind::InvalidFact, "invalid fact '" + fact.fact_id + "': " + join(problems, "; "));
  if (find(fact.fact_id) != nullptr)
    throw FactError(FactError::Kind::DuplicateFactId, "fact id '" + fact.fact_id + "' already recorded");
  if (fact.level == FulfillmentLevel::DirectAnswer) {
    const Fact* existing = direct_answer_for(fact.task_id);
    if (existing != nullptr)
      throw FactError(FactError::Kind::DuplicateDirectAnswer,
                      "task '" + fact.task_id + "' already has DirectAnswer fact '" + existing->fact_id + "'");
  }
  entries_.push_back(Entry{std::move(fact), true});
  return entries_.back().fact;
}

void FactsList::deactivate_for_task(const std::string& task_id) {
  for (auto& entry : entries_) {
    if (entry.fact.task_id == task_id) entry.active = false;
  }
}

const Fact* FactsList::find(std::string_view fact_id) const {
  for (const auto& entry : entries_) {
    if (entry.fact.fact_id == fact_id) return &entry.fact;
  }
  return nullptr;
}

const Fact* FactsList::direct_answer_for(std::string_view task_id) const {
  for (const auto& entry : entries_) {
    if (entry.active && entry.fact.task_id == task_id &&
        entry.fact.level == FulfillmentLevel::DirectAnswer) {
      return &entry.fact;
    }
  }
  return nullptr;
}

std::vector<const Fact*> FactsList::active_facts() const {
  std::vector<const Fact*> out;
  for (const auto& entry : entries_) {
    if (entry.active) out.push_back(&entry.fact);
  }
  return out;
}

std::string FactsList::render() const {
  std::ostringstream out;
  size_t n = 0;
  for (const auto& entry : entries_) {
    if (!entry.active) continue;
    ++n;
    out << "F" << n << ". " << entry.fact.statement << " (" << to_string(entry.fact.level) << ")\n";
  }
  return out.str();
}

nlohmann::ordered_json fact_to_json(const Fact& fact) {
  nlohmann::ordered_json j;
  j["fact_id"] = fact.fact_id;
  j["task_id"] = fact.task_id;
  j["statement"] = fact.statement;
  j["answers"] = fact.answers;
  j["evidence"] = fact.evidence;
  j["reasoning"] = fact.reasoning;
  j["level"] = std::string(to_string(fact.level));
  j["doc_ids"] = fact.doc_ids;
  return j;
}

Fact fact_from_json(const nlohmann::json& j) {
  Fact fact;
  fact.fact_id = j.at("fact_id").get<std::string>();
  fact.task_id = j.at("task_id").get<std::string>();
  fact.statement = j.at("statement").get<std::string>();
  fact.answers = j.value("answers", std::vector<std::string>{});
  fact.evidence = j.value("evidence", std::vector<std::string>{});
  fact.reasoning = j.value("reasoning", std::string{});
  const std::string label = j.at("level").get<std::string>();
  auto level = fulfillment_from_string(label);
  if (!level)
    throw FactError(FactError::Kind::InvalidFact, "unknown fulfillment level '" + label + "'");
  fact.level = *level;
  fact.doc_ids = j.value("doc_ids", std::vector<std::string>{});
  return fact;
}

}  // namespace reap
