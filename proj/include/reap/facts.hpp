#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reap/document.hpp"
#include "reap/errors.hpp"

namespace reap {

enum class FulfillmentLevel { DirectAnswer, PartialClue, Failed };

std::string_view to_string(FulfillmentLevel level);
// Unknown labels are parse errors, never coerced.
std::optional<FulfillmentLevel> fulfillment_from_string(std::string_view text);

/// Structured extraction result: a grounded statement plus the answer strings,
/// verbatim evidence snippets, reasoning, and fulfillment level behind it.
struct Fact {
  std::string fact_id;
  std::string task_id;
  std::string statement;
  std::vector<std::string> answers;
  std::vector<std::string> evidence;
  std::string reasoning;
  FulfillmentLevel level = FulfillmentLevel::Failed;
  std::vector<std::string> doc_ids;
};

/// Violations of the Fact invariants; empty means the fact is well-formed.
std::vector<std::string> check_fact(const Fact& fact);

struct GroundingReport {
  std::vector<std::string> ungrounded;
  bool grounded() const { return ungrounded.empty(); }
};

/// A snippet is grounded iff it occurs as a contiguous substring of some
/// document's text after whitespace normalization (runs collapsed to one
/// space). Exact match only, no fuzzy matching.
GroundingReport verify_grounding(const Fact& fact, const std::vector<Document>& docs);

/// Append-only list of facts. Facts belonging to pruned plan branches stay in
/// the list but are flagged inactive and skipped when rendering.
class FactsList {
 public:
  const Fact& add(Fact fact);
  void deactivate_for_task(const std::string& task_id);

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Fact& at(size_t i) const { return entries_.at(i).fact; }
  bool active(size_t i) const { return entries_.at(i).active; }

  const Fact* find(std::string_view fact_id) const;
  const Fact* direct_answer_for(std::string_view task_id) const;
  std::vector<const Fact*> active_facts() const;

  /// Deterministic numbered block "F1. <statement> (level)" over active facts.
  std::string render() const;

 private:
  struct Entry {
    Fact fact;
    bool active = true;
  };
  std::vector<Entry> entries_;
};

nlohmann::ordered_json fact_to_json(const Fact& fact);
Fact fact_from_json(const nlohmann::json& j);

}  // namespace reap
