#include "reap/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "reap/text.hpp"

namespace reap {

namespace {

bool is_article(const std::string& token) {
  return token == "a" || token == "an" || token == "the";
}

bool contains_contiguous(const std::vector<std::string>& haystack,
                         const std::vector<std::string>& needle) {
  if (needle.empty()) return true;
  if (needle.size() > haystack.size()) return false;
  for (size_t start = 0; start + needle.size() <= haystack.size(); ++start) {
    if (std::equal(needle.begin(), needle.end(), haystack.begin() + start)) return true;
  }
  return false;
}

double multiset_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::map<std::string, size_t> gold_counts;
  for (const auto& token : gold) ++gold_counts[token];
  size_t overlap = 0;
  for (const auto& token : pred) {
    auto it = gold_counts.find(token);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

std::vector<std::string> normalize_answer(std::string_view text) {
  const std::string lowered = to_lower(text);
  std::vector<std::string> tokens;
  for (const auto& raw : split_whitespace(lowered)) {
    if (is_article(raw)) continue;
    std::string cleaned;
    for (char ch : raw) {
      if (!std::ispunct(static_cast<unsigned char>(ch))) cleaned.push_back(ch);
    }
    // Punctuation chars are deleted in place ("o'brien" -> "obrien");
    // tokens made of punctuation alone vanish.
    if (!cleaned.empty()) tokens.push_back(std::move(cleaned));
  }
  return tokens;
}

bool cem(std::string_view prediction, const std::vector<std::string>& golds) {
  const auto pred_tokens = normalize_answer(prediction);
  for (const auto& gold : golds) {
    if (contains_contiguous(pred_tokens, normalize_answer(gold))) return true;
  }
  return false;
}

double token_f1(std::string_view prediction, const std::vector<std::string>& golds) {
  const auto pred_tokens = normalize_answer(prediction);
  double best = 0.0;
  for (const auto& gold : golds) {
    best = std::max(best, multiset_f1(pred_tokens, normalize_answer(gold)));
  }
  return best;
}

}  // namespace reap
