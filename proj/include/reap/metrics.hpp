#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace reap {

/// QA answer normalization: lowercase, drop article tokens (a/an/the), strip
/// ASCII punctuation, collapse whitespace, split into tokens.
std::vector<std::string> normalize_answer(std::string_view text);

/// Cover exact match: some gold's normalized token sequence occurs as a
/// contiguous subsequence of the normalized prediction tokens.
bool cem(std::string_view prediction, const std::vector<std::string>& golds);

/// Max over golds of token-multiset F1 against the normalized prediction.
/// Both sides empty scores 1, exactly one side empty scores 0.
double token_f1(std::string_view prediction, const std::vector<std::string>& golds);

}  // namespace reap
