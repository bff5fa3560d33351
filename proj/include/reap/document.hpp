#pragma once

#include <optional>
#include <string>

namespace reap {

struct Document {
  std::string doc_id;
  std::string title;
  std::string text;
  std::optional<double> score;
};

}  // namespace reap
