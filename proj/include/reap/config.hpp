#pragma once

#include <map>
#include <memory>
#include <string>

#include "json.hpp"
#include "reap/engine.hpp"
#include "reap/gateway.hpp"
#include "reap/retrieval.hpp"

namespace reap {

struct RetrieverConfig {
  std::string kind = "lexical";  // lexical | remote
  std::string index_path;        // lexical: saved index to load
  std::string corpus_path;       // lexical: corpus to ingest when no index
  std::string endpoint;          // remote
  int max_retries = 2;
  int timeout_seconds = 10;
};

/// Everything one run needs: engine knobs, retriever wiring, a backend
/// catalog, and the role assignments into it. The "default" role assignment
/// covers the four core roles; the judge runs only when assigned explicitly.
struct FullConfig {
  EngineConfig engine;
  RetrieverConfig retriever;
  std::map<std::string, BackendConfig> catalog;
  std::map<std::string, std::string> role_names;  // role string -> catalog name

  /// Catalog entry assigned to the role, after the default fallback.
  const BackendConfig* backend_for(Role role) const;
  bool judge_configured() const { return role_names.count("judge") > 0; }
  /// Effective configuration, echoed into traces; api_key_env names are
  /// included, key values never.
  nlohmann::ordered_json echo() const;
};

/// Reads the JSON config document:
///   {"engine": {...}, "retriever": {...},
///    "backends": {"catalog": {"<name>": {...}},
///                  "default": "<name>", "<role>": "<name>", ...}}
/// Role keys may also hold an inline backend object, which is added to the
/// catalog under an internal name. Throws EngineError{BadConfig}.
FullConfig load_config(const std::string& path);

/// Applies a "--backend role=name" override. Throws EngineError{BadConfig}
/// for an unknown role or a name missing from the catalog.
void apply_backend_override(FullConfig& config, const std::string& spec);

/// Retriever per config; a lexical retriever loads index_path when set,
/// otherwise ingests corpus_path. Shareable across engines.
std::shared_ptr<Retriever> make_retriever(const FullConfig& config);

/// Fresh gateway with fresh backend instances; one per engine.
std::shared_ptr<LlmGateway> make_gateway(const FullConfig& config);

}  // namespace reap
