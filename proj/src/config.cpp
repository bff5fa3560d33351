#include "reap/config.hpp"

#include <filesystem>
#include <fstream>

namespace reap {

namespace {

const char* kCoreRoles[] = {"decompose", "extract_fact", "replan", "synthesize"};

BackendConfig parse_backend(const nlohmann::json& j, const std::string& label) {
  BackendConfig config;
  config.name = label;
  const std::string kind = j.value("kind", std::string{});
  if (kind == "remote") {
    config.kind = BackendKind::Remote;
  } else if (kind == "scripted") {
    config.kind = BackendKind::Scripted;
  } else {
    throw EngineError(EngineError::Kind::BadConfig,
                      "backend '" + label + "': kind must be 'remote' or 'scripted'");
  }
  config.endpoint = j.value("endpoint", std::string{});
  config.model = j.value("model", std::string{});
  config.api_key_env = j.value("api_key_env", std::string{});
  config.script_path = j.value("script_path", std::string{});
  config.max_retries = j.value("max_retries", 2);
  config.timeout_seconds = j.value("timeout_seconds", 30);
  config.max_tokens = j.value("max_tokens", 1024);
  config.temperature = j.value("temperature", 0.0);
  try {
    validate_backend_config(config);
  } catch (const GatewayError& e) {
    throw EngineError(EngineError::Kind::BadConfig, "backend '" + label + "': " + e.what());
  }
  return config;
}

}  // namespace

const BackendConfig* FullConfig::backend_for(Role role) const {
  auto by_role = role_names.find(std::string(to_string(role)));
  if (by_role == role_names.end() && role != Role::Judge) by_role = role_names.find("default");
  if (by_role == role_names.end()) return nullptr;
  auto entry = catalog.find(by_role->second);
  return entry == catalog.end() ? nullptr : &entry->second;
}

nlohmann::ordered_json FullConfig::echo() const {
  nlohmann::ordered_json j;
  j["engine"] = engine.snapshot();
  nlohmann::ordered_json retriever_json;
  retriever_json["kind"] = retriever.kind;
  if (!retriever.index_path.empty()) retriever_json["index"] = retriever.index_path;
  if (!retriever.corpus_path.empty()) retriever_json["corpus"] = retriever.corpus_path;
  if (!retriever.endpoint.empty()) retriever_json["endpoint"] = retriever.endpoint;
  j["retriever"] = std::move(retriever_json);
  nlohmann::ordered_json roles_json;
  for (const auto& [role, name] : role_names) {
    auto entry = catalog.find(name);
    if (entry == catalog.end()) continue;
    nlohmann::ordered_json b;
    b["name"] = name;
    b["kind"] = entry->second.kind == BackendKind::Remote ? "remote" : "scripted";
    if (!entry->second.model.empty()) b["model"] = entry->second.model;
    if (!entry->second.script_path.empty()) b["script_path"] = entry->second.script_path;
    if (!entry->second.api_key_env.empty()) b["api_key_env"] = entry->second.api_key_env;
    roles_json[role] = std::move(b);
  }
  j["backends"] = std::move(roles_json);
  return j;
}

FullConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw EngineError(EngineError::Kind::BadConfig, "cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw EngineError(EngineError::Kind::BadConfig,
                      "config file '" + path + "' is not valid JSON: " + e.what());
  }

  FullConfig config;
  const auto engine = j.value("engine", nlohmann::json::object());
  config.engine.max_iterations = engine.value("max_iterations", 5);
  config.engine.top_k = engine.value("top_k", 5);
  config.engine.fork_cap = engine.value("fork_cap", kDefaultForkCap);
  config.engine.refine_cap = engine.value("refine_cap", kDefaultRefineCap);

  const auto retriever = j.value("retriever", nlohmann::json::object());
  config.retriever.kind = retriever.value("kind", std::string{"lexical"});
  config.retriever.index_path = retriever.value("index", std::string{});
  config.retriever.corpus_path = retriever.value("corpus", std::string{});
  config.retriever.endpoint = retriever.value("endpoint", std::string{});
  config.retriever.max_retries = retriever.value("max_retries", 2);
  config.retriever.timeout_seconds = retriever.value("timeout_seconds", 10);
  if (config.retriever.kind != "lexical" && config.retriever.kind != "remote")
    throw EngineError(EngineError::Kind::BadConfig,
                      "retriever kind must be 'lexical' or 'remote'");

  // Config paths are resolved relative to the config file's directory so a
  // config travels with its fixtures.
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&base](std::string& value) {
    if (value.empty()) return;
    std::filesystem::path p(value);
    if (p.is_relative()) value = (base / p).string();
  };
  resolve(config.retriever.index_path);
  resolve(config.retriever.corpus_path);

  const auto backends = j.value("backends", nlohmann::json::object());
  // Named locals: iterating .items() of a temporary json dangles.
  const auto catalog = backends.value("catalog", nlohmann::json::object());
  for (const auto& [name, value] : catalog.items()) {
    auto parsed = parse_backend(value, name);
    resolve(parsed.script_path);
    config.catalog.emplace(name, std::move(parsed));
  }
  for (const auto& [key, value] : backends.items()) {
    if (key == "catalog") continue;
    if (key != "default" && !role_from_string(key))
      throw EngineError(EngineError::Kind::BadConfig,
                        "backends section has unknown role '" + key + "'");
    if (value.is_string()) {
      const std::string name = value.get<std::string>();
      if (config.catalog.count(name) == 0)
        throw EngineError(EngineError::Kind::BadConfig,
                          "role '" + key + "' names '" + name + "', which is not in the catalog");
      config.role_names[key] = name;
    } else if (value.is_object()) {
      const std::string name = "inline:" + key;
      auto parsed = parse_backend(value, name);
      resolve(parsed.script_path);
      config.catalog.emplace(name, std::move(parsed));
      config.role_names[key] = name;
    } else {
      throw EngineError(EngineError::Kind::BadConfig,
                        "role '" + key + "' must name a catalog entry or hold a backend object");
    }
  }
  return config;
}

void apply_backend_override(FullConfig& config, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size())
    throw EngineError(EngineError::Kind::BadConfig,
                      "backend override '" + spec + "' must look like role=name");
  const std::string role = spec.substr(0, eq);
  const std::string name = spec.substr(eq + 1);
  if (role != "default" && !role_from_string(role))
    throw EngineError(EngineError::Kind::BadConfig,
                      "backend override names unknown role '" + role + "'");
  if (config.catalog.count(name) == 0)
    throw EngineError(EngineError::Kind::BadConfig,
                      "backend override names '" + name + "', which is not in the catalog");
  config.role_names[role] = name;
}

std::shared_ptr<Retriever> make_retriever(const FullConfig& config) {
  if (config.retriever.kind == "remote") {
    if (config.retriever.endpoint.empty())
      throw EngineError(EngineError::Kind::BadConfig, "remote retriever needs an endpoint");
    return std::make_shared<RemoteRetriever>(config.retriever.endpoint,
                                             config.retriever.max_retries,
                                             config.retriever.timeout_seconds);
  }
  if (!config.retriever.index_path.empty() &&
      std::filesystem::exists(config.retriever.index_path)) {
    auto index = std::make_shared<CorpusIndex>(CorpusIndex::load(config.retriever.index_path));
    return std::make_shared<LexicalRetriever>(std::move(index));
  }
  if (!config.retriever.corpus_path.empty()) {
    auto index = std::make_shared<CorpusIndex>(CorpusIndex::ingest_file(config.retriever.corpus_path));
    return std::make_shared<LexicalRetriever>(std::move(index));
  }
  throw EngineError(EngineError::Kind::BadConfig,
                    "lexical retriever needs an 'index' or 'corpus' path");
}

std::shared_ptr<LlmGateway> make_gateway(const FullConfig& config) {
  std::map<Role, LlmGateway::RoleBinding> bindings;
  for (const char* role_name : kCoreRoles) {
    const Role role = *role_from_string(role_name);
    const BackendConfig* backend = config.backend_for(role);
    if (backend == nullptr)
      throw EngineError(EngineError::Kind::BadConfig,
                        std::string("no backend configured for role '") + role_name +
                            "' and no default set");
    bindings[role] = LlmGateway::RoleBinding{*backend, make_backend(*backend)};
  }
  if (config.judge_configured()) {
    const BackendConfig* backend = config.backend_for(Role::Judge);
    if (backend == nullptr)
      throw EngineError(EngineError::Kind::BadConfig, "judge role names a missing catalog entry");
    bindings[Role::Judge] = LlmGateway::RoleBinding{*backend, make_backend(*backend)};
  }
  return std::make_shared<LlmGateway>(std::move(bindings));
}

}  // namespace reap
