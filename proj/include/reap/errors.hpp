#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace reap {

enum class PlanErrorKind {
  PlanInvalid,
  UnknownTask,
  TooManyBranches,
  CannotPruneResolved,
  IdCollision,
  RetryExhausted,
  CannotRefineResolved,
  CannotRefinePruned,
};

class PlanError : public std::runtime_error {
 public:
  using Kind = PlanErrorKind;
  PlanError(PlanErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  PlanErrorKind kind() const { return kind_; }

 private:
  PlanErrorKind kind_;
};

enum class FactErrorKind {
  InvalidFact,
  DuplicateDirectAnswer,
  DuplicateFactId,
};

class FactError : public std::runtime_error {
 public:
  using Kind = FactErrorKind;
  FactError(FactErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  FactErrorKind kind() const { return kind_; }

 private:
  FactErrorKind kind_;
};

enum class RetrievalErrorKind {
  MalformedRecord,
  DuplicateDocId,
  EmptyIndex,
  RetrieverUnavailable,
  MalformedResponse,
  IoFailure,
};

class RetrievalError : public std::runtime_error {
 public:
  using Kind = RetrievalErrorKind;
  RetrievalError(RetrievalErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  RetrievalErrorKind kind() const { return kind_; }

 private:
  RetrievalErrorKind kind_;
};

enum class GatewayErrorKind {
  BackendUnavailable,
  MalformedOutput,
  EmptyPlan,
  BadConfig,
};

class GatewayError : public std::runtime_error {
 public:
  using Kind = GatewayErrorKind;
  GatewayError(GatewayErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  GatewayErrorKind kind() const { return kind_; }

 private:
  GatewayErrorKind kind_;
};

enum class EngineErrorKind {
  DecomposeFailed,
  BackendUnavailable,
  IoFailure,
  EmptySet,
  DatasetMalformed,
  BadConfig,
};

class EngineError : public std::runtime_error {
 public:
  using Kind = EngineErrorKind;
  EngineError(EngineErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  EngineErrorKind kind() const { return kind_; }

 private:
  EngineErrorKind kind_;
};

}  // namespace reap
