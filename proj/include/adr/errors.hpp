#pragma once

#include <stdexcept>
#include <string>

namespace adr {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A morphism's maps are not total on its source (or point outside the
/// target). Distinct from "not a morphism", which is a plain `false`.
struct MorphismDomainError : Error {
  using Error::Error;
};

struct UnboundVariable : Error {
  using Error::Error;
};

struct UnknownConnective : Error {
  using Error::Error;
};

struct SyntaxError : Error {
  SyntaxError(const std::string& what, std::size_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"),
        offset(offset) {}
  std::size_t offset;
};

struct UnknownEdgeType : Error {
  using Error::Error;
};

struct IllFormedProduction : Error {
  using Error::Error;
};

/// The match no longer refers to a replaceable edge of the graph.
struct StaleMatch : Error {
  using Error::Error;
};

/// The tracking forest and the graph disagree.
struct IntegrityError : Error {
  using Error::Error;
};

struct IllFormedRule : Error {
  using Error::Error;
};

struct ParseRefused : Error {
  using Error::Error;
};

struct OracleBoundError : Error {
  using Error::Error;
};

/// A recovery decision that does not fit the session's current state.
struct StaleDecision : Error {
  using Error::Error;
};

struct WorkspaceError : Error {
  using Error::Error;
};

}  // namespace adr
