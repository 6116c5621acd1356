#pragma once

#include <stdexcept>
#include <string>

namespace latree {

enum class ErrorKind {
  UnknownNode,
  NoSuchEdge,
  InvalidTree,
  LabelMismatch,
  DegenerateParameter,
  TooLargeForExact,
  SingularCovariance,
  ZeroVariance,
  AlphabetViolation,
  NeedThreeNodes,
  NotAdditive,
  InfiniteDistance,
  TooFewNodes,
  Disconnected,
  InvalidSpec,
  RaggedRows,
  NonNumeric,
  Parse,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace latree
