#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dimer {

// Failure tags. The CLI maps these to exit codes, so keep the order stable.
enum class ErrorKind {
  InvalidPolyomino,
  NotEven,
  BadRemovalClass,
  BadExposedPlacement,
  ResolutionTooCoarse,
  DisconnectedHost,
  PathLeavesHost,
  UnbalancedColors,
  SingularSystem,
  OverlappingEdges,
  WrongValueParity,
  DisconnectedFromBoundary,
  DominanceViolated,
  ConjugateNotSingleValued,
  ProbesTooCloseToBoundary,
  UnreachableBoundary,
  ForestHostMismatch,
  Untilable,
  ProbeOutsideRegion,
  CoincidentPoints,
  BadMarkParity,
  PathsIntersect,
  NotAnnular,
  Unsupported,
  ConfigParse,
  RegionParse,
};

std::string_view error_tag(ErrorKind kind);

class DimerError : public std::runtime_error {
 public:
  DimerError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_tag(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dimer
