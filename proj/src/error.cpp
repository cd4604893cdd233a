#include "dimer/error.hpp"

namespace dimer {

std::string_view error_tag(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidPolyomino: return "InvalidPolyomino";
    case ErrorKind::NotEven: return "NotEven";
    case ErrorKind::BadRemovalClass: return "BadRemovalClass";
    case ErrorKind::BadExposedPlacement: return "BadExposedPlacement";
    case ErrorKind::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorKind::DisconnectedHost: return "DisconnectedHost";
    case ErrorKind::PathLeavesHost: return "PathLeavesHost";
    case ErrorKind::UnbalancedColors: return "UnbalancedColors";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::OverlappingEdges: return "OverlappingEdges";
    case ErrorKind::WrongValueParity: return "WrongValueParity";
    case ErrorKind::DisconnectedFromBoundary: return "DisconnectedFromBoundary";
    case ErrorKind::DominanceViolated: return "DominanceViolated";
    case ErrorKind::ConjugateNotSingleValued: return "ConjugateNotSingleValued";
    case ErrorKind::ProbesTooCloseToBoundary: return "ProbesTooCloseToBoundary";
    case ErrorKind::UnreachableBoundary: return "UnreachableBoundary";
    case ErrorKind::ForestHostMismatch: return "ForestHostMismatch";
    case ErrorKind::Untilable: return "Untilable";
    case ErrorKind::ProbeOutsideRegion: return "ProbeOutsideRegion";
    case ErrorKind::CoincidentPoints: return "CoincidentPoints";
    case ErrorKind::BadMarkParity: return "BadMarkParity";
    case ErrorKind::PathsIntersect: return "PathsIntersect";
    case ErrorKind::NotAnnular: return "NotAnnular";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::RegionParse: return "RegionParse";
  }
  return "Unknown";
}

}  // namespace dimer
