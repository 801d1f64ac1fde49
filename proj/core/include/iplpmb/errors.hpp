#pragma once

#include <stdexcept>
#include <string>

namespace iplpmb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical
struct NotPositiveDefinite : Error { using Error::Error; };
struct SingularCovariance : Error { using Error::Error; };
struct SingularInnovation : Error { using Error::Error; };
struct FunctionEvaluationFailure : Error { using Error::Error; };

// Shapes and arguments
struct DimensionMismatch : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct EmptyMixture : Error { using Error::Error; };
struct InvalidArgument : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };

// Geometry
struct DegenerateGeometry : Error { using Error::Error; };
struct NoPhysicalSolution : Error { using Error::Error; };
struct UnsupportedKind : Error { using Error::Error; };
struct DegeneratePlane : Error { using Error::Error; };

// Association and filtering
struct Infeasible : Error { using Error::Error; };
struct EmptyHypothesisSet : Error { using Error::Error; };
struct NoFeasibleHypothesis : Error { using Error::Error; };

// I/O
struct ConfigError : Error { using Error::Error; };
struct MissingManifest : Error { using Error::Error; };

}  // namespace iplpmb
