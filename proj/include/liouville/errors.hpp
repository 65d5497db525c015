#pragma once

#include <stdexcept>
#include <string>

namespace liouville {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LIOUVILLE_ERROR(Name)                \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  };

LIOUVILLE_ERROR(StructuralError)
LIOUVILLE_ERROR(InfeasibleRayError)
LIOUVILLE_ERROR(NonIntegrableError)
LIOUVILLE_ERROR(StiffnessError)
LIOUVILLE_ERROR(NonConvergenceError)
LIOUVILLE_ERROR(RequiresProjectionError)
LIOUVILLE_ERROR(DegenerateProjectionError)
LIOUVILLE_ERROR(DegenerateCutoffError)
LIOUVILLE_ERROR(RefineGridError)
LIOUVILLE_ERROR(ResolutionError)
LIOUVILLE_ERROR(SingularEvaluationError)
LIOUVILLE_ERROR(DistinctnessError)
LIOUVILLE_ERROR(ConfigurationError)
LIOUVILLE_ERROR(MultistartExhaustionError)

#undef LIOUVILLE_ERROR

}  // namespace liouville
