#pragma once

#include <stdexcept>
#include <string>

namespace gauge_lab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GAUGE_LAB_DEFINE_ERROR(Name)         \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(#Name ": " + what) {}        \
  };

/// A state component became NaN or infinite during integration.
GAUGE_LAB_DEFINE_ERROR(NonFiniteState)
GAUGE_LAB_DEFINE_ERROR(OutOfDomain)
GAUGE_LAB_DEFINE_ERROR(SingularGauge)
GAUGE_LAB_DEFINE_ERROR(GridMismatch)
GAUGE_LAB_DEFINE_ERROR(ShapeError)
GAUGE_LAB_DEFINE_ERROR(NonPositiveAlpha)
/// A rescaling has no downstream layer able to absorb the inverse factor.
GAUGE_LAB_DEFINE_ERROR(StructureError)
GAUGE_LAB_DEFINE_ERROR(ConstraintViolation)
/// The Wilson line over [0, T] is not the identity.
GAUGE_LAB_DEFINE_ERROR(HolonomyViolation)
GAUGE_LAB_DEFINE_ERROR(Divergence)
GAUGE_LAB_DEFINE_ERROR(ConfigError)
GAUGE_LAB_DEFINE_ERROR(IoError)

#undef GAUGE_LAB_DEFINE_ERROR

}  // namespace gauge_lab
