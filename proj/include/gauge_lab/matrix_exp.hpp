#pragma once

#include "gauge_lab/time_grid.hpp"

namespace gauge_lab {

/// Matrix exponential by scaling and squaring around a diagonal [6/6] Pade
/// approximant. The argument is scaled until its 1-norm is at most 1/2,
/// where the approximant's truncation error is below double roundoff.
Matrix expm(const Matrix& a);

}  // namespace gauge_lab
