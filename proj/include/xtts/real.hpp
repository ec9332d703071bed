#pragma once

// Scalar type of the differentiable core. The default build trains in 32-bit;
// XTTS_REAL_DOUBLE selects 64-bit so finite-difference checks are meaningful.
// Each precision lives in its own inline namespace so both variants can be
// linked into one binary.

#ifdef XTTS_REAL_DOUBLE
#define XTTS_PRECISION f64
#else
#define XTTS_PRECISION f32
#endif

namespace xtts::inline XTTS_PRECISION {

#ifdef XTTS_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

}  // namespace xtts::inline XTTS_PRECISION
