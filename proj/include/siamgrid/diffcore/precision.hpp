#pragma once

// Element type of diffcore tensors. The default build is fp32; defining
// SIAMGRID_DIFFCORE_F64 compiles the same sources over double into a
// distinct inline namespace so both variants can be linked together.

#ifdef SIAMGRID_DIFFCORE_F64
#define SIAMGRID_PRECISION_NS f64
#else
#define SIAMGRID_PRECISION_NS f32
#endif

namespace siamgrid::diffcore::inline SIAMGRID_PRECISION_NS {

#ifdef SIAMGRID_DIFFCORE_F64
using real = double;
#else
using real = float;
#endif

}  // namespace siamgrid::diffcore
