#pragma once

namespace eqstop {

/// Number of workers parallel kernels may use. Controlled by the
/// EQSTOP_THREADS environment variable (0 or unset means "all available").
/// Always >= 1. Kernels must produce results independent of this value.
int worker_count();

} // namespace eqstop
