#pragma once

namespace binquant {

// Worker count for parallel kernels. BINQUANT_THREADS caps it; 0 means
// sequential. Unset falls back to the OpenMP default (1 without OpenMP).
int worker_count();

}  // namespace binquant
