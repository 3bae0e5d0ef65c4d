#pragma once

namespace hmor {

// Thread count for OpenMP regions: HMOR_THREADS if set and positive,
// otherwise the OpenMP default. Always 1 when built without OpenMP.
int thread_cap();

}  // namespace hmor
