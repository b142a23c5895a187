#pragma once

namespace bgsnetd {

/// Thread count used by every OpenMP kernel. Values < 1 are clamped to 1.
void set_num_threads(int n);
int num_threads();

/// BGSNETD_THREADS if set and positive, otherwise the OpenMP default.
int default_num_threads();

}  // namespace bgsnetd
