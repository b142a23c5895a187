#include "bgsnetd/kernels/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include <omp.h>

namespace bgsnetd {

void set_num_threads(int n)
{
    omp_set_num_threads(std::max(1, n));
}

int num_threads()
{
    return omp_get_max_threads();
}

int default_num_threads()
{
    if (const char* env = std::getenv("BGSNETD_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) {
                return n;
            }
        } catch (const std::exception&) {
        }
    }
    return omp_get_num_procs();
}

}  // namespace bgsnetd
