#include "fabr/threading.hpp"

#include <Eigen/Core>

#include <algorithm>

extern "C" void openblas_set_num_threads(int num_threads);

namespace fabr {

namespace {
int g_threads = 1;
}

void set_num_threads(int threads) {
    g_threads = std::max(threads, 1);
    openblas_set_num_threads(g_threads);
    Eigen::setNbThreads(g_threads);
}

int num_threads() { return g_threads; }

} // namespace fabr
