#pragma once

namespace fabr {

/// Worker threads for Eigen and OpenBLAS kernels. Values < 1 are treated as 1.
void set_num_threads(int threads);
int num_threads();

} // namespace fabr
