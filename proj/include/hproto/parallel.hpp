// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

namespace hproto {

// Caps OpenMP parallelism for subsequent kernels. n <= 0 restores the default.
void set_threads(int n);
int max_threads();
// HPROTO_THREADS, when set to a positive integer.
std::optional<int> threads_from_env();

}  // namespace hproto
