// SPDX-License-Identifier: Apache-2.0
#include "hproto/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace hproto {
namespace {
int default_threads() {
  static const int n = omp_get_max_threads();
  return n;
}
}  // namespace

void set_threads(int n) { omp_set_num_threads(n > 0 ? n : default_threads()); }

int max_threads() { return omp_get_max_threads(); }

std::optional<int> threads_from_env() {
  const char* v = std::getenv("HPROTO_THREADS");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const int n = std::stoi(v, &used);
    if (used == std::string(v).size() && n > 0) return n;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

}  // namespace hproto
