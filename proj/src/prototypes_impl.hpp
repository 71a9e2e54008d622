// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hproto/prototypes.hpp"

namespace hproto::detail {

// build_prototypes on a bank that is already restricted to training samples.
PrototypeBank build_prototypes_on(const EmbeddingBank& train, std::span<const std::uint32_t> layers,
                                  std::optional<std::uint64_t> per_class, std::uint64_t seed,
                                  std::string source);

}  // namespace hproto::detail
