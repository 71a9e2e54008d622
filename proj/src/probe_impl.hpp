// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hproto/probe.hpp"

namespace hproto::detail {

// train_probe on a bank that is already restricted to training samples.
LinearProbe train_probe_on(const EmbeddingBank& train, std::uint32_t layer,
                           const ProbeHyperparams& hyper, std::vector<double>* loss_trace);

}  // namespace hproto::detail
