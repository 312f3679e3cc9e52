// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "segzsl/protocol.hpp"

namespace segzsl {

// Minimal hand-rolled line chart of the exemplar sweep: one polyline per
// classifier kind, linear axes, inline legend. No plotting dependency.
std::string sweep_svg(const SweepResult& result);

}  // namespace segzsl
