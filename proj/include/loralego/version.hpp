// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace loralego {

inline constexpr const char* kVersion = "loralego 0.1.0";

}  // namespace loralego
