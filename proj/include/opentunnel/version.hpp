#pragma once

namespace opentunnel {
inline constexpr const char* kVersion = "0.1.0";
}
