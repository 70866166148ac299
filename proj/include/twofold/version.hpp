#pragma once

#define TWOFOLD_VERSION_MAJOR 0
#define TWOFOLD_VERSION_MINOR 1
#define TWOFOLD_VERSION_PATCH 0

namespace twofold {

inline constexpr const char* version_string() { return "0.1.0"; }

}  // namespace twofold
