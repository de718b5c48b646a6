#pragma once

namespace casbah {
inline constexpr const char* kVersion = "0.1.0";
}
