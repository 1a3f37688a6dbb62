#pragma once

namespace vulrag {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vulrag
