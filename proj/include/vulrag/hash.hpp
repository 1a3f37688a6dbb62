#pragma once

#include <string>
#include <string_view>

namespace vulrag {

/// Hex-encoded SHA-256 of the exact byte content.
std::string sha256_hex(std::string_view data);

}  // namespace vulrag
