#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace scalebench {

/// SHA-256 of `data`, as a 64-char lowercase hex string.
std::string sha256_hex(std::string_view data);

/// First 16 hex chars of sha256_hex(data). Used for config hashes,
/// campaign checksums and cache keys.
std::string short_digest(std::string_view data);

} // namespace scalebench
