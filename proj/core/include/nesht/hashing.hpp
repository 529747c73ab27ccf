#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nesht {

// FNV-1a over bytes; stable across platforms, used for config fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(std::string_view s);

}  // namespace nesht
