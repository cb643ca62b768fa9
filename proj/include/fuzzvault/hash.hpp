#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fuzzvault {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view text);

/// Label-derived sub-seed: first 8 bytes (little endian) of
/// SHA-256(decimal(master) || ":" || label).
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace fuzzvault
