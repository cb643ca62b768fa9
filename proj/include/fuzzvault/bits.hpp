#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fuzzvault {

/// Fixed-length bit string. Bit i lives in word i / 64 at position i % 64;
/// the byte and hex forms put bit 0 in the least significant bit of the first
/// byte. Bits past size() are always zero.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size);

  static BitVector from_bytes(std::span<const std::uint8_t> bytes, std::size_t size);
  static BitVector from_hex(std::string_view hex, std::size_t size);
  static BitVector from_bools(std::span<const bool> bits);

  std::size_t size() const { return size_; }
  bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
  void set(std::size_t i, bool value);
  void flip(std::size_t i) { words_[i >> 6] ^= (std::uint64_t{1} << (i & 63)); }

  std::size_t popcount() const;
  /// Indices of set bits in ascending order.
  std::vector<std::size_t> support() const;

  BitVector& operator^=(const BitVector& other);
  friend BitVector operator^(BitVector lhs, const BitVector& rhs) {
    lhs ^= rhs;
    return lhs;
  }
  /// Bitwise complement within size().
  BitVector operator~() const;
  bool operator==(const BitVector& other) const = default;

  std::vector<std::uint8_t> to_bytes() const;
  std::string to_hex() const;

  std::span<const std::uint64_t> words() const { return words_; }

 private:
  void trim();

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// popcount(a ^ b). Throws std::invalid_argument on a length mismatch.
std::size_t hamming(const BitVector& a, const BitVector& b);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);

}  // namespace fuzzvault
