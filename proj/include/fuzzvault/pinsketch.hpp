#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuzzvault/galois.hpp"

namespace fuzzvault {

/// Odd power sums s_1, s_3, ..., s_{2t-1} of a set over GF(2^m).
struct PinSketchSketch {
  std::size_t t = 0;
  std::vector<GfElement> syndromes;

  bool operator==(const PinSketchSketch&) const = default;
};

/// Syndrome-based secure sketch for sets drawn from the universe
/// {1, ..., 2^m - 1}. Element i stands for alpha^i, so index 2^m - 1 maps to
/// alpha^0 = 1 and every index is a distinct nonzero field element.
class PinSketch {
 public:
  PinSketch(int m, std::size_t t);
  PinSketch(Field field, std::size_t t);

  const Field& field() const { return field_; }
  std::size_t t() const { return t_; }
  std::uint32_t universe_size() const { return field_.order(); }

  /// Throws std::invalid_argument on an index outside [1, 2^m - 1] or a repeat.
  PinSketchSketch sketch(std::span<const std::uint32_t> support) const;

  /// The symmetric difference A xor B (sorted) when it has at most t
  /// elements. Returns nullopt when decoding fails; beyond capacity a wrong
  /// set may also come back.
  std::optional<std::vector<std::uint32_t>> recover(const PinSketchSketch& sketch_a,
                                                    std::span<const std::uint32_t> support_b) const;

 private:
  Field field_;
  std::size_t t_;
};

/// Componentwise XOR of two sketches with the same capacity.
PinSketchSketch operator^(const PinSketchSketch& a, const PinSketchSketch& b);

}  // namespace fuzzvault
