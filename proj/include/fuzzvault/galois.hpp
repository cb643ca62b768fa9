#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fuzzvault {

/// Element of GF(2^m) in polynomial-basis form; bit i is the coefficient of x^i.
using GfElement = std::uint32_t;

/// GF(2^m), 3 <= m <= 16, with log/antilog tables over a primitive polynomial.
/// Immutable after construction.
class Field {
 public:
  /// `primitive_poly` includes the x^m term (e.g. 0x13 for x^4 + x + 1).
  /// Throws std::invalid_argument if the degree is wrong or the polynomial is
  /// not primitive.
  Field(int m, std::uint32_t primitive_poly);

  /// Field over the default primitive polynomial for `m`.
  static Field standard(int m);
  static std::uint32_t default_polynomial(int m);

  int m() const { return m_; }
  std::uint32_t polynomial() const { return poly_; }
  /// Size of the multiplicative group, 2^m - 1.
  std::uint32_t order() const { return order_; }
  std::uint32_t size() const { return order_ + 1; }

  GfElement mul(GfElement a, GfElement b) const {
    if (a == 0 || b == 0) return 0;
    return exp_[log_[a] + log_[b]];
  }
  GfElement div(GfElement a, GfElement b) const;
  GfElement inv(GfElement a) const;
  GfElement pow(GfElement a, std::int64_t e) const;
  GfElement square(GfElement a) const { return mul(a, a); }

  /// alpha^i for any integer i (reduced modulo the group order).
  GfElement alpha_pow(std::int64_t i) const;
  /// Discrete log base alpha; throws for 0.
  std::uint32_t log(GfElement a) const;

  /// Horner evaluation; coeffs[0] is the constant term.
  GfElement poly_eval(std::span<const GfElement> coeffs, GfElement x) const;

  bool operator==(const Field& other) const { return m_ == other.m_ && poly_ == other.poly_; }

 private:
  int m_;
  std::uint32_t poly_;
  std::uint32_t order_;
  // exp_ is doubled so that mul() needs no modular reduction.
  std::vector<GfElement> exp_;
  std::vector<std::uint32_t> log_;
};

}  // namespace fuzzvault
