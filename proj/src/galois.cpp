#include "fuzzvault/galois.hpp"

#include <bit>
#include <stdexcept>

#include <fmt/format.h>

namespace fuzzvault {

std::uint32_t Field::default_polynomial(int m) {
  switch (m) {
    case 3: return 0xB;        // x^3 + x + 1
    case 4: return 0x13;       // x^4 + x + 1
    case 5: return 0x25;       // x^5 + x^2 + 1
    case 6: return 0x43;       // x^6 + x + 1
    case 7: return 0x89;       // x^7 + x^3 + 1
    case 8: return 0x11D;      // x^8 + x^4 + x^3 + x^2 + 1
    case 9: return 0x211;      // x^9 + x^4 + 1
    case 10: return 0x409;     // x^10 + x^3 + 1
    case 11: return 0x805;     // x^11 + x^2 + 1
    case 12: return 0x1053;    // x^12 + x^6 + x^4 + x + 1
    case 13: return 0x201B;    // x^13 + x^4 + x^3 + x + 1
    case 14: return 0x4443;    // x^14 + x^10 + x^6 + x + 1
    case 15: return 0x8003;    // x^15 + x + 1
    case 16: return 0x1100B;   // x^16 + x^12 + x^3 + x + 1
    default: throw std::invalid_argument(fmt::format("no default polynomial for m = {}", m));
  }
}

Field Field::standard(int m) { return Field(m, default_polynomial(m)); }

Field::Field(int m, std::uint32_t primitive_poly) : m_(m), poly_(primitive_poly) {
  if (m < 3 || m > 16) throw std::invalid_argument(fmt::format("field degree {} outside [3, 16]", m));
  if (std::bit_width(primitive_poly) != static_cast<unsigned>(m + 1)) {
    throw std::invalid_argument(fmt::format("polynomial {:#x} does not have degree {}", primitive_poly, m));
  }
  order_ = (std::uint32_t{1} << m) - 1;
  exp_.assign(2 * static_cast<std::size_t>(order_), 0);
  log_.assign(static_cast<std::size_t>(order_) + 1, 0);

  // Walk the powers of x; x generates the group iff it first returns to 1
  // after exactly 2^m - 1 steps.
  GfElement value = 1;
  for (std::uint32_t i = 0; i < order_; ++i) {
    if (i > 0 && value == 1) {
      throw std::invalid_argument(
          fmt::format("polynomial {:#x} is not primitive (x has order {})", primitive_poly, i));
    }
    exp_[i] = value;
    log_[value] = i;
    value <<= 1;
    if (value & (std::uint32_t{1} << m)) value ^= primitive_poly;
    // A reducible polynomial can send x^i to 0 (when x divides it).
    if (value == 0) {
      throw std::invalid_argument(fmt::format("polynomial {:#x} is not primitive", primitive_poly));
    }
  }
  if (value != 1) {
    throw std::invalid_argument(fmt::format("polynomial {:#x} is not primitive", primitive_poly));
  }
  for (std::uint32_t i = order_; i < 2 * order_; ++i) exp_[i] = exp_[i - order_];
}

GfElement Field::div(GfElement a, GfElement b) const {
  if (b == 0) throw std::domain_error("division by zero in GF(2^m)");
  if (a == 0) return 0;
  return exp_[log_[a] + order_ - log_[b]];
}

GfElement Field::inv(GfElement a) const {
  if (a == 0) throw std::domain_error("zero has no multiplicative inverse");
  return exp_[(order_ - log_[a]) % order_];
}

GfElement Field::pow(GfElement a, std::int64_t e) const {
  if (a == 0) {
    if (e == 0) return 1;
    if (e < 0) throw std::domain_error("negative power of zero");
    return 0;
  }
  const auto ord = static_cast<std::int64_t>(order_);
  std::int64_t r = (static_cast<std::int64_t>(log_[a]) * (e % ord)) % ord;
  if (r < 0) r += ord;
  return exp_[static_cast<std::size_t>(r)];
}

GfElement Field::alpha_pow(std::int64_t i) const {
  const auto ord = static_cast<std::int64_t>(order_);
  std::int64_t r = i % ord;
  if (r < 0) r += ord;
  return exp_[static_cast<std::size_t>(r)];
}

std::uint32_t Field::log(GfElement a) const {
  if (a == 0 || a > order_) throw std::domain_error("log of zero or out-of-range element");
  return log_[a];
}

GfElement Field::poly_eval(std::span<const GfElement> coeffs, GfElement x) const {
  GfElement acc = 0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = mul(acc, x) ^ *it;
  return acc;
}

}  // namespace fuzzvault
