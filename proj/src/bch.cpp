#include "fuzzvault/bch.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace fuzzvault {

std::vector<GfElement> berlekamp_massey(const Field& field, std::span<const GfElement> sequence) {
  std::vector<GfElement> current{1};
  std::vector<GfElement> previous{1};
  std::size_t length = 0;
  std::size_t shift = 1;
  GfElement last_discrepancy = 1;

  for (std::size_t r = 0; r < sequence.size(); ++r) {
    GfElement discrepancy = sequence[r];
    for (std::size_t i = 1; i <= length && i < current.size(); ++i) {
      discrepancy ^= field.mul(current[i], sequence[r - i]);
    }
    if (discrepancy == 0) {
      ++shift;
      continue;
    }
    const GfElement scale = field.div(discrepancy, last_discrepancy);
    std::vector<GfElement> next = current;
    if (next.size() < previous.size() + shift) next.resize(previous.size() + shift, 0);
    for (std::size_t i = 0; i < previous.size(); ++i) next[i + shift] ^= field.mul(scale, previous[i]);

    if (2 * length <= r) {
      previous = std::move(current);
      length = r + 1 - length;
      last_discrepancy = discrepancy;
      shift = 1;
    } else {
      ++shift;
    }
    current = std::move(next);
  }
  current.resize(length + 1, 0);
  return current;
}

std::optional<std::vector<std::uint32_t>> locate_errors(const Field& field,
                                                        std::span<const GfElement> syndromes,
                                                        std::size_t t, std::uint32_t length) {
  const std::vector<GfElement> locator = berlekamp_massey(field, syndromes);
  std::size_t degree = locator.size() - 1;
  while (degree > 0 && locator[degree] == 0) --degree;
  if (locator.size() - 1 != degree || degree > t) return std::nullopt;

  std::vector<std::uint32_t> positions;
  positions.reserve(degree);
  for (std::uint32_t p = 0; p < length; ++p) {
    if (field.poly_eval(locator, field.alpha_pow(-static_cast<std::int64_t>(p))) == 0) {
      positions.push_back(p);
      if (positions.size() > degree) return std::nullopt;
    }
  }
  if (positions.size() != degree) return std::nullopt;
  return positions;
}

std::vector<std::uint32_t> cyclotomic_coset(std::uint32_t s, const Field& field) {
  const std::uint32_t n = field.order();
  std::vector<std::uint32_t> coset;
  std::uint32_t e = s % n;
  do {
    coset.push_back(e);
    e = static_cast<std::uint32_t>((2 * std::uint64_t{e}) % n);
  } while (e != s % n);
  return coset;
}

namespace {

// Product of (x - alpha^e) over `exponents`; the result must lie in GF(2)[x].
BitVector binary_product(const std::vector<std::uint32_t>& exponents, const Field& field) {
  std::vector<GfElement> poly{1};
  for (auto e : exponents) {
    const GfElement root = field.alpha_pow(e);
    std::vector<GfElement> next(poly.size() + 1, 0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] ^= poly[i];
      next[i] ^= field.mul(poly[i], root);
    }
    poly = std::move(next);
  }
  BitVector out(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (poly[i] > 1) throw std::logic_error("product of conjugates is not binary");
    out.set(i, poly[i] == 1);
  }
  return out;
}

}  // namespace

BitVector minimal_polynomial(std::uint32_t s, const Field& field) {
  return binary_product(cyclotomic_coset(s, field), field);
}

BchCode::BchCode(int m, std::size_t t) : BchCode(Field::standard(m), t) {}

BchCode::BchCode(Field field, std::size_t t) : field_(std::move(field)), n_(field_.order()), t_(t) {
  if (t == 0) throw std::invalid_argument("BCH error capacity t must be at least 1");
  build_generator();
}

void BchCode::build_generator() {
  std::set<std::uint32_t> roots;
  for (std::size_t j = 1; j < 2 * t_; j += 2) {
    for (auto e : cyclotomic_coset(static_cast<std::uint32_t>(j % n_), field_)) roots.insert(e);
  }
  if (roots.size() >= n_) {
    throw std::invalid_argument(
        fmt::format("t = {} is too large for n = {}: the generator would have degree {}", t_, n_, roots.size()));
  }
  generator_ = binary_product({roots.begin(), roots.end()}, field_);
  k_ = n_ - (generator_.size() - 1);
}

std::string BchCode::id() const { return fmt::format("bch:m={}:t={}", field_.m(), t_); }

BitVector BchCode::remainder(BitVector poly) const {
  const std::size_t deg_g = generator_.size() - 1;
  for (std::size_t d = poly.size(); d-- > deg_g;) {
    if (!poly.get(d)) continue;
    const std::size_t offset = d - deg_g;
    for (std::size_t i = 0; i <= deg_g; ++i) {
      if (generator_.get(i)) poly.flip(offset + i);
    }
  }
  return poly;
}

BitVector BchCode::encode(const BitVector& info) const {
  if (info.size() != k_) {
    throw std::invalid_argument(fmt::format("encode: expected {} information bits, got {}", k_, info.size()));
  }
  const std::size_t parity = n_ - k_;
  BitVector shifted(n_);
  for (std::size_t i = 0; i < k_; ++i) shifted.set(parity + i, info.get(i));
  // x^(n-k) m(x) + (x^(n-k) m(x) mod g(x)); the remainder occupies the low bits.
  BitVector rem = remainder(shifted);
  for (std::size_t i = 0; i < parity; ++i) shifted.set(i, rem.get(i));
  return shifted;
}

BitVector BchCode::message(const BitVector& codeword) const {
  if (codeword.size() != n_) throw std::invalid_argument("message: wrong codeword length");
  BitVector info(k_);
  for (std::size_t i = 0; i < k_; ++i) info.set(i, codeword.get(n_ - k_ + i));
  return info;
}

BitVector BchCode::random_codeword(Rng& rng) const {
  BitVector info(k_);
  std::uint64_t pool = 0;
  for (std::size_t i = 0; i < k_; ++i) {
    if (i % 64 == 0) pool = rng();
    info.set(i, (pool >> (i % 64)) & 1U);
  }
  return encode(info);
}

std::vector<GfElement> BchCode::syndromes(const BitVector& word) const {
  if (word.size() != n_) {
    throw std::invalid_argument(fmt::format("syndromes: expected {} bits, got {}", n_, word.size()));
  }
  const auto support = word.support();
  std::vector<GfElement> s(2 * t_, 0);
  for (std::size_t j = 1; j <= 2 * t_; ++j) {
    if (j % 2 == 0) {
      // Over GF(2), S_2i = S_i^2.
      s[j - 1] = field_.square(s[j / 2 - 1]);
      continue;
    }
    GfElement acc = 0;
    for (auto i : support) acc ^= field_.alpha_pow(static_cast<std::int64_t>(i * j));
    s[j - 1] = acc;
  }
  return s;
}

bool BchCode::is_codeword(const BitVector& word) const {
  const auto s = syndromes(word);
  return std::all_of(s.begin(), s.end(), [](GfElement v) { return v == 0; });
}

std::optional<BitVector> BchCode::decode(const BitVector& received) const {
  const auto s = syndromes(received);
  if (std::all_of(s.begin(), s.end(), [](GfElement v) { return v == 0; })) return received;

  const auto positions = locate_errors(field_, s, t_, static_cast<std::uint32_t>(n_));
  if (!positions) return std::nullopt;
  BitVector corrected = received;
  for (auto p : *positions) corrected.flip(p);
  if (!is_codeword(corrected)) return std::nullopt;
  return corrected;
}

}  // namespace fuzzvault
