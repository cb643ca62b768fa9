#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fuzzvault/bits.hpp"
#include "fuzzvault/galois.hpp"

namespace fuzzvault {

using Rng = std::mt19937_64;

/// Error positions for a syndrome sequence S_1..S_2t (syndromes[j - 1] = S_j).
///
/// Runs Berlekamp-Massey to get the error-locator polynomial and a Chien
/// search over the exponents [0, length). Position p is reported when alpha^p
/// is an inverse root of the locator. Returns nullopt when the locator degree
/// exceeds `t` or the number of roots found differs from the degree.
std::optional<std::vector<std::uint32_t>> locate_errors(const Field& field,
                                                        std::span<const GfElement> syndromes,
                                                        std::size_t t, std::uint32_t length);

/// Berlekamp-Massey over GF(2^m). Returns the connection polynomial
/// (coefficient 0 first, always 1) of the shortest LFSR generating `sequence`.
std::vector<GfElement> berlekamp_massey(const Field& field, std::span<const GfElement> sequence);

/// Binary narrow-sense primitive BCH code of length n = 2^m - 1 with designed
/// distance 2t + 1. Encoding is systematic: parity in positions [0, n - k),
/// information bits in [n - k, n).
class BchCode {
 public:
  BchCode(int m, std::size_t t);
  BchCode(Field field, std::size_t t);

  const Field& field() const { return field_; }
  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t t() const { return t_; }
  /// Generator coefficients; bit i is the coefficient of x^i, size n - k + 1.
  const BitVector& generator() const { return generator_; }

  /// Stable identifier, e.g. "bch:m=7:t=10".
  std::string id() const;

  BitVector encode(const BitVector& info) const;
  BitVector message(const BitVector& codeword) const;
  BitVector random_codeword(Rng& rng) const;

  /// S_1..S_2t of `word` read as a polynomial over GF(2).
  std::vector<GfElement> syndromes(const BitVector& word) const;
  bool is_codeword(const BitVector& word) const;

  /// Bounded-distance decoding: returns the unique codeword within distance t
  /// of `received`, or nullopt if there is none.
  std::optional<BitVector> decode(const BitVector& received) const;

 private:
  void build_generator();
  BitVector remainder(BitVector poly) const;

  Field field_;
  std::size_t n_;
  std::size_t k_ = 0;
  std::size_t t_;
  BitVector generator_;
};

/// Exponents forming the cyclotomic coset of `s` modulo 2^m - 1.
std::vector<std::uint32_t> cyclotomic_coset(std::uint32_t s, const Field& field);

/// Minimal polynomial of alpha^s over GF(2) as a coefficient bit string.
BitVector minimal_polynomial(std::uint32_t s, const Field& field);

}  // namespace fuzzvault
