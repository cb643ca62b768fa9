#include "fuzzvault/pinsketch.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

#include "fuzzvault/bch.hpp"

namespace fuzzvault {

PinSketch::PinSketch(int m, std::size_t t) : PinSketch(Field::standard(m), t) {}

PinSketch::PinSketch(Field field, std::size_t t) : field_(std::move(field)), t_(t) {
  if (t == 0) throw std::invalid_argument("PinSketch capacity t must be at least 1");
  if (2 * t > field_.order()) {
    throw std::invalid_argument(fmt::format("PinSketch capacity {} too large for GF(2^{})", t, field_.m()));
  }
}

PinSketchSketch PinSketch::sketch(std::span<const std::uint32_t> support) const {
  std::vector<std::uint32_t> sorted(support.begin(), support.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("PinSketch: repeated set element");
  }
  PinSketchSketch out{t_, std::vector<GfElement>(t_, 0)};
  for (auto i : sorted) {
    if (i == 0 || i > field_.order()) {
      throw std::invalid_argument(fmt::format("PinSketch: element {} outside [1, {}]", i, field_.order()));
    }
    for (std::size_t j = 0; j < t_; ++j) {
      out.syndromes[j] ^= field_.alpha_pow(static_cast<std::int64_t>(i) * static_cast<std::int64_t>(2 * j + 1));
    }
  }
  return out;
}

std::optional<std::vector<std::uint32_t>> PinSketch::recover(const PinSketchSketch& sketch_a,
                                                             std::span<const std::uint32_t> support_b) const {
  if (sketch_a.t != t_ || sketch_a.syndromes.size() != t_) {
    throw std::invalid_argument("PinSketch: sketch capacity mismatch");
  }
  const PinSketchSketch diff = sketch_a ^ sketch(support_b);

  // Even power sums follow from s_2j = s_j^2 in characteristic 2.
  std::vector<GfElement> full(2 * t_, 0);
  for (std::size_t j = 1; j <= 2 * t_; ++j) {
    full[j - 1] = (j % 2 == 1) ? diff.syndromes[(j - 1) / 2] : field_.square(full[j / 2 - 1]);
  }
  if (std::all_of(full.begin(), full.end(), [](GfElement v) { return v == 0; })) {
    return std::vector<std::uint32_t>{};
  }

  const auto positions = locate_errors(field_, full, t_, field_.order());
  if (!positions) return std::nullopt;

  std::vector<std::uint32_t> result;
  result.reserve(positions->size());
  for (auto p : *positions) result.push_back(p == 0 ? field_.order() : p);
  std::sort(result.begin(), result.end());
  if (sketch(result) != diff) return std::nullopt;
  return result;
}

PinSketchSketch operator^(const PinSketchSketch& a, const PinSketchSketch& b) {
  if (a.t != b.t || a.syndromes.size() != b.syndromes.size()) {
    throw std::invalid_argument("PinSketch: sketch capacity mismatch");
  }
  PinSketchSketch out = a;
  for (std::size_t j = 0; j < out.syndromes.size(); ++j) out.syndromes[j] ^= b.syndromes[j];
  return out;
}

}  // namespace fuzzvault
