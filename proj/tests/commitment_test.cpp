#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuzzvault/bits.hpp"
#include "fuzzvault/commitment.hpp"
#include "fuzzvault/hash.hpp"

using namespace fuzzvault;

namespace {

BitVector random_bits(std::size_t n, Rng& rng) {
  std::bernoulli_distribution bit(0.5);
  BitVector b(n);
  for (std::size_t i = 0; i < n; ++i) b.set(i, bit(rng));
  return b;
}

BitVector flip_n(BitVector b, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(b.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < count; ++i) b.flip(idx[i]);
  return b;
}

}  // namespace

TEST(Hash, Sha256KnownVectors) {
  EXPECT_EQ(to_hex(sha256(std::string_view(""))),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(to_hex(sha256(std::string_view("abc"))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash, Base64RoundTripAndVectors) {
  const std::string foobar = "foobar";
  const std::vector<std::uint8_t> bytes(foobar.begin(), foobar.end());
  EXPECT_EQ(base64_encode(bytes), "Zm9vYmFy");
  EXPECT_EQ(base64_encode(std::span(bytes).first(4)), "Zm9vYg==");
  EXPECT_EQ(base64_encode(std::span(bytes).first(5)), "Zm9vYmE=");
  EXPECT_EQ(base64_decode("Zm9vYg=="), std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 4));
  EXPECT_EQ(base64_decode("Zm9vYmE="), std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 5));
  EXPECT_TRUE(base64_decode("").empty());
  EXPECT_THROW(base64_decode("Zm9"), std::invalid_argument);
}

TEST(Hash, DerivedSeedsAreStableAndLabelSpecific) {
  EXPECT_EQ(derive_seed(7, "db"), derive_seed(7, "db"));
  EXPECT_NE(derive_seed(7, "db"), derive_seed(7, "population"));
  EXPECT_NE(derive_seed(7, "db"), derive_seed(8, "db"));
  const Digest d = sha256(std::string_view("7:db"));
  std::uint64_t expected = 0;
  for (int i = 7; i >= 0; --i) expected = (expected << 8) | d[static_cast<std::size_t>(i)];
  EXPECT_EQ(derive_seed(7, "db"), expected);
}

TEST(Bits, HexAndBytesRoundTrip) {
  Rng rng(1);
  for (std::size_t n : {1U, 7U, 8U, 63U, 64U, 65U, 127U, 128U}) {
    const BitVector b = random_bits(n, rng);
    EXPECT_EQ(BitVector::from_hex(b.to_hex(), n), b);
    EXPECT_EQ((~b).popcount(), n - b.popcount());
  }
  BitVector b(10);
  b.set(0, true);
  b.set(9, true);
  EXPECT_EQ(b.to_hex(), "0102");
  EXPECT_THROW(BitVector::from_hex("0106", 10), std::invalid_argument);
  EXPECT_THROW(hamming(BitVector(3), BitVector(4)), std::invalid_argument);
}

TEST(Commitment, TagHashesDomainAndPackedCodeword) {
  const BchCode code(7, 10);
  Rng rng(2);
  const BitVector c = code.random_codeword(rng);
  std::string msg(kHashDomain);
  for (auto byte : c.to_bytes()) msg.push_back(static_cast<char>(byte));
  EXPECT_EQ(hash_codeword(c), sha256(std::string_view(msg)));
}

TEST(Commitment, GenuineWithinCapacityIsAcceptedAndRecoversTemplate) {
  const BchCode code(7, 10);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const BitVector b = random_bits(127, rng);
    const ProtectedRecord rec = commit(code, b, rng);
    EXPECT_EQ(rec.code_id, "bch:m=7:t=10");
    const BitVector b_prime = flip_n(b, static_cast<std::size_t>(trial) % 11, rng);
    const Recovery r = recover(code, rec, b_prime);
    ASSERT_TRUE(r.accepted);
    EXPECT_EQ(*r.b_hat, b);
    EXPECT_EQ(*r.c_hat ^ rec.z, b);
  }
}

TEST(Commitment, FarTemplatesAreRejected) {
  const BchCode code(7, 10);
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const BitVector b = random_bits(127, rng);
    const ProtectedRecord rec = commit(code, b, rng);
    const Recovery r = recover(code, rec, flip_n(b, 30 + static_cast<std::size_t>(trial % 30), rng));
    EXPECT_FALSE(r.accepted);
    EXPECT_FALSE(r.b_hat.has_value());
  }
}

TEST(Commitment, HelperStringChangesWithEachEnrollment) {
  const BchCode code(7, 10);
  Rng rng(5);
  const BitVector b = random_bits(127, rng);
  const auto r1 = commit(code, b, rng);
  const auto r2 = commit(code, b, rng);
  EXPECT_NE(r1.z, r2.z);
  EXPECT_NE(r1.tag, r2.tag);
  EXPECT_TRUE(recover(code, r2, b).accepted);
}

TEST(Commitment, RecordJsonRoundTrip) {
  const auto scheme = make_scheme(SketchBackend::kBch, 127, 10);
  Rng rng(6);
  const ProtectedRecord rec = scheme->commit(random_bits(127, rng), rng);
  const auto j = to_json(rec);
  EXPECT_EQ(j.at("code_id"), "bch:m=7:t=10");
  EXPECT_EQ(j.at("z").get<std::string>().size(), 32U);
  EXPECT_EQ(j.at("tag").get<std::string>().size(), 64U);
  EXPECT_EQ(record_from_json(j), rec);
  auto bad = j;
  bad["tag"] = "00";
  EXPECT_THROW(record_from_json(bad), std::invalid_argument);
}

TEST(Commitment, SchemeFactoryAndIds) {
  EXPECT_EQ(to_string(SketchBackend::kPinSketch), "pinsketch");
  EXPECT_EQ(parse_backend("bch"), SketchBackend::kBch);
  EXPECT_THROW(parse_backend("rs"), std::invalid_argument);
  EXPECT_THROW(make_scheme(SketchBackend::kBch, 128, 10), std::invalid_argument);
  const auto ps = make_scheme(SketchBackend::kPinSketch, 128, 40);
  EXPECT_EQ(ps->id(), "pinsketch:m=8:t=40:n=128");
  EXPECT_EQ(ps->helper_bits(), 320U);
  EXPECT_EQ(scheme_from_id(ps->id())->id(), ps->id());
  EXPECT_EQ(scheme_from_id("bch:m=7:t=45")->capacity(), 45U);
  EXPECT_THROW(scheme_from_id("bch:m=7"), std::invalid_argument);
}

TEST(Commitment, PinSketchBackendDecidesByHammingDistance) {
  const auto scheme = make_scheme(SketchBackend::kPinSketch, 127, 12);
  Rng rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    const BitVector b = random_bits(127, rng);
    const ProtectedRecord rec = scheme->commit(b, rng);
    const std::size_t d = static_cast<std::size_t>(trial) % 25;
    const Recovery r = scheme->recover(rec, flip_n(b, d, rng));
    EXPECT_EQ(r.accepted, d <= 12) << "distance " << d;
    if (r.accepted) {
      EXPECT_EQ(*r.b_hat, b);
    }
    EXPECT_FALSE(r.c_hat.has_value());
  }
  const ProtectedRecord rec = scheme->commit(random_bits(127, rng), rng);
  EXPECT_EQ(record_from_json(to_json(rec)), rec);
}
