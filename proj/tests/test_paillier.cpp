#include "fedpat/paillier.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "support/oracles.hpp"

namespace {

using fedpat::Ciphertext;
using fedpat::PaillierKeypair;

PaillierKeypair toy_keypair() {
  return fedpat::keypair_from_primes(5, 7, 6);
}

TEST(KeypairFromPrimes, ToyKeyComponents) {
  const auto kp = toy_keypair();
  EXPECT_EQ(kp.pub.n, 35);
  EXPECT_EQ(kp.pub.g, 36);
  EXPECT_EQ(kp.pub.n2, 1225);
  EXPECT_EQ(kp.priv.lambda, 12);  // lcm(4, 6)
  EXPECT_EQ(kp.priv.mu, 3);       // 12·3 = 36 ≡ 1 (mod 35)
}

TEST(KeypairFromPrimes, RejectsEqualPrimes) {
  EXPECT_THROW(fedpat::keypair_from_primes(7, 7, 6), fedpat::InputError);
}

TEST(ToyKey, ExhaustiveRoundtripMatchesReference) {
  // Every plaintext in Z_35, several nonces each, must decrypt back and
  // produce the exact ciphertext of the independent reference scheme.
  const auto kp = toy_keypair();
  const oracle::ToyPaillier ref(5, 7);
  const std::vector<unsigned long> nonces = {2, 4, 8, 11, 23, 34};
  for (unsigned long m = 0; m < 35; ++m) {
    for (unsigned long r : nonces) {
      const auto c = fedpat::encrypt_with_nonce(kp.pub, mpz_class(m),
                                                mpz_class(r));
      EXPECT_EQ(c.value.get_ui(), ref.encrypt(m, r))
          << "m=" << m << " r=" << r;
      EXPECT_EQ(fedpat::decrypt(kp, c), m) << "m=" << m << " r=" << r;
    }
  }
}

TEST(ToyKey, ExhaustiveAdditivity) {
  // decrypt(c1·c2) = m1 + m2 (mod 35) for every plaintext pair.
  const auto kp = toy_keypair();
  const oracle::ToyPaillier ref(5, 7);
  for (unsigned long m1 = 0; m1 < 35; ++m1) {
    for (unsigned long m2 = 0; m2 < 35; ++m2) {
      const auto c1 =
          fedpat::encrypt_with_nonce(kp.pub, mpz_class(m1), mpz_class(2));
      const auto c2 =
          fedpat::encrypt_with_nonce(kp.pub, mpz_class(m2), mpz_class(23));
      const auto sum = fedpat::he_add(kp.pub, c1, c2);
      EXPECT_EQ(sum.value.get_ui(), ref.add(ref.encrypt(m1, 2),
                                            ref.encrypt(m2, 23)));
      EXPECT_EQ(fedpat::decrypt(kp, sum), (m1 + m2) % 35)
          << "m1=" << m1 << " m2=" << m2;
    }
  }
}

TEST(Encrypt, ValidatesPlaintextAndNonce) {
  const auto kp = toy_keypair();
  EXPECT_THROW(fedpat::encrypt_with_nonce(kp.pub, mpz_class(35), 2),
               fedpat::InputError);
  EXPECT_THROW(fedpat::encrypt_with_nonce(kp.pub, mpz_class(-1), 2),
               fedpat::InputError);
  EXPECT_THROW(fedpat::encrypt_with_nonce(kp.pub, mpz_class(3), 0),
               fedpat::InputError);
  EXPECT_THROW(fedpat::encrypt_with_nonce(kp.pub, mpz_class(3), 35),
               fedpat::InputError);
  // gcd(5, 35) = 5: nonce shares a factor with n.
  EXPECT_THROW(fedpat::encrypt_with_nonce(kp.pub, mpz_class(3), 5),
               fedpat::InputError);
}

TEST(Decrypt, ValidatesCiphertextRange) {
  const auto kp = toy_keypair();
  EXPECT_THROW(fedpat::decrypt(kp, Ciphertext{mpz_class(0), 0}),
               fedpat::InputError);
  EXPECT_THROW(fedpat::decrypt(kp, Ciphertext{mpz_class(1225), 0}),
               fedpat::InputError);
}

TEST(Keygen, DeterministicForSeed) {
  const auto a = fedpat::keygen(128, 42);
  const auto b = fedpat::keygen(128, 42);
  EXPECT_EQ(a.pub.n, b.pub.n);
  EXPECT_EQ(a.priv.lambda, b.priv.lambda);
  EXPECT_EQ(a.priv.mu, b.priv.mu);
  const auto c = fedpat::keygen(128, 43);
  EXPECT_NE(a.pub.n, c.pub.n);
}

TEST(Keygen, KeySizeAndStructure) {
  for (int bits : {128, 256}) {
    const auto kp = fedpat::keygen(bits, 7);
    EXPECT_EQ(kp.pub.bits, bits);
    EXPECT_EQ(kp.pub.g, kp.pub.n + 1);
    EXPECT_EQ(kp.pub.n2, kp.pub.n * kp.pub.n);
    // n = p·q with both primes having their top bit set -> n has either
    // `bits` or `bits - 1` significant bits.
    const std::size_t nbits = mpz_sizeinbase(kp.pub.n.get_mpz_t(), 2);
    EXPECT_GE(nbits, static_cast<std::size_t>(bits - 1));
    EXPECT_LE(nbits, static_cast<std::size_t>(bits));
    // lambda·mu ≡ 1 (mod n)
    mpz_class check = (kp.priv.lambda * kp.priv.mu) % kp.pub.n;
    EXPECT_EQ(check, 1);
  }
}

TEST(Keygen, WarnsBelowRecommendedSize) {
  std::ostringstream warn;
  fedpat::keygen(128, 1, &warn);
  EXPECT_EQ(warn.str(),
            "warning: 128-bit keys are for testing only; use >= 2048 bits "
            "to protect real data\n");
}

TEST(Keygen, RejectsTinyKeys) {
  EXPECT_THROW(fedpat::keygen(8, 1), fedpat::InputError);
  EXPECT_THROW(fedpat::keygen(15, 1), fedpat::InputError);
}

TEST(RandomKeys, RoundtripAndAdditivity) {
  for (int bits : {128, 256}) {
    const auto kp = fedpat::keygen(bits, 1000 + bits);
    fedpat::Rng rng(555);
    for (int trial = 0; trial < 50; ++trial) {
      const mpz_class m1 = fedpat::detail::random_mpz_below(rng, kp.pub.n);
      const mpz_class m2 = fedpat::detail::random_mpz_below(rng, kp.pub.n);
      const auto c1 = fedpat::encrypt(kp.pub, m1, rng);
      const auto c2 = fedpat::encrypt(kp.pub, m2, rng);
      EXPECT_EQ(fedpat::decrypt(kp, c1), m1);
      const auto sum = fedpat::he_add(kp.pub, c1, c2);
      EXPECT_EQ(fedpat::decrypt(kp, sum), (m1 + m2) % kp.pub.n);
    }
  }
}

TEST(HeAdd, RejectsMismatchedScales) {
  const auto kp = fedpat::keygen(128, 3);
  fedpat::Rng rng(1);
  const auto a = fedpat::encrypt(kp.pub, 5, rng, 48);
  const auto b = fedpat::encrypt(kp.pub, 6, rng, 47);
  EXPECT_THROW(fedpat::he_add(kp.pub, a, b), fedpat::ProtocolError);
  try {
    fedpat::he_add(kp.pub, a, b);
    FAIL() << "expected ProtocolError";
  } catch (const fedpat::ProtocolError& e) {
    EXPECT_STREQ(e.what(), "he_add: fixed-point exponents differ");
  }
}

TEST(FixedPoint, KnownMantissas) {
  const auto kp = fedpat::keygen(128, 11);
  // 1.25·2^48 = 351843720888320 exactly.
  const auto enc = fedpat::encode_fixed(kp.pub, 1.25);
  EXPECT_EQ(enc.mantissa, mpz_class("351843720888320"));
  EXPECT_EQ(enc.exponent, 48);
  // Negative values live in the upper half of Z_n.
  const auto neg = fedpat::encode_fixed(kp.pub, -1.25);
  EXPECT_EQ(neg.mantissa, kp.pub.n - mpz_class("351843720888320"));
  EXPECT_DOUBLE_EQ(fedpat::decode_fixed(kp.pub, enc.mantissa, enc.exponent),
                   1.25);
  EXPECT_DOUBLE_EQ(fedpat::decode_fixed(kp.pub, neg.mantissa, neg.exponent),
                   -1.25);
  // Zero is zero.
  EXPECT_EQ(fedpat::encode_fixed(kp.pub, 0.0).mantissa, 0);
}

TEST(FixedPoint, RoundsHalfAwayFromZero) {
  const auto kp = fedpat::keygen(128, 11);
  const double half_ulp = std::ldexp(1.0, -49);  // 0.5·2^-48
  EXPECT_EQ(fedpat::encode_fixed(kp.pub, half_ulp).mantissa, 1);
  EXPECT_EQ(fedpat::encode_fixed(kp.pub, -half_ulp).mantissa, kp.pub.n - 1);
  EXPECT_EQ(fedpat::encode_fixed(kp.pub, std::ldexp(1.0, -50)).mantissa, 0);
}

TEST(FixedPoint, RoundtripWithinTolerance) {
  const auto kp = fedpat::keygen(128, 19);
  fedpat::Rng rng(77);
  const double ulp = std::ldexp(1.0, -48);
  for (int trial = 0; trial < 500; ++trial) {
    const double x = (rng.next_unit() * 2.0 - 1.0) *
                     std::pow(10.0, rng.next_unit() * 6.0 - 3.0);
    const auto enc = fedpat::encode_fixed(kp.pub, x);
    const double back =
        fedpat::decode_fixed(kp.pub, enc.mantissa, enc.exponent);
    EXPECT_NEAR(back, x, ulp * (1.0 + std::fabs(x))) << "x=" << x;
    EXPECT_EQ(oracle::round_scaled(x, 48),
              enc.mantissa * 2 > kp.pub.n
                  ? -mpz_class(kp.pub.n - enc.mantissa).get_si()
                  : mpz_class(enc.mantissa).get_si());
  }
}

TEST(FixedPoint, EncryptedSignedSum) {
  const auto kp = fedpat::keygen(256, 23);
  fedpat::Rng rng(9);
  const double ulp = std::ldexp(1.0, -48);
  for (int trial = 0; trial < 40; ++trial) {
    const double x1 = rng.next_unit() * 200.0 - 100.0;
    const double x2 = rng.next_unit() * 200.0 - 100.0;
    const auto e1 = fedpat::encode_fixed(kp.pub, x1);
    const auto e2 = fedpat::encode_fixed(kp.pub, x2);
    const auto c1 = fedpat::encrypt(kp.pub, e1.mantissa, rng, e1.exponent);
    const auto c2 = fedpat::encrypt(kp.pub, e2.mantissa, rng, e2.exponent);
    const auto sum = fedpat::he_add(kp.pub, c1, c2);
    const mpz_class mantissa = fedpat::decrypt(kp, sum);
    const double got = fedpat::decode_fixed(kp.pub, mantissa, sum.exponent);
    EXPECT_NEAR(got, x1 + x2, 2 * ulp * (1.0 + std::fabs(x1 + x2)));
  }
}

TEST(FixedPoint, OverflowAndValidation) {
  const auto toy = toy_keypair();
  // 2^48 · 4 vastly exceeds n = 35.
  EXPECT_THROW(fedpat::encode_fixed(toy.pub, 1.0), fedpat::InputError);
  try {
    fedpat::encode_fixed(toy.pub, 1.0);
    FAIL() << "expected InputError";
  } catch (const fedpat::InputError& e) {
    EXPECT_STREQ(e.what(), "encode_fixed: magnitude overflows the key modulus");
  }
  const auto kp = fedpat::keygen(128, 2);
  EXPECT_THROW(
      fedpat::encode_fixed(kp.pub, std::numeric_limits<double>::infinity()),
      fedpat::InputError);
  EXPECT_THROW(
      fedpat::encode_fixed(kp.pub, std::numeric_limits<double>::quiet_NaN()),
      fedpat::InputError);
  EXPECT_THROW(fedpat::decode_fixed(kp.pub, mpz_class(-1), 48),
               fedpat::InputError);
  EXPECT_THROW(fedpat::decode_fixed(kp.pub, kp.pub.n, 48),
               fedpat::InputError);
}

}  // namespace
