#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>

#include "fedpat/common.hpp"

namespace fedpat {

// Additively homomorphic public-key scheme: multiplying two ciphertexts
// modulo n² yields an encryption of the plaintext sum. The aggregator can
// therefore fold encrypted client updates without ever holding the private
// key. Public and private halves are separate types so aggregator-side code
// can be shown, structurally, to never touch lambda/mu.

struct PaillierPublicKey {
  mpz_class n;   // modulus, product of two primes
  mpz_class g;   // generator, fixed to n + 1
  int bits = 0;  // nominal key size
  mpz_class n2;  // cached n², the ciphertext modulus

  void finish() {
    g = n + 1;
    n2 = n * n;
  }
};

struct PaillierPrivateKey {
  mpz_class lambda;  // lcm(p-1, q-1)
  mpz_class mu;      // lambda^{-1} mod n
};

struct PaillierKeypair {
  PaillierPublicKey pub;
  PaillierPrivateKey priv;
};

struct Ciphertext {
  mpz_class value;   // element of Z*_{n²}
  int exponent = 0;  // fixed-point scale: plaintext is mantissa·2^-exponent
};

namespace detail {

inline mpz_class random_mpz_bits(Rng& rng, int bits) {
  mpz_class v = 0;
  for (int filled = 0; filled < bits; filled += 64) {
    v <<= 64;
    v += mpz_class(static_cast<unsigned long>(rng.next_u64()));
  }
  mpz_class mask = (mpz_class(1) << bits) - 1;
  v &= mask;
  return v;
}

inline mpz_class random_mpz_below(Rng& rng, const mpz_class& bound) {
  const int bits = static_cast<int>(mpz_sizeinbase(bound.get_mpz_t(), 2));
  mpz_class v;
  do {
    v = random_mpz_bits(rng, bits);
  } while (v >= bound);
  return v;
}

inline mpz_class next_prime_with_top_bit(Rng& rng, int bits) {
  mpz_class candidate = random_mpz_bits(rng, bits);
  candidate |= mpz_class(1) << (bits - 1);  // keep the full width
  mpz_class prime;
  mpz_nextprime(prime.get_mpz_t(), candidate.get_mpz_t());
  return prime;
}

}  // namespace detail

// Builds a keypair directly from two primes (used by tests with tiny primes
// and by keygen below).
inline PaillierKeypair keypair_from_primes(const mpz_class& p,
                                           const mpz_class& q, int bits) {
  if (p == q) throw InputError("keypair: primes must be distinct");
  PaillierKeypair kp;
  kp.pub.n = p * q;
  kp.pub.bits = bits;
  kp.pub.finish();
  mpz_class pm1 = p - 1, qm1 = q - 1;
  mpz_lcm(kp.priv.lambda.get_mpz_t(), pm1.get_mpz_t(), qm1.get_mpz_t());
  if (mpz_invert(kp.priv.mu.get_mpz_t(), kp.priv.lambda.get_mpz_t(),
                 kp.pub.n.get_mpz_t()) == 0) {
    throw InputError("keypair: lambda has no inverse mod n");
  }
  return kp;
}

// Deterministic key generation: primes come from a seeded stream, so the
// same (bits, seed) always yields the same keypair. Key sizes below 2048
// bits are fine for tests but not for protecting real data; pass a stream
// to surface that warning.
inline PaillierKeypair keygen(int bits, std::uint64_t seed,
                              std::ostream* warnings = nullptr) {
  if (bits < 16) throw InputError("keygen: key size must be >= 16 bits");
  if (bits < 2048 && warnings) {
    *warnings << "warning: " << bits
              << "-bit keys are for testing only; use >= 2048 bits to "
                 "protect real data\n";
  }
  Rng rng(seed);
  const int half = bits / 2;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const mpz_class p = detail::next_prime_with_top_bit(rng, half);
    const mpz_class q = detail::next_prime_with_top_bit(rng, half);
    if (p == q) continue;
    // g = n+1 needs gcd(n, (p-1)(q-1)) = 1; retry on the rare failure.
    mpz_class n = p * q, phi = (p - 1) * (q - 1), gcd;
    mpz_gcd(gcd.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
    if (gcd != 1) continue;
    return keypair_from_primes(p, q, bits);
  }
  throw std::runtime_error("keygen: prime generation failed after 64 tries");
}

// c = g^m · r^n mod n². With g = n+1, g^m reduces to 1 + m·n (mod n²).
inline Ciphertext encrypt_with_nonce(const PaillierPublicKey& pub,
                                     const mpz_class& m, const mpz_class& r,
                                     int exponent = 0) {
  if (m < 0 || m >= pub.n) {
    throw InputError("encrypt: plaintext outside [0, n)");
  }
  mpz_class gcd;
  mpz_gcd(gcd.get_mpz_t(), r.get_mpz_t(), pub.n.get_mpz_t());
  if (r <= 0 || r >= pub.n || gcd != 1) {
    throw InputError("encrypt: nonce must lie in (0, n) and be coprime to n");
  }
  mpz_class gm = (1 + m * pub.n) % pub.n2;
  mpz_class rn;
  mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), pub.n.get_mpz_t(),
           pub.n2.get_mpz_t());
  return Ciphertext{(gm * rn) % pub.n2, exponent};
}

inline Ciphertext encrypt(const PaillierPublicKey& pub, const mpz_class& m,
                          Rng& rng, int exponent = 0) {
  mpz_class r, gcd;
  do {
    r = detail::random_mpz_below(rng, pub.n);
    mpz_gcd(gcd.get_mpz_t(), r.get_mpz_t(), pub.n.get_mpz_t());
  } while (r <= 0 || gcd != 1);
  return encrypt_with_nonce(pub, m, r, exponent);
}

// m = L(c^lambda mod n²) · mu mod n, with L(x) = (x-1)/n.
inline mpz_class decrypt(const PaillierKeypair& kp, const Ciphertext& c) {
  if (c.value <= 0 || c.value >= kp.pub.n2) {
    throw InputError("decrypt: ciphertext outside (0, n^2)");
  }
  mpz_class u;
  mpz_powm(u.get_mpz_t(), c.value.get_mpz_t(), kp.priv.lambda.get_mpz_t(),
           kp.pub.n2.get_mpz_t());
  mpz_class l = (u - 1) / kp.pub.n;
  return (l * kp.priv.mu) % kp.pub.n;
}

// Homomorphic addition: decrypts to (m1 + m2) mod n. Both ciphertexts must
// sit at the same fixed-point scale.
inline Ciphertext he_add(const PaillierPublicKey& pub, const Ciphertext& a,
                         const Ciphertext& b) {
  if (a.exponent != b.exponent) {
    throw ProtocolError("he_add: fixed-point exponents differ");
  }
  return Ciphertext{(a.value * b.value) % pub.n2, a.exponent};
}

// --- signed fixed-point embedding into Z_n -----------------------------------
//
// Reals enter the additive scheme as round(x·2^f) reduced mod n; values in
// the upper half of Z_n decode as negatives (two's-complement style), which
// keeps homomorphic sums of signed values correct. The magnitude bound
// |x| < n/2^(f+2) leaves two headroom bits for sums.

inline constexpr int kFractionBits = 48;

struct FixedEncoded {
  mpz_class mantissa;  // in [0, n)
  int exponent = kFractionBits;
};

namespace detail {

// round(x·2^f) as an exact integer: split off the 53-bit significand with
// frexp, then shift in exact integer arithmetic (half away from zero).
inline mpz_class round_scaled(double x, int f) {
  if (x == 0.0) return 0;
  int exp2 = 0;
  const double frac = std::frexp(x, &exp2);  // x = frac·2^exp2, |frac|∈[0.5,1)
  const long sig53 = std::lround(std::ldexp(frac, 53));
  mpz_class mag = mpz_class(std::labs(sig53));
  const int shift = exp2 - 53 + f;
  if (shift >= 0) {
    mag <<= shift;
  } else {
    const int r = -shift;
    mag += mpz_class(1) << (r - 1);  // round half away from zero
    mag >>= r;
  }
  return sig53 < 0 ? mpz_class(-mag) : mag;
}

}  // namespace detail

inline FixedEncoded encode_fixed(const PaillierPublicKey& pub, double x,
                                 int fraction_bits = kFractionBits) {
  if (!std::isfinite(x)) throw InputError("encode_fixed: non-finite value");
  mpz_class scaled = detail::round_scaled(x, fraction_bits);
  mpz_class mag = abs(scaled);
  if (mag * 4 >= pub.n) {
    throw InputError("encode_fixed: magnitude overflows the key modulus");
  }
  mpz_class mantissa = scaled % pub.n;
  if (mantissa < 0) mantissa += pub.n;
  return FixedEncoded{mantissa, fraction_bits};
}

inline double decode_fixed(const PaillierPublicKey& pub,
                           const mpz_class& mantissa, int exponent) {
  if (mantissa < 0 || mantissa >= pub.n) {
    throw InputError("decode_fixed: mantissa outside [0, n)");
  }
  mpz_class v = mantissa;
  if (v * 2 > pub.n) v -= pub.n;  // upper half decodes as negative
  return std::ldexp(v.get_d(), -exponent);
}

}  // namespace fedpat
