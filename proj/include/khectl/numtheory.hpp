#pragma once

// Arbitrary-precision modular arithmetic over safe-prime groups.
//
// All randomness is drawn from an explicit RandomSource; nothing in this
// library touches a global generator.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>

#include <gmpxx.h>

namespace khectl {

using BigInt = mpz_class;

/// Source of random bits. Cryptographic instances read the OS/OpenSSL
/// generator; seeded instances are a deterministic stream intended for tests
/// and reproducible simulations only.
class RandomSource {
 public:
  static RandomSource cryptographic();
  static RandomSource seeded(std::uint64_t seed);

  bool deterministic() const { return engine_.has_value(); }

  void fill(std::span<std::uint8_t> out);
  std::uint64_t next_u64();

  /// Uniform integer in [0, bound). bound must be positive.
  BigInt uniform_below(const BigInt& bound);
  /// Uniform integer in [lo, hi]. Requires lo <= hi.
  BigInt uniform_range(const BigInt& lo, const BigInt& hi);
  /// Uniform integer with exactly `bits` significant bits (top bit set).
  BigInt uniform_bits(unsigned bits);

  /// Independent stream. A seeded source derives the child seed from its own
  /// stream so forking is reproducible; a cryptographic source returns a new
  /// cryptographic source.
  RandomSource fork();

 private:
  RandomSource() = default;
  std::optional<std::mt19937_64> engine_;
};

/// Safe-prime group description: p = 2q + 1 with p, q prime. The plaintext
/// and ciphertext space is the order-q subgroup of quadratic residues.
struct GroupParams {
  BigInt p;
  BigInt q;
  unsigned bits = 0;

  /// Builds and validates parameters from a safe prime p.
  static GroupParams from_safe_prime(const BigInt& p);

  /// Byte width of one fixed-width group element encoding.
  std::size_t element_bytes() const { return (bits + 7) / 8; }

  friend bool operator==(const GroupParams&, const GroupParams&) = default;
};

constexpr unsigned kMinSafePrimeBits = 16;
constexpr std::size_t kDefaultSafePrimeAttempts = 4'000'000;
constexpr int kMillerRabinRounds = 64;

unsigned bit_length(const BigInt& n);

bool is_probable_prime(const BigInt& n, RandomSource& rng,
                       int rounds = kMillerRabinRounds);

/// Random safe prime of exactly `bits` bits. Throws std::invalid_argument if
/// bits < kMinSafePrimeBits and GenerationTimeout when the budget runs out.
GroupParams gen_safe_prime(unsigned bits, RandomSource& rng,
                           std::size_t max_attempts = kDefaultSafePrimeAttempts);

namespace detail {
// Same search without the toolkit floor on `bits` (toy groups in tests).
GroupParams search_safe_prime(unsigned bits, RandomSource& rng,
                              std::size_t max_attempts);
}  // namespace detail

BigInt mod_pow(const BigInt& base, const BigInt& exponent, const BigInt& modulus);
BigInt mod_mul(const BigInt& a, const BigInt& b, const BigInt& modulus);
/// Throws DomainError when gcd(a, modulus) != 1.
BigInt mod_inv(const BigInt& a, const BigInt& modulus);

/// Canonical residue in [0, m).
BigInt mod_floor(const BigInt& a, const BigInt& m);

/// Legendre symbol (z/p) via Euler's criterion. Throws DomainError if p | z
/// or if the criterion yields neither 1 nor p-1 (p not prime).
int legendre(const BigInt& z, const BigInt& p);

/// Minimal residue of a modulo m: representative in (-m/2, m/2]. A tie
/// (b == m/2) maps to -m/2.
BigInt min_residue(const BigInt& a, const BigInt& m);

/// Rounding to the nearest positive integer: floor(sigma + 0.5) when
/// sigma >= 0.5, otherwise 1. Never returns 0.
BigInt round_pos(double sigma);

/// Random element of the order-q subgroup other than 1.
BigInt sample_group_element(const GroupParams& gp, RandomSource& rng);

/// Membership in the quadratic-residue subgroup: 1 <= v < p and (v/p) = 1.
bool in_group(const GroupParams& gp, const BigInt& v);

/// Double-precision value of n (truncating conversion, as mpz_get_d).
double to_double(const BigInt& n);

}  // namespace khectl
