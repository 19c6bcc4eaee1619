#pragma once

// Keyed-homomorphic, multiplicatively homomorphic public-key encryption over
// the quadratic-residue subgroup of a safe-prime group.
//
// Key roles:
//   PublicKey       encrypts; anyone may hold it.
//   DecryptionKey   decrypts and verifies (plant side).
//   HomomorphicKey  required to evaluate products (controller side).
//
// A ciphertext carries two integrity tags: pi_hat binds (x0, x1) to the
// decryption key and eta binds the whole tuple to the homomorphic key. Any
// ciphertext that fails a check is rejected with the error symbol, which
// this API represents as an empty std::optional.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "khectl/numtheory.hpp"

namespace khectl::khe {

using Digest = std::array<std::uint8_t, 32>;

struct PublicKey {
  GroupParams group;
  BigInt g0, g1;
  BigInt s, s_hat, s_tilde0, s_tilde1;

  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

struct HomomorphicKey {
  GroupParams group;
  BigInt k_tilde00, k_tilde01, k_tilde10, k_tilde11;

  friend bool operator==(const HomomorphicKey&, const HomomorphicKey&) = default;
};

struct DecryptionKey {
  GroupParams group;
  BigInt k0, k1, k_hat0, k_hat1;
  HomomorphicKey tilde;  // the last four exponents, shared with sk_h

  friend bool operator==(const DecryptionKey&, const DecryptionKey&) = default;
};

struct KeyTriple {
  PublicKey pk;
  DecryptionKey skd;
  HomomorphicKey skh;
};

struct Ciphertext {
  BigInt x0, x1, epsilon, pi_hat;
  Digest eta{};

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

/// Generates a fresh key triple over a new `bits`-bit safe prime.
KeyTriple gen(unsigned bits, RandomSource& rng);
/// Generates a key triple over an existing group (toy groups in tests).
KeyTriple gen_in_group(const GroupParams& gp, RandomSource& rng);

/// Checks the algebraic relations between pk and skd; false on mismatch.
bool keys_consistent(const PublicKey& pk, const DecryptionKey& skd);
bool keys_consistent(const PublicKey& pk, const HomomorphicKey& skh);

/// Throws DomainError unless m is in the quadratic-residue subgroup.
Ciphertext enc(const PublicKey& pk, const BigInt& m, RandomSource& rng);

/// Plaintext, or std::nullopt (error symbol) when either tag fails.
std::optional<BigInt> dec(const DecryptionKey& skd, const Ciphertext& c);

/// Re-randomized encryption of m1*m2, or std::nullopt (error symbol) when
/// either input's eta tag fails under skh.
std::optional<Ciphertext> eval(const PublicKey& pk, const HomomorphicKey& skh,
                               const Ciphertext& c1, const Ciphertext& c2,
                               RandomSource& rng);

/// Malleability attack: multiplies the epsilon component by lambda.
Ciphertext tamper(const GroupParams& gp, const Ciphertext& c, const BigInt& lambda);

/// epsilon / pi with both integrity checks skipped. Models a receiver that
/// ignores detection; never returns the error symbol.
BigInt unchecked_dec(const DecryptionKey& skd, const Ciphertext& c);

/// Component-wise product with fresh re-randomization and no tag checks.
/// The output's eta is zeroed because it cannot be computed without skh;
/// only unchecked_dec accepts it.
Ciphertext unchecked_eval(const PublicKey& pk, const Ciphertext& c1,
                          const Ciphertext& c2, RandomSource& rng);

// Hash maps, exposed for tests and wire tooling.

/// Big-endian encoding of v left-padded to `width` bytes.
std::vector<std::uint8_t> fixed_width_bytes(const BigInt& v, std::size_t width);

/// delta = SHA-256(x0 || x1 || epsilon || pi_hat) mod q, each field
/// fixed-width big-endian.
BigInt hash_delta(const GroupParams& gp, const BigInt& x0, const BigInt& x1,
                  const BigInt& epsilon, const BigInt& pi_hat);

/// eta = SHA-256 of the fixed-width big-endian encoding of v.
Digest hash_eta(const GroupParams& gp, const BigInt& v);

}  // namespace khectl::khe
