#include "khectl/numtheory.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/rand.h>

#include "khectl/errors.hpp"

namespace khectl {

namespace {

constexpr std::array<unsigned, 54> kSmallPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,
    47,  53,  59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107,
    109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181,
    191, 193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251};

BigInt from_bytes(std::span<const std::uint8_t> bytes) {
  BigInt out;
  if (!bytes.empty()) {
    mpz_import(out.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  }
  return out;
}

// Random value below 2^bits.
BigInt random_bits(RandomSource& rng, unsigned bits) {
  if (bits == 0) return 0;
  std::vector<std::uint8_t> buf((bits + 7) / 8);
  rng.fill(buf);
  const unsigned excess = static_cast<unsigned>(buf.size() * 8) - bits;
  buf[0] &= static_cast<std::uint8_t>(0xFFu >> excess);
  return from_bytes(buf);
}

// 1: divisible by a small prime other than itself, 0: n is a small prime,
// -1: no small factor found.
int small_factor_status(const BigInt& n) {
  for (unsigned sp : kSmallPrimes) {
    if (n == sp) return 0;
    if (mpz_divisible_ui_p(n.get_mpz_t(), sp)) return 1;
  }
  return -1;
}

}  // namespace

RandomSource RandomSource::cryptographic() { return RandomSource{}; }

RandomSource RandomSource::seeded(std::uint64_t seed) {
  RandomSource r;
  r.engine_.emplace(seed);
  return r;
}

void RandomSource::fill(std::span<std::uint8_t> out) {
  if (!engine_) {
    if (out.empty()) return;
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
      throw std::runtime_error("RAND_bytes failed");
    }
    return;
  }
  std::size_t i = 0;
  while (i < out.size()) {
    std::uint64_t word = (*engine_)();
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(word & 0xFF);
      word >>= 8;
    }
  }
}

std::uint64_t RandomSource::next_u64() {
  if (engine_) return (*engine_)();
  std::array<std::uint8_t, 8> b{};
  fill(b);
  std::uint64_t v = 0;
  for (auto byte : b) v = (v << 8) | byte;
  return v;
}

BigInt RandomSource::uniform_below(const BigInt& bound) {
  if (bound <= 0) throw std::invalid_argument("uniform_below: bound must be positive");
  if (bound == 1) return 0;
  const BigInt top = bound - 1;
  const unsigned bits = bit_length(top);
  for (;;) {
    BigInt candidate = random_bits(*this, bits);
    if (candidate < bound) return candidate;
  }
}

BigInt RandomSource::uniform_range(const BigInt& lo, const BigInt& hi) {
  if (lo > hi) throw std::invalid_argument("uniform_range: empty range");
  return lo + uniform_below(hi - lo + 1);
}

BigInt RandomSource::uniform_bits(unsigned bits) {
  if (bits == 0) throw std::invalid_argument("uniform_bits: bits must be positive");
  BigInt v = random_bits(*this, bits);
  mpz_setbit(v.get_mpz_t(), bits - 1);
  return v;
}

RandomSource RandomSource::fork() {
  if (engine_) return seeded(next_u64());
  return cryptographic();
}

GroupParams GroupParams::from_safe_prime(const BigInt& p) {
  if (p < 7) throw DomainError("safe prime must be at least 7");
  GroupParams gp{p, (p - 1) / 2, bit_length(p)};
  auto rng = RandomSource::cryptographic();
  if (!is_probable_prime(gp.p, rng) || !is_probable_prime(gp.q, rng)) {
    throw DomainError("p = " + p.get_str() + " is not a safe prime");
  }
  return gp;
}

unsigned bit_length(const BigInt& n) {
  if (n == 0) return 0;
  return static_cast<unsigned>(mpz_sizeinbase(n.get_mpz_t(), 2));
}

bool is_probable_prime(const BigInt& n, RandomSource& rng, int rounds) {
  if (n < 2) return false;
  if (n < 4) return true;
  switch (small_factor_status(n)) {
    case 0: return true;
    case 1: return false;
    default: break;
  }

  // n - 1 = d * 2^s with d odd
  const BigInt n_minus_1 = n - 1;
  BigInt d = n_minus_1;
  const auto s = static_cast<unsigned>(mpz_scan1(d.get_mpz_t(), 0));
  mpz_tdiv_q_2exp(d.get_mpz_t(), d.get_mpz_t(), s);

  BigInt x;
  for (int round = 0; round < rounds; ++round) {
    const BigInt a = rng.uniform_range(2, n - 2);
    mpz_powm(x.get_mpz_t(), a.get_mpz_t(), d.get_mpz_t(), n.get_mpz_t());
    if (x == 1 || x == n_minus_1) continue;
    bool witness = true;
    for (unsigned r = 1; r < s; ++r) {
      mpz_powm_ui(x.get_mpz_t(), x.get_mpz_t(), 2, n.get_mpz_t());
      if (x == n_minus_1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

namespace detail {

GroupParams search_safe_prime(unsigned bits, RandomSource& rng,
                              std::size_t max_attempts) {
  if (bits < 3) throw std::invalid_argument("safe primes need at least 3 bits");
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    BigInt q = rng.uniform_bits(bits - 1);
    mpz_setbit(q.get_mpz_t(), 0);
    BigInt p = 2 * q + 1;
    if (bit_length(p) != bits) continue;
    if (small_factor_status(q) == 1 || small_factor_status(p) == 1) continue;
    if (!is_probable_prime(q, rng) || !is_probable_prime(p, rng)) continue;
    return GroupParams{p, q, bits};
  }
  throw GenerationTimeout("no " + std::to_string(bits) + "-bit safe prime found in " +
                          std::to_string(max_attempts) + " attempts");
}

}  // namespace detail

GroupParams gen_safe_prime(unsigned bits, RandomSource& rng, std::size_t max_attempts) {
  if (bits < kMinSafePrimeBits) {
    throw std::invalid_argument("key length must be at least " +
                                std::to_string(kMinSafePrimeBits) + " bits");
  }
  return detail::search_safe_prime(bits, rng, max_attempts);
}

BigInt mod_pow(const BigInt& base, const BigInt& exponent, const BigInt& modulus) {
  if (modulus < 2) throw DomainError("modulus must be at least 2");
  BigInt out;
  if (exponent < 0) {
    const BigInt inv = mod_inv(base, modulus);
    const BigInt e = -exponent;
    mpz_powm(out.get_mpz_t(), inv.get_mpz_t(), e.get_mpz_t(), modulus.get_mpz_t());
  } else {
    mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exponent.get_mpz_t(), modulus.get_mpz_t());
  }
  return out;
}

BigInt mod_mul(const BigInt& a, const BigInt& b, const BigInt& modulus) {
  if (modulus < 2) throw DomainError("modulus must be at least 2");
  return mod_floor(a * b, modulus);
}

BigInt mod_inv(const BigInt& a, const BigInt& modulus) {
  if (modulus < 2) throw DomainError("modulus must be at least 2");
  BigInt out;
  if (mpz_invert(out.get_mpz_t(), a.get_mpz_t(), modulus.get_mpz_t()) == 0) {
    throw DomainError(a.get_str() + " is not invertible modulo " + modulus.get_str());
  }
  return out;
}

BigInt mod_floor(const BigInt& a, const BigInt& m) {
  BigInt r;
  mpz_fdiv_r(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
  return r;
}

int legendre(const BigInt& z, const BigInt& p) {
  const BigInt zr = mod_floor(z, p);
  if (zr == 0) throw DomainError("Legendre symbol undefined: p divides " + z.get_str());
  const BigInt r = mod_pow(zr, (p - 1) / 2, p);
  if (r == 1) return 1;
  if (r == p - 1) return -1;
  throw DomainError("Euler criterion failed: " + p.get_str() + " is not an odd prime");
}

BigInt min_residue(const BigInt& a, const BigInt& m) {
  if (m < 1) throw DomainError("min_residue: modulus must be positive");
  BigInt b = mod_floor(a, m);
  BigInt alt = b - m;
  return b < abs(alt) ? b : alt;
}

BigInt round_pos(double sigma) {
  if (!std::isfinite(sigma) || sigma < 0) {
    throw DomainError("round_pos: argument must be a finite nonnegative real");
  }
  if (sigma < 0.5) return 1;
  return BigInt(std::floor(sigma + 0.5));
}

BigInt sample_group_element(const GroupParams& gp, RandomSource& rng) {
  for (;;) {
    const BigInt h = rng.uniform_range(2, gp.p - 2);
    BigInt g = mod_mul(h, h, gp.p);
    if (g != 1) return g;
  }
}

bool in_group(const GroupParams& gp, const BigInt& v) {
  if (v < 1 || v >= gp.p) return false;
  return legendre(v, gp.p) == 1;
}

double to_double(const BigInt& n) { return mpz_get_d(n.get_mpz_t()); }

}  // namespace khectl
