#include "khectl/khe.hpp"

#include <stdexcept>
#include <vector>

#include <openssl/evp.h>

#include "khectl/errors.hpp"

namespace khectl::khe {

namespace {

Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  return out;
}

void append_fixed(std::vector<std::uint8_t>& buf, const BigInt& v, std::size_t width) {
  const auto bytes = fixed_width_bytes(v, width);
  buf.insert(buf.end(), bytes.begin(), bytes.end());
}

// x0^(k00 + delta k10) * x1^(k01 + delta k11) mod p
BigInt tag_base(const HomomorphicKey& skh, const BigInt& x0, const BigInt& x1,
                const BigInt& delta) {
  const auto& gp = skh.group;
  const BigInt e0 = mod_floor(skh.k_tilde00 + delta * skh.k_tilde10, gp.q);
  const BigInt e1 = mod_floor(skh.k_tilde01 + delta * skh.k_tilde11, gp.q);
  return mod_mul(mod_pow(x0, e0, gp.p), mod_pow(x1, e1, gp.p), gp.p);
}

Digest expected_eta(const HomomorphicKey& skh, const Ciphertext& c) {
  const BigInt delta = hash_delta(skh.group, c.x0, c.x1, c.epsilon, c.pi_hat);
  return hash_eta(skh.group, tag_base(skh, c.x0, c.x1, delta));
}

bool well_formed(const GroupParams& gp, const Ciphertext& c) {
  for (const BigInt* v : {&c.x0, &c.x1, &c.epsilon, &c.pi_hat}) {
    if (*v <= 0 || *v >= gp.p) return false;
  }
  return true;
}

BigInt pi_of(const DecryptionKey& skd, const Ciphertext& c) {
  const auto& p = skd.group.p;
  return mod_mul(mod_pow(c.x0, skd.k0, p), mod_pow(c.x1, skd.k1, p), p);
}

}  // namespace

std::vector<std::uint8_t> fixed_width_bytes(const BigInt& v, std::size_t width) {
  if (v < 0) throw DomainError("fixed_width_bytes: negative value");
  std::vector<std::uint8_t> out(width, 0);
  if (v == 0) return out;
  const std::size_t n = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  if (n > width) throw OverflowError("value does not fit in " + std::to_string(width) + " bytes");
  std::size_t written = 0;
  mpz_export(out.data() + (width - n), &written, 1, 1, 1, 0, v.get_mpz_t());
  return out;
}

BigInt hash_delta(const GroupParams& gp, const BigInt& x0, const BigInt& x1,
                  const BigInt& epsilon, const BigInt& pi_hat) {
  const std::size_t w = gp.element_bytes();
  std::vector<std::uint8_t> buf;
  buf.reserve(4 * w);
  append_fixed(buf, x0, w);
  append_fixed(buf, x1, w);
  append_fixed(buf, epsilon, w);
  append_fixed(buf, pi_hat, w);
  const Digest d = sha256(buf);
  BigInt v;
  mpz_import(v.get_mpz_t(), d.size(), 1, 1, 1, 0, d.data());
  return mod_floor(v, gp.q);
}

Digest hash_eta(const GroupParams& gp, const BigInt& v) {
  return sha256(fixed_width_bytes(v, gp.element_bytes()));
}

KeyTriple gen_in_group(const GroupParams& gp, RandomSource& rng) {
  const auto& p = gp.p;
  const auto exponent = [&] { return rng.uniform_below(gp.q); };
  const BigInt g0 = sample_group_element(gp, rng);
  const BigInt g1 = sample_group_element(gp, rng);
  const auto combine = [&](const BigInt& a, const BigInt& b) {
    return mod_mul(mod_pow(g0, a, p), mod_pow(g1, b, p), p);
  };

  KeyTriple kt;
  auto& skd = kt.skd;
  skd.group = gp;
  skd.k0 = exponent();
  skd.k1 = exponent();
  skd.k_hat0 = exponent();
  skd.k_hat1 = exponent();
  auto& t = skd.tilde;
  t.group = gp;
  t.k_tilde00 = exponent();
  t.k_tilde01 = exponent();
  t.k_tilde10 = exponent();
  t.k_tilde11 = exponent();
  kt.skh = t;

  kt.pk = PublicKey{gp,
                    g0,
                    g1,
                    combine(skd.k0, skd.k1),
                    combine(skd.k_hat0, skd.k_hat1),
                    combine(t.k_tilde00, t.k_tilde01),
                    combine(t.k_tilde10, t.k_tilde11)};
  return kt;
}

KeyTriple gen(unsigned bits, RandomSource& rng) {
  return gen_in_group(gen_safe_prime(bits, rng), rng);
}

bool keys_consistent(const PublicKey& pk, const DecryptionKey& skd) {
  const auto& p = pk.group.p;
  if (!(pk.group == skd.group) || !(skd.tilde.group == skd.group)) return false;
  const auto combine = [&](const BigInt& a, const BigInt& b) {
    return mod_mul(mod_pow(pk.g0, a, p), mod_pow(pk.g1, b, p), p);
  };
  const auto& t = skd.tilde;
  return pk.s == combine(skd.k0, skd.k1) && pk.s_hat == combine(skd.k_hat0, skd.k_hat1) &&
         pk.s_tilde0 == combine(t.k_tilde00, t.k_tilde01) &&
         pk.s_tilde1 == combine(t.k_tilde10, t.k_tilde11);
}

bool keys_consistent(const PublicKey& pk, const HomomorphicKey& skh) {
  const auto& p = pk.group.p;
  if (!(pk.group == skh.group)) return false;
  const auto combine = [&](const BigInt& a, const BigInt& b) {
    return mod_mul(mod_pow(pk.g0, a, p), mod_pow(pk.g1, b, p), p);
  };
  return pk.s_tilde0 == combine(skh.k_tilde00, skh.k_tilde01) &&
         pk.s_tilde1 == combine(skh.k_tilde10, skh.k_tilde11);
}

Ciphertext enc(const PublicKey& pk, const BigInt& m, RandomSource& rng) {
  const auto& gp = pk.group;
  const auto& p = gp.p;
  if (!in_group(gp, m)) {
    throw DomainError("plaintext " + m.get_str() + " is not a quadratic residue mod p");
  }
  const BigInt omega = rng.uniform_below(gp.q);

  Ciphertext c;
  c.x0 = mod_pow(pk.g0, omega, p);
  c.x1 = mod_pow(pk.g1, omega, p);
  c.epsilon = mod_mul(m, mod_pow(pk.s, omega, p), p);
  c.pi_hat = mod_pow(pk.s_hat, omega, p);
  const BigInt delta = hash_delta(gp, c.x0, c.x1, c.epsilon, c.pi_hat);
  const BigInt tag = mod_pow(mod_mul(pk.s_tilde0, mod_pow(pk.s_tilde1, delta, p), p), omega, p);
  c.eta = hash_eta(gp, tag);
  return c;
}

std::optional<BigInt> dec(const DecryptionKey& skd, const Ciphertext& c) {
  const auto& gp = skd.group;
  const auto& p = gp.p;
  if (!well_formed(gp, c)) return std::nullopt;
  const BigInt pi_hat = mod_mul(mod_pow(c.x0, skd.k_hat0, p), mod_pow(c.x1, skd.k_hat1, p), p);
  if (pi_hat != c.pi_hat) return std::nullopt;
  if (expected_eta(skd.tilde, c) != c.eta) return std::nullopt;
  return mod_mul(c.epsilon, mod_inv(pi_of(skd, c), p), p);
}

std::optional<Ciphertext> eval(const PublicKey& pk, const HomomorphicKey& skh,
                               const Ciphertext& c1, const Ciphertext& c2,
                               RandomSource& rng) {
  const auto& gp = skh.group;
  if (!well_formed(gp, c1) || !well_formed(gp, c2)) return std::nullopt;
  if (expected_eta(skh, c1) != c1.eta || expected_eta(skh, c2) != c2.eta) {
    return std::nullopt;
  }
  Ciphertext c = unchecked_eval(pk, c1, c2, rng);
  c.eta = expected_eta(skh, c);
  return c;
}

Ciphertext tamper(const GroupParams& gp, const Ciphertext& c, const BigInt& lambda) {
  Ciphertext out = c;
  out.epsilon = mod_mul(lambda, c.epsilon, gp.p);
  return out;
}

BigInt unchecked_dec(const DecryptionKey& skd, const Ciphertext& c) {
  const auto& p = skd.group.p;
  return mod_mul(c.epsilon, mod_inv(pi_of(skd, c), p), p);
}

Ciphertext unchecked_eval(const PublicKey& pk, const Ciphertext& c1, const Ciphertext& c2,
                          RandomSource& rng) {
  const auto& gp = pk.group;
  const auto& p = gp.p;
  const BigInt omega = rng.uniform_below(gp.q);
  Ciphertext c;
  c.x0 = mod_mul(mod_mul(c1.x0, c2.x0, p), mod_pow(pk.g0, omega, p), p);
  c.x1 = mod_mul(mod_mul(c1.x1, c2.x1, p), mod_pow(pk.g1, omega, p), p);
  c.epsilon = mod_mul(mod_mul(c1.epsilon, c2.epsilon, p), mod_pow(pk.s, omega, p), p);
  c.pi_hat = mod_mul(mod_mul(c1.pi_hat, c2.pi_hat, p), mod_pow(pk.s_hat, omega, p), p);
  return c;
}

}  // namespace khectl::khe
