#include <algorithm>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "frozen.hpp"
#include "khectl/errors.hpp"
#include "khectl/numtheory.hpp"

using namespace khectl;

namespace {

std::set<long> square_table(long p) {
  std::set<long> s;
  for (long b = 1; b < p; ++b) s.insert((b * b) % p);
  return s;
}

bool small_prime(long n) {
  if (n < 2) return false;
  for (long d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

}  // namespace

TEST(Legendre, SmallExamples) {
  EXPECT_EQ(legendre(2, 7), 1);
  EXPECT_EQ(legendre(3, 7), -1);
  EXPECT_EQ(legendre(2, 3), -1);
  EXPECT_EQ(legendre(1, 3), 1);
  for (long p : {3L, 5L, 7L, 11L, 10007L}) EXPECT_EQ(legendre(1, p), 1);
}

TEST(Legendre, MatchesSquareTableForPrimesUpTo1e4) {
  for (long p = 3; p <= 10000; p += 2) {
    if (!small_prime(p)) continue;
    const auto sq = square_table(p);
    // every residue for small p, a stride sample for large p
    const long stride = p < 500 ? 1 : p / 97;
    for (long z = 1; z < p; z += stride) {
      ASSERT_EQ(legendre(z, p), sq.count(z) ? 1 : -1) << "z=" << z << " p=" << p;
    }
  }
}

TEST(Legendre, RejectsMultiplesOfP) { EXPECT_THROW(legendre(14, 7), DomainError); }

TEST(MinResidue, Examples) {
  EXPECT_EQ(min_residue(3, 10), 3);
  EXPECT_EQ(min_residue(7, 10), -3);
  EXPECT_EQ(min_residue(5, 10), -5);
  EXPECT_EQ(min_residue(-1, 10), -1);
}

TEST(MinResidue, CongruentAndBounded) {
  auto rng = RandomSource::seeded(11);
  for (int k = 0; k < 100000; ++k) {
    const BigInt m = rng.uniform_range(1, 1'000'000);
    const BigInt a = rng.uniform_range(-5'000'000, 5'000'000);
    const BigInt r = min_residue(a, m);
    ASSERT_EQ(mod_floor(a - r, m), 0);
    ASSERT_LE(2 * abs(r), m);
  }
}

TEST(RoundPos, Examples) {
  EXPECT_EQ(round_pos(0.2), 1);
  EXPECT_EQ(round_pos(2.5), 3);
  EXPECT_EQ(round_pos(0.5), 1);
  EXPECT_EQ(round_pos(0.0), 1);
  EXPECT_EQ(round_pos(1e15), BigInt("1000000000000000"));
}

TEST(RoundPos, MonotoneAndPositive) {
  BigInt prev = 1;
  for (double s = 0.0; s < 200.0; s += 0.037) {
    const BigInt v = round_pos(s);
    ASSERT_GE(v, 1);
    ASSERT_GE(v, prev);
    prev = v;
  }
}

TEST(ModularPrimitives, Examples) {
  EXPECT_EQ(mod_pow(2, 11, 23), 1);
  EXPECT_EQ(mod_inv(3, 7), 5);
  EXPECT_EQ(mod_mul(40, 1, 7), 5);
  EXPECT_THROW(mod_inv(4, 8), DomainError);
}

TEST(SafePrime, FiveBitSearchFinds23) {
  auto rng = RandomSource::seeded(1);
  const auto gp = detail::search_safe_prime(5, rng, 10000);
  EXPECT_EQ(gp.p, 23);
  EXPECT_EQ(gp.q, 11);
}

TEST(SafePrime, FourBitSearchFinds11) {
  auto rng = RandomSource::seeded(2);
  const auto gp = detail::search_safe_prime(4, rng, 10000);
  EXPECT_EQ(gp.p, 11);
  EXPECT_EQ(gp.q, 5);
}

TEST(SafePrime, StructureAtSeveralLengths) {
  auto rng = RandomSource::seeded(3);
  for (unsigned bits : {16u, 32u, 64u, 120u, 200u}) {
    const auto gp = gen_safe_prime(bits, rng);
    EXPECT_EQ(bit_length(gp.p), bits);
    EXPECT_EQ(gp.p, 2 * gp.q + 1);
    EXPECT_EQ(mod_floor(gp.p, 4), 3);
    EXPECT_NE(mpz_probab_prime_p(gp.p.get_mpz_t(), 50), 0);
    EXPECT_NE(mpz_probab_prime_p(gp.q.get_mpz_t(), 50), 0);
  }
}

TEST(SafePrime, RejectsShortLengths) {
  auto rng = RandomSource::seeded(4);
  EXPECT_THROW(gen_safe_prime(8, rng), std::invalid_argument);
}

TEST(SafePrime, FromSafePrimeValidates) {
  EXPECT_NO_THROW(GroupParams::from_safe_prime(23));
  EXPECT_THROW(GroupParams::from_safe_prime(29), std::exception);
  EXPECT_THROW(GroupParams::from_safe_prime(21), std::exception);
}

TEST(GroupElement, ToyGroupElementsAreNontrivialResidues) {
  const auto gp = GroupParams::from_safe_prime(23);
  auto rng = RandomSource::seeded(5);
  std::set<long> seen;
  for (int k = 0; k < 2000; ++k) {
    const BigInt g = sample_group_element(gp, rng);
    ASSERT_EQ(mod_pow(g, gp.q, gp.p), 1);
    seen.insert(g.get_si());
  }
  EXPECT_EQ(std::vector<long>(seen.begin(), seen.end()),
            std::vector<long>(frozen::kQrMod23.begin(), frozen::kQrMod23.end()));
}

TEST(RandomSource, SeededStreamsReproduce) {
  auto a = RandomSource::seeded(9);
  auto b = RandomSource::seeded(9);
  auto c = RandomSource::seeded(10);
  const auto gp = GroupParams::from_safe_prime(23);
  EXPECT_EQ(a.uniform_bits(100), b.uniform_bits(100));
  EXPECT_EQ(sample_group_element(gp, a), sample_group_element(gp, b));
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(RandomSource::seeded(9).next_u64(), c.next_u64());
  auto fa = a.fork();
  auto fb = b.fork();
  EXPECT_EQ(fa.next_u64(), fb.next_u64());
}

TEST(RandomSource, CryptographicIsNotDeterministic) {
  auto a = RandomSource::cryptographic();
  auto b = RandomSource::cryptographic();
  EXPECT_FALSE(a.deterministic());
  EXPECT_NE(a.uniform_bits(128), b.uniform_bits(128));
}

TEST(RandomSource, UniformBelowStaysInRange) {
  auto rng = RandomSource::seeded(12);
  std::vector<int> hits(7, 0);
  for (int k = 0; k < 7000; ++k) {
    const BigInt v = rng.uniform_below(7);
    ASSERT_GE(v, 0);
    ASSERT_LT(v, 7);
    ++hits[v.get_si()];
  }
  for (int h : hits) EXPECT_GT(h, 800);
}
