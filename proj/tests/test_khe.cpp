#include <gtest/gtest.h>

#include "khectl/errors.hpp"
#include "khectl/khe.hpp"

using namespace khectl;

namespace {

bool ciphertext_in_group(const GroupParams& gp, const khe::Ciphertext& c) {
  return in_group(gp, c.x0) && in_group(gp, c.x1) && in_group(gp, c.epsilon) &&
         in_group(gp, c.pi_hat);
}

BigInt random_lambda(const GroupParams& gp, RandomSource& rng) {
  for (;;) {
    const BigInt l = rng.uniform_range(2, gp.p - 1);
    if (l != 1) return l;
  }
}

}  // namespace

TEST(KheGen, KeyRelationsHold) {
  auto rng = RandomSource::seeded(21);
  const auto keys = khe::gen(64, rng);
  const auto& gp = keys.pk.group;
  EXPECT_EQ(gp.bits, 64u);
  EXPECT_EQ(keys.pk.s,
            mod_mul(mod_pow(keys.pk.g0, keys.skd.k0, gp.p), mod_pow(keys.pk.g1, keys.skd.k1, gp.p), gp.p));
  EXPECT_TRUE(khe::keys_consistent(keys.pk, keys.skd));
  EXPECT_TRUE(khe::keys_consistent(keys.pk, keys.skh));
  EXPECT_EQ(keys.skd.tilde, keys.skh);
}

TEST(KheGen, DifferentSeedsGiveDifferentKeys) {
  auto a = RandomSource::seeded(1);
  auto b = RandomSource::seeded(2);
  EXPECT_NE(khe::gen(32, a).pk, khe::gen(32, b).pk);
}

TEST(KheGen, MismatchedKeysAreInconsistent) {
  auto rng = RandomSource::seeded(22);
  const auto a = khe::gen_in_group(GroupParams::from_safe_prime(1019), rng);
  auto b = khe::gen_in_group(a.pk.group, rng);
  EXPECT_FALSE(khe::keys_consistent(a.pk, b.skd));
  EXPECT_FALSE(khe::keys_consistent(a.pk, b.skh));
}

TEST(KheToy, RoundtripAndProductIn23) {
  const auto gp = GroupParams::from_safe_prime(23);
  auto rng = RandomSource::seeded(23);
  const auto keys = khe::gen_in_group(gp, rng);
  EXPECT_EQ(khe::dec(keys.skd, khe::enc(keys.pk, 4, rng)), BigInt(4));
  EXPECT_EQ(khe::dec(keys.skd, khe::enc(keys.pk, 1, rng)), BigInt(1));
  const auto prod = khe::eval(keys.pk, keys.skh, khe::enc(keys.pk, 2, rng), khe::enc(keys.pk, 4, rng), rng);
  ASSERT_TRUE(prod);
  EXPECT_EQ(khe::dec(keys.skd, *prod), BigInt(8));
}

TEST(KheToy, NonResiduePlaintextRejected) {
  const auto gp = GroupParams::from_safe_prime(23);
  auto rng = RandomSource::seeded(24);
  const auto keys = khe::gen_in_group(gp, rng);
  EXPECT_THROW(khe::enc(keys.pk, 5, rng), DomainError);
  EXPECT_THROW(khe::enc(keys.pk, 0, rng), DomainError);
  EXPECT_THROW(khe::enc(keys.pk, 23, rng), DomainError);
}

class KheAtLength : public ::testing::TestWithParam<unsigned> {};

TEST_P(KheAtLength, CorrectnessHomomorphismClosure) {
  auto rng = RandomSource::seeded(100 + GetParam());
  const auto keys = khe::gen(GetParam(), rng);
  const auto& gp = keys.pk.group;
  for (int k = 0; k < 200; ++k) {
    const BigInt m1 = sample_group_element(gp, rng);
    const BigInt m2 = sample_group_element(gp, rng);
    const auto c1 = khe::enc(keys.pk, m1, rng);
    const auto c2 = khe::enc(keys.pk, m2, rng);
    ASSERT_TRUE(ciphertext_in_group(gp, c1));
    ASSERT_EQ(khe::dec(keys.skd, c1), m1);
    const auto e = khe::eval(keys.pk, keys.skh, c1, c2, rng);
    ASSERT_TRUE(e);
    ASSERT_TRUE(ciphertext_in_group(gp, *e));
    ASSERT_EQ(khe::dec(keys.skd, *e), mod_mul(m1, m2, gp.p));
    ASSERT_NE(*e, c1);
    ASSERT_NE(*e, c2);
  }
}

TEST_P(KheAtLength, EvalAssociatesAtPlaintextLevel) {
  auto rng = RandomSource::seeded(200 + GetParam());
  const auto keys = khe::gen(GetParam(), rng);
  const auto& gp = keys.pk.group;
  for (int k = 0; k < 50; ++k) {
    const BigInt a = sample_group_element(gp, rng), b = sample_group_element(gp, rng),
                 c = sample_group_element(gp, rng);
    const auto ab = khe::eval(keys.pk, keys.skh, khe::enc(keys.pk, a, rng), khe::enc(keys.pk, b, rng), rng);
    ASSERT_TRUE(ab);
    const auto abc = khe::eval(keys.pk, keys.skh, *ab, khe::enc(keys.pk, c, rng), rng);
    ASSERT_TRUE(abc);
    ASSERT_EQ(khe::dec(keys.skd, *abc), mod_mul(mod_mul(a, b, gp.p), c, gp.p));
  }
}

TEST_P(KheAtLength, TamperIsDetectedByDecAndEval) {
  auto rng = RandomSource::seeded(300 + GetParam());
  const auto keys = khe::gen(GetParam(), rng);
  const auto& gp = keys.pk.group;
  for (int k = 0; k < 200; ++k) {
    const BigInt m = sample_group_element(gp, rng);
    const auto c = khe::enc(keys.pk, m, rng);
    const BigInt lambda = random_lambda(gp, rng);
    const auto t = khe::tamper(gp, c, lambda);
    ASSERT_FALSE(khe::dec(keys.skd, t));
    ASSERT_FALSE(khe::eval(keys.pk, keys.skh, t, c, rng));
    ASSERT_FALSE(khe::eval(keys.pk, keys.skh, c, t, rng));
    ASSERT_EQ(khe::unchecked_dec(keys.skd, t), mod_mul(lambda, m, gp.p));
  }
}

INSTANTIATE_TEST_SUITE_P(Lengths, KheAtLength, ::testing::Values(32u, 64u, 120u));

TEST(KheTamper, IdentityScaleDecryptsUnchanged) {
  auto rng = RandomSource::seeded(31);
  const auto keys = khe::gen(64, rng);
  const BigInt m = sample_group_element(keys.pk.group, rng);
  const auto c = khe::enc(keys.pk, m, rng);
  EXPECT_EQ(khe::tamper(keys.pk.group, c, 1), c);
  EXPECT_EQ(khe::dec(keys.skd, khe::tamper(keys.pk.group, c, 1)), m);
}

TEST(KheTamper, SpecificFalsifications) {
  auto rng = RandomSource::seeded(32);
  const auto keys = khe::gen(120, rng);
  const auto& gp = keys.pk.group;
  const BigInt m = sample_group_element(gp, rng);
  const auto c = khe::enc(keys.pk, m, rng);
  EXPECT_FALSE(khe::dec(keys.skd, khe::tamper(gp, c, 2)));
  EXPECT_FALSE(khe::dec(keys.skd, khe::tamper(gp, c, 12)));
  auto zeroed = c;
  zeroed.eta.fill(0);
  EXPECT_FALSE(khe::dec(keys.skd, zeroed));
  EXPECT_FALSE(khe::eval(keys.pk, keys.skh, zeroed, c, rng));
  auto bumped = c;
  bumped.x0 = mod_mul(bumped.x0, 4, gp.p);
  EXPECT_FALSE(khe::dec(keys.skd, bumped));
}

TEST(KheTamper, WrongHomomorphicKeyIsRejected) {
  auto rng = RandomSource::seeded(33);
  const auto keys = khe::gen(64, rng);
  const auto other = khe::gen_in_group(keys.pk.group, rng);
  const auto c = khe::enc(keys.pk, sample_group_element(keys.pk.group, rng), rng);
  EXPECT_FALSE(khe::eval(keys.pk, other.skh, c, c, rng));
}

TEST(KheUnchecked, EvalProductDecryptsWithoutChecks) {
  auto rng = RandomSource::seeded(34);
  const auto keys = khe::gen(64, rng);
  const auto& gp = keys.pk.group;
  const BigInt a = sample_group_element(gp, rng), b = sample_group_element(gp, rng);
  const auto ca = khe::enc(keys.pk, a, rng);
  EXPECT_EQ(khe::unchecked_dec(keys.skd, ca), a);
  const auto tb = khe::tamper(gp, khe::enc(keys.pk, b, rng), 12);
  const auto u = khe::unchecked_eval(keys.pk, ca, tb, rng);
  EXPECT_EQ(khe::unchecked_dec(keys.skd, u), mod_mul(mod_mul(a, b, gp.p), 12, gp.p));
  EXPECT_FALSE(khe::dec(keys.skd, u));
}

TEST(KheConcealment, RepeatedEncryptionsDiffer) {
  auto rng = RandomSource::seeded(35);
  const auto keys = khe::gen(120, rng);
  const auto a = khe::enc(keys.pk, 4, rng);
  const auto b = khe::enc(keys.pk, 4, rng);
  EXPECT_NE(a, b);
  EXPECT_NE(a.epsilon, b.epsilon);
}

TEST(KheHash, FixedWidthEncoding) {
  const auto bytes = khe::fixed_width_bytes(BigInt(0x0102), 4);
  EXPECT_EQ(bytes, (std::vector<std::uint8_t>{0, 0, 1, 2}));
  const auto gp = GroupParams::from_safe_prime(23);
  EXPECT_LT(khe::hash_delta(gp, 2, 3, 4, 6), gp.q);
  EXPECT_EQ(khe::hash_eta(gp, 4), khe::hash_eta(gp, 4));
  EXPECT_NE(khe::hash_eta(gp, 4), khe::hash_eta(gp, 6));
}
