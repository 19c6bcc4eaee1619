#include <cmath>
#include <random>
#include <variant>

#include <gtest/gtest.h>

#include "khectl/codec.hpp"
#include "khectl/control.hpp"
#include "khectl/encctrl.hpp"
#include "khectl/errors.hpp"

using namespace khectl;
using namespace khectl::encctrl;

namespace {

struct Fixture {
  RandomSource rng = RandomSource::seeded(51);
  khe::KeyTriple keys = khe::gen(120, rng);
  Matrix phi = control::assemble_dob_pid(control::reference_plant(), control::reference_gains()).phi;
  QuantizationGains gains;
};

Fixture& fx() {
  static Fixture f;
  return f;
}

Vector sample_xi() { return {1e-3, 2e-3, 0.01, -0.02, 0.15, 0.05, 0.03}; }

}  // namespace

TEST(EncryptParameters, GridShapeAndDecodedValues) {
  auto& f = fx();
  const auto p = encrypt_parameters(f.keys.pk, f.phi, f.gains, f.rng, 10);
  EXPECT_EQ(p.cells.size(), 84u);
  const auto& gp = f.keys.pk.group;
  for (std::size_t i = 1; i <= 6; ++i) {
    for (std::size_t j = 1; j <= 7; ++j) {
      codec::EncodedPair e{*khe::dec(f.keys.skd, p.at(i, j, 1)), *khe::dec(f.keys.skd, p.at(i, j, 2))};
      const double x = f.phi(i - 1, j - 1);
      // entries below half a step decode to the 1/gamma floor
      const double step = f.gains.phi * std::fabs(x) >= 0.5 ? 0.5 : 1.0;
      EXPECT_NEAR(codec::decode(gp, f.gains.phi, e), x, step / f.gains.phi + 4e-16 * std::fabs(x));
    }
  }
  const auto mag16 = codec::strip(gp, {*khe::dec(f.keys.skd, p.at(1, 6, 1)), *khe::dec(f.keys.skd, p.at(1, 6, 2))});
  EXPECT_EQ(mag16.magnitude, BigInt("1000000000000000"));
}

TEST(EncryptParameters, OverflowIsAConfigurationFault) {
  auto rng = RandomSource::seeded(52);
  const auto small = khe::gen(64, rng);
  EXPECT_THROW(encrypt_parameters(small.pk, fx().phi, fx().gains, rng, 10), OverflowError);
}

TEST(EncryptState, MagnitudesAndFreshness) {
  auto& f = fx();
  Vector xi(7, 0.0);
  xi[6] = 0.05;
  const auto s1 = encrypt_state(f.keys.pk, xi, f.gains, f.rng);
  const auto s2 = encrypt_state(f.keys.pk, xi, f.gains, f.rng);
  const auto& gp = f.keys.pk.group;
  const auto mag = [&](const EncryptedState& s, std::size_t j) {
    return codec::strip(gp, {*khe::dec(f.keys.skd, s.at(j, 1)), *khe::dec(f.keys.skd, s.at(j, 2))}).magnitude;
  };
  EXPECT_EQ(mag(s1, 7), BigInt("500000000000000"));
  for (std::size_t j = 1; j <= 6; ++j) EXPECT_EQ(mag(s1, j), 1);
  for (std::size_t k = 0; k < s1.cells.size(); ++k) EXPECT_NE(s1.cells[k], s2.cells[k]);
}

TEST(EncryptState, GuardRejectsOversizedSignals) {
  auto& f = fx();
  const auto guard = make_overflow_guard(f.keys.pk.group, f.phi, f.gains);
  Vector xi = sample_xi();
  EXPECT_NO_THROW(guard.check(f.keys.pk.group, f.gains.xi, xi));
  xi[2] = 1e6;
  EXPECT_THROW(encrypt_state(f.keys.pk, xi, f.gains, f.rng, &guard), OverflowError);
}

TEST(EvalGrid, HonestStepMatchesOracleAndPlainProduct) {
  auto& f = fx();
  const auto p = encrypt_parameters(f.keys.pk, f.phi, f.gains, f.rng, 10);
  const auto xi = sample_xi();
  const auto s = encrypt_state(f.keys.pk, xi, f.gains, f.rng);
  const auto out = eval_grid(f.keys.pk, f.keys.skh, p, s, f.rng);
  EXPECT_TRUE(out.detected.empty());
  const auto r = dec_plus(f.keys.skd, out, f.gains);
  ASSERT_TRUE(std::holds_alternative<DecodedStep>(r));
  const auto psi = std::get<DecodedStep>(r).psi;
  EXPECT_EQ(psi, quantized_oracle(f.keys.pk.group, f.phi, xi, f.gains));
  const auto plain = control::controller_step(f.phi, xi);
  for (std::size_t i = 0; i < 6; ++i) {
    double bound = 0;
    for (std::size_t j = 0; j < 7; ++j) {
      bound += std::fabs(f.phi(i, j)) / f.gains.xi + std::fabs(xi[j]) / f.gains.phi +
               1 / (f.gains.phi * f.gains.xi);
    }
    EXPECT_LE(std::fabs(psi[i] - plain[i]), bound + 1e-13);
  }
}

TEST(EvalGrid, RowOneSanity) {
  auto& f = fx();
  Vector xi(7, 0.0);
  xi[5] = 0.05;
  xi[6] = 0.03;
  const auto p = encrypt_parameters(f.keys.pk, f.phi, f.gains, f.rng, 10);
  const auto out = eval_grid(f.keys.pk, f.keys.skh, p, encrypt_state(f.keys.pk, xi, f.gains, f.rng), f.rng);
  const auto psi = std::get<DecodedStep>(dec_plus(f.keys.skd, out, f.gains)).psi;
  EXPECT_NEAR(psi[0], 0.02, 1e-10);
  const auto zero = eval_grid(f.keys.pk, f.keys.skh, p, encrypt_state(f.keys.pk, Vector(7, 0.0), f.gains, f.rng), f.rng);
  const auto floor_psi = std::get<DecodedStep>(dec_plus(f.keys.skd, zero, f.gains)).psi;
  for (double v : floor_psi) EXPECT_LT(std::fabs(v), 1e-12);
}

TEST(EvalGrid, ParameterTamperIsLocalised) {
  auto& f = fx();
  auto p = encrypt_parameters(f.keys.pk, f.phi, f.gains, f.rng, 10);
  p.at(6, 1, 2) = khe::tamper(f.keys.pk.group, p.at(6, 1, 2), 12);
  const auto s = encrypt_state(f.keys.pk, sample_xi(), f.gains, f.rng);
  const auto out = eval_grid(f.keys.pk, f.keys.skh, p, s, f.rng, {1, true});
  ASSERT_EQ(out.detected, (std::vector<CellIndex>{{6, 1, 2}}));
  const auto r = dec_plus(f.keys.skd, out, f.gains);
  ASSERT_TRUE(std::holds_alternative<DetectionReport>(r));
  EXPECT_EQ(std::get<DetectionReport>(r).cells, out.detected);
  // the unchecked path sees Phi(6,1) scaled by 12
  auto attacked = f.phi;
  attacked(5, 0) *= 12;
  const auto psi = dec_plus_unchecked(f.keys.skd, out, f.gains).psi;
  EXPECT_EQ(psi, quantized_oracle(f.keys.pk.group, attacked, sample_xi(), f.gains));
}

TEST(EvalGrid, SignalTamperPoisonsItsColumn) {
  auto& f = fx();
  const auto p = encrypt_parameters(f.keys.pk, f.phi, f.gains, f.rng, 10);
  auto s = encrypt_state(f.keys.pk, sample_xi(), f.gains, f.rng);
  s.at(7, 2) = khe::tamper(f.keys.pk.group, s.at(7, 2), 3);
  const auto out = eval_grid(f.keys.pk, f.keys.skh, p, s, f.rng);
  std::vector<CellIndex> want;
  for (std::size_t i = 1; i <= 6; ++i) want.push_back({i, 7, 2});
  EXPECT_EQ(out.detected, want);
}

TEST(EvalGrid, ThreadedMatchesSequential) {
  auto& f = fx();
  const auto p = encrypt_parameters(f.keys.pk, f.phi, f.gains, f.rng, 10);
  const auto s = encrypt_state(f.keys.pk, sample_xi(), f.gains, f.rng);
  auto a = RandomSource::seeded(7);
  auto b = RandomSource::seeded(7);
  const auto one = eval_grid(f.keys.pk, f.keys.skh, p, s, a, {1, false});
  const auto four = eval_grid(f.keys.pk, f.keys.skh, p, s, b, {4, false});
  EXPECT_EQ(one.cells, four.cells);
}

TEST(EvalGrid, RandomTamperCompleteness) {
  auto& f = fx();
  const auto p = encrypt_parameters(f.keys.pk, f.phi, f.gains, f.rng, 10);
  const auto s = encrypt_state(f.keys.pk, sample_xi(), f.gains, f.rng);
  std::mt19937_64 gen(53);
  for (int k = 0; k < 40; ++k) {
    auto pt = p;
    const std::size_t i = 1 + gen() % 6, j = 1 + gen() % 7;
    const int theta = 1 + static_cast<int>(gen() % 2);
    pt.at(i, j, theta) = khe::tamper(f.keys.pk.group, pt.at(i, j, theta), 2 + gen() % 1000);
    const auto out = eval_grid(f.keys.pk, f.keys.skh, pt, s, f.rng);
    ASSERT_EQ(out.detected, (std::vector<CellIndex>{{i, j, theta}}));
  }
}

TEST(EvalGrid, UncheckedMissingIsALogicError) {
  auto& f = fx();
  auto p = encrypt_parameters(f.keys.pk, f.phi, f.gains, f.rng, 10);
  p.at(5, 5, 2) = khe::tamper(f.keys.pk.group, p.at(5, 5, 2), 2);
  const auto out = eval_grid(f.keys.pk, f.keys.skh, p, encrypt_state(f.keys.pk, sample_xi(), f.gains, f.rng), f.rng);
  EXPECT_THROW(dec_plus_unchecked(f.keys.skd, out, f.gains), std::logic_error);
}

TEST(QuantizedOracle, ConvergesToPlainProduct) {
  auto& f = fx();
  const auto xi = sample_xi();
  const auto plain = control::controller_step(f.phi, xi);
  double prev = 1e9;
  for (double g : {1e2, 1e4, 1e6, 1e8}) {
    const auto q = quantized_oracle(f.keys.pk.group, f.phi, xi, {g, g});
    double err = 0;
    for (std::size_t i = 0; i < 6; ++i) err = std::max(err, std::fabs(q[i] - plain[i]));
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-5);
}
