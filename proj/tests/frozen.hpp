#pragma once

// Reference values produced by tests/oracles/oracle.py (sympy/numpy/scipy,
// exact integer arithmetic) and frozen here.

#include <array>

namespace frozen {

inline constexpr std::array<int, 10> kQrMod23 = {2, 3, 4, 6, 8, 9, 12, 13, 16, 18};

// exact ZOH of 28.288 / (s (s + 34)) at 10 ms
inline constexpr double kZohA01 = 0.008477343448158538;
inline constexpr double kZohA11 = 0.7117703227626098;
inline constexpr double kZohB0 = 0.0012668502511320968;
inline constexpr double kZohB1 = 0.23980709146150872;

// DOB-PID Phi from the 4-decimal plant matrices
inline constexpr double kPhi[6][7] = {
    {0, 0, 0, 0, 0, 1, -1},
    {0, 1, 0, 0, 0, 0.01, -0.01},
    {-0.0039, 0.000325, -1.7118000000000002, 0.0085, 0, 0.01950325, 2.69229675},
    {-0.7194, 0.05995, -199.28, 0.7118, 0, 3.5975995000000003, 195.6824005},
    {0, 0, 380.4456, 0, 1, 0, -380.4456},
    {-3, 0.25, 0, 0, 1, 15.0025, -15.0025},
};

inline constexpr double kPsi6ForR005 = 0.750125;

// plaintext loop, d = 0.2 A, default reference schedule, 1000 steps
inline constexpr double kRhoDobPid = 0.0025848194575127039;
inline constexpr double kRhoPidOnly = 0.015905291639286646;
inline constexpr int kDhatSettleStep = 5;  // within 2 % from here on

inline constexpr double kRhoCase1Ignored = 0.0053928516207436047;
inline constexpr int kCase2DivergenceStep = 516;

}  // namespace frozen
