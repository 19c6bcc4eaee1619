"""Independent reference values for the C++ test suite.

Run with python3; prints the numbers frozen into tests/frozen.hpp.
Uses only sympy/numpy/scipy and exact integer arithmetic.
"""
from fractions import Fraction
import math

import numpy as np
import sympy
from scipy.linalg import expm


def squares(p):
    return sorted({(b * b) % p for b in range(1, p)})


def legendre_brute(z, p):
    return 1 if z % p in squares(p) else -1


def safe_primes(bits):
    lo, hi = 1 << (bits - 1), (1 << bits) - 1
    return [p for p in range(lo, hi + 1) if sympy.isprime(p) and sympy.isprime((p - 1) // 2)]


def round_pos(s):
    return math.floor(s + 0.5) if s >= 0.5 else 1


def min_residue(a, m):
    b = a % m
    return b if b < m / 2 else b - m


def encode(p, gamma, x):
    zeta = 1 if x >= 0 else 2
    z = round_pos(gamma * abs(x))
    adj = lambda v: v % p if legendre_brute(v, p) == 1 else (-v) % p
    return adj(zeta), adj(z)


def decode(p, gamma, pair):
    zeta = abs(min_residue(pair[0], p))
    z = abs(min_residue(pair[1], p))
    return legendre_brute(zeta, 3) * z / gamma


def paper_plant():
    A = np.array([[1, 0.0085], [0, 0.7118]])
    B = np.array([[0.0013], [0.2398]])
    C = np.array([[1.0, 0.0]])
    return A, B, C


def paper_phi():
    Ts, Kp, Ki, Kd = 0.01, 12, 0.25, 0.03
    Lx = np.array([[2.7118], [199.28]])
    Ld = -380.4456
    A, B, C = paper_plant()
    # PID on x = [e(t-1), w(t-1)], v = [r, y]
    Ac = np.array([[0, 0], [0, 1.0]])
    Bc = np.array([[1, -1], [Ts, -Ts]])
    Cc = np.array([[-Kd / Ts, Ki]])
    Dc = np.array([[Kp + Ki * Ts + Kd / Ts, -(Kp + Ki * Ts + Kd / Ts)]])
    # observer on [xhat; dhat] with u = uc + dhat applied, plant sees u - d
    L = np.vstack([Lx, [[Ld]]])
    Atil = np.block([[A, np.zeros((2, 1))], [np.zeros((1, 2)), np.ones((1, 1))]])
    Ctil = np.hstack([C, [[0.0]]])
    Bu = np.vstack([B, [[0.0]]])
    # xhat+ = Atil xh + Bu (uc + dhat) - Bu dhat + L (y - Ctil xh)  ->  Bu uc + L(y - C xh)
    Ad = Atil - L @ Ctil
    Bd_x = Bu @ Cc
    Bd_v = Bu @ Dc + L @ np.array([[0, 1.0]])
    top = np.hstack([Ac, np.zeros((2, 3)), Bc])
    mid = np.hstack([Bd_x, Ad, Bd_v])
    u_row = np.hstack([Cc, np.zeros((1, 2)), [[1.0]], Dc])
    return np.vstack([top, mid, u_row])


def ref(t, Ts=0.01):
    # whole-step boundaries: 200, 400, 600, 800
    if t < 200:
        return 0.0
    if t < 400:
        return 0.05
    if t < 600:
        return 0.10
    if t < 800:
        return 0.05
    return 0.0


def simulate(phi, steps=1000, d=0.2, attacked=None, bound=None):
    A, B, C = paper_plant()
    n = phi.shape[0] - 1
    xp = np.zeros((2, 1))
    x = np.zeros((n, 1))
    es, dh = [], []
    for t in range(steps):
        r = ref(t)
        y = float((C @ xp)[0, 0])
        if bound is not None and abs(y) > bound:
            return t, dh
        xi = np.vstack([x, [[r], [y]]])
        psi = (attacked if attacked is not None and 500 <= t < 1000 else phi) @ xi
        u = float(psi[-1, 0])
        x = psi[:-1]
        if n == 5:
            dh.append(float(x[4, 0]))
        es.append(abs(r - y))
        xp = A @ xp + B * (u - d)
    return float(np.mean(es[200:1000])), dh


def pid_phi():
    Ts, Kp, Ki, Kd = 0.01, 12, 0.25, 0.03
    g = Kp + Ki * Ts + Kd / Ts
    return np.array([[0, 0, 1, -1], [0, 1, Ts, -Ts], [-Kd / Ts, Ki, g, -g]])


def main():
    print("safe primes 5 bits:", safe_primes(5), " 4 bits:", safe_primes(4))
    print("QR mod 23 minus 1:", [v for v in squares(23) if v != 1])
    print("legendre(2,7), (3,7):", legendre_brute(2, 7), legendre_brute(3, 7))
    print("pow(2,11,23):", pow(2, 11, 23), " inv(3,7):", pow(3, -1, 7))
    print("encode(23,10,-0.42):", encode(23, 10, -0.42), " decode:", decode(23, 10, encode(23, 10, -0.42)))
    print("encode(23,10,0.52):", encode(23, 10, 0.52))

    Ac = np.array([[0, 28.288], [0, -34.0]])
    M = expm(np.block([[np.array([[0, 1.0], [0, -34.0]]), np.array([[0], [28.288]])],
                       [np.zeros((1, 3))]]) * 0.01)
    print("ZOH A:", M[:2, :2].tolist(), " B:", M[:2, 2].tolist())

    phi = paper_phi()
    np.set_printoptions(precision=17, linewidth=200)
    print("Phi:\n", repr(phi))
    xi = np.zeros(7); xi[5] = 0.05
    print("psi6 for r=0.05:", (phi @ xi)[5])
    comp = np.array([[1.0, 1.0], [1.0, 0.0]])
    print("companion |eig|:", sorted(abs(np.linalg.eigvals(comp)), reverse=True))

    rho_dob, dh = simulate(phi)
    rho_pid, _ = simulate(pid_phi())
    settle = next(t for t in range(len(dh)) if all(abs(v - 0.2) <= 0.004 for v in dh[t:]))
    print("rho dob %.17g  rho pid %.17g  dhat settles at step %d" % (rho_dob, rho_pid, settle))

    case1 = phi.copy(); case1[5, 0] *= 12
    case2 = phi.copy(); case2[4, 4] *= 2
    print("case1 ignore-detection rho %.17g" % simulate(phi, attacked=case1)[0])
    print("case2 ignore-detection first |y| > 10 at step", simulate(phi, attacked=case2, bound=10.0)[0])

    # quantized row-1 sum, r = 0.05, y = 0.03, x = 0
    gp, gx = 10**15, 10**16
    row = [Fraction(0)] * 5 + [Fraction(1), Fraction(-1)]
    xs = [0.0] * 5 + [0.05, 0.03]
    total = Fraction(0)
    for a, b in zip(phi[0], xs):
        za, zb = round_pos(gp * abs(a)), round_pos(gx * abs(b))
        s = (1 if a >= 0 else -1) * (1 if b >= 0 else -1)
        total += Fraction(s * za * zb, gp * gx)
    print("quantized psi1(r=0.05,y=0.03) exact:", float(total))


if __name__ == "__main__":
    main()
