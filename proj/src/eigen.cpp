// Eigenvalues of small dense real matrices: diagonal balancing, reduction to
// upper Hessenberg form by stabilized elimination, then Francis double-shift
// QR iteration with deflation. Internally 1-based to keep the index algebra
// of the double-shift sweep readable.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "khectl/control.hpp"

namespace khectl::control {

namespace {

class Work {
 public:
  explicit Work(const Matrix& m) : n_(m.rows()), a_((n_ + 1) * (n_ + 1), 0.0) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) (*this)(i + 1, j + 1) = m(i, j);
  }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * (n_ + 1) + j]; }
  std::size_t n() const { return n_; }

 private:
  std::size_t n_;
  std::vector<double> a_;
};

void balance(Work& a) {
  constexpr double kRadix = 2.0;
  constexpr double kRadixSq = kRadix * kRadix;
  const std::size_t n = a.n();
  bool done = false;
  while (!done) {
    done = true;
    for (std::size_t i = 1; i <= n; ++i) {
      double r = 0.0, c = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (j == i) continue;
        c += std::fabs(a(j, i));
        r += std::fabs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / kRadix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= kRadix;
        c *= kRadixSq;
      }
      g = r * kRadix;
      while (c > g) {
        f /= kRadix;
        c /= kRadixSq;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        g = 1.0 / f;
        for (std::size_t j = 1; j <= n; ++j) a(i, j) *= g;
        for (std::size_t j = 1; j <= n; ++j) a(j, i) *= f;
      }
    }
  }
}

void to_hessenberg(Work& a) {
  const std::size_t n = a.n();
  for (std::size_t m = 2; m < n; ++m) {
    double x = 0.0;
    std::size_t piv = m;
    for (std::size_t j = m; j <= n; ++j) {
      if (std::fabs(a(j, m - 1)) > std::fabs(x)) {
        x = a(j, m - 1);
        piv = j;
      }
    }
    if (piv != m) {
      for (std::size_t j = m - 1; j <= n; ++j) std::swap(a(piv, j), a(m, j));
      for (std::size_t j = 1; j <= n; ++j) std::swap(a(j, piv), a(j, m));
    }
    if (x == 0.0) continue;
    for (std::size_t i = m + 1; i <= n; ++i) {
      double y = a(i, m - 1);
      if (y == 0.0) continue;
      y /= x;
      a(i, m - 1) = 0.0;
      for (std::size_t j = m; j <= n; ++j) a(i, j) -= y * a(m, j);
      for (std::size_t j = 1; j <= n; ++j) a(j, m) += y * a(j, i);
    }
  }
}

double sign_of(double magnitude, double s) { return s >= 0.0 ? std::fabs(magnitude) : -std::fabs(magnitude); }

std::vector<Eigenvalue> hessenberg_qr(Work& a) {
  constexpr int kMaxIterations = 60;
  const std::size_t n = a.n();
  std::vector<Eigenvalue> ev(n + 1);

  double anorm = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = std::max<std::size_t>(i - 1, 1); j <= n; ++j) anorm += std::fabs(a(i, j));

  std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(n);
  double shift = 0.0;
  auto A = [&a](std::ptrdiff_t i, std::ptrdiff_t j) -> double& {
    return a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  };

  while (nn >= 1) {
    int its = 0;
    std::ptrdiff_t l = 0;
    do {
      // look for a single small subdiagonal element
      for (l = nn; l >= 2; --l) {
        double s = std::fabs(A(l - 1, l - 1)) + std::fabs(A(l, l));
        if (s == 0.0) s = anorm;
        if (std::fabs(A(l, l - 1)) + s == s) {
          A(l, l - 1) = 0.0;
          break;
        }
      }
      if (l < 1) l = 1;
      double x = A(nn, nn);
      if (l == nn) {
        ev[static_cast<std::size_t>(nn)] = {x + shift, 0.0};
        --nn;
        continue;
      }
      double y = A(nn - 1, nn - 1);
      double w = A(nn, nn - 1) * A(nn - 1, nn);
      if (l == nn - 1) {
        const double p = 0.5 * (y - x);
        const double q = p * p + w;
        double z = std::sqrt(std::fabs(q));
        x += shift;
        auto& e1 = ev[static_cast<std::size_t>(nn - 1)];
        auto& e2 = ev[static_cast<std::size_t>(nn)];
        if (q >= 0.0) {
          z = p + sign_of(z, p);
          e1 = e2 = {x + z, 0.0};
          if (z != 0.0) e2.re = x - w / z;
        } else {
          e1 = {x + p, z};
          e2 = {x + p, -z};
        }
        nn -= 2;
        continue;
      }

      if (its == kMaxIterations) {
        throw std::runtime_error("eigenvalue QR iteration did not converge");
      }
      if (its == 10 || its == 20 || its == 40) {
        // exceptional shift
        shift += x;
        for (std::ptrdiff_t i = 1; i <= nn; ++i) A(i, i) -= x;
        const double s = std::fabs(A(nn, nn - 1)) + std::fabs(A(nn - 1, nn - 2));
        y = x = 0.75 * s;
        w = -0.4375 * s * s;
      }
      ++its;

      // find two consecutive small subdiagonal elements
      std::ptrdiff_t m = nn - 2;
      double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
      for (; m >= l; --m) {
        z = A(m, m);
        r = x - z;
        double s = y - z;
        p = (r * s - w) / A(m + 1, m) + A(m, m + 1);
        q = A(m + 1, m + 1) - z - r - s;
        r = A(m + 2, m + 1);
        s = std::fabs(p) + std::fabs(q) + std::fabs(r);
        p /= s;
        q /= s;
        r /= s;
        if (m == l) break;
        const double u = std::fabs(A(m, m - 1)) * (std::fabs(q) + std::fabs(r));
        const double v =
            std::fabs(p) * (std::fabs(A(m - 1, m - 1)) + std::fabs(z) + std::fabs(A(m + 1, m + 1)));
        if (u + v == v) break;
      }
      for (std::ptrdiff_t i = m + 2; i <= nn; ++i) {
        A(i, i - 2) = 0.0;
        if (i != m + 2) A(i, i - 3) = 0.0;
      }

      // double-shift QR sweep on rows/columns l..nn
      for (std::ptrdiff_t k = m; k <= nn - 1; ++k) {
        if (k != m) {
          p = A(k, k - 1);
          q = A(k + 1, k - 1);
          r = (k != nn - 1) ? A(k + 2, k - 1) : 0.0;
          x = std::fabs(p) + std::fabs(q) + std::fabs(r);
          if (x != 0.0) {
            p /= x;
            q /= x;
            r /= x;
          }
        }
        const double s = sign_of(std::sqrt(p * p + q * q + r * r), p);
        if (s == 0.0) continue;
        if (k == m) {
          if (l != m) A(k, k - 1) = -A(k, k - 1);
        } else {
          A(k, k - 1) = -s * x;
        }
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;
        for (std::ptrdiff_t j = k; j <= nn; ++j) {
          p = A(k, j) + q * A(k + 1, j);
          if (k != nn - 1) {
            p += r * A(k + 2, j);
            A(k + 2, j) -= p * z;
          }
          A(k + 1, j) -= p * y;
          A(k, j) -= p * x;
        }
        const std::ptrdiff_t mmin = std::min(nn, k + 3);
        for (std::ptrdiff_t i = l; i <= mmin; ++i) {
          p = x * A(i, k) + y * A(i, k + 1);
          if (k != nn - 1) {
            p += z * A(i, k + 2);
            A(i, k + 2) -= p * r;
          }
          A(i, k + 1) -= p * q;
          A(i, k) -= p;
        }
      }
    } while (l < nn - 1);
  }
  ev.erase(ev.begin());
  return ev;
}

}  // namespace

std::vector<Eigenvalue> eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("eigenvalues: matrix must be square");
  if (m.rows() == 0) return {};
  for (double v : m.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("eigenvalues: non-finite entry");
  }
  Work a(m);
  balance(a);
  to_hessenberg(a);
  return hessenberg_qr(a);
}

std::vector<double> eig_magnitudes(const Matrix& m) {
  std::vector<double> out;
  for (const auto& e : eigenvalues(m)) out.push_back(std::hypot(e.re, e.im));
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

}  // namespace khectl::control
