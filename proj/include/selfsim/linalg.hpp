#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>

namespace selfsim {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;
using cplx = std::complex<double>;
using CVec3 = std::array<cplx, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double norm_inf(const Vec3& a) {
  return std::max({std::abs(a[0]), std::abs(a[1]), std::abs(a[2])});
}

inline Vec3 matvec(const Mat3& A, const Vec3& x) {
  return {dot(A[0], x), dot(A[1], x), dot(A[2], x)};
}

inline double trace(const Mat3& A) { return A[0][0] + A[1][1] + A[2][2]; }

inline double det(const Mat3& A) {
  return A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
         A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
         A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
}

// Sum of principal 2x2 minors.
inline double minor_sum(const Mat3& A) {
  return A[0][0] * A[1][1] - A[0][1] * A[1][0] + A[0][0] * A[2][2] -
         A[0][2] * A[2][0] + A[1][1] * A[2][2] - A[1][2] * A[2][1];
}

namespace detail {

inline cplx cubic_eval(cplx x, double a, double b, double c) {
  return ((x + a) * x + b) * x + c;
}
inline cplx cubic_deriv(cplx x, double a, double b) {
  return (3.0 * x + 2.0 * a) * x + b;
}

}  // namespace detail

// Roots of x^3 + a x^2 + b x + c, Cardano then Newton polish.
inline std::array<cplx, 3> cubic_roots(double a, double b, double c) {
  const double pp = b - a * a / 3.0;
  const double qq = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const cplx disc = std::sqrt(cplx(qq * qq / 4.0 + pp * pp * pp / 27.0));
  cplx u3 = -qq / 2.0 + disc;
  cplx alt = -qq / 2.0 - disc;
  if (std::abs(alt) > std::abs(u3)) u3 = alt;
  const cplx w(-0.5, std::sqrt(3.0) / 2.0);
  std::array<cplx, 3> r;
  if (std::abs(u3) == 0.0) {
    r = {cplx(0), cplx(0), cplx(0)};
  } else {
    cplx u = std::pow(u3, 1.0 / 3.0);
    for (int k = 0; k < 3; ++k) {
      r[k] = u - pp / (3.0 * u);
      u *= w;
    }
  }
  for (auto& x : r) {
    x -= a / 3.0;
    for (int it = 0; it < 3; ++it) {
      cplx d = detail::cubic_deriv(x, a, b);
      if (std::abs(d) == 0.0) break;
      cplx nx = x - detail::cubic_eval(x, a, b, c) / d;
      if (std::abs(detail::cubic_eval(nx, a, b, c)) >=
          std::abs(detail::cubic_eval(x, a, b, c)))
        break;
      x = nx;
    }
  }
  // A real cubic has real roots or conjugate pairs; snap tiny imaginary parts.
  double scale = 1.0 + std::abs(a) + std::sqrt(std::abs(b)) + std::cbrt(std::abs(c));
  for (auto& x : r)
    if (std::abs(x.imag()) <= 1e-10 * scale) x = cplx(x.real(), 0.0);
  std::sort(r.begin(), r.end(), [](cplx x, cplx y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
  return r;
}

inline std::array<cplx, 3> eigenvalues(const Mat3& A) {
  return cubic_roots(-trace(A), minor_sum(A), -det(A));
}

inline CVec3 ccross(const CVec3& a, const CVec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}
inline double cnorm(const CVec3& a) {
  return std::sqrt(std::norm(a[0]) + std::norm(a[1]) + std::norm(a[2]));
}

// Null vector of A - lambda I, normalized to unit length.
inline CVec3 eigenvector(const Mat3& A, cplx lambda) {
  std::array<CVec3, 3> R;
  double rowscale = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) R[i][j] = cplx(A[i][j]) - (i == j ? lambda : cplx(0));
    rowscale = std::max(rowscale, cnorm(R[i]));
  }
  CVec3 best{};
  double bn = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      CVec3 c = ccross(R[i], R[j]);
      double n = cnorm(c);
      if (n > bn) {
        bn = n;
        best = c;
      }
    }
  if (bn <= 1e-12 * rowscale * rowscale) {
    // Rank <= 1: any vector orthogonal to the dominant row.
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (cnorm(R[i]) > cnorm(R[k])) k = i;
    if (cnorm(R[k]) == 0.0) return {cplx(1), cplx(0), cplx(0)};
    const CVec3& r = R[k];
    CVec3 e{};
    int j = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(r[i]) < std::abs(r[j])) j = i;
    e[j] = 1.0;
    best = ccross(r, e);
    bn = cnorm(best);
  }
  for (auto& v : best) v /= bn;
  return best;
}

inline Vec3 real_part(const CVec3& v) { return {v[0].real(), v[1].real(), v[2].real()}; }

}  // namespace selfsim

namespace selfsim {

// Solves A x = b by Gaussian elimination with partial pivoting.
inline Vec3 solve3(Mat3 A, Vec3 b) {
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (int r = c + 1; r < 3; ++r) {
      const double f = A[r][c] / A[c][c];
      for (int k = c; k < 3; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  Vec3 x{};
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 3; ++k) s -= A[r][k] * x[k];
    x[r] = s / A[r][r];
  }
  return x;
}

}  // namespace selfsim
