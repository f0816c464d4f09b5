#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfsim/errors.hpp"
#include "selfsim/linalg.hpp"
#include "selfsim/params.hpp"

namespace selfsim {

enum class Chart { Finite, UYV, XChart, YChart };

inline const char* to_string(Chart c) {
  switch (c) {
    case Chart::Finite: return "finite";
    case Chart::UYV: return "uyv";
    case Chart::XChart: return "xchart";
    case Chart::YChart: return "ychart";
  }
  return "?";
}

// (X, Y, Z); X and Z are nonnegative by construction of the variables.
struct PhaseState {
  double X = 0, Y = 0, Z = 0;
  static PhaseState make(double X, double Y, double Z) {
    if (!(X >= 0.0) || !(Z >= 0.0) || !std::isfinite(Y))
      fail(ErrorKind::DegenerateSample, "PhaseState requires X >= 0, Z >= 0");
    return {X, Y, Z};
  }
  Vec3 vec() const { return {X, Y, Z}; }
};

struct UYVState {
  double U = 0, Y = 0, V = 0;
  static UYVState make(double U, double Y, double V) {
    if (!(U >= 0.0) || !(V >= 0.0) || !std::isfinite(Y))
      fail(ErrorKind::DegenerateSample, "UYVState requires U >= 0, V >= 0");
    return {U, Y, V};
  }
  Vec3 vec() const { return {U, Y, V}; }
};

// XChart: (y, z, w) = (Y/X, Z/X, 1/X).  YChart: (x, z, w) = (X/Y, Z/Y, 1/Y).
struct ChartState {
  Chart chart = Chart::XChart;
  Vec3 c{};
  static ChartState make(Chart chart, const Vec3& c) {
    if (chart != Chart::XChart && chart != Chart::YChart)
      fail(ErrorKind::ConfigError, "ChartState needs XChart or YChart");
    if (chart == Chart::XChart && (!(c[1] >= 0.0) || !(c[2] >= 0.0)))
      fail(ErrorKind::DegenerateSample, "XChart state requires z >= 0, w >= 0");
    return {chart, c};
  }
};

// ---------------------------------------------------------------- fields

class FiniteField {
 public:
  explicit FiniteField(const Params& P) : P_(P), E_(exponents(P)), ba_(E_.ba()) {}
  static constexpr Chart chart = Chart::Finite;

  Vec3 operator()(const Vec3& s) const {
    const double X = s[0], Y = s[1], Z = s[2];
    const double m = P_.m, p = P_.p, sg = P_.sigma, N = P_.N;
    return {X * ((m - 1) * Y - 2 * X),
            -Y * Y - ba_ * Y + X - N * X * Y - Z,
            Z * ((m + p - 2) * Y + (sg - 2) * X)};
  }

  Mat3 jacobian(const Vec3& s) const {
    const double X = s[0], Y = s[1], Z = s[2];
    const double m = P_.m, p = P_.p, sg = P_.sigma, N = P_.N;
    return Mat3{Vec3{(m - 1) * Y - 4 * X, (m - 1) * X, 0.0},
                Vec3{1 - N * Y, -2 * Y - ba_ - N * X, -1.0},
                Vec3{(sg - 2) * Z, (m + p - 2) * Z, (m + p - 2) * Y + (sg - 2) * X}};
  }

  const Params& params() const { return P_; }
  const Exponents& exps() const { return E_; }

 private:
  Params P_;
  Exponents E_;
  double ba_;
};

// Shooting chart U = X^q, V = Z/U with q = (m+p-2)/(m-1).
class UYVField {
 public:
  explicit UYVField(const Params& P) : P_(P), E_(exponents(P)), ba_(E_.ba()) {
    if (P.regime != Regime::Supercritical)
      fail(ErrorKind::RegimeError, "the (U,Y,V) chart needs m+p > 2");
    q_ = (P.m + P.p - 2) / (P.m - 1);
    iq_ = 1.0 / q_;
    k_ = E_.L / (P.m - 1);
  }
  static constexpr Chart chart = Chart::UYV;

  double q() const { return q_; }

  Vec3 operator()(const Vec3& s) const {
    const double U = s[0], Y = s[1], V = s[2];
    const double Ux = std::pow(std::max(U, 0.0), iq_);  // = X
    return {q_ * U * ((P_.m - 1) * Y - 2 * Ux),
            -Y * Y - ba_ * Y + Ux * (1 - P_.N * Y) - U * V,
            k_ * Ux * V};
  }

  Mat3 jacobian(const Vec3& s) const {
    const double U = std::max(s[0], 0.0), Y = s[1], V = s[2];
    const double Ux = std::pow(U, iq_);
    const double dUx = iq_ * std::pow(U, iq_ - 1.0);  // iq_ > 1, finite at U = 0
    const double m = P_.m, N = P_.N;
    return Mat3{Vec3{q_ * ((m - 1) * Y - 2 * Ux) - 2 * q_ * U * dUx, q_ * U * (m - 1), 0.0},
                Vec3{dUx * (1 - N * Y) - V, -2 * Y - ba_ - N * Ux, -U},
                Vec3{k_ * dUx * V, 0.0, k_ * Ux}};
  }

  Vec3 from_finite(const Vec3& s) const {
    double U = std::pow(s[0], q_);
    return {U, s[1], U > 0 ? s[2] / U : 0.0};
  }
  Vec3 to_finite(const Vec3& u) const {
    return {std::pow(u[0], iq_), u[1], u[2] * u[0]};
  }

  const Params& params() const { return P_; }
  const Exponents& exps() const { return E_; }

 private:
  Params P_;
  Exponents E_;
  double ba_, q_, iq_, k_;
};

// Projection on X; time s with ds/deta = X.
class XChartField {
 public:
  explicit XChartField(const Params& P) : P_(P), E_(exponents(P)), ba_(E_.ba()) {}
  static constexpr Chart chart = Chart::XChart;

  Vec3 operator()(const Vec3& s) const {
    const double y = s[0], z = s[1], w = s[2];
    const double m = P_.m, N = P_.N;
    return {-(N - 2) * y + w - m * y * y - ba_ * y * w - z * w,
            P_.sigma * z - (1 - P_.p) * y * z,
            2 * w - (m - 1) * y * w};
  }

  Mat3 jacobian(const Vec3& s) const {
    const double y = s[0], z = s[1], w = s[2];
    const double m = P_.m, N = P_.N;
    return Mat3{Vec3{-(N - 2) - 2 * m * y - ba_ * w, -w, 1 - ba_ * y - z},
                Vec3{-(1 - P_.p) * z, P_.sigma - (1 - P_.p) * y, 0.0},
                Vec3{-(m - 1) * w, 0.0, 2 - (m - 1) * y}};
  }

  static Vec3 from_finite(const Vec3& s) { return {s[1] / s[0], s[2] / s[0], 1.0 / s[0]}; }
  static Vec3 to_finite(const Vec3& c) { return {1.0 / c[2], c[0] / c[2], c[1] / c[2]}; }

 private:
  Params P_;
  Exponents E_;
  double ba_;
};

// Projection on Y, "+" branch; time s with ds/deta = -Y.
class YChartField {
 public:
  explicit YChartField(const Params& P) : P_(P), E_(exponents(P)), ba_(E_.ba()) {}
  static constexpr Chart chart = Chart::YChart;

  Vec3 operator()(const Vec3& s) const {
    const double x = s[0], z = s[1], w = s[2];
    const double m = P_.m, p = P_.p, N = P_.N, sg = P_.sigma;
    return {-m * x - (N - 2) * x * x - ba_ * x * w + x * x * w - x * z * w,
            -(m + p - 1) * z - ba_ * z * w - (N + sg - 2) * x * z - z * z * w + x * z * w,
            -w - ba_ * w * w + x * w * w - N * x * w - z * w * w};
  }

  Mat3 jacobian(const Vec3& s) const {
    const double x = s[0], z = s[1], w = s[2];
    const double m = P_.m, p = P_.p, N = P_.N, sg = P_.sigma;
    return Mat3{
        Vec3{-m - 2 * (N - 2) * x - ba_ * w + 2 * x * w - z * w, -x * w,
             -ba_ * x + x * x - x * z},
        Vec3{-(N + sg - 2) * z + z * w, -(m + p - 1) - ba_ * w - (N + sg - 2) * x - 2 * z * w + x * w,
             -ba_ * z - z * z + x * z},
        Vec3{w * w - N * w, -w * w, -1 - 2 * ba_ * w + 2 * x * w - N * x - 2 * z * w}};
  }

  static Vec3 from_finite(const Vec3& s) { return {s[0] / s[1], s[2] / s[1], 1.0 / s[1]}; }
  static Vec3 to_finite(const Vec3& c) { return {c[0] / c[2], 1.0 / c[2], c[1] / c[2]}; }

 private:
  Params P_;
  Exponents E_;
  double ba_;
};

// Free-function forms.
inline Vec3 field_finite(const PhaseState& s, const Params& P) { return FiniteField(P)(s.vec()); }
inline Mat3 jacobian_finite(const PhaseState& s, const Params& P) {
  return FiniteField(P).jacobian(s.vec());
}
inline Vec3 field_uyv(const UYVState& s, const Params& P) { return UYVField(P)(s.vec()); }
inline Vec3 field_infinity(const ChartState& s, const Params& P) {
  if (s.chart == Chart::XChart) return XChartField(P)(s.c);
  return YChartField(P)(s.c);
}
inline Mat3 jacobian_infinity(const ChartState& s, const Params& P) {
  if (s.chart == Chart::XChart) return XChartField(P).jacobian(s.c);
  return YChartField(P).jacobian(s.c);
}

// ------------------------------------------------------- critical points

enum class PointTag { P0, P1, P2, Parabola, Pv0, Q1, Q2, Q3, Q4, Q5 };

inline const char* to_string(PointTag t) {
  switch (t) {
    case PointTag::P0: return "P0";
    case PointTag::P1: return "P1";
    case PointTag::P2: return "P2";
    case PointTag::Parabola: return "P0^lambda";
    case PointTag::Pv0: return "P(v0)";
    case PointTag::Q1: return "Q1";
    case PointTag::Q2: return "Q2";
    case PointTag::Q3: return "Q3";
    case PointTag::Q4: return "Q4";
    case PointTag::Q5: return "Q5";
  }
  return "?";
}

struct CriticalPoint {
  PointTag tag = PointTag::P0;
  Chart chart = Chart::Finite;
  Vec3 location{};
  std::optional<double> param;                  // lambda or v0
  std::optional<std::array<double, 4>> sphere;  // Poincare hypersphere coordinates
  bool saddle_node = false;                     // Q1 = Q5 at N = 2
};

inline double N_K(const Params& P) { return P.m * P.N - P.N + 2.0; }

inline Vec3 p2_location(const Params& P) {
  const auto E = exponents(P);
  const double K = N_K(P);
  return {(P.m - 1) / (2 * E.alpha * K), 1.0 / (E.alpha * K), 0.0};
}

inline double parabola_z(const Params& P, double lambda) {
  return -lambda * lambda - exponents(P).ba() * lambda;
}

inline CriticalPoint parabola_point(const Params& P, double lambda) {
  if (!P.critical()) fail(ErrorKind::RegimeError, "critical parabola needs m+p = 2");
  const double ba = exponents(P).ba();
  if (lambda < -ba || lambda > 0)
    fail(ErrorKind::RangeViolation, "parabola lambda must lie in [-beta/alpha, 0]");
  CriticalPoint c;
  c.tag = PointTag::Parabola;
  c.location = {0.0, lambda, parabola_z(P, lambda)};
  c.param = lambda;
  return c;
}

inline std::vector<CriticalPoint> parabola_sampler(const Params& P, int n) {
  std::vector<CriticalPoint> out;
  const double ba = exponents(P).ba();
  for (int i = 0; i < n; ++i) {
    double lam = n == 1 ? -ba / 2 : -ba + ba * i / (n - 1);
    out.push_back(parabola_point(P, lam));
  }
  return out;
}

inline CriticalPoint pv0_point(const Params& P, double v0) {
  if (P.regime != Regime::Supercritical)
    fail(ErrorKind::RegimeError, "P(v0) lives in the (U,Y,V) chart, m+p > 2");
  if (!(v0 > 0)) fail(ErrorKind::RangeViolation, "v0 must be positive");
  CriticalPoint c;
  c.tag = PointTag::Pv0;
  c.chart = Chart::UYV;
  c.location = {0.0, -exponents(P).ba(), v0};
  c.param = v0;
  return c;
}

inline std::vector<CriticalPoint> critical_points(const Params& P) {
  const auto E = exponents(P);
  std::vector<CriticalPoint> out;
  auto finite = [&](PointTag t, Vec3 v) {
    CriticalPoint c;
    c.tag = t;
    c.location = v;
    double n = std::sqrt(1 + dot(v, v));
    c.sphere = std::array<double, 4>{v[0] / n, v[1] / n, v[2] / n, 1.0 / n};
    return c;
  };
  out.push_back(finite(PointTag::P0, {0, 0, 0}));
  if (P.critical()) {
    auto c = parabola_point(P, -E.ba() / 2);
    double n = std::sqrt(1 + dot(c.location, c.location));
    c.sphere = std::array<double, 4>{0.0, c.location[1] / n, c.location[2] / n, 1.0 / n};
    out.push_back(c);
  } else {
    out.push_back(finite(PointTag::P1, {0, -E.ba(), 0}));
  }
  out.push_back(finite(PointTag::P2, p2_location(P)));

  auto inf = [&](PointTag t, Chart ch, Vec3 loc, std::array<double, 4> sp) {
    CriticalPoint c;
    c.tag = t;
    c.chart = ch;
    c.location = loc;
    c.sphere = sp;
    return c;
  };
  const double n5 = std::sqrt((P.N - 2.0) * (P.N - 2.0) + P.m * P.m);
  auto q1 = inf(PointTag::Q1, Chart::XChart, {0, 0, 0}, {1, 0, 0, 0});
  auto q5 = inf(PointTag::Q5, Chart::XChart, {-(P.N - 2.0) / P.m, 0, 0},
                {P.m / n5, -(P.N - 2.0) / n5, 0, 0});
  if (P.saddle_node_at_infinity()) {
    q1.saddle_node = true;
    q5.saddle_node = true;
  }
  out.push_back(q1);
  out.push_back(inf(PointTag::Q2, Chart::YChart, {0, 0, 0}, {0, 1, 0, 0}));
  out.push_back(inf(PointTag::Q3, Chart::YChart, {0, 0, 0}, {0, -1, 0, 0}));
  out.push_back(inf(PointTag::Q4, Chart::Finite, {0, 0, 0}, {0, 0, 1, 0}));
  out.push_back(q5);
  return out;
}

// ------------------------------------------------------------- eigen data

struct EigenData {
  std::array<cplx, 3> eigenvalues{};
  std::array<CVec3, 3> eigenvectors{};
  std::map<std::string, double> extras;
  std::map<std::string, double> residuals;  // closed form vs numerical
  Mat3 jacobian{};
};

struct P2ClosedForm {
  double sum, prod, lambda3, D;
  Vec3 e3;
};

// Closed-form eigen-data at P2.  D is the denominator for which e3 is an
// exact eigenvector (constant terms carry 4, not 8; the X-entry carries K).
inline P2ClosedForm p2_closed_form(const Params& P) {
  const auto E = exponents(P);
  const double m = P.m, p = P.p, sg = P.sigma, N = P.N;
  const double a = E.alpha, b = E.beta, K = N_K(P);
  P2ClosedForm c;
  c.sum = -((N + 2) * (m - 1) + 2 * K * b + 4) / (2 * K * a);
  c.prod = (m - 1) / (2 * K * a * a);
  c.lambda3 = E.L / (2 * K * a);
  c.D = -(m - 1) * (m - 1) * sg * sg - (m - 1) * ((m - 1) * N + 2 * (m + 2 * p - 1)) * sg -
        4 * (m - 1) * (m - 1) * N - 4 * (p * (m + p - 2) + m - 1);
  c.e3 = {2 * a * (m - 1) * (m - 1) * K / c.D, 2 * a * K * ((m - 1) * sg + 2 * (m + p - 2)) / c.D,
          1.0};
  return c;
}

namespace detail {

inline double rel_err(double num, double ref) {
  return std::abs(num - ref) / std::max(std::abs(ref), 1e-300);
}

inline EigenData decompose(const Mat3& M) {
  EigenData d;
  d.jacobian = M;
  d.eigenvalues = eigenvalues(M);
  for (int i = 0; i < 3; ++i) d.eigenvectors[i] = eigenvector(M, d.eigenvalues[i]);
  return d;
}

}  // namespace detail

inline EigenData eigen(const CriticalPoint& cp, const Params& P) {
  const auto E = exponents(P);
  const double ba = E.ba();
  switch (cp.tag) {
    case PointTag::P0:
      fail(ErrorKind::NonHyperbolic, "P0 has a two-dimensional center space; use manifold seeding");
    case PointTag::Q4:
      fail(ErrorKind::Unclassifiable, "Q4 carries no local analysis");
    case PointTag::P1: {
      auto d = detail::decompose(FiniteField(P).jacobian(cp.location));
      d.extras["l_X"] = -(P.m - 1) * ba;
      d.extras["l_Y"] = ba;
      d.extras["l_Z"] = -(P.m + P.p - 2) * ba;
      return d;
    }
    case PointTag::P2: {
      const FiniteField F(P);
      auto d = detail::decompose(F.jacobian(cp.location));
      auto c = p2_closed_form(P);
      int i3 = 0;
      for (int i = 1; i < 3; ++i)
        if (std::abs(d.eigenvectors[i][2]) > std::abs(d.eigenvectors[i3][2])) i3 = i;
      cplx s(0), pr(1);
      for (int i = 0; i < 3; ++i)
        if (i != i3) {
          s += d.eigenvalues[i];
          pr *= d.eigenvalues[i];
        }
      d.extras["sum12"] = c.sum;
      d.extras["prod12"] = c.prod;
      d.extras["lambda3"] = c.lambda3;
      d.extras["D"] = c.D;
      d.extras["e3_X"] = c.e3[0];
      d.extras["e3_Y"] = c.e3[1];
      d.extras["e3_Z"] = c.e3[2];
      d.residuals["sum12"] = detail::rel_err(s.real(), c.sum) + std::abs(s.imag());
      d.residuals["prod12"] = detail::rel_err(pr.real(), c.prod) + std::abs(pr.imag());
      d.residuals["lambda3"] = detail::rel_err(d.eigenvalues[i3].real(), c.lambda3);
      Vec3 Me = matvec(d.jacobian, c.e3);
      d.residuals["e3"] = norm(Me - c.lambda3 * c.e3) / (std::abs(c.lambda3) * norm(c.e3));
      d.extras["index_lambda3"] = i3;
      return d;
    }
    case PointTag::Parabola: {
      const double lam = *cp.param;
      auto d = detail::decompose(FiniteField(P).jacobian(cp.location));
      d.extras["l1"] = (P.m - 1) * lam;
      d.extras["l2"] = -2 * lam - ba;
      d.extras["l3"] = 0.0;
      std::array<double, 3> ref{d.extras["l1"], d.extras["l2"], 0.0};
      double worst = 0;
      for (double r : ref) {
        double best = 1e300;
        for (auto& ev : d.eigenvalues) best = std::min(best, std::abs(ev - r));
        worst = std::max(worst, best);
      }
      d.residuals["l123"] = worst;
      return d;
    }
    case PointTag::Pv0: {
      const UYVField F(P);
      auto d = detail::decompose(F.jacobian(cp.location));
      const double v0 = *cp.param;
      d.extras["l1"] = -(P.m + P.p - 2) * ba;
      d.extras["l2"] = ba;
      d.extras["l3"] = 0.0;
      d.extras["stable_dir_Y"] = v0 / ((P.m + P.p - 1) * ba);
      std::array<double, 3> ref{d.extras["l1"], d.extras["l2"], 0.0};
      double worst = 0;
      for (double r : ref) {
        double best = 1e300;
        for (auto& ev : d.eigenvalues) best = std::min(best, std::abs(ev - r));
        worst = std::max(worst, best);
      }
      d.residuals["l123"] = worst;
      return d;
    }
    case PointTag::Q1:
    case PointTag::Q5: {
      const XChartField F(P);
      auto d = detail::decompose(F.jacobian(cp.location));
      const double N = P.N, m = P.m;
      Vec3 diag;
      if (cp.tag == PointTag::Q1)
        diag = {2 - N, P.sigma, 2};
      else
        diag = {N - 2, P.sigma + (1 - P.p) * (N - 2) / m, 2 + (m - 1) * (N - 2) / m};
      d.extras["diag1"] = diag[0];
      d.extras["diag2"] = diag[1];
      d.extras["diag3"] = diag[2];
      double worst = 0;
      for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(d.jacobian[i][i] - diag[i]));
      d.residuals["diag"] = worst;
      if (cp.saddle_node) d.extras["saddle_node"] = 1.0;
      return d;
    }
    case PointTag::Q2:
    case PointTag::Q3: {
      const YChartField F(P);
      auto d = detail::decompose(F.jacobian(cp.location));
      // In chart time s, ds/deta = -Y: Q3 (Y<0) keeps the eta orientation, Q2 reverses it.
      d.extras["eta_orientation"] = cp.tag == PointTag::Q3 ? 1.0 : -1.0;
      return d;
    }
  }
  fail(ErrorKind::Unclassifiable, "unknown critical point");
}

}  // namespace selfsim
