#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfsim/dynsys.hpp"
#include "selfsim/errors.hpp"
#include "selfsim/linalg.hpp"
#include "selfsim/params.hpp"

namespace selfsim {

enum class SurfaceId { Cylinder, PlaneNYkV, PlaneCYZ, PlaneAXZ, Pi1, Pi2, YFloor };

inline const char* to_string(SurfaceId s) {
  switch (s) {
    case SurfaceId::Cylinder: return "Cylinder";
    case SurfaceId::PlaneNYkV: return "PlaneNYkV";
    case SurfaceId::PlaneCYZ: return "PlaneCYZ";
    case SurfaceId::PlaneAXZ: return "PlaneAXZ";
    case SurfaceId::Pi1: return "Pi1";
    case SurfaceId::Pi2: return "Pi2";
    case SurfaceId::YFloor: return "YFloor";
  }
  return "?";
}

inline std::optional<SurfaceId> surface_from_string(const std::string& s) {
  for (auto id : {SurfaceId::Cylinder, SurfaceId::PlaneNYkV, SurfaceId::PlaneCYZ, SurfaceId::PlaneAXZ,
                  SurfaceId::Pi1, SurfaceId::Pi2, SurfaceId::YFloor})
    if (s == to_string(id)) return id;
  return std::nullopt;
}

// ------------------------------------------------ large-sigma constants

// Constants of the plane system through P2.  B is the smallest power of two
// meeting the X0 condition, A twice its lower bound, unless overridden.
struct LargeSigma {
  double X2 = 0, Y2 = 0;
  double Y0 = 0;          // floor {Y = -Y0}
  double B = 0, A = 0, A_bound = 0;
  double C = 0;           // slope of Pi1: Y = C X - B
  double X0 = 0;          // sigma -> infinity limit of the second root
  double X0_sigma = 0;    // second root of F(X, 0) on Pi1
  double A1 = 0, A2 = 0, A3 = 0;
  double M = 0, M1 = 0;
  double slope_gap = 0;   // C - 1/M
  double e3_dot_pi1 = 0, e3_dot_pi2 = 0;
};

inline double x0_limit(const Params& P, double B) {
  const double m = P.m, K = N_K(P);
  return B * B * (m - 1) * (m - 1) / ((2 * B * m + m - 1) * (B * K + m - 1));
}

inline LargeSigma large_sigma_constants(const Params& P, std::optional<double> B_in = {},
                                        std::optional<double> A_in = {}) {
  const auto E = exponents(P);
  const double m = P.m, p = P.p, s = P.sigma, N = P.N, K = N_K(P), L = E.L, ba = E.ba();
  LargeSigma c;
  const Vec3 p2 = p2_location(P);
  c.X2 = p2[0];
  c.Y2 = p2[1];
  c.Y0 = (m - 1) / 2;
  if (B_in) {
    if (!(*B_in > 0)) fail(ErrorKind::ConfigError, "B must be positive");
    c.B = *B_in;
  } else {
    c.B = 0;
    for (int e = -30; e <= 60; ++e) {
      const double B = std::ldexp(1.0, e);
      if ((c.Y2 + B) / c.X2 * x0_limit(P, B) - B < -2 * c.Y0) {
        c.B = B;
        break;
      }
    }
    if (c.B == 0) fail(ErrorKind::ConfigError, "no power of two satisfies the X0 condition");
  }
  const double B = c.B;
  c.X0 = x0_limit(P, B);
  c.A_bound = (2 * (m - 1) * K * B * B + (m - 1) * (K + 2 * m) * B + (m - 1) * (m - 1)) / (B * K + m - 1);
  c.A = A_in ? *A_in : 2 * c.A_bound;
  c.C = (c.Y2 + B) / c.X2;
  // Normal (C, -1, 0) applied to the field with Y = C X - B.
  c.A1 = m * c.C * c.C + (N - 2) * c.C;
  c.A2 = c.C * (ba - (m + 1) * B) - 1 - N * B;
  c.A3 = B * B - ba * B;
  c.X0_sigma = B * (m - 1) * L * (B * s + 2 * B - m + p) /
               ((2 * B * m * (s + 2) + L) * ((s + 2) * K * B + L));
  const double A = c.A;
  c.M1 = 2 * (m - 1) * (2 * A + 1 - m) * N - 4 * p * p + 8 * A - 4 * m + 4 * p + 4;
  c.M = (-(m - 1) * (m - 1) * s * s + ((m - 1) * (2 * A + 1 - m) * N - 4 * m * p + 4 * A + 4 * p) * s + c.M1) /
        (4 * (N * (m - p) + s + 2));
  c.slope_gap = c.C - 1.0 / c.M;
  const auto cf = p2_closed_form(P);
  const Vec3 e3 = cf.e3;
  c.e3_dot_pi2 = A * e3[1] + e3[2];
  c.e3_dot_pi1 = c.C * e3[0] - e3[1];
  return c;
}

// ------------------------------------------------------------ surfaces

struct SurfaceOptions {
  std::optional<double> B, A;
  double delta = 1e-2;  // Pi2 region keeps Y <= Y(P2) - delta
};

struct Surface {
  SurfaceId id = SurfaceId::Cylinder;
  Chart chart = Chart::Finite;
  Params params;
  std::map<std::string, double> coef;
  int expected_sign = -1;  // sign of normal . field required on the certified region

  double c(const std::string& k) const {
    auto it = coef.find(k);
    if (it == coef.end()) fail(ErrorKind::ConfigError, "surface has no coefficient " + k);
    return it->second;
  }

  // Zero on the surface.
  double level(const Vec3& s) const {
    const double N = params.N;
    switch (id) {
      case SurfaceId::Cylinder: return -s[1] * s[1] - c("ba") * s[1] - s[2];
      case SurfaceId::PlaneNYkV: return N * s[1] + c("k") * s[2] - 1;
      case SurfaceId::PlaneCYZ: return c("c") * s[1] + s[2] - c("d");
      case SurfaceId::PlaneAXZ: return c("a") * s[0] + s[2] - c("a");
      case SurfaceId::Pi1: return c("C") * s[0] - c("B") - s[1];
      case SurfaceId::Pi2: return c("A") * s[1] + s[2] - c("A") * c("Y2");
      case SurfaceId::YFloor: return s[1] + c("Y0");
    }
    return 0;
  }

  Vec3 normal(const Vec3& s) const {
    switch (id) {
      case SurfaceId::Cylinder: return {0, -2 * s[1] - c("ba"), -1};
      case SurfaceId::PlaneNYkV: return {0, static_cast<double>(params.N), c("k")};
      case SurfaceId::PlaneCYZ: return {0, c("c"), 1};
      case SurfaceId::PlaneAXZ: return {c("a"), 0, 1};
      case SurfaceId::Pi1: return {c("C"), -1, 0};
      case SurfaceId::Pi2: return {0, c("A"), 1};
      case SurfaceId::YFloor: return {0, 1, 0};
    }
    return {};
  }

  // Moves s onto the surface along the coordinate the surface is a graph over.
  Vec3 project(Vec3 s) const {
    const double N = params.N;
    switch (id) {
      case SurfaceId::Cylinder: s[2] = -s[1] * s[1] - c("ba") * s[1]; break;
      case SurfaceId::PlaneNYkV: s[2] = (1 - N * s[1]) / c("k"); break;
      case SurfaceId::PlaneCYZ: s[2] = c("d") - c("c") * s[1]; break;
      case SurfaceId::PlaneAXZ: s[2] = c("a") * (1 - s[0]); break;
      case SurfaceId::Pi1: s[1] = c("C") * s[0] - c("B"); break;
      case SurfaceId::Pi2: s[2] = c("A") * (c("Y2") - s[1]); break;
      case SurfaceId::YFloor: s[1] = -c("Y0"); break;
    }
    return s;
  }

  Vec3 field(const Vec3& s) const {
    if (chart == Chart::UYV) return UYVField(params)(s);
    return FiniteField(params)(s);
  }
};

inline Surface make_surface(SurfaceId id, const Params& P, const SurfaceOptions& o = {}) {
  const auto E = exponents(P);
  const double m = P.m, p = P.p, s = P.sigma, N = P.N;
  Surface S;
  S.id = id;
  S.params = P;
  const double ba = E.ba();
  auto need_critical = [&](const char* what) {
    if (!P.critical()) fail(ErrorKind::RegimeError, std::string(what) + " is defined for m+p=2");
  };
  switch (id) {
    case SurfaceId::Cylinder:
      need_critical("the parabolic cylinder");
      S.coef["ba"] = ba;
      S.expected_sign = -1;
      break;
    case SurfaceId::PlaneNYkV: {
      if (P.regime != Regime::Supercritical)
        fail(ErrorKind::RegimeError, "the plane NY+kV=1 lives in the (U,Y,V) chart, m+p>2");
      S.chart = Chart::UYV;
      const double q = (m + p - 2) / (m - 1);
      const double U2 = std::pow(p2_location(P)[0], q);
      const double inv_k = ((N + s) * (m - 1) + 2 * (p - 1)) / (N * (m - 1)) *
                           std::pow(U2, (1 - p) / (m + p - 2));
      S.coef["k"] = 1.0 / inv_k;
      S.coef["U2"] = U2;
      S.coef["ba"] = ba;
      S.expected_sign = -1;
      break;
    }
    case SurfaceId::PlaneCYZ: {
      need_critical("the plane cY+Z=d");
      const double c = (m - 1) * (m - 1) / ((s + 2) * (s + 2));
      S.coef["c"] = c;
      S.coef["d"] = c / 2;
      S.coef["Ystar"] = -(m - 1) / (6 * (2 * s - m + 5));
      S.coef["Xstar"] = 2 * (m - 1) * (m - 1) / (s * (s + 2) * (s + 2) * (N + 2));
      S.expected_sign = -1;
      break;
    }
    case SurfaceId::PlaneAXZ: {
      need_critical("the plane aX+Z=a");
      const double a = (m - 1) * (m - 1) * (3 * s + 7 - m) / (3 * (s + 2) * (s + 2) * (2 * s + 5 - m));
      S.coef["a"] = a;
      S.coef["e"] = (3 * s + 7 - m) / (3 * (2 * s + 5 - m));
      S.coef["f"] = (m - 1) / (6 * (2 * s - m + 5));
      S.coef["Xstar"] = 2 * (m - 1) * (m - 1) / (s * (s + 2) * (s + 2) * (N + 2));
      S.expected_sign = -1;
      break;
    }
    case SurfaceId::Pi1:
    case SurfaceId::Pi2:
    case SurfaceId::YFloor: {
      auto c = large_sigma_constants(P, o.B, o.A);
      S.coef = {{"B", c.B},   {"A", c.A},   {"C", c.C},   {"X2", c.X2}, {"Y2", c.Y2},
                {"Y0", c.Y0}, {"X0", c.X0}, {"X0_sigma", c.X0_sigma}, {"A1", c.A1},
                {"A2", c.A2}, {"A3", c.A3}, {"M", c.M},   {"delta", o.delta}, {"ba", ba}};
      S.expected_sign = id == SurfaceId::YFloor ? -1 : 1;
      break;
    }
  }
  return S;
}

// Inner product of the field with the surface normal at s (projected onto the
// surface when within 1e-8).
inline double flow_sign(const Surface& S, const Vec3& s) {
  const double lv = S.level(s);
  const double scale = 1.0 + std::abs(s[0]) + std::abs(s[1]) + std::abs(s[2]);
  if (!(std::abs(lv) <= 1e-8 * scale))
    fail(ErrorKind::OffSurface, std::string("state is ") + std::to_string(lv) + " off " + to_string(S.id));
  const Vec3 q = S.project(s);
  return dot(S.normal(q), S.field(q));
}

// The closed-form sign expressions written for each surface.
inline double displayed_sign(const Surface& S, const Vec3& s0) {
  const Vec3 s = S.project(s0);
  const auto& P = S.params;
  const double m = P.m, p = P.p, sg = P.sigma, N = P.N;
  switch (S.id) {
    case SurfaceId::Cylinder: {
      const double Y = s[1], ba = S.c("ba");
      const double h = Y * ((sg + 2 * (N - 1)) * Y + (sg - 2 + N) * ba) - (2 * Y + ba);
      return s[0] * h;
    }
    case SurfaceId::PlaneNYkV: {
      const double U = s[0], Y = s[1], V = s[2], k = S.c("k"), ba = S.c("ba");
      const double L = sg * (m - 1) + 2 * (p - 1);
      return -N * (Y * Y + ba * Y) +
             U * V * (k * (N + L / (m - 1)) * std::pow(U, (1 - p) / (m + p - 2)) - N);
    }
    case SurfaceId::PlaneCYZ: {
      const double X = s[0], Y = s[1], r = (m - 1) * (m - 1) / ((sg + 2) * (sg + 2));
      return -r * Y * Y - r * (N + sg - 2) * X * Y + sg * r / 2 * X -
             (2 * sg + 5 - m) * (m - 1) * r / ((sg + 2) * (sg + 2)) * Y - r * r / 2;
    }
    case SurfaceId::PlaneAXZ: {
      const double X = s[0], Y = s[1];
      return S.c("a") * X * (-sg * X + (m - 1) * Y + sg - 2);
    }
    case SurfaceId::Pi1: {
      const double X = s[0];
      return S.c("A1") * X * X + S.c("A2") * X + S.c("A3") + s[2];
    }
    case SurfaceId::Pi2: {
      const double A = S.c("A"), h = s[1] - S.c("Y2"), k = s[0] - S.c("X2");
      return 2 * A * (N * (m - p) + sg + 2) / ((sg + 2) * N_K(P)) * (k + S.c("M") * h) -
             A * (N + sg - 2) * h * k - A * (m + p - 1) * h * h;
    }
    case SurfaceId::YFloor: {
      const double X = s[0], Y = s[1];
      return -Y * Y - S.c("ba") * Y + X * (1 - N * Y) - s[2];
    }
  }
  return 0;
}

// --------------------------------------------------------- sampling

inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

// Halton points in [0,1)^2; seed offsets the index.
inline std::array<double, 2> halton2(std::uint64_t i, std::uint64_t seed = 0) {
  return {radical_inverse(i + 1 + seed, 2), radical_inverse(i + 1 + seed, 3)};
}

// A surface patch: two parameters in a box mapped onto the surface, with a
// rejection predicate.
struct SurfaceRegion {
  std::string name;
  std::array<double, 2> lo{}, hi{};
  std::function<std::optional<Vec3>(double, double)> point;
};

inline SurfaceRegion default_region(const Surface& S) {
  const auto& P = S.params;
  const double ba = exponents(P).ba();
  SurfaceRegion R;
  switch (S.id) {
    case SurfaceId::Cylinder:
      R.name = "Y in [-beta/2alpha, 0), 0 < X <= 1";
      R.lo = {0.0, -ba / 2};
      R.hi = {1.0, 0.0};
      R.point = [S](double X, double Y) -> std::optional<Vec3> {
        if (X <= 0 || Y >= 0) return std::nullopt;
        return S.project({X, Y, 0});
      };
      break;
    case SurfaceId::PlaneNYkV:
      R.name = "0 < U < U(P2), 0 < Y < 1/N";
      R.lo = {0.0, 0.0};
      R.hi = {S.c("U2"), 1.0 / P.N};
      R.point = [S](double U, double Y) -> std::optional<Vec3> {
        if (U <= 0 || Y <= 0) return std::nullopt;
        return S.project({U, Y, 0});
      };
      break;
    case SurfaceId::PlaneCYZ:
      R.name = "0 < X < X*, Y* < Y <= 1/2";
      R.lo = {0.0, S.c("Ystar")};
      R.hi = {S.c("Xstar"), 0.5};
      R.point = [S](double X, double Y) -> std::optional<Vec3> {
        if (X <= 0 || Y <= S.c("Ystar")) return std::nullopt;
        return S.project({X, Y, 0});
      };
      break;
    case SurfaceId::PlaneAXZ:
      R.name = "0 < X <= X*, g^-1(X) <= Y <= eX - f";
      R.lo = {0.0, -ba};
      R.hi = {S.c("Xstar"), 0.0};
      R.point = [S, ba](double X, double Y) -> std::optional<Vec3> {
        const double a = S.c("a");
        const double disc = ba * ba - 4 * a * (1 - X);
        if (X <= 0 || disc < 0) return std::nullopt;
        const double ginv = 0.5 * (-ba + std::sqrt(disc));
        if (Y < ginv || Y > S.c("e") * X - S.c("f")) return std::nullopt;
        return S.project({X, Y, 0});
      };
      break;
    case SurfaceId::Pi1:
      R.name = "X0(sigma) < X < X(P2), A(Y(P2)-Y) <= Z <= 2A(Y(P2)-Y)";
      R.lo = {S.c("X0_sigma"), 1.0};
      R.hi = {S.c("X2"), 2.0};
      R.point = [S](double X, double t) -> std::optional<Vec3> {
        if (X <= S.c("X0_sigma") || X >= S.c("X2")) return std::nullopt;
        const double Y = S.c("C") * X - S.c("B");
        return Vec3{X, Y, t * S.c("A") * (S.c("Y2") - Y)};
      };
      break;
    case SurfaceId::Pi2:
      R.name = "X0 < X < X(P2), -2Y0 <= Y <= Y(P2)-delta, Y < C X - B";
      R.lo = {S.c("X0"), -2 * S.c("Y0")};
      R.hi = {S.c("X2"), S.c("Y2") - S.c("delta")};
      R.point = [S](double X, double Y) -> std::optional<Vec3> {
        if (X <= S.c("X0") || X >= S.c("X2")) return std::nullopt;
        if (!(Y < S.c("C") * X - S.c("B"))) return std::nullopt;
        return S.project({X, Y, 0});
      };
      break;
    case SurfaceId::YFloor:
      R.name = "Y = -Y0, 0 <= X < X(P2), 0 <= Z <= 1";
      R.lo = {0.0, 0.0};
      R.hi = {S.c("X2"), 1.0};
      R.point = [S](double X, double Z) -> std::optional<Vec3> {
        if (X >= S.c("X2")) return std::nullopt;
        return Vec3{X, -S.c("Y0"), Z};
      };
      break;
  }
  return R;
}

struct Violation {
  Vec3 state{};
  double value = 0;
};

struct CertificateReport {
  SurfaceId surface = SurfaceId::Cylinder;
  std::string region;
  std::size_t samples = 0;    // accepted points
  std::size_t attempts = 0;   // including rejected ones
  int expected_sign = -1;
  double extreme = 0;         // value closest to violating
  std::vector<Violation> violations;
  std::size_t violation_count = 0;
  std::map<std::string, double> coefficients;
  bool pass() const { return violation_count == 0 && samples > 0; }
};

inline CertificateReport certify(const Surface& S, const SurfaceRegion& R, std::size_t n,
                                 std::uint64_t seed = 0, std::size_t keep_violations = 50) {
  if (n == 0) fail(ErrorKind::ConfigError, "certificate needs samples");
  CertificateReport rep;
  rep.surface = S.id;
  rep.region = R.name;
  rep.expected_sign = S.expected_sign;
  rep.coefficients = S.coef;
  rep.extreme = std::numeric_limits<double>::infinity();
  const std::size_t max_attempts = 1000 * n;
  std::uint64_t i = 0;
  while (rep.samples < n && rep.attempts < max_attempts) {
    auto u = halton2(i++, seed);
    ++rep.attempts;
    const double a = R.lo[0] + u[0] * (R.hi[0] - R.lo[0]);
    const double b = R.lo[1] + u[1] * (R.hi[1] - R.lo[1]);
    auto pt = R.point(a, b);
    if (!pt) continue;
    ++rep.samples;
    const double v = flow_sign(S, *pt);
    const double signed_v = S.expected_sign * v;
    rep.extreme = std::min(rep.extreme, signed_v);
    if (!(signed_v > 0)) {
      ++rep.violation_count;
      if (rep.violations.size() < keep_violations) rep.violations.push_back({*pt, v});
    }
  }
  rep.extreme *= S.expected_sign;
  return rep;
}

inline CertificateReport certify(const Surface& S, std::size_t n, std::uint64_t seed = 0) {
  return certify(S, default_region(S), n, seed);
}

// Empirical certificate threshold: doubles sigma from start until the
// certificate passes, then bisects down to relative width rel.  A measured
// value, for regression baselines only.
struct SigmaThreshold {
  std::optional<double> passing, failing;
  std::vector<std::pair<double, std::size_t>> probes;  // sigma, violations
};

inline SigmaThreshold smallest_passing_sigma(SurfaceId id, const Params& base, double start, double limit,
                                             std::size_t n, std::uint64_t seed = 0, double rel = 1e-2,
                                             const SurfaceOptions& o = {}) {
  SigmaThreshold t;
  auto probe = [&](double s) {
    auto r = certify(make_surface(id, with_sigma(base, s), o), n, seed);
    t.probes.push_back({s, r.violation_count});
    return r.pass();
  };
  double s = start;
  while (s <= limit) {
    if (probe(s)) {
      t.passing = s;
      break;
    }
    t.failing = s;
    s *= 2;
  }
  if (!t.passing || !t.failing) return t;
  double lo = *t.failing, hi = *t.passing;
  while (hi - lo > rel * hi) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid)) hi = mid;
    else lo = mid;
  }
  t.passing = hi;
  t.failing = lo;
  return t;
}

// --------------------------------------------------------- regions

enum class RegionId { D1, D2, D3, Large };

inline const char* to_string(RegionId r) {
  switch (r) {
    case RegionId::D1: return "D1";
    case RegionId::D2: return "D2";
    case RegionId::D3: return "D3";
    case RegionId::Large: return "Large";
  }
  return "?";
}

struct ZoneConstants {
  double c = 0, d = 0, a = 0, e = 0, f = 0, Xstar = 0, ba = 0;
};

inline ZoneConstants zone_constants(const Params& P) {
  if (!P.critical()) fail(ErrorKind::RegimeError, "D1-D3 are defined for m+p=2");
  const double m = P.m, s = P.sigma, N = P.N;
  ZoneConstants z;
  z.c = (m - 1) * (m - 1) / ((s + 2) * (s + 2));
  z.d = z.c / 2;
  z.a = (m - 1) * (m - 1) * (3 * s + 7 - m) / (3 * (s + 2) * (s + 2) * (2 * s + 5 - m));
  z.e = (3 * s + 7 - m) / (3 * (2 * s + 5 - m));
  z.f = (m - 1) / (6 * (2 * s - m + 5));
  z.Xstar = 2 * (m - 1) * (m - 1) / (s * (s + 2) * (s + 2) * (N + 2));
  z.ba = 2 * (m - 1) / (s + 2);
  return z;
}

// Larger root of Y^2 + (2(m-1)/(sigma+2)) Y + a(1 - X) = 0, the inverse of g.
inline std::optional<double> g_inverse(const ZoneConstants& z, double X) {
  const double disc = z.ba * z.ba - 4 * z.a * (1 - X);
  if (disc < 0) return std::nullopt;
  return 0.5 * (-z.ba + std::sqrt(disc));
}

inline bool region_membership(const Vec3& s, RegionId r, const Params& P, double tol = 0.0,
                              const SurfaceOptions& o = {}) {
  const double X = s[0], Y = s[1], Z = s[2];
  if (r == RegionId::Large) {
    auto c = large_sigma_constants(P, o.B, o.A);
    return Z > c.A * (c.Y2 - Y) - tol && Y < c.C * X - c.B + tol;
  }
  const auto z = zone_constants(P);
  if (!(X >= -tol && X <= z.Xstar + tol)) return false;
  const double cyl = -Y * Y - z.ba * Y;
  switch (r) {
    case RegionId::D1:
      return Y >= -tol && Y <= 0.5 + tol && Z >= -tol && Z <= -z.c * Y + z.d + tol;
    case RegionId::D2:
      return Y >= z.e * X - z.f - tol && Y <= tol && Z >= cyl - tol && Z <= -z.c * Y + z.d + tol;
    case RegionId::D3: {
      auto gi = g_inverse(z, X);
      if (!gi) return false;
      return Y >= *gi - tol && Y <= z.e * X - z.f + tol && Z >= cyl - tol && Z <= -z.a * X + z.a + tol;
    }
    case RegionId::Large: break;
  }
  return false;
}

}  // namespace selfsim
