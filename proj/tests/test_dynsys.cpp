#include <gtest/gtest.h>

#include <random>

#include "selfsim/dynsys.hpp"

using namespace selfsim;

namespace {

Params random_super(std::mt19937_64& g) {
  std::uniform_real_distribution<double> um(1.1, 5.0), up(0.05, 0.95), us(0.1, 30.0);
  std::uniform_int_distribution<int> un(1, 6);
  for (;;) {
    const double m = um(g), p = up(g);
    if (m + p < 2.05) continue;
    return validate(m, p, sigma_lower_bound(m, p) + us(g), un(g));
  }
}

template <class F>
Mat3 fd_jacobian(const F& f, const Vec3& s, double h = 1e-6) {
  Mat3 J{};
  for (int j = 0; j < 3; ++j) {
    Vec3 a = s, b = s;
    a[j] += h;
    b[j] -= h;
    Vec3 d = (1.0 / (2 * h)) * (f(a) - f(b));
    for (int i = 0; i < 3; ++i) J[i][j] = d[i];
  }
  return J;
}

double max_abs_diff(const Mat3& A, const Mat3& B) {
  double w = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) w = std::max(w, std::abs(A[i][j] - B[i][j]));
  return w;
}

// Time derivative of a chart map along the finite flow, by central differences.
template <class Map>
Vec3 pushforward(const Map& map, const Vec3& s, const Vec3& v, double h = 1e-7) {
  return (1.0 / (2 * h)) * (map(s + h * v) - map(s - h * v));
}

}  // namespace

TEST(Dynsys, P2LocationAndField) {
  auto P = validate(3, 0.5, 3.5, 4);
  auto x = p2_location(P);
  EXPECT_NEAR(x[0], 0.109091, 1e-6);
  EXPECT_NEAR(x[1], 0.109091, 1e-6);
  EXPECT_EQ(x[2], 0.0);
  EXPECT_LE(norm_inf(FiniteField(P)(x)), 1e-14);
}

TEST(Dynsys, P2ClosedFormExample) {
  auto P = validate(3, 0.5, 3.5, 4);
  CriticalPoint cp;
  cp.tag = PointTag::P2;
  cp.location = p2_location(P);
  auto d = eigen(cp, P);
  EXPECT_NEAR(d.extras["lambda3"], 0.327273, 1e-6);
  EXPECT_NEAR(d.extras["sum12"], -1.327273, 1e-6);
  EXPECT_NEAR(d.extras["prod12"], 0.119008, 1e-6);
  for (auto& [k, r] : d.residuals) EXPECT_LE(r, 1e-10) << k;
}

TEST(Dynsys, P0Jacobian) {
  auto P = validate(3, 0.5, 3.5, 4);
  auto J = FiniteField(P).jacobian({0, 0, 0});
  const double ba = exponents(P).ba();
  Mat3 ref{Vec3{0, 0, 0}, Vec3{1, -ba, -1}, Vec3{0, 0, 0}};
  EXPECT_LE(max_abs_diff(J, ref), 1e-15);
  CriticalPoint cp;
  EXPECT_THROW(eigen(cp, P), Error);
}

TEST(Dynsys, ParabolaExample) {
  auto P = validate(1.5, 0.5, 3, 2);
  auto pts = critical_points(P);
  auto it = std::find_if(pts.begin(), pts.end(), [](auto& c) { return c.tag == PointTag::Parabola; });
  ASSERT_NE(it, pts.end());
  EXPECT_NEAR(it->location[1], -0.1, 1e-14);
  EXPECT_NEAR(it->location[2], 0.01, 1e-14);
  const FiniteField F(P);
  for (auto& c : parabola_sampler(P, 21)) {
    EXPECT_LE(norm_inf(F(c.location)), 1e-13);
    auto d = eigen(c, P);
    EXPECT_LE(d.residuals["l123"], 1e-10);
  }
  for (auto& c : pts)
    if (c.chart == Chart::Finite && c.tag != PointTag::Q4) {
      EXPECT_LE(norm_inf(F(c.location)), 1e-13);
    }
  EXPECT_THROW(parabola_point(P, 0.05), Error);
  EXPECT_THROW(parabola_point(validate(3, 0.5, 3.5, 4), -0.1), Error);
}

TEST(Dynsys, InvariantPlanes) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(-3, 3), up(0, 3);
  for (int i = 0; i < 1000; ++i) {
    auto P = random_super(g);
    const FiniteField F(P);
    EXPECT_EQ(F({0, u(g), up(g)})[0], 0.0);
    EXPECT_EQ(F({up(g), u(g), 0})[2], 0.0);
  }
}

TEST(Dynsys, JacobiansMatchFiniteDifferences) {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(0.05, 2.0), uy(-2, 2);
  double worst = 0;
  for (int i = 0; i < 500; ++i) {
    auto P = random_super(g);
    const FiniteField F(P);
    const UYVField U(P);
    const XChartField Xc(P);
    const YChartField Yc(P);
    Vec3 s{u(g), uy(g), u(g)};
    auto sc = [](const Mat3& J) {
      double r = 1;
      for (auto& row : J)
        for (double v : row) r = std::max(r, std::abs(v));
      return r;
    };
    auto J1 = F.jacobian(s);
    worst = std::max(worst, max_abs_diff(J1, fd_jacobian(F, s)) / sc(J1));
    Vec3 su{u(g), uy(g), u(g)};
    auto J2 = U.jacobian(su);
    worst = std::max(worst, max_abs_diff(J2, fd_jacobian(U, su)) / sc(J2));
    auto J3 = Xc.jacobian(s);
    worst = std::max(worst, max_abs_diff(J3, fd_jacobian(Xc, s)) / sc(J3));
    auto J4 = Yc.jacobian(s);
    worst = std::max(worst, max_abs_diff(J4, fd_jacobian(Yc, s)) / sc(J4));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Dynsys, ChartsAreConjugate) {
  std::mt19937_64 g(23);
  std::uniform_real_distribution<double> u(0.1, 2.0), uy(-2, 2);
  for (int i = 0; i < 300; ++i) {
    auto P = random_super(g);
    const FiniteField F(P);
    const UYVField U(P);
    const XChartField Xc(P);
    const YChartField Yc(P);
    Vec3 s{u(g), uy(g), u(g)};
    if (std::abs(s[1]) < 0.1) s[1] = 0.5;
    const Vec3 v = F(s);
    // (U,Y,V): same time.
    auto du = pushforward([&](const Vec3& x) { return U.from_finite(x); }, s, v);
    auto fu = U(U.from_finite(s));
    EXPECT_LE(norm_inf(du - fu), 1e-6 * (1 + norm_inf(fu)));
    // XChart: ds/deta = X.
    auto dx = pushforward(XChartField::from_finite, s, v);
    auto fx = s[0] * Xc(XChartField::from_finite(s));
    EXPECT_LE(norm_inf(dx - fx), 1e-6 * (1 + norm_inf(fx)));
    // YChart: ds/deta = -Y.
    auto dy = pushforward(YChartField::from_finite, s, v);
    auto fy = -s[1] * Yc(YChartField::from_finite(s));
    EXPECT_LE(norm_inf(dy - fy), 1e-6 * (1 + norm_inf(fy)));
    // Round trips.
    EXPECT_LE(norm_inf(U.to_finite(U.from_finite(s)) - s), 1e-12);
    EXPECT_LE(norm_inf(XChartField::to_finite(XChartField::from_finite(s)) - s), 1e-12);
    EXPECT_LE(norm_inf(YChartField::to_finite(YChartField::from_finite(s)) - s), 1e-12);
  }
}

TEST(Dynsys, UYVNeedsSupercritical) {
  EXPECT_THROW(UYVField(validate(1.5, 0.5, 3, 2)), Error);
  EXPECT_THROW(pv0_point(validate(1.5, 0.2, 3, 2), 1.0), Error);
}

TEST(Dynsys, XChartAxisAtNEqualsTwo) {
  auto P = validate(3, 0.5, 3.5, 2);
  const XChartField Xc(P);
  for (double y : {-1.0, -0.3, 0.2, 1.5}) {
    auto f = Xc({y, 0, 0});
    EXPECT_NEAR(f[0], -3 * y * y, 1e-15);
    EXPECT_EQ(f[1], 0.0);
    EXPECT_EQ(f[2], 0.0);
  }
}

TEST(Dynsys, Q1AndQ5Diagonals) {
  std::mt19937_64 g(9);
  for (int i = 0; i < 200; ++i) {
    auto P = random_super(g);
    for (auto& c : critical_points(P)) {
      if (c.tag != PointTag::Q1 && c.tag != PointTag::Q5) continue;
      auto d = eigen(c, P);
      EXPECT_LE(d.residuals["diag"], 1e-12);
      EXPECT_LE(norm_inf(XChartField(P)(c.location)), 1e-12);
      if (c.tag == PointTag::Q1) {
        EXPECT_DOUBLE_EQ(d.jacobian[0][0], 2.0 - P.N);
        EXPECT_DOUBLE_EQ(d.jacobian[1][1], P.sigma);
        EXPECT_DOUBLE_EQ(d.jacobian[2][2], 2.0);
      }
      EXPECT_EQ(c.saddle_node, P.N == 2);
    }
  }
}

TEST(Dynsys, Pv0Spectrum) {
  std::mt19937_64 g(29);
  std::uniform_real_distribution<double> uv(0.01, 5);
  for (int i = 0; i < 200; ++i) {
    auto P = random_super(g);
    auto c = pv0_point(P, uv(g));
    EXPECT_LE(norm_inf(UYVField(P)(c.location)), 1e-12);
    auto d = eigen(c, P);
    EXPECT_LE(d.residuals["l123"], 1e-9);
  }
}

TEST(Dynsys, P2ClosedFormOnRandomTuples) {
  std::mt19937_64 g(31);
  for (int i = 0; i < 2000; ++i) {
    auto P = random_super(g);
    auto x = p2_location(P);
    ASSERT_LT(x[1], 1.0 / P.N);
    ASSERT_LE(norm_inf(FiniteField(P)(x)), 1e-12);
    auto c = p2_closed_form(P);
    ASSERT_LT(c.D, 0);
    ASSERT_LT(c.e3[0], 0);
    CriticalPoint cp;
    cp.tag = PointTag::P2;
    cp.location = x;
    auto d = eigen(cp, P);
    ASSERT_LE(d.residuals["e3"], 1e-10);
    ASSERT_LE(d.residuals["lambda3"], 1e-8);
    ASSERT_LE(d.residuals["sum12"], 1e-8);
    ASSERT_LE(d.residuals["prod12"], 1e-8);
    // Characteristic polynomial invariants against the numerical Jacobian.
    ASSERT_NEAR(trace(d.jacobian), c.sum + c.lambda3, 1e-10 * (1 + std::abs(c.sum)));
    ASSERT_NEAR(det(d.jacobian), c.prod * c.lambda3, 1e-10 * (1 + std::abs(c.prod * c.lambda3)));
  }
}

TEST(Dynsys, StateConstructorsRejectNegative) {
  EXPECT_THROW(PhaseState::make(-1, 0, 0), Error);
  EXPECT_THROW(PhaseState::make(0, 0, -1), Error);
  EXPECT_THROW(UYVState::make(-1, 0, 0), Error);
  EXPECT_THROW(ChartState::make(Chart::Finite, {0, 0, 0}), Error);
  EXPECT_NO_THROW(PhaseState::make(0, -5, 0));
}
