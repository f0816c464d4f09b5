#include <gtest/gtest.h>

#include "selfsim/barriers.hpp"
#include "selfsim/shoot.hpp"

using namespace selfsim;

namespace {

const Params kCrit3 = validate(1.5, 0.5, 3, 2);
const Params kCrit205 = validate(1.5, 0.5, 2.05, 2);
const Params kLarge = validate(3, 0.5, 50, 4);

std::vector<std::pair<SurfaceId, Params>> all_surfaces() {
  return {{SurfaceId::Cylinder, kCrit3},   {SurfaceId::PlaneCYZ, kCrit205},
          {SurfaceId::PlaneAXZ, kCrit205}, {SurfaceId::Pi1, kLarge},
          {SurfaceId::Pi2, kLarge},        {SurfaceId::YFloor, kLarge},
          {SurfaceId::PlaneNYkV, validate(3, 0.5, 3.5, 4)}};
}

}  // namespace

TEST(Barriers, CylinderSignClosedForm) {
  // Field of the finite system dotted with grad(-Y^2 - (b/a) Y - Z), on the cylinder.
  const auto P = kCrit3;
  const double ba = exponents(P).ba();
  EXPECT_NEAR(ba, 0.2, 1e-15);
  auto S = make_surface(SurfaceId::Cylinder, P);
  for (double X : {0.5, 1.0}) {
    const double Y = -0.1, Z = -Y * Y - ba * Y;
    const double m = P.m, N = P.N, sg = P.sigma;
    const double Xd = X * ((m - 1) * Y - 2 * X);
    const double Yd = -Y * Y - ba * Y + X - N * X * Y - Z;
    const double Zd = Z * (sg - 2) * X;  // m + p = 2
    const double ref = (-2 * Y - ba) * Yd - Zd + 0 * Xd;
    EXPECT_NEAR(flow_sign(S, {X, Y, Z}), ref, 1e-15);
    EXPECT_NEAR(displayed_sign(S, {X, Y, Z}), ref, 1e-15);
  }
  // h(-0.1) at N = 2 equals -0.01.
  EXPECT_NEAR(displayed_sign(S, {1.0, -0.1, 0}), -0.01, 1e-15);
  EXPECT_TRUE(certify(S, 1000).pass());
  EXPECT_TRUE(certify(make_surface(SurfaceId::Cylinder, kCrit205), 1000).pass());
  EXPECT_THROW(make_surface(SurfaceId::Cylinder, kLarge), Error);
}

TEST(Barriers, DisplayedSignMatchesNormalDotField) {
  for (auto [id, P] : all_surfaces()) {
    auto S = make_surface(id, P);
    auto R = default_region(S);
    double worst = 0;
    int n = 0;
    for (int i = 0; n < 1000 && i < 100000; ++i) {
      auto u = halton2(i, 7);
      auto pt = R.point(R.lo[0] + u[0] * (R.hi[0] - R.lo[0]), R.lo[1] + u[1] * (R.hi[1] - R.lo[1]));
      if (!pt) continue;
      ++n;
      const double a = flow_sign(S, *pt), b = displayed_sign(S, *pt);
      worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}));
    }
    EXPECT_EQ(n, 1000) << to_string(id);
    EXPECT_LE(worst, 1e-10) << to_string(id);
  }
}

TEST(Barriers, OffSurfaceAndCriticalPoints) {
  auto S = make_surface(SurfaceId::Pi2, kLarge);
  try {
    flow_sign(S, {0.01, 0.0, 5.0});
    FAIL() << "expected OffSurface";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OffSurface);
  }
  // P2 lies on Pi1 and Pi2; the field vanishes there.
  const auto P2 = p2_location(kLarge);
  EXPECT_EQ(flow_sign(S, P2), 0.0);
  auto S1 = make_surface(SurfaceId::Pi1, kLarge);
  EXPECT_LE(std::abs(flow_sign(S1, P2)), 1e-13);
  EXPECT_NEAR(displayed_sign(S1, {P2[0], P2[1], 0.0}), 0.0, 1e-12);
  // Near the surface the state is projected.
  Vec3 q = P2;
  q[2] += 1e-10;
  EXPECT_NO_THROW(flow_sign(S, q));
}

TEST(Barriers, LargeSigmaConstruction) {
  auto c = large_sigma_constants(kLarge);
  // B is the smallest power of two with the X0 condition.
  EXPECT_EQ(c.B, std::ldexp(1.0, std::ilogb(c.B)));
  auto cond = [&](double B) { return (c.Y2 + B) / c.X2 * x0_limit(kLarge, B) - B < -2 * c.Y0; };
  EXPECT_TRUE(cond(c.B));
  EXPECT_FALSE(cond(c.B / 2));
  EXPECT_DOUBLE_EQ(c.A, 2 * c.A_bound);
  EXPECT_DOUBLE_EQ(c.Y0, 1.0);
  EXPECT_GT(c.slope_gap, 0);
  EXPECT_LT(c.Y2, 1.0 / kLarge.N);
  EXPECT_GT(c.X0_sigma, 0);
  EXPECT_LT(c.X0_sigma, c.X2);
  // The X0(sigma) root of F(X, 0) on Pi1.
  const double F = c.A1 * c.X0_sigma * c.X0_sigma + c.A2 * c.X0_sigma + c.A3;
  EXPECT_NEAR(F, 0.0, 1e-12 * (std::abs(c.A3) + 1));
  EXPECT_THROW(large_sigma_constants(kLarge, -1.0), Error);
}

TEST(Barriers, CertificatesAtLargeSigma) {
  EXPECT_TRUE(certify(make_surface(SurfaceId::Pi1, kLarge), 10000).pass());
  EXPECT_TRUE(certify(make_surface(SurfaceId::YFloor, kLarge), 10000).pass());
  // Pi2 with A = 0 is the invariant plane Z = 0: fails.
  SurfaceOptions o;
  o.A = 0.0;
  auto r0 = certify(make_surface(SurfaceId::Pi2, kLarge, o), 1000);
  EXPECT_FALSE(r0.pass());
  EXPECT_FALSE(r0.violations.empty());
  // Pi2 holds once sigma is large enough.
  auto r = certify(make_surface(SurfaceId::Pi2, with_sigma(kLarge, 500)), 10000);
  EXPECT_TRUE(r.pass());
  EXPECT_EQ(r.samples, 10000u);
  EXPECT_EQ(r.violation_count, 0u);
  EXPECT_THROW(certify(make_surface(SurfaceId::Pi1, kLarge), 0), Error);
}

TEST(Barriers, SmallSigmaPlanes) {
  EXPECT_TRUE(certify(make_surface(SurfaceId::PlaneCYZ, kCrit205), 10000).pass());
  EXPECT_TRUE(certify(make_surface(SurfaceId::PlaneAXZ, with_sigma(kCrit205, 2.005)), 10000).pass());
  EXPECT_TRUE(certify(make_surface(SurfaceId::PlaneNYkV, validate(3, 0.5, 1.0, 4)), 10000).pass());
  EXPECT_THROW(make_surface(SurfaceId::PlaneNYkV, kCrit3), Error);
  EXPECT_THROW(make_surface(SurfaceId::PlaneCYZ, kLarge), Error);
}

TEST(Barriers, ThresholdSearch) {
  auto t = smallest_passing_sigma(SurfaceId::Pi2, kLarge, 50, 2000, 2000);
  ASSERT_TRUE(t.passing.has_value());
  ASSERT_TRUE(t.failing.has_value());
  EXPECT_LT(*t.failing, *t.passing);
  EXPECT_LE(*t.passing - *t.failing, 1e-2 * *t.passing);
  EXPECT_TRUE(certify(make_surface(SurfaceId::Pi2, with_sigma(kLarge, *t.passing)), 2000).pass());
  EXPECT_FALSE(certify(make_surface(SurfaceId::Pi2, with_sigma(kLarge, *t.failing)), 2000).pass());
}

TEST(Barriers, RegionMembershipExamples) {
  const auto P = validate(1.5, 0.5, 2.5, 2);
  const auto z = zone_constants(P);
  // In D1 iff 0 <= 0.25 <= 1/2 and 0 <= 0 <= -c 0.25 + d.
  EXPECT_EQ(region_membership({0, 0.25, 0}, RegionId::D1, P), -z.c * 0.25 + z.d >= 0);
  EXPECT_TRUE(region_membership({0, 0.25, 0}, RegionId::D1, P));
  EXPECT_TRUE(region_membership({0, 0, 0}, RegionId::D1, P));
  EXPECT_TRUE(region_membership({0, 0, 0}, RegionId::D2, P));
  const double X = 2 * z.Xstar;
  for (auto r : {RegionId::D1, RegionId::D2, RegionId::D3})
    EXPECT_FALSE(region_membership({X, -0.01, 0.001}, r, P)) << to_string(r);
  EXPECT_THROW(region_membership({0, 0, 0}, RegionId::D1, kLarge), Error);
  // Constants in closed form.
  EXPECT_NEAR(z.c, 0.25 / (4.5 * 4.5), 1e-15);
  EXPECT_NEAR(z.d, z.c / 2, 1e-15);
  EXPECT_NEAR(z.e, (3 * 2.5 + 7 - 1.5) / (3 * (2 * 2.5 - 1.5 + 5)), 1e-15);
  auto gi = g_inverse(z, 0.0);
  ASSERT_TRUE(gi.has_value());
  EXPECT_NEAR(*gi * *gi + z.ba * *gi + z.a, 0.0, 1e-15);
}

TEST(Barriers, ZoneInvarianceAlongOrbits) {
  const auto P = kCrit205;
  std::vector<ShotSpec> specs;
  for (double e : {1e-5, 1e-6, 1e-7}) specs.push_back(ShotSpec::from_p2(e));
  for (int i = 0; i < 17; ++i) specs.push_back(ShotSpec::from_p0(std::pow(10.0, -2 + 4.0 * i / 16)));
  ASSERT_EQ(specs.size(), 20u);
  for (auto& sp : specs) {
    auto sh = launch(sp, P);
    bool in = false;
    for (auto& s : sh.traj.y) {
      const bool a = region_membership(s, RegionId::D2, P, 1e-12) || region_membership(s, RegionId::D3, P, 1e-12);
      if (in) {
        ASSERT_TRUE(a) << to_string(sp.source) << " K=" << sp.K;
      }
      in = in || a;
    }
  }
}

TEST(Barriers, PlaneOfNoReturn) {
  const auto P = kLarge;
  const auto c = large_sigma_constants(P);
  for (auto spec : {ShotSpec::from_p2(), ShotSpec::from_q1()}) {
    auto sh = launch(spec, P);
    EXPECT_EQ(classify(sh.traj, P).tag, FateTag::EntersQ3);
    bool below = false;
    std::size_t checked = 0;
    const auto& y = sh.traj.y;
    for (std::size_t i = 1; i < y.size(); ++i) {
      if (below) {
        ASSERT_LT(y[i][1], y[i - 1][1]);
        ++checked;
      }
      below = below || (y[i][1] < -c.Y0 && y[i][0] < c.X2);
    }
    EXPECT_GT(checked, 0u);
  }
}
