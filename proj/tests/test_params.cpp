#include <gtest/gtest.h>

#include <random>

#include "selfsim/params.hpp"

using namespace selfsim;

namespace {

Params random_params(std::mt19937_64& g) {
  std::uniform_real_distribution<double> um(1.05, 6.0), up(0.02, 0.98), us(0.05, 40.0);
  std::uniform_int_distribution<int> un(1, 8);
  const double m = um(g), p = up(g);
  return validate(m, p, sigma_lower_bound(m, p) + us(g), un(g));
}

ErrorKind kind_of(double m, double p, double s, int N) {
  try {
    validate(m, p, s, N);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Unclassifiable;
}

}  // namespace

TEST(Params, LowerBoundExamples) {
  EXPECT_DOUBLE_EQ(sigma_lower_bound(3, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(sigma_lower_bound(1.5, 0.5), 2.0);
  for (double p : {0.1, 0.3, 0.7, 0.9}) EXPECT_NEAR(sigma_lower_bound(2 - p, p), 2.0, 1e-14);
}

TEST(Params, ValidateExamples) {
  auto P = validate(3, 0.5, 3.5, 4);
  EXPECT_EQ(P.regime, Regime::Supercritical);
  EXPECT_FALSE(P.saddle_node_at_infinity());
  auto C = validate(1.5, 0.5, 3, 2);
  EXPECT_EQ(C.regime, Regime::Critical);
  EXPECT_TRUE(C.saddle_node_at_infinity());
  EXPECT_EQ(validate(1.5, 0.2, 4, 2).regime, Regime::Subcritical);
  EXPECT_EQ(kind_of(3, 0.5, 0.4, 4), ErrorKind::RangeViolation);
  try {
    validate(3, 0.5, 0.4, 4);
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("0.5"), std::string::npos);
  }
}

TEST(Params, RejectsBoundaryAndOutOfScope) {
  EXPECT_EQ(kind_of(3, 0.5, 0.5, 4), ErrorKind::RangeViolation);  // equality excluded
  EXPECT_EQ(kind_of(1.0, 0.5, 3, 1), ErrorKind::RangeViolation);
  EXPECT_EQ(kind_of(0.8, 0.5, 3, 1), ErrorKind::RangeViolation);
  EXPECT_EQ(kind_of(3, 0.0, 3, 1), ErrorKind::RangeViolation);
  EXPECT_EQ(kind_of(3, 1.0, 3, 1), ErrorKind::RangeViolation);
  EXPECT_EQ(kind_of(3, 0.5, 3, 0), ErrorKind::RangeViolation);
  EXPECT_EQ(kind_of(3, 0.5, std::nan(""), 1), ErrorKind::RangeViolation);
  EXPECT_EQ(kind_of(3, 0.5, INFINITY, 1), ErrorKind::RangeViolation);
}

TEST(Params, RegimeTolerance) {
  EXPECT_EQ(classify_regime(1.5, 0.5), Regime::Critical);
  EXPECT_EQ(classify_regime(1.5 + 1e-13, 0.5), Regime::Critical);
  EXPECT_EQ(classify_regime(1.5 + 1e-11, 0.5), Regime::Supercritical);
  EXPECT_EQ(classify_regime(1.5 - 1e-11, 0.5), Regime::Subcritical);
}

TEST(Params, ExponentExamples) {
  auto E = exponents(validate(3, 0.5, 3.5, 4));
  EXPECT_DOUBLE_EQ(E.L, 6.0);
  EXPECT_NEAR(E.alpha, 0.916667, 1e-6);
  EXPECT_NEAR(E.beta, 0.416667, 1e-6);
  EXPECT_FALSE(E.xi_max.has_value());
  auto C = exponents(validate(1.5, 0.5, 3, 2));
  EXPECT_NEAR(C.alpha, 10.0, 1e-12);
  EXPECT_NEAR(C.beta, 2.0, 1e-12);
  ASSERT_TRUE(C.xi_max.has_value());
  EXPECT_NEAR(*C.xi_max, 2.0 / 3.0, 1e-12);
}

TEST(Params, IdentitiesOnRandomTuples) {
  std::mt19937_64 g(17);
  for (int i = 0; i < 10000; ++i) {
    auto P = random_params(g);
    auto E = exponents(P);
    ASSERT_GT(E.alpha, 0);
    ASSERT_GT(E.beta, 0);
    ASSERT_GT(E.L, 0);
    ASSERT_NEAR(E.alpha * (P.m - 1) - 2 * E.beta, 1.0, 1e-12);
    ASSERT_NEAR(P.sigma * E.beta - (1 - P.p) * E.alpha, 1.0, 1e-12);
    ASSERT_FALSE(E.xi_max.has_value());
  }
}

TEST(Params, XiMaxOnCriticalFamily) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> up(0.05, 0.95), us(0.1, 10);
  for (int i = 0; i < 1000; ++i) {
    // m = 2 - p is exact only for some binary fractions; pick those.
    const double p = std::ldexp(std::floor(std::ldexp(up(g), 20)), -20);
    const double m = 2 - p;
    const double s = 2 + us(g);
    auto P = validate(m, p, s, 1 + i % 5);
    ASSERT_TRUE(P.critical());
    auto E = exponents(P);
    ASSERT_TRUE(E.xi_max.has_value());
    const double ref = std::pow(1 / (m * (s - 2) * (s - 2)), 1 / (s - 2));
    ASSERT_NEAR(*E.xi_max / ref, 1.0, 1e-12) << m << ' ' << p << ' ' << s << ' ' << *E.xi_max << ' ' << ref;
  }
}
