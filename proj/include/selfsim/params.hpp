#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "selfsim/errors.hpp"

namespace selfsim {

enum class Regime { Supercritical, Critical, Subcritical };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Supercritical: return "Supercritical";
    case Regime::Critical: return "Critical";
    case Regime::Subcritical: return "Subcritical";
  }
  return "?";
}

// Exponent quadruple of u_t = Lap(u^m) + |x|^sigma u^p.
struct Params {
  double m = 0, p = 0, sigma = 0;
  int N = 1;
  Regime regime = Regime::Supercritical;
  double regime_tol = 1e-12;

  bool critical() const { return regime == Regime::Critical; }
  // N = 2 merges Q1 and Q5 into a saddle-node.
  bool saddle_node_at_infinity() const { return N == 2; }
};

struct Exponents {
  double alpha = 0, beta = 0, L = 0;
  std::optional<double> xi_max;
  double ba() const { return beta / alpha; }
};

inline double sigma_lower_bound(double m, double p) {
  return 2.0 * (1.0 - p) / (m - 1.0);
}

inline Regime classify_regime(double m, double p, double tol = 1e-12) {
  double s = m + p - 2.0;
  if (std::abs(s) <= tol) return Regime::Critical;
  return s > 0 ? Regime::Supercritical : Regime::Subcritical;
}

inline Params validate(double m, double p, double sigma, int N,
                       double regime_tol = 1e-12) {
  auto bad = [](const std::string& s) { fail(ErrorKind::RangeViolation, s); };
  if (!std::isfinite(m) || !std::isfinite(p) || !std::isfinite(sigma))
    bad("non-finite parameter");
  if (!(m > 1.0)) bad("m must satisfy m > 1");
  if (!(p > 0.0 && p < 1.0)) bad("p must satisfy 0 < p < 1");
  if (N < 1) bad("N must be an integer >= 1");
  double lb = sigma_lower_bound(m, p);
  if (!(sigma > lb)) {
    std::ostringstream os;
    os.precision(17);
    os << "sigma <= 2(1-p)/(m-1) = " << lb;
    bad(os.str());
  }
  Params P;
  P.m = m;
  P.p = p;
  P.sigma = sigma;
  P.N = N;
  P.regime_tol = regime_tol;
  P.regime = classify_regime(m, p, regime_tol);
  return P;
}

inline Params with_sigma(const Params& P, double sigma) {
  return validate(P.m, P.p, sigma, P.N, P.regime_tol);
}

inline Exponents exponents(const Params& P) {
  Exponents E;
  E.L = P.sigma * (P.m - 1.0) + 2.0 * (P.p - 1.0);
  E.alpha = (P.sigma + 2.0) / E.L;
  E.beta = (P.m - P.p) / E.L;
  if (P.critical())
    E.xi_max = std::pow(E.beta * E.beta / (4.0 * P.m), 1.0 / (P.sigma - 2.0));
  return E;
}

}  // namespace selfsim
