#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "selfsim/dynsys.hpp"
#include "selfsim/errors.hpp"
#include "selfsim/integrate.hpp"
#include "selfsim/params.hpp"
#include "selfsim/shoot.hpp"

namespace selfsim {

enum class OriginClass { Q1Type, P2Type, P0Type, AsymptoteType, Unknown };
enum class InterfaceType { I, II, Merged };

inline const char* to_string(OriginClass c) {
  switch (c) {
    case OriginClass::Q1Type: return "Q1Type";
    case OriginClass::P2Type: return "P2Type";
    case OriginClass::P0Type: return "P0Type";
    case OriginClass::AsymptoteType: return "AsymptoteType";
    case OriginClass::Unknown: return "Unknown";
  }
  return "?";
}
inline const char* to_string(InterfaceType t) {
  switch (t) {
    case InterfaceType::I: return "I";
    case InterfaceType::II: return "II";
    case InterfaceType::Merged: return "merged";
  }
  return "?";
}

struct Interface {
  double xi0 = 0;
  double theta = 0;      // f ~ A (xi0 - xi)^theta
  double amplitude = 0;
  InterfaceType type = InterfaceType::I;
  std::size_t points = 0;
  double f_lo = 0, f_hi = 0;  // window in f
  double flux_ratio = 0;      // |(f^m)'| at the last interior sample over its max
};

struct Profile {
  std::vector<double> xi, f, fp, eta;
  std::vector<Vec3> phase;  // empty for synthetic profiles
  OriginClass origin = OriginClass::Unknown;
  std::optional<Interface> interface;
  double y_consistency = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const { return xi.size(); }
  bool has_eta() const { return eta.size() == xi.size() && !eta.empty(); }
  bool has_phase() const { return phase.size() == xi.size() && !phase.empty(); }
};

// ---------------------------------------------------------- FD weights

// Fornberg weights for derivatives 0..M at x0 on nodes x.
inline std::vector<std::vector<double>> fd_weights(double x0, const std::vector<double>& x, int M) {
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(M + 1, std::vector<double>(n + 1, 0.0));
  double c1 = 1.0, c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    int mn = std::min(i, M);
    double c2 = 1.0, c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

// First derivative dy/ds on a 5-point stencil (one-sided near the ends).
inline std::vector<double> fd_derivative(const std::vector<double>& s, const std::vector<double>& y) {
  const std::size_t n = s.size();
  std::vector<double> d(n, 0.0);
  if (n < 5) fail(ErrorKind::DegenerateSample, "finite differences need at least 5 samples");
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t a = i < 2 ? 0 : std::min(i - 2, n - 5);
    std::vector<double> xs(s.begin() + a, s.begin() + a + 5);
    auto w = fd_weights(s[i], xs, 1);
    double acc = 0;
    for (int k = 0; k < 5; ++k) acc += w[1][k] * y[a + k];
    d[i] = acc;
  }
  return d;
}

// ------------------------------------------------------ reconstruction

// Inverse of the phase variables: solves for (ln xi, ln f) from (ln X, ln Z).
inline std::pair<double, double> invert_phase(const Params& P, double X, double Z) {
  const auto E = exponents(P);
  const double a = std::log(X) - std::log(P.m / E.alpha);
  const double b = std::log(Z) - std::log(P.m / (E.alpha * E.alpha));
  const double det = -E.L;  // det [[-2, m-1], [sigma-2, m+p-2]]
  const double lx = ((P.m + P.p - 2) * a - (P.m - 1) * b) / det;
  const double lf = (-2 * b - (P.sigma - 2) * a) / det;
  return {std::exp(lx), std::exp(lf)};
}

// Integral of X over one step: d ln xi / d eta = X, with dX/d eta = X((m-1)Y - 2X)
// from the state, so the step uses the cubic Hermite rule.
inline double log_xi_step(const Params& P, const Vec3& a, const Vec3& b, double de) {
  const double da = a[0] * ((P.m - 1) * a[1] - 2 * a[0]);
  const double db = b[0] * ((P.m - 1) * b[1] - 2 * b[0]);
  return 0.5 * de * (a[0] + b[0]) + de * de / 12.0 * (da - db);
}

inline Vec3 phase_of(const Params& P, double xi, double f, double fp) {
  const auto E = exponents(P);
  return {P.m / E.alpha * std::pow(xi, -2) * std::pow(f, P.m - 1),
          P.m / E.alpha / xi * std::pow(f, P.m - 2) * fp,
          P.m / (E.alpha * E.alpha) * std::pow(xi, P.sigma - 2) * std::pow(f, P.m + P.p - 2)};
}

inline Profile reconstruct(const Trajectory& tr, const Params& P,
                           OriginClass origin = OriginClass::Unknown) {
  if (tr.chart != Chart::Finite) fail(ErrorKind::DegenerateSample, "reconstruction needs the finite chart");
  const auto E = exponents(P);
  const std::size_t n = tr.size();
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& s = tr.y[i];
    bool ok = s[0] > 0 && s[2] > 0 && std::isfinite(s[0]) && std::isfinite(s[2]);
    if (!ok) {
      if (i == 0 || i + 1 == n) continue;
      fail(ErrorKind::DegenerateSample, "X or Z vanishes at interior sample " + std::to_string(i));
    }
    idx.push_back(i);
  }
  Profile pr;
  pr.origin = origin;
  std::vector<double> xi, f, fp, eta;
  std::vector<Vec3> ph;
  for (auto i : idx) {
    auto [x, v] = invert_phase(P, tr.y[i][0], tr.y[i][2]);
    xi.push_back(x);
    f.push_back(v);
    fp.push_back(E.alpha / P.m * x * tr.y[i][1] * std::pow(v, 2 - P.m));
    eta.push_back(tr.eta[i]);
    ph.push_back(tr.y[i]);
  }
  if (xi.size() >= 2 && xi.back() < xi.front()) {
    std::reverse(xi.begin(), xi.end());
    std::reverse(f.begin(), f.end());
    std::reverse(fp.begin(), fp.end());
    std::reverse(eta.begin(), eta.end());
    std::reverse(ph.begin(), ph.end());
  }
  // Where ln xi moves less per sample than the inversion resolves (X tiny
  // near an interface), carry xi by integrating d ln xi / d eta = X instead.
  for (std::size_t i = 1; i < xi.size(); ++i) {
    const double dl = log_xi_step(P, ph[i - 1], ph[i], eta[i] - eta[i - 1]);
    if (dl < 1e-6) xi[i] = xi[i - 1] * std::exp(dl);
  }
  for (std::size_t i = 0; i < xi.size(); ++i) {
    if (!pr.xi.empty() && !(xi[i] > pr.xi.back())) continue;
    pr.xi.push_back(xi[i]);
    pr.f.push_back(f[i]);
    pr.fp.push_back(fp[i]);
    pr.eta.push_back(eta[i]);
    pr.phase.push_back(ph[i]);
  }
  if (pr.size() >= 5) {
    auto d = fd_derivative(pr.eta, pr.f);
    std::vector<double> dx(pr.size());
    for (std::size_t i = 0; i < pr.size(); ++i) dx[i] = pr.xi[i] * pr.phase[i][0];
    double worst = 0, scale = 0;
    for (std::size_t i = 2; i + 2 < pr.size(); ++i) scale = std::max(scale, std::abs(pr.fp[i]));
    for (std::size_t i = 2; i + 2 < pr.size(); ++i)
      worst = std::max(worst, std::abs(d[i] / dx[i] - pr.fp[i]));
    pr.y_consistency = scale > 0 ? worst / scale : 0.0;
  }
  return pr;
}

// Continues a trajectory that is settling onto P0 until f drops below
// ratio * max f.  The approach runs along a center manifold while Y relaxes at
// rate beta/alpha, so the tail is integrated with the Rosenbrock pair.
inline void deepen_tail(Trajectory& tr, const Params& P, double ratio = 1e-7,
                        double rtol = 1e-8, std::size_t max_steps = 200000) {
  double fmax = 0;
  for (auto& s : tr.y)
    if (s[0] > 0 && s[2] > 0) fmax = std::max(fmax, invert_phase(P, s[0], s[2]).second);
  if (!(fmax > 0)) fail(ErrorKind::DegenerateSample, "no positive samples to deepen");
  Tolerances tol;
  tol.rtol = rtol;
  tol.atol = {0.0, 0.0, 0.0};
  tol.nonneg = {true, false, true};
  tol.max_eta = 1e300;
  tol.max_steps = max_steps;
  tol.h_min = 0;
  auto stop = [&](const Vec3& s) {
    return s[0] > 0 && s[2] > 0 && invert_phase(P, s[0], s[2]).second < ratio * fmax;
  };
  continue_rosenbrock(tr, FiniteField(P), tol, stop);
}

// A near-connection into P1 (the sigma* orbit) only passes P1 at a finite
// distance.  Truncates at the closest approach, drops the component along the
// unstable eigenvector of P1 and integrates into P1 until f < ratio * max f.
inline void complete_to_p1(Trajectory& tr, const Params& P, std::size_t index,
                           double ratio = 1e-7, double rtol = 1e-11) {
  if (P.critical()) fail(ErrorKind::RegimeError, "P1 is replaced by the parabola when m+p=2");
  if (index >= tr.size()) fail(ErrorKind::ConfigError, "closest-approach index out of range");
  const FiniteField F(P);
  const Vec3 p1{0.0, -exponents(P).ba(), 0.0};
  const Mat3 J = F.jacobian(p1);
  auto ev = eigenvalues(J);
  Mat3 V{};
  int unstable = -1;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = real_part(eigenvector(J, ev[k]));
    for (int i = 0; i < 3; ++i) V[i][k] = e[i];
    if (ev[k].real() > 0) unstable = k;
  }
  if (unstable < 0) fail(ErrorKind::SeedError, "P1 has no unstable direction");
  const Vec3 d = tr.y[index] - p1;
  Vec3 c = solve3(V, d);
  c[unstable] = 0.0;
  Vec3 start = p1;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) start[i] += V[i][k] * c[k];
  start[0] = std::max(start[0], 0.0);
  start[2] = std::max(start[2], 0.0);

  double fmax = 0;
  for (std::size_t i = 0; i <= index; ++i) {
    const Vec3& sv = tr.y[i];
    if (sv[0] > 0 && sv[2] > 0) fmax = std::max(fmax, invert_phase(P, sv[0], sv[2]).second);
  }
  const double eta0 = tr.eta[index];
  tr.eta.resize(index);
  tr.y.resize(index);
  EventSet es;
  es.balls.push_back(BallSpec{"tail_target",
                              [&](const Vec3& sv) {
                                if (!(sv[0] > 0 && sv[2] > 0)) return 0.0;
                                return invert_phase(P, sv[0], sv[2]).second / fmax;
                              },
                              ratio, true});
  Tolerances tol;
  tol.rtol = rtol;
  tol.atol = {0.0, 1e-14, 0.0};
  tol.nonneg = {true, false, true};
  tol.max_eta = 1e4;
  auto tail = integrate(F, start, tr.direction, es, tol, eta0, Chart::Finite);
  tr.eta.insert(tr.eta.end(), tail.eta.begin(), tail.eta.end());
  tr.y.insert(tr.y.end(), tail.y.begin(), tail.y.end());
  tr.events.insert(tr.events.end(), tail.events.begin(), tail.events.end());
  tr.accepted += tail.accepted;
  tr.rejected += tail.rejected;
}

inline Profile profile_from_samples(std::vector<double> xi, std::vector<double> f) {
  Profile pr;
  if (xi.size() != f.size()) fail(ErrorKind::DegenerateSample, "xi and f sizes differ");
  for (std::size_t i = 1; i < xi.size(); ++i)
    if (!(xi[i] > xi[i - 1])) fail(ErrorKind::DegenerateSample, "xi must be strictly increasing");
  pr.xi = std::move(xi);
  pr.f = std::move(f);
  if (pr.size() >= 5) pr.fp = fd_derivative(pr.xi, pr.f);
  return pr;
}

// ------------------------------------------------------------- fitting

struct LineFit {
  double slope = 0, intercept = 0;
  std::size_t n = 0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit L;
  L.n = x.size();
  if (L.n < 2) return L;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < L.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= L.n;
  my /= L.n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < L.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  L.slope = sxy / sxx;
  L.intercept = my - L.slope * mx;
  return L;
}

struct OriginFit {
  double exponent = 0;
  double constant = 0;  // f ~ constant * xi^exponent
  std::size_t points = 0;
};

inline OriginFit fit_origin(const Profile& pr, double lo = 1e-3, double hi = 1e-2) {
  std::vector<double> lx, lf;
  for (std::size_t i = 0; i < pr.size(); ++i)
    if (pr.xi[i] >= lo * (1 - 1e-12) && pr.xi[i] <= hi && pr.f[i] > 0) {
      lx.push_back(std::log(pr.xi[i]));
      lf.push_back(std::log(pr.f[i]));
    }
  if (lx.size() < 30)
    fail(ErrorKind::DegenerateSample,
         "origin window holds " + std::to_string(lx.size()) + " samples, need 30");
  auto L = least_squares(lx, lf);
  return {L.slope, std::exp(L.intercept), L.n};
}

inline Interface fit_interface(const Profile& pr, const Params& P) {
  const std::size_t n = pr.size();
  if (n < 30) fail(ErrorKind::NoInterface, "too few samples");
  double fmax = *std::max_element(pr.f.begin(), pr.f.end());
  const double flast = pr.f.back();
  if (!(flast < 1e-6 * fmax)) fail(ErrorKind::NoInterface, "f does not fall below 1e-6 max f");

  // Terminal decreasing segment.
  std::size_t start = n - 1;
  while (start > 0 && pr.f[start - 1] > pr.f[start]) --start;

  // Last decade of f values, widened until it holds 30 samples.
  double fhi = 10 * flast;
  std::size_t w0 = n - 1;
  for (;;) {
    while (w0 > start && pr.f[w0 - 1] <= fhi) --w0;
    if (n - w0 >= 30 || w0 == start || fhi >= 1e-2 * fmax) break;
    fhi *= 10;
  }
  if (n - w0 < 5) fail(ErrorKind::NoInterface, "terminal segment too short");

  // xi_i - xi_last without cancellation: d(ln xi)/d(eta) = X.
  std::vector<double> dxi(n - w0), phi(n - w0);
  const bool exact = pr.has_phase() && pr.has_eta();
  double s = 0;
  dxi.back() = 0;
  for (std::size_t i = n - 1; i > w0; --i) {
    if (exact) {
      s += log_xi_step(P, pr.phase[i - 1], pr.phase[i], pr.eta[i] - pr.eta[i - 1]);
      dxi[i - 1 - w0] = pr.xi.back() * std::expm1(-s);
    } else {
      dxi[i - 1 - w0] = pr.xi[i - 1] - pr.xi.back();
    }
  }
  for (std::size_t i = w0; i < n; ++i) {
    if (exact)
      phi[i - w0] = pr.xi[i] * pr.phase[i][0] / pr.phase[i][1];  // f/f' = xi X / Y
    else
      phi[i - w0] = pr.f[i] / pr.fp[i];
  }
  auto L = least_squares(dxi, phi);
  Interface I;
  I.theta = 1.0 / L.slope;
  I.xi0 = pr.xi.back() - L.intercept * I.theta;
  I.points = L.n;
  I.f_lo = flast;
  I.f_hi = pr.f[w0];
  const double d0 = I.xi0 - pr.xi.back() - dxi.front();
  I.amplitude = d0 > 0 ? pr.f[w0] / std::pow(d0, I.theta) : std::numeric_limits<double>::quiet_NaN();
  const double t1 = 1.0 / (P.m - 1), t2 = 1.0 / (1 - P.p);
  if (P.critical())
    I.type = InterfaceType::Merged;
  else
    I.type = std::abs(I.theta - t1) < std::abs(I.theta - t2) ? InterfaceType::I : InterfaceType::II;

  // Flux (f^m)' = m f^{m-1} f'.
  double fmx = 0, flux_last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double fl = std::abs(P.m * std::pow(pr.f[i], P.m - 1) * pr.fp[i]);
    fmx = std::max(fmx, fl);
    if (i + 2 == n) flux_last = fl;
  }
  I.flux_ratio = fmx > 0 ? flux_last / fmx : 0.0;
  return I;
}

// ----------------------------------------------------------- residuals

struct ResidualReport {
  double max_rel = 0, l2_rel = 0;
  double scale = 0;  // largest single term
  std::size_t points = 0;
  std::vector<double> xi, residual;
};

// Residual of (f^m)'' + (N-1)(f^m)'/xi - alpha f + beta xi f' + xi^sigma f^p, by
// finite differences along the sampling parameter (eta when present, xi otherwise).
// Samples whose xi lies within relative `edge` of the last xi are left out: there
// the sampling parameter no longer resolves xi and differencing is meaningless.
inline ResidualReport ssode_residual(const Profile& pr, const Params& P, std::size_t margin = 4,
                                     double edge = 1e-6) {
  const auto E = exponents(P);
  const std::size_t n = pr.size();
  if (n < 2 * margin + 5) fail(ErrorKind::DegenerateSample, "profile too short for residuals");
  const std::vector<double>& s = pr.has_eta() ? pr.eta : pr.xi;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::pow(pr.f[i], P.m);
  // d xi / d eta = xi X exactly; differencing xi itself cancels where X is tiny.
  std::vector<double> xs;
  if (pr.has_eta() && pr.has_phase()) {
    xs.resize(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = pr.xi[i] * pr.phase[i][0];
  } else {
    xs = fd_derivative(s, pr.xi);
  }
  auto fs = fd_derivative(s, pr.f);
  auto gs = fd_derivative(s, g);
  std::vector<double> fpr(n), gp(n);
  for (std::size_t i = 0; i < n; ++i) {
    fpr[i] = fs[i] / xs[i];
    gp[i] = gs[i] / xs[i];
  }
  auto gps = fd_derivative(s, gp);
  ResidualReport R;
  double sum2 = 0;
  std::vector<double> raw;
  const double xend = pr.xi.back();
  for (std::size_t i = margin; i + margin < n; ++i) {
    const double x = pr.xi[i], fv = pr.f[i];
    if (std::abs(xend - x) <= edge * std::abs(xend)) continue;
    const double t1 = gps[i] / xs[i];
    const double t2 = (P.N - 1) * gp[i] / x;
    const double t3 = -E.alpha * fv;
    const double t4 = E.beta * x * fpr[i];
    const double t5 = std::pow(x, P.sigma) * std::pow(fv, P.p);
    R.scale = std::max({R.scale, std::abs(t1), std::abs(t2), std::abs(t3), std::abs(t4), std::abs(t5)});
    R.xi.push_back(x);
    raw.push_back(t1 + t2 + t3 + t4 + t5);
  }
  R.points = raw.size();
  if (R.points == 0) fail(ErrorKind::DegenerateSample, "no interior samples for residuals");
  for (double r : raw) {
    R.max_rel = std::max(R.max_rel, std::abs(r) / R.scale);
    sum2 += (r / R.scale) * (r / R.scale);
    R.residual.push_back(r);
  }
  R.l2_rel = std::sqrt(sum2 / std::max<std::size_t>(1, R.points));
  return R;
}

// Natural cubic spline.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 3) fail(ErrorKind::DegenerateSample, "spline needs 3 nodes");
    m_.assign(n, 0.0);
    std::vector<double> c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      const double a = h0 / 6, b = (h0 + h1) / 3, cc = h1 / 6;
      const double r = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
      const double den = b - a * c[i - 1];
      c[i] = cc / den;
      d[i] = (r - a * d[i - 1]) / den;
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m_[i] = d[i] - c[i] * m_[i + 1];
      if (i == 1) break;
    }
  }
  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }

  // Value and first two derivatives.
  std::array<double, 3> eval(double t) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    i = std::min(i, x_.size() - 2);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h, B = (t - x_[i]) / h;
    const double v = A * y_[i] + B * y_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6;
    const double d1 = (y_[i + 1] - y_[i]) / h - (3 * A * A - 1) / 6 * h * m_[i] + (3 * B * B - 1) / 6 * h * m_[i + 1];
    const double d2 = A * m_[i] + B * m_[i + 1];
    return {v, d1, d2};
  }

 private:
  std::vector<double> x_, y_, m_;
};

// Spline over a thinned copy of the profile nodes.
inline CubicSpline profile_spline(const Profile& pr, std::size_t max_nodes = 4000) {
  std::vector<double> x, y;
  const double span = pr.xi.back() - pr.xi.front();
  const double dmin = span / static_cast<double>(max_nodes);
  for (std::size_t i = 0; i < pr.size(); ++i) {
    if (!x.empty() && pr.xi[i] - x.back() < dmin && i + 1 != pr.size()) continue;
    if (!x.empty() && i + 1 == pr.size() && pr.xi[i] - x.back() < 0.5 * dmin) {
      x.back() = pr.xi[i];
      y.back() = pr.f[i];
      continue;
    }
    x.push_back(pr.xi[i]);
    y.push_back(pr.f[i]);
  }
  return CubicSpline(x, y);
}

struct PdeReport {
  std::size_t evaluated = 0, skipped = 0;
  double worst_log_ratio = 0;  // max |log10(pde / ssode-scaled)| over points above the floor
  double max_rel_pde = 0;      // PDE residual over the largest PDE term
  bool proportional = true;
};

// Checks u_t - Lap(u^m) - r^sigma u^p against -(T-t)^{-alpha-1} R(xi) for
// u = (T-t)^{-alpha} f(r (T-t)^beta), f the spline of the profile.
inline PdeReport pde_residual(const Profile& pr, const Params& P, double T,
                              const std::vector<double>& r_grid, const std::vector<double>& t_grid,
                              double noise_floor = 1e-6, double factor = 10.0) {
  if (!(T > 0)) fail(ErrorKind::ConfigError, "T must be positive");
  const auto E = exponents(P);
  const auto S = profile_spline(pr);
  const double margin = 0.02 * (S.hi() - S.lo());
  const double xlo = S.lo() + margin, xhi = S.hi() - margin;
  auto fval = [&](double xi) { return S.eval(xi)[0]; };
  auto u = [&](double r, double t) {
    const double tau = T - t;
    return std::pow(tau, -E.alpha) * fval(r * std::pow(tau, E.beta));
  };
  PdeReport rep;
  for (double t : t_grid) {
    if (!(t < T)) {
      rep.skipped += r_grid.size();
      continue;
    }
    const double tau = T - t;
    for (double r : r_grid) {
      const double xi = r * std::pow(tau, E.beta);
      const double dr = 1e-4 * r, dt = 1e-4 * tau;
      const double xa = (r - dr) * std::pow(tau, E.beta), xb = (r + dr) * std::pow(tau + dt, E.beta);
      if (!(r > 0) || xi < xlo || xi > xhi || xa < xlo || xb > xhi) {
        ++rep.skipped;
        continue;
      }
      const double u0 = u(r, t);
      if (!(u0 > 0)) {
        ++rep.skipped;
        continue;
      }
      const double ut = (u(r, t + dt) - u(r, t - dt)) / (2 * dt);
      auto um = [&](double rr) { return std::pow(u(rr, t), P.m); };
      const double a = um(r - dr), b = um(r), c = um(r + dr);
      const double urr = (a - 2 * b + c) / (dr * dr);
      const double ur = (c - a) / (2 * dr);
      const double lap = urr + (P.N - 1) / r * ur;
      const double src = std::pow(r, P.sigma) * std::pow(u0, P.p);
      const double res = ut - lap - src;

      const auto v = S.eval(xi);
      const double g1 = P.m * std::pow(v[0], P.m - 1) * v[1];
      const double g2 = P.m * (P.m - 1) * std::pow(v[0], P.m - 2) * v[1] * v[1] + P.m * std::pow(v[0], P.m - 1) * v[2];
      const double terms[5] = {g2, (P.N - 1) * g1 / xi, -E.alpha * v[0], E.beta * xi * v[1],
                               std::pow(xi, P.sigma) * std::pow(v[0], P.p)};
      double Rs = 0, big = 0;
      for (double q : terms) {
        Rs += q;
        big = std::max(big, std::abs(q));
      }
      const double scale = std::pow(tau, -E.alpha - 1);
      const double ref = -scale * Rs;
      const double big_pde = std::max({std::abs(ut), std::abs(lap), std::abs(src)});
      rep.max_rel_pde = std::max(rep.max_rel_pde, std::abs(res) / big_pde);
      ++rep.evaluated;
      // Rounding in the difference stencils, with headroom.
      const double eps = std::numeric_limits<double>::epsilon();
      const double fd_noise = 100 * eps * (4 * b / (dr * dr) + (P.N - 1) / r * c / dr + u0 / dt);
      const double floor = std::max(noise_floor * scale * big, fd_noise);
      if (std::abs(res) <= floor && std::abs(ref) <= floor) continue;
      if (std::abs(ref) == 0 || res * ref <= 0) {
        rep.proportional = false;
        rep.worst_log_ratio = std::numeric_limits<double>::infinity();
        continue;
      }
      const double lr = std::abs(std::log10(res / ref));
      rep.worst_log_ratio = std::max(rep.worst_log_ratio, lr);
      if (lr > std::log10(factor)) rep.proportional = false;
    }
  }
  if (rep.evaluated == 0) fail(ErrorKind::GridOutsideSupport, "no grid point maps inside the sampled profile");
  return rep;
}

// Profile value with the origin behavior used below the first sample and 0 past the interface.
inline double profile_value(const Profile& pr, const Params& P, double xi) {
  if (xi >= pr.xi.back()) {
    if (pr.interface && xi >= pr.interface->xi0) return 0.0;
    return pr.f.back();
  }
  if (xi <= pr.xi.front()) {
    const double f0 = pr.f.front(), x0 = pr.xi.front();
    switch (pr.origin) {
      case OriginClass::P0Type: return f0 * std::pow(xi / x0, (P.sigma + 2) / (P.m - P.p));
      case OriginClass::P2Type: return f0 * std::pow(xi / x0, 2 / (P.m - 1));
      default: return f0;
    }
  }
  auto it = std::upper_bound(pr.xi.begin(), pr.xi.end(), xi);
  std::size_t i = static_cast<std::size_t>(it - pr.xi.begin()) - 1;
  const double w = (xi - pr.xi[i]) / (pr.xi[i + 1] - pr.xi[i]);
  return pr.f[i] * (1 - w) + pr.f[i + 1] * w;
}

inline double self_similar_u(const Profile& pr, const Params& P, double T, double r, double t) {
  const auto E = exponents(P);
  const double tau = T - t;
  return std::pow(tau, -E.alpha) * profile_value(pr, P, r * std::pow(tau, E.beta));
}

// ------------------------------------------------------ shot to profile

enum class TailMode { Auto, Deepen, CompleteP1, None };

struct ProfileOptions {
  ShotOptions shot = [] {
    ShotOptions o;
    o.rtol = 1e-11;
    return o;
  }();
  TailMode tail = TailMode::Auto;
  double tail_ratio = 1e-7;
  double p1_near = 1e-2;  // relative to |P1|; Auto completes into P1 below this
};

struct ProfileRun {
  Shot shot;
  OrbitFate fate;
  Profile profile;
  std::string tail = "none";
  std::optional<OriginFit> origin_fit;
  std::string origin_note;
  std::string interface_note;
};

inline OriginClass origin_of(const ShotSpec& spec, const OrbitFate& fate) {
  switch (spec.source) {
    case Source::FromP2: return OriginClass::P2Type;
    case Source::FromP0: return OriginClass::P0Type;
    case Source::FromQ1: return OriginClass::Q1Type;
    case Source::BackwardFromInterface:
      switch (fate.tag) {
        case FateTag::EntersP0: return OriginClass::P0Type;
        case FateTag::EntersP2: return OriginClass::P2Type;
        case FateTag::EntersQ1: return OriginClass::Q1Type;
        case FateTag::EntersQ5: return OriginClass::AsymptoteType;
        default: return OriginClass::Unknown;
      }
  }
  return OriginClass::Unknown;
}

// Shoots, completes the tail toward the interface, reconstructs and fits.
inline ProfileRun profile_shot(const ShotSpec& spec, const Params& P, const ProfileOptions& o = {}) {
  ProfileRun run;
  run.shot = launch(spec, P, o.shot);
  run.fate = classify(run.shot.traj, P);
  Trajectory& tr = run.shot.traj;
  const bool forward = run.shot.direction == Direction::Forward;
  TailMode mode = o.tail;
  const auto* m1 = tr.monitor("P1");
  if (mode == TailMode::Auto) {
    mode = TailMode::None;
    if (forward && (run.fate.tag == FateTag::EntersP0 || run.fate.tag == FateTag::EntersParabola))
      mode = TailMode::Deepen;
    if (forward && !P.critical() && m1 &&
        m1->min_distance < o.p1_near * exponents(P).ba() && run.fate.tag != FateTag::EntersP0)
      mode = TailMode::CompleteP1;
  }
  if (mode == TailMode::Deepen) {
    deepen_tail(tr, P, o.tail_ratio);
    run.tail = "deepened";
  } else if (mode == TailMode::CompleteP1) {
    if (!m1) fail(ErrorKind::RegimeError, "no P1 monitor on this trajectory");
    complete_to_p1(tr, P, m1->index_at_min, o.tail_ratio, std::max(o.shot.rtol, 1e-12));
    run.tail = "completed_to_P1";
    run.fate.tag = FateTag::EntersP1;
    run.fate.distance = m1->min_distance;
  }
  run.profile = reconstruct(tr, P, origin_of(spec, run.fate));
  try {
    run.origin_fit = fit_origin(run.profile);
  } catch (const Error& e) {
    run.origin_note = e.what();
  }
  try {
    run.profile.interface = fit_interface(run.profile, P);
  } catch (const Error& e) {
    run.interface_note = e.what();
  }
  return run;
}

// Expected origin exponent for each class; Q1 profiles are flat at 0.
inline std::optional<double> expected_origin_exponent(OriginClass c, const Params& P) {
  switch (c) {
    case OriginClass::P0Type: return (P.sigma + 2) / (P.m - P.p);
    case OriginClass::P2Type: return 2 / (P.m - 1);
    case OriginClass::Q1Type: return 0.0;
    default: return std::nullopt;
  }
}

}  // namespace selfsim
