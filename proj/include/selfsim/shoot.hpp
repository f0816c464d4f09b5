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
#include "selfsim/parallel.hpp"
#include "selfsim/params.hpp"

namespace selfsim {

enum class Source { FromP2, FromP0, FromQ1, BackwardFromInterface };

inline const char* to_string(Source s) {
  switch (s) {
    case Source::FromP2: return "FromP2";
    case Source::FromP0: return "FromP0";
    case Source::FromQ1: return "FromQ1";
    case Source::BackwardFromInterface: return "BackwardFromInterface";
  }
  return "?";
}

struct ShotSpec {
  Source source = Source::FromP2;
  double eps = 1e-6;     // seed offset (FromP2, backward shots)
  double K = 1.0;        // f ~ K xi^{(sigma+2)/(m-p)} (FromP0)
  double C = 1.0;        // f^{m-1} ~ C + ... (FromQ1)
  double xi_seed = 1e-3;
  double v0 = 1.0;       // P(v0), m+p > 2
  std::optional<double> lambda;  // P0^lambda, m+p = 2

  static ShotSpec from_p2(double eps = 1e-6) {
    ShotSpec s;
    s.source = Source::FromP2;
    s.eps = eps;
    return s;
  }
  static ShotSpec from_p0(double K = 1.0, double xi_seed = 1e-3) {
    ShotSpec s;
    s.source = Source::FromP0;
    s.K = K;
    s.xi_seed = xi_seed;
    return s;
  }
  static ShotSpec from_q1(double C = 1.0, double xi_seed = 1e-3) {
    ShotSpec s;
    s.source = Source::FromQ1;
    s.C = C;
    s.xi_seed = xi_seed;
    return s;
  }
  static ShotSpec backward(double v0, double eps = 1e-6) {
    ShotSpec s;
    s.source = Source::BackwardFromInterface;
    s.v0 = v0;
    s.eps = eps;
    return s;
  }
  static ShotSpec backward_parabola(double lambda, double eps = 1e-6) {
    ShotSpec s;
    s.source = Source::BackwardFromInterface;
    s.lambda = lambda;
    s.eps = eps;
    return s;
  }
};

inline void check_spec(const ShotSpec& s) {
  auto bad = [](const char* w) { fail(ErrorKind::ConfigError, w); };
  if (s.source == Source::FromP2 || s.source == Source::BackwardFromInterface)
    if (!(s.eps > 0 && s.eps <= 1e-3)) bad("eps must lie in (0, 1e-3]");
  if (s.source == Source::FromP0 && !(s.K > 0)) bad("K must be positive");
  if (s.source == Source::FromQ1 && !(s.C > 0)) bad("C must be positive");
  if ((s.source == Source::FromP0 || s.source == Source::FromQ1) && !(s.xi_seed > 0))
    bad("xi_seed must be positive");
  if (s.source == Source::BackwardFromInterface && !s.lambda && !(s.v0 > 0))
    bad("v0 must be positive");
}

struct ShotOptions {
  double rtol = 1e-9;
  Vec3 atol{1e-30, 1e-12, 1e-30};
  double capture_radius = 1e-4;
  double refine_radius = 1e-8;  // parabola capture used to read lambda
  double diverge = 1e6;
  double max_eta = 0;           // 0 picks a horizon per source
  int dense_per_step = 0;
  std::size_t max_steps = 20'000'000;
  // Explicit steps before a run still short of its target switches to the
  // Rosenbrock pair (center-manifold approaches are stiff).  0 disables.
  std::size_t explicit_budget = 1'000'000;
};

struct Shot {
  ShotSpec spec;
  Params params;
  Direction direction = Direction::Forward;
  Vec3 seed{};
  Trajectory traj;
};

// Distance to the critical parabola, measured in X and Z at the Y of the state.
inline double parabola_distance(const Params& P, const Vec3& s) {
  const double ba = exponents(P).ba();
  const double yc = std::clamp(s[1], -ba, 0.0);
  const double dz = s[2] - parabola_z(P, yc);
  const double dy = s[1] - yc;
  return std::sqrt(s[0] * s[0] + dy * dy + dz * dz);
}

// Seed (X, Y, Z) at radius xi from a profile value f and slope-free relation Y.
inline Vec3 phase_from_profile(const Params& P, double xi, double f, double Y) {
  const auto E = exponents(P);
  const double X = P.m / E.alpha * std::pow(xi, -2.0) * std::pow(f, P.m - 1);
  const double Z = P.m / (E.alpha * E.alpha) * std::pow(xi, P.sigma - 2) * std::pow(f, P.m + P.p - 2);
  return {X, Y, Z};
}

inline Vec3 seed_state(const ShotSpec& spec, const Params& P, Direction* dir = nullptr) {
  check_spec(spec);
  const auto E = exponents(P);
  const double ba = E.ba();
  if (dir) *dir = spec.source == Source::BackwardFromInterface ? Direction::Backward : Direction::Forward;
  switch (spec.source) {
    case Source::FromP2: {
      CriticalPoint c;
      c.tag = PointTag::P2;
      c.location = p2_location(P);
      auto d = eigen(c, P);
      int i3 = static_cast<int>(d.extras.at("index_lambda3"));
      Vec3 e = real_part(d.eigenvectors[i3]);
      if (e[2] < 0) e = -1.0 * e;
      e = (1.0 / norm(e)) * e;
      return c.location + spec.eps * e;
    }
    case Source::FromP0: {
      const double k = (P.sigma + 2) / (P.m - P.p);
      const double f = spec.K * std::pow(spec.xi_seed, k);
      Vec3 s = phase_from_profile(P, spec.xi_seed, f, 0.0);
      s[1] = k * s[0];
      return s;
    }
    case Source::FromQ1: {
      const double xi = spec.xi_seed;
      const double g = spec.C + E.alpha * (P.m - 1) / (2 * P.m * P.N) * xi * xi;
      const double f = std::pow(g, 1.0 / (P.m - 1));
      return phase_from_profile(P, xi, f, 1.0 / P.N);
    }
    case Source::BackwardFromInterface: {
      if (P.critical()) {
        if (!spec.lambda)
          fail(ErrorKind::RegimeError, "m+p = 2 backward shots start at P0^lambda; give lambda");
        const double lam = *spec.lambda;
        if (!(lam > -ba && lam < 0))
          fail(ErrorKind::SeedError, "lambda must lie in (-beta/alpha, 0) for a stable X-direction");
        auto cp = parabola_point(P, lam);
        auto d = eigen(cp, P);
        const double l1 = (P.m - 1) * lam;
        int best = 0;
        for (int i = 1; i < 3; ++i)
          if (std::abs(d.eigenvalues[i] - l1) < std::abs(d.eigenvalues[best] - l1)) best = i;
        Vec3 e = real_part(d.eigenvectors[best]);
        if (std::abs(e[0]) < 1e-14)
          fail(ErrorKind::SeedError, "stable direction at P0^lambda has no X-component");
        if (e[0] < 0) e = -1.0 * e;
        e = (1.0 / norm(e)) * e;
        Vec3 s = cp.location + spec.eps * e;
        s[2] = std::max(s[2], 0.0);
        return s;
      }
      if (P.regime != Regime::Supercritical)
        fail(ErrorKind::RegimeError, "interface shooting chart needs m+p > 2");
      if (spec.lambda) fail(ErrorKind::RegimeError, "P0^lambda seeds need m+p = 2");
      const UYVField G(P);
      const double ydir = spec.v0 / ((P.m + P.p - 1) * ba);
      const double n = std::sqrt(1 + ydir * ydir);
      Vec3 u{spec.eps / n, -ba + spec.eps * ydir / n, spec.v0};
      return G.to_finite(u);
    }
  }
  fail(ErrorKind::SeedError, "unknown source");
}

inline EventSet standard_events(const Params& P, const ShotOptions& o, Source src, Direction dir) {
  EventSet ev;
  const auto E = exponents(P);
  const double r = o.capture_radius;
  auto ball = [](std::string id, Vec3 c, double radius, bool terminal) {
    BallSpec b;
    b.id = std::move(id);
    b.distance = [c](const Vec3& s) { return norm(s - c); };
    b.radius = norm(c) > 0 ? radius * norm(c) : radius;  // relative to the point's magnitude
    b.terminal = terminal;
    return b;
  };
  if (!P.critical()) {
    ev.balls.push_back(ball("P0", {0, 0, 0}, r, true));
    ev.balls.push_back(ball("P1", {0, -E.ba(), 0}, r, false));
  } else {
    BallSpec coarse;
    coarse.id = "parabola";
    coarse.distance = [P](const Vec3& s) { return parabola_distance(P, s); };
    coarse.radius = r;
    coarse.terminal = false;
    BallSpec fine = coarse;
    fine.id = "parabola_refine";
    fine.radius = o.refine_radius;
    fine.terminal = true;
    ev.balls.push_back(coarse);
    ev.balls.push_back(fine);
    ev.balls.push_back(ball("peak", {0, -E.ba() / 2, E.ba() * E.ba() / 4}, r, false));
    if (dir == Direction::Backward) ev.balls.push_back(ball("P0", {0, 0, 0}, r, true));
  }
  ev.balls.push_back(ball("P2", p2_location(P), r, !(src == Source::FromP2 && dir == Direction::Forward)));
  for (int c = 0; c < 3; ++c) ev.diverge.push_back(DivergeSpec{c, o.diverge});
  return ev;
}

inline Tolerances shot_tolerances(const Params& P, const ShotOptions& o, const Vec3& seed, Source src) {
  Tolerances t;
  t.rtol = o.rtol;
  t.atol = o.atol;
  t.nonneg = {true, false, true};
  t.dense_per_step = o.dense_per_step;
  t.max_steps = o.max_steps;
  if (o.max_eta > 0) {
    t.max_eta = o.max_eta;
  } else {
    t.max_eta = P.critical() ? 1e10 : 1e8;
    // P0 seeds escape on the scale 1/X.
    if (src == Source::FromP0 && seed[0] > 0) t.max_eta = std::max(t.max_eta, 1e3 / seed[0]);
  }
  return t;
}

// Continues a run that exhausted its explicit budget, stopping on the first
// terminal ball or divergence threshold of ev.
inline void stiff_continue(Trajectory& tr, const Params& P, const EventSet& ev, const Tolerances& t0,
                           const ShotOptions& o) {
  tr.events.pop_back();
  Tolerances t = t0;
  t.max_eta = std::max(0.0, t0.max_eta - std::abs(tr.eta.back()));
  t.max_steps = o.max_steps > tr.accepted ? o.max_steps - tr.accepted : 0;
  t.h_min = 0;
  std::string hit;
  double value = 0;
  EventKind kind = EventKind::CriticalCapture;
  int comp = -1;
  auto stop = [&](const Vec3& s) {
    for (auto& b : ev.balls)
      if (b.terminal && b.distance(s) <= b.radius) {
        hit = b.id;
        value = b.distance(s);
        return true;
      }
    for (auto& d : ev.diverge)
      if (std::abs(s[d.component]) > d.threshold) {
        hit = "diverge";
        kind = EventKind::Diverge;
        value = d.threshold;
        comp = d.component;
        return true;
      }
    return false;
  };
  continue_rosenbrock(tr, FiniteField(P), t, stop);
  Event& e = tr.events.back();
  if (e.id == "tail_target") {
    e.kind = kind;
    e.id = hit;
    e.value = value;
    e.component = comp;
  }
}

inline Shot launch(const ShotSpec& spec, const Params& P, const ShotOptions& o = {}) {
  Shot sh;
  sh.spec = spec;
  sh.params = P;
  sh.seed = seed_state(spec, P, &sh.direction);
  auto ev = standard_events(P, o, spec.source, sh.direction);
  auto tol = shot_tolerances(P, o, sh.seed, spec.source);
  const bool handoff = o.explicit_budget > 0 && o.explicit_budget < tol.max_steps;
  if (handoff) tol.max_steps = o.explicit_budget;
  sh.traj = integrate(FiniteField(P), sh.seed, sh.direction, ev, tol, 0.0, Chart::Finite);
  if (handoff && sh.traj.terminal() && sh.traj.terminal()->kind == EventKind::MaxSteps) {
    tol.max_steps = o.max_steps;
    stiff_continue(sh.traj, P, ev, tol, o);
  }
  return sh;
}

// ------------------------------------------------------------------ fate

enum class FateTag {
  EntersP0,
  EntersP1,
  EntersP2,
  EntersParabola,
  EntersQ1,
  EntersQ2,
  EntersQ3,
  EntersQ5,
  Undecided
};

inline const char* to_string(FateTag t) {
  switch (t) {
    case FateTag::EntersP0: return "EntersP0";
    case FateTag::EntersP1: return "EntersP1";
    case FateTag::EntersP2: return "EntersP2";
    case FateTag::EntersParabola: return "EntersParabola";
    case FateTag::EntersQ1: return "EntersQ1";
    case FateTag::EntersQ2: return "EntersQ2";
    case FateTag::EntersQ3: return "EntersQ3";
    case FateTag::EntersQ5: return "EntersQ5";
    case FateTag::Undecided: return "Undecided";
  }
  return "?";
}

struct OrbitFate {
  FateTag tag = FateTag::Undecided;
  std::optional<double> lambda;
  EventKind evidence = EventKind::MaxEta;
  std::string evidence_id;
  double distance = std::numeric_limits<double>::quiet_NaN();
  double eta = 0;
  Vec3 state{};
  double min_dist_p1 = std::numeric_limits<double>::infinity();
  double min_dist_peak = std::numeric_limits<double>::infinity();
  bool p1_ball_entered = false;
  std::string diagnostics;
};

// Nearest point at infinity for a diverging state, by sphere direction.
inline FateTag infinity_fate(const Params& P, const Vec3& s, std::string* diag = nullptr) {
  const double n = norm(s);
  Vec3 d = (1.0 / n) * s;
  const double n5 = std::sqrt((P.N - 2.0) * (P.N - 2.0) + P.m * P.m);
  struct Cand {
    FateTag tag;
    Vec3 dir;
  };
  std::vector<Cand> c{{FateTag::EntersQ1, {1, 0, 0}},
                      {FateTag::EntersQ2, {0, 1, 0}},
                      {FateTag::EntersQ3, {0, -1, 0}},
                      {FateTag::Undecided, {0, 0, 1}},
                      {FateTag::EntersQ5, {P.m / n5, -(P.N - 2.0) / n5, 0}}};
  FateTag best = FateTag::Undecided;
  double bd = 1e300;
  bool q4 = false;
  for (auto& k : c) {
    double dd = norm(d - k.dir);
    if (dd < bd) {
      bd = dd;
      best = k.tag;
      q4 = k.dir[2] == 1;
    }
  }
  if (q4) fail(ErrorKind::Unclassifiable, "orbit approaches Q4");
  if (P.N == 2 && (best == FateTag::EntersQ1 || best == FateTag::EntersQ5))
    best = s[1] < 0 ? FateTag::EntersQ5 : FateTag::EntersQ1;
  if (diag) {
    *diag = "direction distance " + std::to_string(bd);
    if (s[1] != 0) *diag += ", Z/Y^2 = " + std::to_string(s[2] / (s[1] * s[1]));
  }
  return best;
}

inline OrbitFate classify(const Trajectory& tr, const Params& P) {
  OrbitFate f;
  if (auto* m = tr.monitor("P1")) {
    f.min_dist_p1 = m->min_distance;
    f.p1_ball_entered = m->entered;
  }
  if (auto* m = tr.monitor("peak")) f.min_dist_peak = m->min_distance;
  const Event* t = tr.terminal();
  if (!t) {
    f.diagnostics = "no terminal event";
    return f;
  }
  f.evidence = t->kind;
  f.evidence_id = t->id;
  f.eta = t->eta;
  f.state = t->state;
  bool moved = false;
  for (auto& v : tr.y)
    if (v != tr.y.front()) {
      moved = true;
      break;
    }
  if (!moved) {
    f.diagnostics = "no motion";
    return f;
  }
  switch (t->kind) {
    case EventKind::CriticalCapture:
      f.distance = t->value;
      if (t->id == "P0") f.tag = FateTag::EntersP0;
      else if (t->id == "P2") f.tag = FateTag::EntersP2;
      else if (t->id == "parabola_refine") {
        f.tag = FateTag::EntersParabola;
        f.lambda = t->state[1];
      }
      return f;
    case EventKind::Diverge:
      f.tag = infinity_fate(P, t->state, &f.diagnostics);
      return f;
    case EventKind::MaxEta:
    case EventKind::MaxSteps: {
      if (auto* m = tr.monitor("P1"); m && m->entered && m->index_at_min + 1 == tr.size()) {
        f.tag = FateTag::EntersP1;
        f.distance = m->min_distance;
        return f;
      }
      if (P.critical()) {
        double d = parabola_distance(P, t->state);
        if (d <= 1e-4) {
          f.tag = FateTag::EntersParabola;
          f.lambda = t->state[1];
          f.distance = d;
          f.diagnostics = "horizon reached inside the coarse parabola ball";
          return f;
        }
      } else {
        double d0 = norm(t->state);
        if (d0 <= 1e-4) {
          f.tag = FateTag::EntersP0;
          f.distance = d0;
          f.diagnostics = "horizon reached inside the P0 ball";
          return f;
        }
      }
      f.diagnostics = "horizon reached outside every capture ball";
      return f;
    }
    case EventKind::StepUnderflow:
      f.diagnostics = "step underflow: finite-time chart singularity";
      return f;
    case EventKind::PlaneCross:
      f.diagnostics = "terminated on a plane crossing";
      return f;
  }
  return f;
}

inline OrbitFate shoot_fate(const ShotSpec& spec, const Params& P, const ShotOptions& o = {}) {
  return classify(launch(spec, P, o).traj, P);
}

// ------------------------------------------------------------- searches

// -1: good side (P0 or interior parabola capture), +1: Q3, 0: anything else.
inline int fate_side(const OrbitFate& f, const Params& P) {
  if (f.tag == FateTag::EntersP0) return -1;
  if (f.tag == FateTag::EntersParabola && f.lambda) {
    const double ba = exponents(P).ba();
    if (*f.lambda > -ba / 2 - 1e-6 && *f.lambda < 0) return -1;
  }
  if (f.tag == FateTag::EntersQ3) return 1;
  return 0;
}

struct SigmaStarResult {
  double sigma_star = 0, lo = 0, hi = 0;
  OrbitFate fate_lo, fate_hi;
  std::vector<std::array<double, 2>> history;
  bool interrupted = false;  // a midpoint fate other than the two sides
  OrbitFate fate_interrupt;
};

inline SigmaStarResult find_sigma_star(const Params& base, double lo, double hi,
                                       const ShotSpec& spec = ShotSpec::from_p2(),
                                       const ShotOptions& o = {}, double width = 1e-4,
                                       int max_iter = 200) {
  if (!(lo < hi)) fail(ErrorKind::BracketError, "bracket must satisfy lo < hi");
  SigmaStarResult r;
  Params Plo = with_sigma(base, lo), Phi = with_sigma(base, hi);
  r.fate_lo = shoot_fate(spec, Plo, o);
  r.fate_hi = shoot_fate(spec, Phi, o);
  if (fate_side(r.fate_lo, Plo) != -1 || fate_side(r.fate_hi, Phi) != 1)
    fail(ErrorKind::BracketError, std::string("bracket fates do not straddle: ") +
                                      to_string(r.fate_lo.tag) + " / " + to_string(r.fate_hi.tag));
  r.history.push_back({lo, hi});
  for (int it = 0; it < max_iter && hi - lo > width; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    Params Pm = with_sigma(base, mid);
    OrbitFate fm = shoot_fate(spec, Pm, o);
    int side = fate_side(fm, Pm);
    if (side == -1) {
      lo = mid;
      r.fate_lo = fm;
    } else if (side == 1) {
      hi = mid;
      r.fate_hi = fm;
    } else {
      r.interrupted = true;
      r.fate_interrupt = fm;
      lo = hi = mid;
    }
    r.history.push_back({lo, hi});
  }
  r.lo = lo;
  r.hi = hi;
  r.sigma_star = 0.5 * (lo + hi);
  return r;
}

struct SweepRow {
  double sigma = 0;
  OrbitFate fate;
};

inline std::vector<SweepRow> sweep_sigma(const Params& base, const std::vector<double>& grid,
                                         const ShotSpec& spec = ShotSpec::from_p2(),
                                         const ShotOptions& o = {}, unsigned workers = 0) {
  return parallel_map<SweepRow>(
      grid.size(),
      [&](std::size_t i) {
        Params P = with_sigma(base, grid[i]);
        return SweepRow{grid[i], shoot_fate(spec, P, o)};
      },
      workers);
}

// Indices i with fate(i) != fate(i+1).
inline std::vector<std::size_t> fate_flips(const std::vector<SweepRow>& rows) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i)
    if (rows[i].fate.tag != rows[i + 1].fate.tag) out.push_back(i);
  return out;
}

struct LambdaTable {
  std::vector<SweepRow> rows;
  bool all_parabola = true;
  // lambda increases as sigma decreases toward 2
  bool increasing_toward_zero = true;
};

inline LambdaTable lambda_of_sigma(const Params& base, std::vector<double> grid,
                                   const ShotOptions& o = {}, unsigned workers = 0) {
  if (!base.critical()) fail(ErrorKind::RegimeError, "lambda(sigma) needs m+p = 2");
  LambdaTable t;
  t.rows = sweep_sigma(base, grid, ShotSpec::from_p2(), o, workers);
  std::vector<std::pair<double, double>> sl;
  for (auto& r : t.rows) {
    if (r.fate.tag != FateTag::EntersParabola || !r.fate.lambda) {
      t.all_parabola = false;
      continue;
    }
    sl.push_back({r.sigma, *r.fate.lambda});
  }
  std::sort(sl.begin(), sl.end());
  for (std::size_t i = 0; i + 1 < sl.size(); ++i)
    if (!(sl[i].second > sl[i + 1].second)) t.increasing_toward_zero = false;
  for (auto& e : sl)
    if (!(e.second < 0)) t.increasing_toward_zero = false;
  return t;
}

// -------------------------------------------------------- interface sweep

enum class SourceClass { Q5Side, Q2Side, Good, Undecided };

inline const char* to_string(SourceClass c) {
  switch (c) {
    case SourceClass::Q5Side: return "Q5-side";
    case SourceClass::Q2Side: return "Q2-side";
    case SourceClass::Good: return "Good";
    case SourceClass::Undecided: return "Undecided";
  }
  return "?";
}

inline SourceClass source_class(const OrbitFate& f) {
  switch (f.tag) {
    case FateTag::EntersQ5: return SourceClass::Q5Side;
    case FateTag::EntersQ2: return SourceClass::Q2Side;
    case FateTag::EntersP0:
    case FateTag::EntersP2:
    case FateTag::EntersQ1: return SourceClass::Good;
    default: return SourceClass::Undecided;
  }
}

struct InterfaceRow {
  double v0 = 0;
  OrbitFate fate;
  SourceClass cls = SourceClass::Undecided;
};

struct InterfaceBoundary {
  double v_lo = 0, v_hi = 0;
  SourceClass cls_lo = SourceClass::Undecided, cls_hi = SourceClass::Undecided;
};

struct InterfaceSweep {
  std::vector<InterfaceRow> rows;
  std::vector<InterfaceBoundary> boundaries;
  double U0 = 0, V0 = 0;
};

// Barrier h(U) on the plane Y = -beta/(2 alpha) in the (U,Y,V) chart, and its minimizer.
inline double interface_h(const Params& P, double U) {
  const auto E = exponents(P);
  const double a = E.alpha, b = E.beta;
  return (1 + P.N * b / (2 * a)) * std::pow(U, (1 - P.p) / (P.m + P.p - 2)) +
         b * b / (4 * a * a * U);
}

inline double interface_U0(const Params& P) {
  const double m = P.m, p = P.p, s = P.sigma, N = P.N;
  const double base = (m + p - 2) * (m - p) * (m - p) /
                      (2 * (s + 2) * (1 - p) * (2 * s + 4 + N * (m - p)));
  return std::pow(base, (m + p - 2) / (m - 1));
}

inline InterfaceRow interface_shot(const Params& P, double v0, const ShotOptions& o, double eps) {
  InterfaceRow r;
  r.v0 = v0;
  r.fate = shoot_fate(ShotSpec::backward(v0, eps), P, o);
  r.cls = source_class(r.fate);
  return r;
}

inline InterfaceSweep interface_sweep(const Params& P, const std::vector<double>& grid,
                                      const ShotOptions& o = {}, double eps = 1e-6,
                                      int refine_iter = 30, unsigned workers = 0) {
  if (P.regime != Regime::Supercritical)
    fail(ErrorKind::RegimeError, "interface sweep needs m+p > 2");
  InterfaceSweep s;
  s.U0 = interface_U0(P);
  s.V0 = interface_h(P, s.U0);
  s.rows = parallel_map<InterfaceRow>(
      grid.size(), [&](std::size_t i) { return interface_shot(P, grid[i], o, eps); }, workers);
  for (std::size_t i = 0; i + 1 < s.rows.size(); ++i) {
    if (s.rows[i].cls == s.rows[i + 1].cls) continue;
    InterfaceBoundary b;
    double lo = s.rows[i].v0, hi = s.rows[i + 1].v0;
    b.cls_lo = s.rows[i].cls;
    b.cls_hi = s.rows[i + 1].cls;
    for (int it = 0; it < refine_iter; ++it) {
      double mid = std::sqrt(lo * hi);
      auto r = interface_shot(P, mid, o, eps);
      if (r.cls == b.cls_lo)
        lo = mid;
      else if (r.cls == b.cls_hi)
        hi = mid;
      else
        break;
    }
    b.v_lo = lo;
    b.v_hi = hi;
    s.boundaries.push_back(b);
  }
  return s;
}

}  // namespace selfsim
