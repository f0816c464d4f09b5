#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "selfsim/dynsys.hpp"
#include "selfsim/errors.hpp"
#include "selfsim/linalg.hpp"

namespace selfsim {

enum class Direction { Forward, Backward };

inline const char* to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

struct Tolerances {
  double rtol = 1e-9;
  Vec3 atol{1e-12, 1e-12, 1e-12};
  double max_eta = 1e4;  // span |eta - eta0|
  double h_min = 1e-14;
  double h_max = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 20'000'000;
  int dense_per_step = 0;  // extra interpolated samples between accepted steps
  std::array<bool, 3> nonneg{false, false, false};
  double undershoot = 1e-10;
};

// Zero set of g; direction +1 only rising crossings, -1 falling, 0 both.
struct PlaneSpec {
  std::string id;
  std::function<double(const Vec3&)> g;
  int direction = 0;
  bool terminal = false;
};

// Ball around a critical point.  Non-terminal balls are only monitored.
struct BallSpec {
  std::string id;
  std::function<double(const Vec3&)> distance;
  double radius = 1e-4;
  bool terminal = true;
};

struct DivergeSpec {
  int component = 1;
  double threshold = 1e6;  // |c| > threshold
};

struct EventSet {
  std::vector<PlaneSpec> planes;
  std::vector<BallSpec> balls;
  std::vector<DivergeSpec> diverge;
};

enum class EventKind { PlaneCross, CriticalCapture, Diverge, MaxEta, StepUnderflow, MaxSteps };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::PlaneCross: return "PlaneCross";
    case EventKind::CriticalCapture: return "CriticalCapture";
    case EventKind::Diverge: return "Diverge";
    case EventKind::MaxEta: return "MaxEta";
    case EventKind::StepUnderflow: return "StepUnderflow";
    case EventKind::MaxSteps: return "MaxSteps";
  }
  return "?";
}

struct Event {
  EventKind kind = EventKind::MaxEta;
  double eta = 0;
  Vec3 state{};
  std::string id;
  double value = 0;  // capture distance, divergence threshold, or g at the crossing
  int component = -1;
};

struct BallMonitor {
  std::string id;
  double min_distance = std::numeric_limits<double>::infinity();
  double eta_at_min = 0;
  Vec3 state_at_min{};
  std::size_t index_at_min = 0;
  bool entered = false;
};

struct Trajectory {
  Chart chart = Chart::Finite;
  Direction direction = Direction::Forward;
  std::vector<double> eta;
  std::vector<Vec3> y;
  std::vector<Event> events;
  std::vector<BallMonitor> monitors;
  std::size_t accepted = 0, rejected = 0;

  std::size_t size() const { return eta.size(); }
  const Event* terminal() const { return events.empty() ? nullptr : &events.back(); }
  const BallMonitor* monitor(const std::string& id) const {
    for (auto& m : monitors)
      if (m.id == id) return &m;
    return nullptr;
  }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DP54 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                          d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                          d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
};

struct Dense {
  Vec3 r1, r2, r3, r4, r5;
  Vec3 at(double th) const {
    const double t1 = 1 - th;
    Vec3 o;
    for (int i = 0; i < 3; ++i)
      o[i] = r1[i] + th * (r2[i] + t1 * (r3[i] + th * (r4[i] + t1 * r5[i])));
    return o;
  }
};

inline double err_norm(const Vec3& e, const Vec3& y0, const Vec3& y1, const Tolerances& tol) {
  double s = 0;
  for (int i = 0; i < 3; ++i) {
    double sc = tol.atol[i] + tol.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    double r = e[i] / sc;
    s += r * r;
  }
  return std::sqrt(s / 3.0);
}

}  // namespace detail

template <class F>
Trajectory integrate(const F& field, const Vec3& y0, Direction dir, const EventSet& ev,
                     const Tolerances& tol, double eta0 = 0.0, Chart chart = Chart::Finite) {
  using detail::DP54;
  if (!(tol.rtol >= 1e-12 && tol.rtol <= 1e-3))
    fail(ErrorKind::ConfigError, "relative tolerance must lie in [1e-12, 1e-3]");
  const double sgn = dir == Direction::Forward ? 1.0 : -1.0;
  auto f = [&](const Vec3& y) {
    Vec3 d = field(y);
    return sgn * d;
  };

  Trajectory tr;
  tr.chart = chart;
  tr.direction = dir;
  for (auto& b : ev.balls) tr.monitors.push_back(BallMonitor{b.id});
  std::vector<std::size_t> run(ev.balls.size(), 0);
  std::vector<double> last_d(ev.balls.size(), std::numeric_limits<double>::infinity());

  double s = 0.0;  // elapsed |eta - eta0|
  Vec3 y = y0;
  auto push = [&](double ss, const Vec3& v) {
    tr.eta.push_back(eta0 + sgn * ss);
    tr.y.push_back(v);
  };
  push(0.0, y);

  // Returns true when a terminal ball is triggered at the newest sample.
  auto check_balls = [&](double ss, const Vec3& v) -> bool {
    const std::size_t n = tr.size();
    for (std::size_t i = 0; i < ev.balls.size(); ++i) {
      const auto& b = ev.balls[i];
      double d = b.distance(v);
      auto& mon = tr.monitors[i];
      if (d < mon.min_distance) {
        mon.min_distance = d;
        mon.eta_at_min = eta0 + sgn * ss;
        mon.state_at_min = v;
        mon.index_at_min = n - 1;
      }
      run[i] = d < last_d[i] ? run[i] + 1 : 0;
      last_d[i] = d;
      if (d <= b.radius) {
        mon.entered = true;
        const std::size_t need = std::max<std::size_t>(5, (n + 9) / 10);
        if (b.terminal && (d == 0.0 || run[i] + 1 >= need)) {
          tr.events.push_back(Event{EventKind::CriticalCapture, eta0 + sgn * ss, v, b.id, d});
          return true;
        }
      }
    }
    return false;
  };

  Vec3 k1 = f(y);
  if (check_balls(0.0, y)) return tr;
  if (k1[0] == 0 && k1[1] == 0 && k1[2] == 0) {
    // Equilibrium: one step is enough to confirm nothing moves.
    push(0.0, y);
    if (check_balls(0.0, y)) return tr;
  }

  std::vector<double> gprev;
  for (auto& pl : ev.planes) gprev.push_back(pl.g(y));

  // Initial step.
  double h;
  {
    Vec3 sc;
    for (int i = 0; i < 3; ++i) sc[i] = tol.atol[i] + tol.rtol * std::abs(y[i]);
    double d0 = 0, d1 = 0;
    for (int i = 0; i < 3; ++i) {
      d0 += (y[i] / sc[i]) * (y[i] / sc[i]);
      d1 += (k1[i] / sc[i]) * (k1[i] / sc[i]);
    }
    d0 = std::sqrt(d0 / 3);
    d1 = std::sqrt(d1 / 3);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min({h, tol.h_max, tol.max_eta});
    h = std::max(h, 10 * tol.h_min);
  }

  std::size_t steps = 0;
  while (true) {
    if (s >= tol.max_eta) {
      tr.events.push_back(Event{EventKind::MaxEta, eta0 + sgn * s, y, "max_eta", tol.max_eta});
      return tr;
    }
    if (steps++ >= tol.max_steps) {
      tr.events.push_back(Event{EventKind::MaxSteps, eta0 + sgn * s, y, "max_steps"});
      return tr;
    }
    if (h < tol.h_min) {
      tr.events.push_back(Event{EventKind::StepUnderflow, eta0 + sgn * s, y, "step_underflow", h});
      return tr;
    }
    h = std::min(h, tol.max_eta - s);

    Vec3 k2 = f(y + h * (DP54::a21 * k1));
    Vec3 k3 = f(y + h * (DP54::a31 * k1 + DP54::a32 * k2));
    Vec3 k4 = f(y + h * (DP54::a41 * k1 + DP54::a42 * k2 + DP54::a43 * k3));
    Vec3 k5 = f(y + h * (DP54::a51 * k1 + DP54::a52 * k2 + DP54::a53 * k3 + DP54::a54 * k4));
    Vec3 k6 = f(y + h * (DP54::a61 * k1 + DP54::a62 * k2 + DP54::a63 * k3 + DP54::a64 * k4 +
                         DP54::a65 * k5));
    Vec3 yn = y + h * (DP54::a71 * k1 + DP54::a73 * k3 + DP54::a74 * k4 + DP54::a75 * k5 +
                       DP54::a76 * k6);
    Vec3 k7 = f(yn);
    Vec3 e = h * (DP54::e1 * k1 + DP54::e3 * k3 + DP54::e4 * k4 + DP54::e5 * k5 + DP54::e6 * k6 +
                  DP54::e7 * k7);
    double err = detail::err_norm(e, y, yn, tol);
    bool finite = std::isfinite(yn[0]) && std::isfinite(yn[1]) && std::isfinite(yn[2]);
    if (!finite || !std::isfinite(err)) err = 1e10;

    if (err > 1.0) {
      ++tr.rejected;
      h *= std::max(0.1, 0.9 * std::pow(err, -0.2));
      continue;
    }

    // Accepted.
    for (int i = 0; i < 3; ++i) {
      if (!tol.nonneg[i]) continue;
      if (yn[i] < -tol.undershoot)
        fail(ErrorKind::NegativeUndershoot,
             "component " + std::to_string(i) + " fell below -" + std::to_string(tol.undershoot));
      if (yn[i] < 0) yn[i] = 0;
    }
    ++tr.accepted;
    detail::Dense dn;
    dn.r1 = y;
    dn.r2 = yn - y;
    dn.r3 = h * k1 - dn.r2;
    dn.r4 = dn.r2 - h * k7 - dn.r3;
    dn.r5 = h * (DP54::d1 * k1 + DP54::d3 * k3 + DP54::d4 * k4 + DP54::d5 * k5 + DP54::d6 * k6 +
                 DP54::d7 * k7);

    // Earliest plane crossing inside the step.
    double th_event = 2.0;
    int which = -1;
    Vec3 y_event{};
    std::vector<double> gnew(ev.planes.size());
    for (std::size_t i = 0; i < ev.planes.size(); ++i) {
      const auto& pl = ev.planes[i];
      gnew[i] = pl.g(yn);
      const double ga = gprev[i], gb = gnew[i];
      bool cross = (ga < 0 && gb >= 0) || (ga > 0 && gb <= 0);
      if (!cross) continue;
      int sense = gb > ga ? 1 : -1;
      if (pl.direction != 0 && pl.direction != sense) continue;
      double lo = 0, hi = 1;
      Vec3 ym = yn;
      double gm = gb;
      for (int it = 0; it < 200 && std::abs(gm) > 1e-10; ++it) {
        double mid = 0.5 * (lo + hi);
        ym = dn.at(mid);
        gm = pl.g(ym);
        if ((gm < 0) == (ga < 0) && gm != 0)
          lo = mid;
        else
          hi = mid;
        if (hi - lo < 1e-15) break;
      }
      double th = (std::abs(gm) <= 1e-10) ? 0.5 * (lo + hi) : hi;
      if (th < th_event) {
        th_event = th;
        which = static_cast<int>(i);
        y_event = ym;
      }
    }

    if (tol.dense_per_step > 0) {
      double lim = which >= 0 ? th_event : 1.0;
      for (int j = 1; j <= tol.dense_per_step; ++j) {
        double th = static_cast<double>(j) / (tol.dense_per_step + 1);
        if (th >= lim) break;
        Vec3 v = dn.at(th);
        for (int i = 0; i < 3; ++i)
          if (tol.nonneg[i] && v[i] < 0) v[i] = 0;
        push(s + th * h, v);
      }
    }

    if (which >= 0) {
      const auto& pl = ev.planes[which];
      double se = s + th_event * h;
      tr.events.push_back(Event{EventKind::PlaneCross, eta0 + sgn * se, y_event, pl.id,
                                pl.g(y_event)});
      if (pl.terminal) {
        push(se, y_event);
        return tr;
      }
    }

    s += h;
    y = yn;
    k1 = k7;
    gprev = gnew;
    push(s, y);

    if (check_balls(s, y)) return tr;
    for (auto& dv : ev.diverge)
      if (std::abs(y[dv.component]) > dv.threshold &&
          std::abs(y[dv.component]) > std::abs(tr.y[tr.size() - 2][dv.component])) {
        tr.events.push_back(Event{EventKind::Diverge, eta0 + sgn * s, y, "diverge",
                                  dv.threshold, dv.component});
        return tr;
      }

    double fac = err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
    h = std::min(h * fac, tol.h_max);
  }
}

// Integrator that raises on StepUnderflow instead of returning the event.
template <class F>
Trajectory integrate_strict(const F& field, const Vec3& y0, Direction dir, const EventSet& ev,
                            const Tolerances& tol, double eta0 = 0.0,
                            Chart chart = Chart::Finite) {
  Trajectory tr = integrate(field, y0, dir, ev, tol, eta0, chart);
  if (tr.terminal() && tr.terminal()->kind == EventKind::StepUnderflow)
    fail(ErrorKind::StepUnderflow, "step size fell below the minimum; switch charts");
  return tr;
}

// Linearly implicit Rosenbrock 2(3) step (the modified Rosenbrock pair of
// Shampine and Reichelt), for center-manifold tails where the fast mode caps
// explicit steps.  Samples are appended to tr; stops when stop(state) holds.
template <class F, class Stop>
void continue_rosenbrock(Trajectory& tr, const F& field, const Tolerances& tol, Stop stop,
                         double h0 = 0.0) {
  if (tr.size() == 0) fail(ErrorKind::ConfigError, "empty trajectory");
  const double sgn = tr.direction == Direction::Forward ? 1.0 : -1.0;
  const double d = 1.0 / (2.0 + std::sqrt(2.0)), e32 = 6.0 + std::sqrt(2.0);
  auto f = [&](const Vec3& y) { return sgn * field(y); };
  Vec3 y = tr.y.back();
  const double eta_start = tr.eta.back();
  double s = 0.0;
  double h = h0 > 0 ? h0 : 1.0;
  std::size_t steps = 0;
  while (!stop(y)) {
    if (s >= tol.max_eta) {
      tr.events.push_back(Event{EventKind::MaxEta, eta_start + sgn * s, y, "max_eta", tol.max_eta});
      return;
    }
    if (steps++ >= tol.max_steps) {
      tr.events.push_back(Event{EventKind::MaxSteps, eta_start + sgn * s, y, "max_steps"});
      return;
    }
    if (h < tol.h_min) {
      tr.events.push_back(Event{EventKind::StepUnderflow, eta_start + sgn * s, y, "step_underflow", h});
      return;
    }
    h = std::min(h, tol.max_eta - s);
    Mat3 J = field.jacobian(y);
    Mat3 W{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) W[i][j] = (i == j ? 1.0 : 0.0) - h * d * sgn * J[i][j];
    const Vec3 F0 = f(y);
    const Vec3 k1 = solve3(W, F0);
    const Vec3 F1 = f(y + (0.5 * h) * k1);
    const Vec3 k2 = solve3(W, F1 - k1) + k1;
    Vec3 yn = y + h * k2;
    const Vec3 F2 = f(yn);
    const Vec3 k3 = solve3(W, F2 - e32 * (k2 - F1) - 2.0 * (k1 - F0));
    const Vec3 e = (h / 6.0) * (k1 - 2.0 * k2 + k3);
    double err = detail::err_norm(e, y, yn, tol);
    bool finite = std::isfinite(yn[0]) && std::isfinite(yn[1]) && std::isfinite(yn[2]);
    bool neg = false;
    for (int i = 0; i < 3; ++i)
      if (tol.nonneg[i] && yn[i] < 0) neg = true;
    if (!finite || !std::isfinite(err) || neg) err = std::max(err, 10.0);
    if (!std::isfinite(err)) err = 1e10;
    if (err > 1.0) {
      ++tr.rejected;
      h *= std::max(0.1, 0.8 * std::pow(err, -1.0 / 3.0));
      continue;
    }
    ++tr.accepted;
    s += h;
    y = yn;
    tr.eta.push_back(eta_start + sgn * s);
    tr.y.push_back(y);
    double fac = err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.8 * std::pow(err, -1.0 / 3.0)));
    h *= fac;
  }
  tr.events.push_back(Event{EventKind::CriticalCapture, tr.eta.back(), y, "tail_target", 0.0});
}

inline std::optional<Vec3> crossing_state(const Trajectory& tr, const std::string& plane_id) {
  for (auto& e : tr.events)
    if (e.kind == EventKind::PlaneCross && e.id == plane_id) return e.state;
  return std::nullopt;
}

}  // namespace selfsim
