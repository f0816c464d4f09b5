// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "selfsim/barriers.hpp"
#include "selfsim/dynsys.hpp"
#include "selfsim/profile.hpp"
#include "selfsim/shoot.hpp"

using namespace selfsim;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream note;
  void require(bool c, const std::string& what) {
    if (!c) {
      ok = false;
      note << " [" << what << "]";
    }
  }
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(a * std::pow(b / a, double(i) / (n - 1)));
  return v;
}

Params random_super(std::mt19937_64& g) {
  std::uniform_real_distribution<double> um(1.1, 5.0), up(0.05, 0.95), us(0.1, 30.0);
  std::uniform_int_distribution<int> un(1, 6);
  for (;;) {
    const double m = um(g), p = up(g);
    if (m + p < 2.05) continue;
    return validate(m, p, sigma_lower_bound(m, p) + us(g), un(g));
  }
}

// ---------------------------------------------------------------- criteria

void c1(Check& c) {
  const auto P = validate(3, 0.5, 3.5, 4);
  const auto f2 = shoot_fate(ShotSpec::from_p2(), P);
  auto run = profile_shot(ShotSpec::from_p0(), P);
  c.note << "FromP2 " << to_string(f2.tag) << ", FromP0 " << to_string(run.fate.tag);
  c.require(f2.tag == FateTag::EntersP0, "FromP2 fate");
  c.require(run.fate.tag == FateTag::EntersP0, "FromP0 fate");
  const auto& I = run.profile.interface;
  c.require(I.has_value(), "no interface: " + run.interface_note);
  if (I) {
    c.note << ", type " << to_string(I->type) << " theta " << I->theta;
    c.require(I->type == InterfaceType::II, "type");
    c.require(rel(I->theta, 1 / (1 - P.p)) <= 0.05, "theta");
  }
}

void c2(Check& c) {
  const auto base = validate(3, 0.5, 4, 4);
  auto r = find_sigma_star(base, 3.5, 6.0);
  c.note << "sigma* " << r.sigma_star;
  c.require(!r.interrupted, "bisection interrupted");
  c.require(std::abs(r.sigma_star - 4.822) <= 0.05, "sigma*");
  const auto P = with_sigma(base, r.hi);
  ProfileOptions o;
  o.tail = TailMode::CompleteP1;
  auto run = profile_shot(ShotSpec::from_p2(), P, o);
  c.note << ", min |s-P1| " << r.fate_lo.min_dist_p1 << ", fate " << to_string(run.fate.tag);
  c.require(run.fate.tag == FateTag::EntersP1, "sigma* orbit does not reach P1");
  const auto& I = run.profile.interface;
  c.require(I.has_value(), "no interface: " + run.interface_note);
  if (I) {
    c.note << ", type " << to_string(I->type) << " theta " << I->theta;
    c.require(rel(I->theta, 1 / (P.m - 1)) <= 0.05, "theta");
  }
}

void c3(Check& c) {
  const auto P = validate(3, 0.5, 6, 4);
  const ShotOptions o;
  for (auto spec : {ShotSpec::from_p2(), ShotSpec::from_q1()}) {
    auto f = shoot_fate(spec, P, o);
    c.note << to_string(spec.source) << " " << to_string(f.tag) << " (min |s-P1| " << f.min_dist_p1 << ") ";
    c.require(f.tag == FateTag::EntersQ3, std::string(to_string(spec.source)) + " fate");
    c.require(!f.p1_ball_entered && f.min_dist_p1 > o.capture_radius, "P1 ball entered");
  }
}

void c4(Check& c) {
  const auto P = validate(1.5, 0.5, 3, 2);
  const double xm = *exponents(P).xi_max;
  c.note << "xi_max " << xm;
  c.require(rel(xm, 2.0 / 3.0) <= 1e-12, "xi_max");

  // Parabola captures from both admissible sources, at the base sigma and on the lambda grid.
  const std::vector<double> grid{2.1, 2.05, 2.02};
  std::vector<std::pair<ShotSpec, Params>> shots;
  shots.push_back({ShotSpec::from_p2(1e-13), P});
  for (double K : {0.01, 0.1, 1.0, 10.0, 100.0}) shots.push_back({ShotSpec::from_p0(K, 1e-6), P});
  for (double s : grid) shots.push_back({ShotSpec::from_p2(), with_sigma(P, s)});
  std::size_t captures = 0;
  double worst = 0;
  for (auto& [spec, Q] : shots) {
    auto run = profile_shot(spec, Q);
    if (run.fate.tag != FateTag::EntersParabola) continue;
    ++captures;
    const auto& I = run.profile.interface;
    c.require(I.has_value(), "capture without interface: " + run.interface_note);
    if (!I) continue;
    const double lim = *exponents(Q).xi_max;
    worst = std::max(worst, I->xi0 / lim);
    c.require(I->xi0 <= lim * (1 + 1e-6), "xi0 > xi_max");
  }
  c.note << ", captures " << captures << "/" << shots.size() << " max xi0/xi_max " << worst;
  c.require(captures == shots.size(), "not every shot captured");

  auto t = lambda_of_sigma(P, grid);
  c.note << ", lambda";
  for (auto& r : t.rows) c.note << " " << (r.fate.lambda ? *r.fate.lambda : std::nan(""));
  c.require(t.all_parabola, "lambda rows without capture");
  c.require(t.increasing_toward_zero, "lambda trend");
  for (auto& r : t.rows) c.require(r.fate.lambda && *r.fate.lambda < 0, "lambda sign");
}

void c5(Check& c) {
  std::mt19937_64 g(2024);
  double w_sum = 0, w_prod = 0, w_l3 = 0, w_e3 = 0, w_D = -INFINITY;
  for (int i = 0; i < 100; ++i) {
    auto P = random_super(g);
    CriticalPoint cp;
    cp.tag = PointTag::P2;
    cp.location = p2_location(P);
    auto d = eigen(cp, P);
    auto cf = p2_closed_form(P);
    w_sum = std::max(w_sum, d.residuals["sum12"]);
    w_prod = std::max(w_prod, d.residuals["prod12"]);
    w_l3 = std::max(w_l3, d.residuals["lambda3"]);
    w_e3 = std::max(w_e3, d.residuals["e3"]);
    w_D = std::max(w_D, cf.D);
  }
  c.note << "sum " << w_sum << " prod " << w_prod << " lambda3 " << w_l3 << " e3 " << w_e3 << " max D " << w_D;
  c.require(w_sum <= 1e-9 && w_prod <= 1e-9 && w_l3 <= 1e-9, "closed forms");
  c.require(w_e3 <= 1e-9, "e3");
  c.require(w_D < 0, "D");
}

void c6(Check& c) {
  const auto Ps = validate(3, 0.5, 3.5, 4);
  const auto Pc = validate(1.5, 0.5, 3, 2);
  auto s = find_sigma_star(validate(3, 0.5, 4, 4), 3.5, 6.0);
  const auto Pstar = with_sigma(Ps, s.hi);
  ProfileOptions star;
  star.tail = TailMode::CompleteP1;
  struct Item {
    const char* name;
    ShotSpec spec;
    Params P;
    ProfileOptions o;
  };
  const std::vector<Item> items{{"P0", ShotSpec::from_p0(), Ps, {}},
                                {"P2", ShotSpec::from_p2(1e-13), Ps, {}},
                                {"Q1", ShotSpec::from_q1(), Ps, {}},
                                {"sigma*", ShotSpec::from_p2(), Pstar, star},
                                {"crit P2", ShotSpec::from_p2(1e-13), Pc, {}},
                                {"crit P0", ShotSpec::from_p0(1.0, 1e-6), Pc, {}}};
  const auto r = logspace(0.05, 2.0, 40);
  const std::vector<double> t{0, 0.3, 0.6, 0.9};
  double worst = 0, worst_log = 0;
  for (auto& it : items) {
    auto run = profile_shot(it.spec, it.P, it.o);
    const double res = ssode_residual(run.profile, it.P).max_rel;
    worst = std::max(worst, res);
    c.require(res <= 1e-5, std::string("SSODE ") + it.name);
    auto rep = pde_residual(run.profile, it.P, 1.0, r, t);
    worst_log = std::max(worst_log, rep.worst_log_ratio);
    c.require(rep.proportional && rep.evaluated > 0, std::string("PDE ") + it.name);
  }
  c.note << items.size() << " profiles, max SSODE " << worst << ", worst PDE ratio 10^" << worst_log;
}

void c7(Check& c) {
  std::mt19937_64 g(7);
  double wid = 0;
  for (int i = 0; i < 10000; ++i) {
    auto P = random_super(g);
    auto E = exponents(P);
    wid = std::max({wid, std::abs(E.alpha * (P.m - 1) - 2 * E.beta - 1),
                    std::abs(P.sigma * E.beta - (1 - P.p) * E.alpha - 1)});
  }
  c.note << "identities " << wid;
  c.require(wid <= 1e-12, "identities");

  std::uniform_real_distribution<double> u(0.05, 2.0), uy(-2, 2);
  bool planes = true;
  double wj = 0;
  for (int i = 0; i < 1000; ++i) {
    auto P = random_super(g);
    const FiniteField F(P);
    planes = planes && F({0, uy(g), u(g)})[0] == 0.0 && F({u(g), uy(g), 0})[2] == 0.0;
    const Vec3 s{u(g), uy(g), u(g)};
    const auto J = F.jacobian(s);
    double sc = 1;
    for (auto& row : J)
      for (double v : row) sc = std::max(sc, std::abs(v));
    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
      Vec3 a = s, b = s;
      a[j] += h;
      b[j] -= h;
      const Vec3 d = (1.0 / (2 * h)) * (F(a) - F(b));
      for (int k = 0; k < 3; ++k) wj = std::max(wj, std::abs(J[k][j] - d[k]) / sc);
    }
  }
  c.note << ", planes " << (planes ? "invariant" : "BROKEN") << ", Jacobian vs FD " << wj;
  c.require(planes, "invariant planes");
  c.require(wj <= 1e-6, "Jacobian");

  // Z nondecreasing along m+p = 2 orbits (X > 0).
  std::size_t orbits = 0, bad = 0;
  for (double s : {2.05, 2.5, 3.0, 4.0})
    for (auto spec : {ShotSpec::from_p2(), ShotSpec::from_p0(0.1), ShotSpec::from_p0(10)}) {
      auto sh = launch(spec, validate(1.5, 0.5, s, 2));
      ++orbits;
      const auto& y = sh.traj.y;
      for (std::size_t i = 1; i < y.size(); ++i)
        if (y[i - 1][0] > 0 && y[i][2] < y[i - 1][2]) {
          ++bad;
          break;
        }
    }
  c.note << ", Z monotone on " << orbits - bad << "/" << orbits << " orbits";
  c.require(bad == 0, "Z monotone");
}

void c8(Check& c) {
  const auto P = validate(3, 0.5, 50, 4);
  auto r1 = certify(make_surface(SurfaceId::Pi1, P), 10000);
  auto r2 = certify(make_surface(SurfaceId::Pi2, P), 10000);
  const auto k = large_sigma_constants(P);
  c.note << "B " << k.B << " A " << k.A << "; Pi1 " << r1.violation_count << "/" << r1.samples << ", Pi2 "
         << r2.violation_count << "/" << r2.samples << " violations";
  c.require(r1.pass() && r1.samples == 10000, "Pi1");
  c.require(r2.pass() && r2.samples == 10000, "Pi2");

  const auto Pz = validate(1.5, 0.5, 2.05, 2);
  std::vector<ShotSpec> specs;
  for (double e : {1e-5, 1e-6, 1e-7}) specs.push_back(ShotSpec::from_p2(e));
  for (int i = 0; i < 17; ++i) specs.push_back(ShotSpec::from_p0(std::pow(10.0, -2 + 4.0 * i / 16)));
  std::size_t held = 0;
  for (auto& sp : specs) {
    auto sh = launch(sp, Pz);
    bool in = false, ok = true;
    for (auto& s : sh.traj.y) {
      const bool a = region_membership(s, RegionId::D2, Pz, 1e-12) || region_membership(s, RegionId::D3, Pz, 1e-12);
      if (in && !a) ok = false;
      in = in || a;
    }
    held += ok;
  }
  c.note << "; D2uD3 invariant on " << held << "/" << specs.size() << " orbits";
  c.require(held == specs.size(), "region invariance");

  auto rc = certify(make_surface(SurfaceId::Cylinder, validate(1.5, 0.5, 3, 2)), 1000);
  c.note << "; cylinder " << rc.violation_count << "/" << rc.samples << " violations";
  c.require(rc.pass() && rc.samples == 1000, "cylinder");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget;  // seconds, 0 = none
    std::function<void(Check&)> run;
  };
  const std::vector<Criterion> all{{1, "small-sigma classification", 10, c1},
                                   {2, "critical exponent sigma*", 120, c2},
                                   {3, "large-sigma fate", 10, c3},
                                   {4, "m+p=2 suite", 60, c4},
                                   {5, "eigen cross-checks", 0, c5},
                                   {6, "residual verification", 0, c6},
                                   {7, "invariant suite", 0, c7},
                                   {8, "barrier certificates", 0, c8}};
  int failed = 0;
  for (auto& cr : all) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.require(false, std::string("exception: ") + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.budget > 0) c.require(dt < cr.budget, "over time budget");
    failed += !c.ok;
    std::printf("criterion %d %-28s %s  %.3fs  %s\n", cr.id, cr.name, c.ok ? "PASS" : "FAIL", dt, c.note.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed ? 1 : 0;
}
