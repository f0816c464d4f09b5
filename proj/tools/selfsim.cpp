// selfsim: command-line front end for the self-similar profile library.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selfsim/selfsim.hpp"

namespace fs = std::filesystem;
using namespace selfsim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitUnclassified = 4;

struct Common {
  std::string config;
  std::optional<double> m, p, sigma;
  std::optional<int> N;
  std::optional<double> rtol, capture_radius;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  unsigned parallel = 0;
  std::size_t max_rows = 20000;
};

struct ShotArgs {
  std::string source = "FromP2";
  double eps = 1e-6, K = 1.0, C = 1.0, xi_seed = 1e-3, v0 = 1.0;
  std::optional<double> lambda;
};

void add_common(CLI::App* sc, Common& c, bool sweeps = false) {
  sc->add_option("--config", c.config, "JSON config file {m, p, sigma, N, tolerances, seed}");
  sc->add_option("--m", c.m, "diffusion exponent m > 1");
  sc->add_option("--p", c.p, "reaction exponent 0 < p < 1");
  sc->add_option("--sigma", c.sigma, "weight exponent");
  sc->add_option("--N", c.N, "space dimension");
  sc->add_option("--rtol", c.rtol, "relative tolerance");
  sc->add_option("--capture-radius", c.capture_radius, "capture ball radius (relative)");
  sc->add_option("--seed", c.seed, "sampler seed");
  sc->add_option("--out-dir", c.out_dir, "output directory (default $SELFSIM_OUT_DIR or .)");
  sc->add_option("--max-rows", c.max_rows, "trajectory CSV row cap, thinned by arc length (0 = all)");
  if (sweeps) sc->add_option("--parallel", c.parallel, "worker count for sweeps (0 = all cores)");
}

void add_shot(CLI::App* sc, ShotArgs& s) {
  sc->add_option("--source", s.source, "FromP2 | FromP0 | FromQ1 | BackwardFromInterface")
      ->check(CLI::IsMember({"FromP2", "FromP0", "FromQ1", "BackwardFromInterface"}));
  sc->add_option("--eps", s.eps, "seed offset for FromP2 and backward shots");
  sc->add_option("--K", s.K, "FromP0 constant in f ~ K xi^((sigma+2)/(m-p))");
  sc->add_option("--C", s.C, "FromQ1 constant");
  sc->add_option("--xi-seed", s.xi_seed, "seed radius for FromP0 / FromQ1");
  sc->add_option("--v0", s.v0, "backward shot from P(v0), m+p>2");
  sc->add_option("--lambda", s.lambda, "backward shot from the parabola point, m+p=2");
}

ShotSpec make_spec(const ShotArgs& a) {
  ShotSpec s;
  if (a.source == "FromP2") s = ShotSpec::from_p2(a.eps);
  else if (a.source == "FromP0") s = ShotSpec::from_p0(a.K, a.xi_seed);
  else if (a.source == "FromQ1") s = ShotSpec::from_q1(a.C, a.xi_seed);
  else s = a.lambda ? ShotSpec::backward_parabola(*a.lambda, a.eps) : ShotSpec::backward(a.v0, a.eps);
  check_spec(s);
  return s;
}

RunConfig resolve(const Common& c, bool need_sigma, json base = json::object(), bool* rtol_given = nullptr) {
  json j = base;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) fail(ErrorKind::ConfigError, "cannot open config " + c.config);
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
  }
  if (!j.is_object()) fail(ErrorKind::ConfigError, "config must be a JSON object");
  if (c.m) j["m"] = *c.m;
  if (c.p) j["p"] = *c.p;
  if (c.sigma) j["sigma"] = *c.sigma;
  if (c.N) j["N"] = *c.N;
  if (c.seed) j["seed"] = *c.seed;
  if (c.rtol || c.capture_radius) {
    json t = j.contains("tolerances") ? j["tolerances"] : json::object();
    if (c.rtol) t["rtol"] = *c.rtol;
    if (c.capture_radius) t["capture_radius"] = *c.capture_radius;
    j["tolerances"] = t;
  }
  if (rtol_given) *rtol_given = j.contains("tolerances") && j["tolerances"].is_object() && j["tolerances"].contains("rtol");
  return parse_config(j, need_sigma);
}

fs::path out_dir(const Common& c) {
  std::string d = c.out_dir;
  if (d.empty()) {
    const char* env = std::getenv("SELFSIM_OUT_DIR");
    d = env && *env ? env : ".";
  }
  fs::path p(d);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) fail(ErrorKind::ConfigError, "cannot create output directory " + d);
  return p;
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

std::vector<double> parse_grid(const std::string& spec) {
  // "a:b:n" (n points, inclusive) or "v1,v2,..."
  std::vector<double> g;
  if (spec.find(':') != std::string::npos) {
    std::stringstream ss(spec);
    std::string a, b, n;
    std::getline(ss, a, ':');
    std::getline(ss, b, ':');
    std::getline(ss, n, ':');
    const double lo = parse_double(a), hi = parse_double(b);
    const double cnt = parse_double(n);
    if (!(cnt >= 2) || cnt != std::floor(cnt)) fail(ErrorKind::ConfigError, "grid count must be an integer >= 2");
    const int k = static_cast<int>(cnt);
    for (int i = 0; i < k; ++i) g.push_back(lo + (hi - lo) * i / (k - 1));
  } else {
    std::stringstream ss(spec);
    std::string v;
    while (std::getline(ss, v, ',')) g.push_back(parse_double(v));
  }
  if (g.empty()) fail(ErrorKind::ConfigError, "empty grid");
  return g;
}

json fate_table(const std::vector<SweepRow>& rows) {
  json t = json::array();
  for (auto& r : rows) {
    json e = to_json(r.fate);
    e["sigma"] = r.sigma;
    t.push_back(e);
  }
  return t;
}

int fate_exit(const OrbitFate& f) { return f.tag == FateTag::Undecided ? kExitUnclassified : 0; }

// ------------------------------------------------------------ analyze

json analyze_report(const Params& P) {
  const auto E = exponents(P);
  json j;
  j["regime"] = to_string(P.regime);
  j["saddle_node_at_infinity"] = P.saddle_node_at_infinity();
  j["sigma_lower_bound"] = sigma_lower_bound(P.m, P.p);
  j["alpha"] = E.alpha;
  j["beta"] = E.beta;
  j["L"] = E.L;
  j["xi_max"] = E.xi_max ? json(*E.xi_max) : json(nullptr);
  json id;
  id["alpha(m-1)-2beta-1"] = E.alpha * (P.m - 1) - 2 * E.beta - 1;
  id["sigma*beta-(1-p)alpha-1"] = P.sigma * E.beta - (1 - P.p) * E.alpha - 1;
  j["identities"] = id;
  json pts = json::array();
  for (auto& cp : critical_points(P)) {
    json c;
    c["tag"] = to_string(cp.tag);
    c["chart"] = to_string(cp.chart);
    c["location"] = vec_json(cp.location);
    if (cp.param) c["param"] = *cp.param;
    if (cp.sphere) c["sphere"] = {(*cp.sphere)[0], (*cp.sphere)[1], (*cp.sphere)[2], (*cp.sphere)[3]};
    if (cp.saddle_node) c["saddle_node"] = true;
    try {
      c["eigen"] = to_json(eigen(cp, P));
    } catch (const Error& e) {
      c["eigen"] = nullptr;
      c["note"] = std::string(to_string(e.kind())) + ": " + e.what();
    }
    pts.push_back(c);
  }
  j["critical_points"] = pts;
  auto cf = p2_closed_form(P);
  j["P2_closed_form"] = {{"sum12", cf.sum}, {"prod12", cf.prod}, {"lambda3", cf.lambda3},
                         {"D", cf.D},       {"e3", vec_json(cf.e3)}};
  return j;
}

// -------------------------------------------------------------- profile

json profile_report(const Profile& pr, const Params& P, const ProfileRun* run) {
  json j;
  j["origin_class"] = to_string(pr.origin);
  j["samples"] = pr.size();
  j["xi_range"] = {num(pr.xi.front()), num(pr.xi.back())};
  j["y_consistency"] = num(pr.y_consistency);
  if (auto e = expected_origin_exponent(pr.origin, P)) j["expected_origin_exponent"] = *e;
  if (run) {
    j["fate"] = to_json(run->fate);
    j["tail"] = run->tail;
    if (run->origin_fit)
      j["origin_fit"] = {{"exponent", run->origin_fit->exponent},
                         {"constant", run->origin_fit->constant},
                         {"points", run->origin_fit->points}};
    else
      j["origin_fit"] = {{"note", run->origin_note}};
  } else {
    try {
      auto o = fit_origin(pr);
      j["origin_fit"] = {{"exponent", o.exponent}, {"constant", o.constant}, {"points", o.points}};
    } catch (const Error& e) {
      j["origin_fit"] = {{"note", e.what()}};
    }
  }
  if (pr.interface) j["interface"] = to_json(*pr.interface);
  else j["interface"] = {{"note", run ? run->interface_note : "none"}};
  try {
    auto R = ssode_residual(pr, P);
    j["ssode_residual"] = {{"max_rel", R.max_rel}, {"l2_rel", R.l2_rel}, {"points", R.points}};
  } catch (const Error& e) {
    j["ssode_residual"] = {{"note", e.what()}};
  }
  try {
    std::vector<double> rg, tg{0.0, 0.3, 0.6, 0.9};
    const double lo = pr.xi.front(), hi = pr.xi.back();
    for (int i = 0; i < 40; ++i) rg.push_back(lo * std::pow(hi / lo, (i + 0.5) / 40));
    auto D = pde_residual(pr, P, 1.0, rg, tg);
    j["pde_residual"] = {{"T", 1.0},
                         {"evaluated", D.evaluated},
                         {"skipped", D.skipped},
                         {"worst_log10_ratio", num(D.worst_log_ratio)},
                         {"max_rel", D.max_rel_pde},
                         {"proportional_within_10", D.proportional}};
  } catch (const Error& e) {
    j["pde_residual"] = {{"note", e.what()}};
  }
  return j;
}

// ---------------------------------------------------------------- repro

json repro_orbits(const Params& P, const std::vector<std::pair<std::string, ShotSpec>>& shots,
                  const fs::path& path, const json& config, std::size_t max_rows) {
  std::vector<Shot> out;
  std::vector<OrbitFate> fates;
  for (auto& [label, s] : shots) {
    out.push_back(launch(s, P));
    fates.push_back(classify(out.back().traj, P));
    out.back().traj = thin(out.back().traj, max_rows);
  }
  std::vector<LabeledTrajectory> ts;
  json fj = json::array();
  for (std::size_t i = 0; i < out.size(); ++i) {
    ts.push_back({shots[i].first, &out[i].traj});
    json f = to_json(fates[i]);
    f["orbit"] = shots[i].first;
    f["shot"] = to_json(shots[i].second);
    fj.push_back(f);
  }
  write_trajectory(path.string(), ts, config, {{"fates", fj}});
  return fj;
}

json region_grid(const Params& P, const fs::path& path, const json& config) {
  const auto z = zone_constants(P);
  std::ostringstream os;
  os << config_header(config) << "region,X,Y,Z_lo,Z_hi\n";
  const int nx = 40, ny = 80, nz = 400;
  std::size_t rows = 0;
  for (RegionId r : {RegionId::D1, RegionId::D2, RegionId::D3}) {
    for (int i = 0; i <= nx; ++i) {
      const double X = z.Xstar * i / nx;
      for (int k = 0; k <= ny; ++k) {
        const double Y = -z.ba + (0.5 + z.ba) * k / ny;
        const double zmax = std::max(z.d, z.a) * 1.05;
        double lo = NAN, hi = NAN;
        for (int q = 0; q <= nz; ++q) {
          const double Z = zmax * q / nz;
          if (region_membership({X, Y, Z}, r, P)) {
            if (std::isnan(lo)) lo = Z;
            hi = Z;
          }
        }
        if (std::isnan(lo)) continue;
        os << to_string(r) << ',' << fmt(X) << ',' << fmt(Y) << ',' << fmt(lo) << ',' << fmt(hi) << '\n';
        ++rows;
      }
    }
  }
  write_text(path.string(), os.str());
  json j;
  j["rows"] = rows;
  j["constants"] = {{"c", z.c}, {"d", z.d}, {"a", z.a}, {"e", z.e}, {"f", z.f}, {"Xstar", z.Xstar}};
  return j;
}

json run_config_for(const Params& P) {
  RunConfig c;
  c.m = P.m;
  c.p = P.p;
  c.N = P.N;
  c.sigma = P.sigma;
  c.regime_tol = P.regime_tol;
  return config_json(c);
}

int error_exit(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::RangeViolation:
    case ErrorKind::BracketError: return kExitConfig;
    case ErrorKind::Unclassifiable: return kExitUnclassified;
    default: return kExitNumerical;
  }
}

void print_error(const std::string& kind, const std::string& msg, int code) {
  json e;
  e["error"] = kind;
  e["message"] = msg;
  e["exit_code"] = code;
  std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-similar blow-up profiles of u_t = Lap(u^m) + |x|^sigma u^p"};
  app.require_subcommand(1);

  Common c;
  ShotArgs sa;

  auto* analyze = app.add_subcommand("analyze", "critical points, eigen-data and closed-form cross-checks");
  add_common(analyze, c);

  auto* shoot = app.add_subcommand("shoot", "single trajectory and its fate");
  add_common(shoot, c);
  add_shot(shoot, sa);
  std::string out_name;
  shoot->add_option("--output", out_name, "trajectory CSV name (default shoot.csv)");

  auto* sweep = app.add_subcommand("sweep-sigma", "fate table over a sigma grid");
  add_common(sweep, c, true);
  add_shot(sweep, sa);
  std::string grid;
  sweep->add_option("--grid", grid, "a:b:n or v1,v2,...")->required();

  auto* star = app.add_subcommand("find-sigma-star", "bisection for the P0/Q3 fate boundary of the P2 orbit");
  add_common(star, c);
  double lo = 3.5, hi = 6.0, width = 1e-4;
  star->add_option("--lo", lo, "bracket lower end");
  star->add_option("--hi", hi, "bracket upper end");
  star->add_option("--width", width, "final bracket width");

  auto* lmap = app.add_subcommand("lambda-map", "parabola landing point lambda(sigma) of the P2 orbit, m+p=2");
  add_common(lmap, c, true);
  std::string lgrid = "2.1,2.05,2.02";
  lmap->add_option("--grid", lgrid, "sigma grid");

  auto* isweep = app.add_subcommand("interface-sweep", "backward shots from P(v0), m+p>2");
  add_common(isweep, c, true);
  double vlo = 1e-2, vhi = 1e2;
  int vn = 21;
  double ieps = 1e-6;
  isweep->add_option("--v-lo", vlo, "smallest v0");
  isweep->add_option("--v-hi", vhi, "largest v0");
  isweep->add_option("--n", vn, "log-spaced grid size");
  isweep->add_option("--eps", ieps, "seed offset");

  auto* prof = app.add_subcommand("profile", "profile CSV and fit report from a shot or a trajectory CSV");
  add_common(prof, c);
  add_shot(prof, sa);
  std::string traj_in, orbit_label, origin_name, tail_mode = "auto";
  prof->add_option("--trajectory", traj_in, "trajectory CSV written by shoot or repro");
  prof->add_option("--orbit", orbit_label, "orbit label inside a multi-orbit CSV");
  prof->add_option("--origin", origin_name, "origin class for CSV input")
      ->check(CLI::IsMember({"Q1Type", "P2Type", "P0Type", "AsymptoteType", "Unknown"}));
  prof->add_option("--tail", tail_mode, "auto | deepen | complete-p1 | none")
      ->check(CLI::IsMember({"auto", "deepen", "complete-p1", "none"}));
  std::string prof_name = "profile";
  prof->add_option("--output", prof_name, "output stem (writes STEM.csv and STEM.json)");

  auto* cert = app.add_subcommand("certify", "sampled sign certificate on a barrier surface");
  add_common(cert, c);
  std::string surface = "Pi2";
  std::size_t samples = 10000;
  std::optional<double> optB, optA, threshold_limit;
  double delta = 1e-2;
  cert->add_option("--surface", surface, "Cylinder | PlaneNYkV | PlaneCYZ | PlaneAXZ | Pi1 | Pi2 | YFloor")
      ->check(CLI::IsMember({"Cylinder", "PlaneNYkV", "PlaneCYZ", "PlaneAXZ", "Pi1", "Pi2", "YFloor"}));
  cert->add_option("--samples", samples, "sample count (>= 1000)");
  cert->add_option("--B", optB, "override B");
  cert->add_option("--A", optA, "override A");
  cert->add_option("--delta", delta, "Pi2 region margin below Y(P2)");
  cert->add_option("--threshold-limit", threshold_limit,
                   "also search the smallest passing sigma by doubling from sigma up to this limit");

  auto* repro = app.add_subcommand("repro", "data behind the phase-space figures");
  add_common(repro, c);
  std::string figure = "all";
  repro->add_option("--figure", figure, "1 | 2 | 3 | all")->check(CLI::IsMember({"1", "2", "3", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("ConfigError", e.what(), kExitConfig);
    return kExitConfig;
  }

  try {
    if (analyze->parsed()) {
      auto rc = resolve(c, true);
      auto P = rc.params();
      json j = analyze_report(P);
      j["config"] = config_json(rc);
      emit(j);
      return 0;
    }
    if (shoot->parsed()) {
      auto rc = resolve(c, true);
      auto P = rc.params();
      auto spec = make_spec(sa);
      auto sh = launch(spec, P, rc.shot);
      auto f = classify(sh.traj, P);
      auto dir = out_dir(c);
      fs::path path = dir / (out_name.empty() ? "shoot.csv" : out_name);
      json fj = to_json(f);
      const Trajectory written = thin(sh.traj, c.max_rows);
      write_trajectory(path.string(), {{"", &written}}, config_json(rc), {{"shot", to_json(spec)}, {"fate", fj}});
      json j;
      j["config"] = config_json(rc);
      j["shot"] = to_json(spec);
      j["fate"] = fj;
      j["trajectory"] = path.string();
      j["events"] = sidecar_path(path.string());
      emit(j);
      return fate_exit(f);
    }
    if (sweep->parsed()) {
      auto rc = resolve(c, false);
      auto g = parse_grid(grid);
      auto spec = make_spec(sa);
      for (double s : g) rc.at(s);
      auto rows = sweep_sigma(rc.at(g.front()), g, spec, rc.shot, c.parallel);
      json j;
      j["config"] = config_json(rc);
      j["shot"] = to_json(spec);
      j["rows"] = fate_table(rows);
      json fl = json::array();
      for (auto i : fate_flips(rows))
        fl.push_back({{"between", {rows[i].sigma, rows[i + 1].sigma}},
                      {"fates", {to_string(rows[i].fate.tag), to_string(rows[i + 1].fate.tag)}}});
      j["flips"] = fl;
      emit(j);
      return 0;
    }
    if (star->parsed()) {
      auto rc = resolve(c, false);
      rc.at(lo);
      auto r = find_sigma_star(rc.at(lo), lo, hi, ShotSpec::from_p2(), rc.shot, width);
      json j;
      j["config"] = config_json(rc);
      j["sigma_star"] = r.sigma_star;
      j["bracket"] = {r.lo, r.hi};
      j["iterations"] = r.history.size();
      j["fate_lo"] = to_json(r.fate_lo);
      j["fate_hi"] = to_json(r.fate_hi);
      j["interrupted"] = r.interrupted;
      if (r.interrupted) j["fate_interrupt"] = to_json(r.fate_interrupt);
      emit(j);
      return r.interrupted ? kExitUnclassified : 0;
    }
    if (lmap->parsed()) {
      auto rc = resolve(c, false);
      auto g = parse_grid(lgrid);
      for (double s : g) rc.at(s);
      auto t = lambda_of_sigma(rc.at(g.front()), g, rc.shot, c.parallel);
      json j;
      j["config"] = config_json(rc);
      j["rows"] = fate_table(t.rows);
      j["all_parabola"] = t.all_parabola;
      j["increasing_toward_zero"] = t.increasing_toward_zero;
      emit(j);
      return t.all_parabola ? 0 : kExitUnclassified;
    }
    if (isweep->parsed()) {
      auto rc = resolve(c, true);
      auto P = rc.params();
      if (!(vlo > 0 && vhi > vlo && vn >= 2)) fail(ErrorKind::ConfigError, "need 0 < v-lo < v-hi and n >= 2");
      std::vector<double> g;
      for (int i = 0; i < vn; ++i) g.push_back(vlo * std::pow(vhi / vlo, static_cast<double>(i) / (vn - 1)));
      auto s = interface_sweep(P, g, rc.shot, ieps, 30, c.parallel);
      json j;
      j["config"] = config_json(rc);
      j["U0"] = s.U0;
      j["V0"] = s.V0;
      json rows = json::array();
      for (auto& r : s.rows) {
        json e = to_json(r.fate);
        e["v0"] = r.v0;
        e["class"] = to_string(r.cls);
        rows.push_back(e);
      }
      j["rows"] = rows;
      json b = json::array();
      for (auto& x : s.boundaries)
        b.push_back({{"v_lo", x.v_lo}, {"v_hi", x.v_hi}, {"class_lo", to_string(x.cls_lo)}, {"class_hi", to_string(x.cls_hi)}});
      j["boundaries"] = b;
      emit(j);
      return 0;
    }
    if (prof->parsed()) {
      auto dir = out_dir(c);
      json report;
      Profile pr;
      RunConfig rc;
      std::optional<ProfileRun> run;
      if (!traj_in.empty()) {
        auto L = read_trajectory(traj_in);
        json base = L.config.is_object() ? L.config : json::object();
        rc = resolve(c, true, base);
        auto P = rc.params();
        const Trajectory* t = nullptr;
        for (auto& [label, tr] : L.orbits)
          if (orbit_label.empty() || label == orbit_label) {
            t = &tr;
            break;
          }
        if (!t) fail(ErrorKind::ConfigError, "orbit \"" + orbit_label + "\" not in " + traj_in);
        OriginClass oc = OriginClass::Unknown;
        for (OriginClass k : {OriginClass::Q1Type, OriginClass::P2Type, OriginClass::P0Type,
                              OriginClass::AsymptoteType})
          if (origin_name == to_string(k)) oc = k;
        pr = reconstruct(*t, P, oc);
        try {
          pr.interface = fit_interface(pr, P);
        } catch (const Error&) {
        }
        report = profile_report(pr, P, nullptr);
        report["input"] = traj_in;
      } else {
        bool rtol_given = false;
        rc = resolve(c, true, json::object(), &rtol_given);
        auto P = rc.params();
        ProfileOptions po;
        const double profile_rtol = po.shot.rtol;
        po.shot = rc.shot;
        if (!rtol_given) po.shot.rtol = profile_rtol;
        po.tail = tail_mode == "deepen"        ? TailMode::Deepen
                  : tail_mode == "complete-p1" ? TailMode::CompleteP1
                  : tail_mode == "none"        ? TailMode::None
                                               : TailMode::Auto;
        auto spec = make_spec(sa);
        run = profile_shot(spec, P, po);
        pr = run->profile;
        report = profile_report(pr, P, &*run);
        report["shot"] = to_json(spec);
      }
      report["config"] = config_json(rc);
      const fs::path csv = dir / (prof_name + ".csv"), js = dir / (prof_name + ".json");
      write_text(csv.string(), profile_csv(pr, config_json(rc)));
      write_text(js.string(), report.dump(2) + "\n");
      report["profile_csv"] = csv.string();
      emit(report);
      return 0;
    }
    if (cert->parsed()) {
      auto rc = resolve(c, true);
      auto P = rc.params();
      if (samples < 1000) fail(ErrorKind::ConfigError, "certificates need at least 1000 samples");
      auto id = *surface_from_string(surface);
      SurfaceOptions so;
      so.B = optB;
      so.A = optA;
      so.delta = delta;
      auto S = make_surface(id, P, so);
      auto r = certify(S, default_region(S), samples, rc.seed);
      json j = to_json(r);
      j["config"] = config_json(rc);
      if (threshold_limit) {
        auto t = smallest_passing_sigma(id, P, P.sigma, *threshold_limit, samples, rc.seed, 1e-2, so);
        json th;
        th["label"] = "empirical";
        th["smallest_passing_sigma"] = t.passing ? json(*t.passing) : json(nullptr);
        th["largest_failing_sigma"] = t.failing ? json(*t.failing) : json(nullptr);
        json pr_ = json::array();
        for (auto& [s, v] : t.probes) pr_.push_back({{"sigma", s}, {"violations", v}});
        th["probes"] = pr_;
        j["threshold"] = th;
      }
      emit(j);
      return 0;
    }
    if (repro->parsed()) {
      auto dir = out_dir(c);
      json j;
      const bool all = figure == "all";
      if (all || figure == "1") {
        auto P = validate(3, 0.5, 3.5, 4);
        auto path = dir / "figure1_orbits.csv";
        j["figure1"] = {{"file", path.string()},
                        {"orbits", repro_orbits(P, {{"FromP0", ShotSpec::from_p0()}, {"FromP2", ShotSpec::from_p2()}},
                                                path, run_config_for(P), c.max_rows)}};
      }
      if (all || figure == "2") {
        auto P = validate(1.5, 0.5, 2.05, 2);
        auto path = dir / "figure2_regions.csv";
        json r = region_grid(P, path, run_config_for(P));
        r["file"] = path.string();
        j["figure2"] = r;
      }
      if (all || figure == "3") {
        auto base = validate(3, 0.5, 4.822, 4);
        auto s = find_sigma_star(base, 3.5, 6.0);
        auto Ps = with_sigma(base, s.sigma_star), P6 = with_sigma(base, 6.0);
        auto pa = dir / "figure3a_orbits.csv", pb = dir / "figure3b_orbits.csv";
        std::vector<std::pair<std::string, ShotSpec>> shots{{"FromP2", ShotSpec::from_p2()},
                                                            {"FromP0", ShotSpec::from_p0()}};
        j["figure3"] = {{"sigma_star", s.sigma_star},
                        {"a", {{"file", pa.string()}, {"sigma", Ps.sigma}, {"orbits", repro_orbits(Ps, shots, pa, run_config_for(Ps), c.max_rows)}}},
                        {"b", {{"file", pb.string()}, {"sigma", 6.0}, {"orbits", repro_orbits(P6, shots, pb, run_config_for(P6), c.max_rows)}}}};
      }
      emit(j);
      return 0;
    }
  } catch (const Error& e) {
    const int code = error_exit(e.kind());
    print_error(std::string(to_string(e.kind())), e.what(), code);
    return code;
  } catch (const json::exception& e) {
    print_error("ConfigError", e.what(), kExitConfig);
    return kExitConfig;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what(), kExitNumerical);
    return kExitNumerical;
  }
  return 0;
}
