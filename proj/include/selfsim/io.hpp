#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfsim/barriers.hpp"
#include "selfsim/dynsys.hpp"
#include "selfsim/errors.hpp"
#include "selfsim/integrate.hpp"
#include "selfsim/params.hpp"
#include "selfsim/profile.hpp"
#include "selfsim/shoot.hpp"

namespace selfsim {

using json = nlohmann::ordered_json;

// Shortest round-trip text for a double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// JSON has no inf/nan; they travel as null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline json vec_json(const Vec3& v) { return json::array({num(v[0]), num(v[1]), num(v[2])}); }

// ------------------------------------------------------------- config

struct RunConfig {
  double m = 0, p = 0;
  int N = 1;
  std::optional<double> sigma;  // commands with brackets or grids may omit it
  double regime_tol = 1e-12;
  ShotOptions shot;
  std::uint64_t seed = 0;

  Params at(double s) const { return validate(m, p, s, N, regime_tol); }
  Params params() const {
    if (!sigma) fail(ErrorKind::ConfigError, "this command needs \"sigma\"");
    return at(*sigma);
  }
};

namespace detail {

inline double get_number(const json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number()) fail(ErrorKind::ConfigError, "\"" + key + "\" must be a number");
  return v.get<double>();
}

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) fail(ErrorKind::ConfigError, "unknown key \"" + it.key() + "\" in " + where);
}

}  // namespace detail

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> k{"m", "p", "sigma", "N", "regime_tol", "tolerances", "seed"};
  return k;
}

inline const std::set<std::string>& tolerance_keys() {
  static const std::set<std::string> k{"rtol",           "atol",     "capture_radius", "refine_radius",
                                       "diverge",        "max_eta",  "max_steps"};
  return k;
}

// Validates the schema, then the parameter ranges.  Missing m, p or N is a
// config error; sigma may be omitted when the command supplies it (brackets, grids).
inline RunConfig parse_config(const json& j, bool need_sigma = true) {
  if (!j.is_object()) fail(ErrorKind::ConfigError, "config must be a JSON object");
  detail::reject_unknown(j, config_keys(), "config");
  for (const char* k : {"m", "p", "N"})
    if (!j.contains(k)) fail(ErrorKind::ConfigError, std::string("missing key \"") + k + "\"");
  if (need_sigma && !j.contains("sigma")) fail(ErrorKind::ConfigError, "missing key \"sigma\"");
  const auto& jn = j.at("N");
  if (!jn.is_number_integer()) fail(ErrorKind::ConfigError, "\"N\" must be an integer");
  RunConfig c;
  c.m = detail::get_number(j, "m");
  c.p = detail::get_number(j, "p");
  c.N = jn.get<int>();
  if (j.contains("sigma")) c.sigma = detail::get_number(j, "sigma");
  if (j.contains("regime_tol")) c.regime_tol = detail::get_number(j, "regime_tol");
  if (!(c.regime_tol >= 0)) fail(ErrorKind::ConfigError, "regime_tol must be nonnegative");
  if (j.contains("seed")) {
    const auto& js = j.at("seed");
    if (!js.is_number_integer() || (!js.is_number_unsigned() && js.get<std::int64_t>() < 0))
      fail(ErrorKind::ConfigError, "\"seed\" must be a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  // Range checks on m, p, N run even when sigma comes later.
  if (c.sigma) c.params();
  else if (std::isfinite(c.m) && std::isfinite(c.p) && c.m > 1) c.at(sigma_lower_bound(c.m, c.p) + 1.0);
  else c.at(1.0);
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    if (!t.is_object()) fail(ErrorKind::ConfigError, "\"tolerances\" must be an object");
    detail::reject_unknown(t, tolerance_keys(), "tolerances");
    auto& o = c.shot;
    if (t.contains("rtol")) o.rtol = detail::get_number(t, "rtol");
    if (t.contains("atol")) {
      const auto& a = t.at("atol");
      if (a.is_number()) {
        o.atol = {a.get<double>(), a.get<double>(), a.get<double>()};
      } else if (a.is_array() && a.size() == 3 && a[0].is_number() && a[1].is_number() && a[2].is_number()) {
        o.atol = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
      } else {
        fail(ErrorKind::ConfigError, "\"atol\" must be a number or an array of 3 numbers");
      }
    }
    if (t.contains("capture_radius")) o.capture_radius = detail::get_number(t, "capture_radius");
    if (t.contains("refine_radius")) o.refine_radius = detail::get_number(t, "refine_radius");
    if (t.contains("diverge")) o.diverge = detail::get_number(t, "diverge");
    if (t.contains("max_eta")) o.max_eta = detail::get_number(t, "max_eta");
    if (t.contains("max_steps")) {
      const auto& ms = t.at("max_steps");
      if (!ms.is_number_integer() || ms.get<std::int64_t>() <= 0) fail(ErrorKind::ConfigError, "\"max_steps\" must be a positive integer");
      o.max_steps = t.at("max_steps").get<std::size_t>();
    }
    if (!(o.rtol >= 1e-12 && o.rtol <= 1e-3)) fail(ErrorKind::ConfigError, "rtol must lie in [1e-12, 1e-3]");
    if (!(o.capture_radius > 0 && o.refine_radius > 0 && o.diverge > 0 && o.max_eta >= 0))
      fail(ErrorKind::ConfigError, "radii and thresholds must be positive");
  }
  return c;
}

inline RunConfig load_config(const std::string& path, bool need_sigma = true) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ConfigError, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, need_sigma);
}

inline json params_json(const Params& P) {
  json j;
  j["m"] = P.m;
  j["p"] = P.p;
  j["sigma"] = num(P.sigma);
  j["N"] = P.N;
  j["regime_tol"] = P.regime_tol;
  return j;
}

inline json config_json(const RunConfig& c) {
  json j;
  j["m"] = c.m;
  j["p"] = c.p;
  j["sigma"] = c.sigma ? json(*c.sigma) : json(nullptr);
  j["N"] = c.N;
  j["regime_tol"] = c.regime_tol;
  json t;
  t["rtol"] = c.shot.rtol;
  t["atol"] = vec_json(c.shot.atol);
  t["capture_radius"] = c.shot.capture_radius;
  t["refine_radius"] = c.shot.refine_radius;
  t["diverge"] = c.shot.diverge;
  t["max_eta"] = c.shot.max_eta;
  t["max_steps"] = c.shot.max_steps;
  j["tolerances"] = t;
  j["seed"] = c.seed;
  return j;
}

// ------------------------------------------------------------ JSON views

inline json to_json(const Event& e) {
  json j;
  j["kind"] = to_string(e.kind);
  j["id"] = e.id;
  j["eta"] = num(e.eta);
  j["state"] = vec_json(e.state);
  j["value"] = num(e.value);
  if (e.component >= 0) j["component"] = e.component;
  return j;
}

inline json to_json(const BallMonitor& m) {
  json j;
  j["id"] = m.id;
  j["min_distance"] = num(m.min_distance);
  j["eta_at_min"] = num(m.eta_at_min);
  j["index_at_min"] = m.index_at_min;
  j["entered"] = m.entered;
  return j;
}

inline json to_json(const OrbitFate& f) {
  json j;
  j["fate"] = to_string(f.tag);
  j["lambda"] = f.lambda ? num(*f.lambda) : json(nullptr);
  j["evidence"] = to_string(f.evidence);
  j["evidence_id"] = f.evidence_id;
  j["distance"] = num(f.distance);
  j["eta"] = num(f.eta);
  j["state"] = vec_json(f.state);
  j["min_dist_P1"] = num(f.min_dist_p1);
  j["min_dist_peak"] = num(f.min_dist_peak);
  j["P1_ball_entered"] = f.p1_ball_entered;
  j["diagnostics"] = f.diagnostics;
  return j;
}

inline json to_json(const ShotSpec& s) {
  json j;
  j["source"] = to_string(s.source);
  switch (s.source) {
    case Source::FromP2: j["eps"] = s.eps; break;
    case Source::FromP0: j["K"] = s.K; j["xi_seed"] = s.xi_seed; break;
    case Source::FromQ1: j["C"] = s.C; j["xi_seed"] = s.xi_seed; break;
    case Source::BackwardFromInterface:
      j["eps"] = s.eps;
      if (s.lambda) j["lambda"] = *s.lambda;
      else j["v0"] = s.v0;
      break;
  }
  return j;
}

inline json to_json(const CertificateReport& r) {
  json j;
  j["surface"] = to_string(r.surface);
  j["region"] = r.region;
  j["samples"] = r.samples;
  j["attempts"] = r.attempts;
  j["expected_sign"] = r.expected_sign;
  j["extreme"] = num(r.extreme);
  j["violation_count"] = r.violation_count;
  json v = json::array();
  for (auto& x : r.violations) v.push_back({{"state", vec_json(x.state)}, {"value", num(x.value)}});
  j["violations"] = v;
  json c = json::object();
  for (auto& [k, val] : r.coefficients) c[k] = num(val);
  j["coefficients"] = c;
  j["verdict"] = r.pass() ? "pass" : "fail";
  return j;
}

inline json to_json(const Interface& I) {
  json j;
  j["xi0"] = num(I.xi0);
  j["contact_exponent"] = num(I.theta);
  j["amplitude"] = num(I.amplitude);
  j["type"] = to_string(I.type);
  j["points"] = I.points;
  j["f_window"] = {num(I.f_lo), num(I.f_hi)};
  j["flux_ratio"] = num(I.flux_ratio);
  return j;
}

inline json cplx_json(const cplx& z) { return json::array({num(z.real()), num(z.imag())}); }

inline json to_json(const EigenData& d) {
  json j;
  json ev = json::array(), vecs = json::array();
  for (int i = 0; i < 3; ++i) {
    ev.push_back(cplx_json(d.eigenvalues[i]));
    json v = json::array();
    for (int k = 0; k < 3; ++k) v.push_back(cplx_json(d.eigenvectors[i][k]));
    vecs.push_back(v);
  }
  j["eigenvalues"] = ev;
  j["eigenvectors"] = vecs;
  json ex = json::object(), rs = json::object();
  for (auto& [k, v] : d.extras) ex[k] = num(v);
  for (auto& [k, v] : d.residuals) rs[k] = num(v);
  j["closed_form"] = ex;
  j["residuals"] = rs;
  return j;
}

// -------------------------------------------------------------- CSV

inline std::string config_header(const json& config) { return "# config: " + config.dump() + "\n"; }

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::ConfigError, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorKind::ConfigError, "write failed for " + path);
}

// Copy keeping about max_rows samples, evenly spaced in phase-space arc
// length; first and last samples always kept.  max_rows = 0 keeps everything.
inline Trajectory thin(const Trajectory& tr, std::size_t max_rows) {
  if (max_rows == 0 || tr.size() <= max_rows) return tr;
  max_rows = std::max<std::size_t>(max_rows, 2);
  Trajectory o = tr;
  o.eta.clear();
  o.y.clear();
  double total = 0;
  for (std::size_t i = 1; i < tr.size(); ++i) total += norm(tr.y[i] - tr.y[i - 1]);
  const double step = total / static_cast<double>(max_rows - 1);
  double acc = 0, next = step;
  o.eta.push_back(tr.eta[0]);
  o.y.push_back(tr.y[0]);
  for (std::size_t i = 1; i + 1 < tr.size(); ++i) {
    acc += norm(tr.y[i] - tr.y[i - 1]);
    if (acc >= next && o.size() + 1 < max_rows) {
      o.eta.push_back(tr.eta[i]);
      o.y.push_back(tr.y[i]);
      while (next <= acc) next += step;
    }
  }
  o.eta.push_back(tr.eta.back());
  o.y.push_back(tr.y.back());
  return o;
}

struct LabeledTrajectory {
  std::string label;
  const Trajectory* traj = nullptr;
};

// Without labels: eta,c1,c2,c3,chart.  With labels an orbit column leads.
inline std::string trajectory_csv(const std::vector<LabeledTrajectory>& ts, const json& config) {
  std::ostringstream os;
  os << config_header(config);
  const bool labeled = ts.size() > 1 || (!ts.empty() && !ts[0].label.empty());
  os << (labeled ? "orbit,eta,c1,c2,c3,chart\n" : "eta,c1,c2,c3,chart\n");
  for (auto& t : ts) {
    const char* chart = to_string(t.traj->chart);
    for (std::size_t i = 0; i < t.traj->size(); ++i) {
      if (labeled) os << t.label << ',';
      const Vec3& y = t.traj->y[i];
      os << fmt(t.traj->eta[i]) << ',' << fmt(y[0]) << ',' << fmt(y[1]) << ',' << fmt(y[2]) << ',' << chart << '\n';
    }
  }
  return os.str();
}

inline json events_json(const Trajectory& tr) {
  json ev = json::array(), mon = json::array();
  for (auto& e : tr.events) ev.push_back(to_json(e));
  for (auto& m : tr.monitors) mon.push_back(to_json(m));
  json j;
  j["chart"] = to_string(tr.chart);
  j["direction"] = to_string(tr.direction);
  j["samples"] = tr.size();
  j["accepted_steps"] = tr.accepted;
  j["rejected_steps"] = tr.rejected;
  j["events"] = ev;
  j["monitors"] = mon;
  return j;
}

inline std::string sidecar_path(const std::string& csv_path) {
  const std::string ext = ".csv";
  if (csv_path.size() > ext.size() && csv_path.compare(csv_path.size() - ext.size(), ext.size(), ext) == 0)
    return csv_path.substr(0, csv_path.size() - ext.size()) + ".events.json";
  return csv_path + ".events.json";
}

// Writes path (CSV) and its events sidecar.
inline void write_trajectory(const std::string& path, const std::vector<LabeledTrajectory>& ts, const json& config,
                             const json& extra = json::object()) {
  write_text(path, trajectory_csv(ts, config));
  json side;
  side["config"] = config;
  json orbits = json::array();
  for (auto& t : ts) {
    json o = events_json(*t.traj);
    if (!t.label.empty()) o["orbit"] = t.label;
    orbits.push_back(o);
  }
  side["orbits"] = orbits;
  for (auto it = extra.begin(); it != extra.end(); ++it) side[it.key()] = it.value();
  write_text(sidecar_path(path), side.dump(2) + "\n");
}

inline std::optional<Chart> chart_from_string(const std::string& s) {
  for (Chart c : {Chart::Finite, Chart::UYV, Chart::XChart, Chart::YChart})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

struct LoadedTrajectory {
  json config;
  std::vector<std::pair<std::string, Trajectory>> orbits;
};

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail(ErrorKind::ConfigError, "bad number \"" + s + "\" in CSV");
  return v;
}

inline LoadedTrajectory read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ConfigError, "cannot open " + path);
  LoadedTrajectory L;
  std::string line;
  bool header = false, labeled = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# config: ", 0) == 0) {
      try {
        L.config = json::parse(line.substr(10));
      } catch (const json::parse_error&) {
        fail(ErrorKind::ConfigError, "bad config header in " + path);
      }
      continue;
    }
    if (line[0] == '#') continue;
    if (!header) {
      if (line == "orbit,eta,c1,c2,c3,chart") labeled = true;
      else if (line != "eta,c1,c2,c3,chart") fail(ErrorKind::ConfigError, "unexpected CSV header in " + path);
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != (labeled ? 6u : 5u)) fail(ErrorKind::ConfigError, "bad CSV row in " + path);
    const std::size_t o = labeled ? 1 : 0;
    const std::string label = labeled ? cells[0] : "";
    if (L.orbits.empty() || L.orbits.back().first != label) {
      L.orbits.push_back({label, Trajectory{}});
      auto ch = chart_from_string(cells[o + 4]);
      if (!ch) fail(ErrorKind::ConfigError, "unknown chart \"" + cells[o + 4] + "\"");
      L.orbits.back().second.chart = *ch;
    }
    auto& tr = L.orbits.back().second;
    tr.eta.push_back(parse_double(cells[o]));
    tr.y.push_back({parse_double(cells[o + 1]), parse_double(cells[o + 2]), parse_double(cells[o + 3])});
  }
  if (!header) fail(ErrorKind::ConfigError, "no CSV header in " + path);
  for (auto& [label, tr] : L.orbits)
    if (tr.size() >= 2 && tr.eta.back() < tr.eta.front()) tr.direction = Direction::Backward;
  return L;
}

inline std::string profile_csv(const Profile& pr, const json& config) {
  std::ostringstream os;
  os << config_header(config) << "xi,f\n";
  for (std::size_t i = 0; i < pr.size(); ++i) os << fmt(pr.xi[i]) << ',' << fmt(pr.f[i]) << '\n';
  return os.str();
}

}  // namespace selfsim
