#include "svlab/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "svlab/charge.hpp"
#include "svlab/errors.hpp"
#include "svlab/profiles.hpp"
#include "svlab/reduction.hpp"

namespace svlab::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::config, what); }

json mesh_json(const grid::MeshSpec& s) {
  json j;
  grid::to_json(j, s);
  return j;
}

std::vector<double> half_decades(double hi, double lo) {
  std::vector<double> g;
  for (double e = std::log10(hi); e >= std::log10(lo) - 1e-9; e -= 0.5) g.push_back(std::pow(10.0, e));
  return g;
}

const std::map<std::string, json>& default_table() {
  static const std::map<std::string, json> table = [] {
    std::map<std::string, json> t;
    profiles::SpikeOptions so;
    t["spike"] = {{"mesh", mesh_json(so.mesh)}, {"fit_lo", 10.0}, {"fit_hi", 15.0}, {"tol", so.tol}};
    profiles::VortexOptions vo;
    t["vortex"] = {{"degrees", {1}}, {"mesh", mesh_json(vo.mesh)}, {"r_probe", 30.0}, {"tol", vo.tol}};
    t["radial"] = {{"beta", -0.5}, {"d", 1}, {"R", 20.0}, {"h", 0.05}, {"route", "both"}, {"dbeta", 0.1}};
    t["ansatz"] = {{"k", 2},      {"d", 1},         {"beta", 0.0}, {"ls", {8.0, 10.0, 12.0, 14.0}},
                   {"beta_s2", 1e-4}, {"ls_s2", {8.0, 12.0, 16.0}}, {"alpha", 0.25},
                   {"h", 0.1},    {"arc", 0.1},     {"pad", 20.0}};
    t["reduce"] = {{"mode", "root"},
                   {"beta", 1e-5},
                   {"k", 2},
                   {"d", 1},
                   {"gamma", 2.0},
                   {"h", 0.1},
                   {"arc", 0.1},
                   {"pad", 20.0},
                   {"with_correction", false},
                   {"fit_ls", {8.0, 10.0, 12.0, 14.0, 16.0}},
                   {"beta_grid", half_decades(1e-3, 1e-8)},
                   {"fit_max_beta", 1e-4}};
    t["planar"] = {{"mode", "newton"},   {"beta", 1e-4}, {"k", 2},          {"d", 1},
                   {"l", nullptr},       {"h", 0.1},     {"arc", 0.1},      {"pad", 20.0},
                   {"tol", 1e-9},        {"max_iter", 10}, {"alpha", 0.25}, {"refine", false},
                   {"write_field", true}, {"pairs", {{1, 4}, {3, 4}}},     {"nondeg_r_max", 40.0},
                   {"nondeg_h", 0.05},   {"m_max", 24}};
    t["charge"] = {{"state", ""},          {"degrees", {1, 2}},     {"beta", -0.5},
                   {"R", 20.0},            {"h", 0.05},             {"m_theta", 256},
                   {"truncations", {3.0, 4.0, 5.0}}, {"planar", true}, {"planar_beta", 1e-4},
                   {"planar_k", 2},        {"planar_d", 1},         {"planar_l", nullptr},
                   {"planar_h", 0.1}};
    t["sweep"] = {{"target", "radial"}, {"grid", json::object()}, {"params", json::object()}, {"threads", 0}};
    for (auto& [k, v] : t) v["output"] = "";
    return t;
  }();
  return table;
}

bool compatible(const json& def, const json& val) {
  if (def.is_null()) return val.is_null() || val.is_number();
  if (def.is_number()) return val.is_number();
  if (def.is_string()) return val.is_string();
  if (def.is_boolean()) return val.is_boolean();
  if (def.is_array()) return val.is_array();
  if (def.is_object()) return val.is_object();
  return false;
}

double num(const json& p, const char* key) { return p.at(key).get<double>(); }
int integer(const json& p, const char* key) {
  const double x = p.at(key).get<double>();
  if (x != std::floor(x)) config_error(std::string(key) + " must be an integer");
  return static_cast<int>(x);
}
std::vector<double> nums(const json& p, const char* key) {
  std::vector<double> v;
  for (const auto& x : p.at(key)) {
    if (!x.is_number()) config_error(std::string(key) + " must hold numbers");
    v.push_back(x.get<double>());
  }
  return v;
}
std::vector<int> ints(const json& p, const char* key) {
  std::vector<int> v;
  for (double x : nums(p, key)) {
    if (x != std::floor(x)) config_error(std::string(key) + " must hold integers");
    v.push_back(static_cast<int>(x));
  }
  return v;
}

void require(bool ok, const std::string& what) {
  if (!ok) config_error(what);
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream o(p, std::ios::binary);
  if (!o) throw Error(ErrorKind::config, "cannot write " + p.string());
  o << s;
}

std::string read_text(const fs::path& p) {
  std::ifstream i(p, std::ios::binary);
  if (!i) config_error("cannot read " + p.string());
  std::ostringstream s;
  s << i.rdbuf();
  return s.str();
}

/// CSV text: one JSON header line, a column line, then rows.
struct Csv {
  json header;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

Csv parse_csv(const std::string& text) {
  Csv c;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) config_error("CSV lacks a JSON header line");
  try {
    c.header = json::parse(line.substr(2));
  } catch (const json::exception& e) {
    config_error(std::string("bad CSV header: ") + e.what());
  }
  if (!std::getline(in, line)) config_error("CSV lacks a column line");
  std::stringstream cols(line);
  for (std::string s; std::getline(cols, s, ',');) c.columns.push_back(s);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string s; std::getline(ss, s, ',');) {
      char* end = nullptr;
      row.push_back(std::strtod(s.c_str(), &end));
      if (end == s.c_str()) config_error("non-numeric CSV field '" + s + "'");
    }
    if (row.size() != c.columns.size()) config_error("ragged CSV row");
    c.rows.push_back(std::move(row));
  }
  return c;
}

template <class Row>
std::string csv_text(const json& header, const std::string& columns, const std::vector<Row>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "# " << header.dump() << '\n' << columns << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
  return os.str();
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

planar::AnsatzOptions ansatz_options(const json& p, const char* h = "h", const char* arc = "arc") {
  planar::AnsatzOptions o;
  o.h = num(p, h);
  o.arc = num(p, arc);
  if (p.contains("pad")) o.pad = num(p, "pad");
  return o;
}

// ---------------------------------------------------------------- handlers

json run_spike(const json& p, const fs::path& dir) {
  profiles::SpikeOptions o;
  grid::from_json(p.at("mesh"), o.mesh);
  o.tol = num(p, "tol");
  o.fit_lo = num(p, "fit_lo");
  o.fit_hi = num(p, "fit_hi");
  const auto w = profiles::solve_spike(o);
  const auto fit = profiles::fit_decay(w, o.fit_lo, o.fit_hi);
  write_text(dir / "spike.csv", profiles::to_csv(w));
  return {{"w0", w[0]}, {"A0", fit.A0}, {"rate", fit.rate}, {"residual", w.residual}, {"nodes", w.size()}};
}

json run_vortex(const json& p, const fs::path& dir) {
  profiles::VortexOptions o;
  grid::from_json(p.at("mesh"), o.mesh);
  o.tol = num(p, "tol");
  const double rp = num(p, "r_probe");
  json out = json::array();
  for (int d : ints(p, "degrees")) {
    const auto S = profiles::solve_vortex(d, o);
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < S.size(); ++i) monotone = monotone && S[i + 1] > S[i];
    const auto sp = S.spline();
    const double ratio = rp * rp * (1.0 - sp(rp)) / (0.5 * d * d);
    write_text(dir / ("vortex_d" + std::to_string(d) + ".csv"), profiles::to_csv(S));
    out.push_back({{"d", d},
                   {"far_field_ratio", ratio},
                   {"monotone", monotone},
                   {"slope0", S[1] / S.mesh.r(1)},
                   {"residual", S.residual}});
  }
  return {{"profiles", out}};
}

double max_diff(const radial::CoupledState& a, const radial::CoupledState& b) {
  double m = 0.0;
  const std::size_t n = std::min(a.u.size(), b.u.size());
  for (std::size_t i = 0; i < n; ++i)
    m = std::max({m, std::abs(a.u[i] - b.u[i]), std::abs(a.f[i] - b.f[i])});
  return m;
}

json state_summary(const radial::CoupledState& s) {
  bool dec = true, inc = true;
  for (std::size_t i = 0; i + 1 < s.u.size(); ++i) {
    dec = dec && s.u[i + 1] < s.u[i];
    inc = inc && s.f[i + 1] > s.f[i];
  }
  return {{"beta", s.beta},
          {"d", s.f.degree},
          {"R", s.ball_radius},
          {"energy", s.energy},
          {"u0", s.u[0]},
          {"f_slope0", s.f[1] / s.u.mesh.r(1)},
          {"residual", s.residual},
          {"route", s.route},
          {"u_decreasing", dec},
          {"f_increasing", inc}};
}

json run_radial(const json& p, const fs::path& dir) {
  const double beta = num(p, "beta"), R = num(p, "R"), h = num(p, "h");
  const int d = integer(p, "d");
  const std::string route = p.at("route");
  require(route == "newton" || route == "nehari" || route == "both", "route must be newton, nehari or both");
  json out;
  std::optional<radial::CoupledState> newton, nehari;
  if (route != "nehari") {
    auto [s, stages] = radial::continue_in_beta(beta, d, R, num(p, "dbeta"), h);
    int steps = 0;
    for (const auto& st : stages) steps = std::max(steps, st.newton_steps);
    out = state_summary(s);
    out["newton_steps_max"] = steps;
    out["stages"] = stages.size();
    write_text(dir / "state.csv", state_to_csv(s));
    newton = std::move(s);
  }
  if (route != "newton") {
    radial::MinimizeOptions mo;
    mo.h = h;
    auto [s, diag] = radial::minimize_ball(beta, d, R, mo);
    auto sum = state_summary(s);
    sum["constraint"] = diag.constraint_value;
    sum["iterations"] = diag.iterations;
    sum["gradient_norm"] = diag.gradient_norm;
    write_text(dir / (newton ? "state_nehari.csv" : "state.csv"), state_to_csv(s));
    if (newton) {
      out["nehari"] = sum;
      out["route_difference"] = max_diff(*newton, s);
      out["route"] = "both";
    } else {
      out = sum;
    }
  }
  return out;
}

json run_ansatz(const json& p, const fs::path& dir) {
  const int k = integer(p, "k"), d = integer(p, "d");
  const double alpha = num(p, "alpha");
  const auto opt = ansatz_options(p);
  std::vector<std::vector<double>> rows;
  std::vector<double> l1, y1, l2, y2;
  for (double l : nums(p, "ls")) {
    const auto r = planar::residual_report(planar::build_ansatz(l, k, d, opt), num(p, "beta"), alpha);
    rows.push_back({l, r.beta, r.s1_l2, r.s2_dstar});
    l1.push_back(l);
    y1.push_back(std::log(r.s1_l2));
  }
  for (double l : nums(p, "ls_s2")) {
    const auto r = planar::residual_report(planar::build_ansatz(l, k, d, opt), num(p, "beta_s2"), alpha);
    rows.push_back({l, r.beta, r.s1_l2, r.s2_dstar});
    l2.push_back(std::log(l));
    y2.push_back(std::log(r.s2_dstar));
  }
  write_text(dir / "residuals.csv",
             csv_text(json{{"k", k}, {"d", d}, {"alpha", alpha}}, "l,beta,s1_l2,s2_dstar", rows));
  json out{{"k", k}, {"d", d}, {"s1_target", -2.0 * std::sin(kPi / k)}, {"s2_target", 2.0 + alpha}};
  out["s1_slope"] = l1.size() >= 2 ? json(fit_slope(l1, y1)) : json(nullptr);
  out["s2_exponent"] = l2.size() >= 2 ? json(fit_slope(l2, y2)) : json(nullptr);
  return out;
}

json run_reduce(const json& p, const fs::path& dir) {
  const int k = integer(p, "k"), d = integer(p, "d");
  const std::string mode = p.at("mode");
  if (mode == "balance") {
    std::vector<std::vector<double>> rows;
    double worst = 0.0;
    for (double b : nums(p, "beta_grid")) {
      const auto r = reduction::solve_lhat(b, k);
      rows.push_back({b, r.lhat, r.residual});
      worst = std::max(worst, r.residual);
    }
    std::vector<double> fit_grid;
    for (double b : nums(p, "beta_grid"))
      if (b <= num(p, "fit_max_beta")) fit_grid.push_back(b);
    const auto fit = reduction::check_expansion(fit_grid, k);
    bool rem_decreasing = true;
    for (std::size_t i = 0; i + 1 < fit.remainder.size(); ++i)
      rem_decreasing = rem_decreasing && fit.remainder[i + 1] < fit.remainder[i];
    write_text(dir / "balance.csv", csv_text(json{{"k", k}}, "beta,lhat,residual", rows));
    return {{"k", k},
            {"max_residual", worst},
            {"leading", fit.leading},
            {"target", fit.target},
            {"rel_error", fit.rel_error},
            {"c_k", fit.c_k},
            {"remainder_decreasing", rem_decreasing}};
  }
  require(mode == "root", "reduce mode must be root or balance");
  const double beta = num(p, "beta");
  reduction::RootOptions ro;
  ro.gamma = num(p, "gamma");
  ro.force.mesh = ansatz_options(p);
  ro.force.with_correction = p.at("with_correction").get<bool>();
  const auto r = reduction::find_root(beta, k, d, ro);
  std::vector<reduction::ReducedForce> pts = {r.lo, r.at_root, r.hi};
  std::vector<double> ls, I1, I2;
  for (double l : nums(p, "fit_ls")) {
    const auto f = reduction::reduced_force(l, beta, k, d, ro.force);
    ls.push_back(l);
    I1.push_back(f.I1);
    I2.push_back(f.I2);
    pts.push_back(f);
  }
  std::vector<std::vector<double>> rows;
  for (const auto& f : pts) rows.push_back({f.l, f.I1, f.I2, f.c_of_l});
  write_text(dir / "force.csv",
             csv_text(json{{"beta", beta}, {"k", k}, {"d", d}}, "l,I1,I2,c", rows));
  json out{{"beta", beta},       {"k", k},
           {"d", d},             {"lhat", r.lhat},
           {"l_beta", r.l_beta}, {"gamma", r.gamma},
           {"c_lo", r.lo.c_of_l}, {"c_hi", r.hi.c_of_l},
           {"decreasing", r.decreasing}, {"bisections", r.bisections},
           {"I1_slope_target", -2.0 * std::sin(kPi / k)}};
  if (ls.size() >= 2) {
    const auto f1 = reduction::fit_I1(ls, I1, k);
    out["I1_slope"] = f1.slope;
    out["I1_power"] = f1.power;
    out["I2_power"] = reduction::fit_I2_power(ls, I2);
  }
  return out;
}

json run_newton_planar(const json& p, const fs::path& dir) {
  const int k = integer(p, "k"), d = integer(p, "d");
  const double beta = num(p, "beta");
  json out{{"beta", beta}, {"k", k}, {"d", d}};
  double l;
  if (p.at("l").is_null()) {
    reduction::RootOptions ro;
    ro.force.mesh = ansatz_options(p);
    const auto r = reduction::find_root(beta, k, d, ro);
    l = r.l_beta;
    out["l_source"] = "root";
    out["lhat"] = r.lhat;
  } else {
    l = num(p, "l");
    out["l_source"] = "config";
  }
  out["l"] = l;
  planar::NewtonOptions no;
  no.tol = num(p, "tol");
  no.max_iter = integer(p, "max_iter");
  no.alpha = num(p, "alpha");
  auto solve = [&](const planar::AnsatzOptions& o) {
    return planar::newton_planar(planar::build_ansatz(l, k, d, o), beta, no);
  };
  const auto opt = ansatz_options(p);
  const auto rep = solve(opt);
  const double scale = planar::correction_scale(l, k, beta, no.alpha);
  const double C = (rep.max_du + rep.psi_star) / scale;
  const auto q = charge::charge_2d(rep.field);
  out["iterations"] = rep.iterations;
  out["residual"] = rep.residual_history.back();
  out["residual_history"] = rep.residual_history;
  out["winding"] = rep.winding;
  out["zeros_off_center"] = rep.zeros_off_center;
  out["max_du"] = rep.max_du;
  out["psi_star"] = rep.psi_star;
  out["C"] = C;
  out["linear_solver"] = rep.linear_solver;
  out["nodes"] = rep.field.mesh->size();
  out["Q"] = q.Q;
  if (p.at("refine").get<bool>()) {
    auto fine = opt;
    fine.h *= 0.5;
    fine.arc *= 0.5;
    const auto r2 = solve(fine);
    out["C_refined"] = (r2.max_du + r2.psi_star) / scale;
    out["residual_refined"] = r2.residual_history.back();
    out["iterations_refined"] = r2.iterations;
  }
  std::vector<std::vector<double>> hist;
  for (std::size_t i = 0; i < rep.residual_history.size(); ++i)
    hist.push_back({static_cast<double>(i), rep.residual_history[i]});
  write_text(dir / "history.csv", csv_text(json{{"beta", beta}, {"l", l}}, "iteration,residual", hist));
  if (p.at("write_field").get<bool>()) write_text(dir / "field.csv", planar::to_csv(rep.field, l, beta));
  return out;
}

json run_nondeg(const json& p, const fs::path& dir) {
  planar::NondegOptions o;
  o.r_max = num(p, "nondeg_r_max");
  o.h = num(p, "nondeg_h");
  o.m_max = integer(p, "m_max");
  const bool refine = p.at("refine").get<bool>();
  json res = json::array();
  std::vector<std::vector<double>> rows;
  for (const auto& pr : p.at("pairs")) {
    require(pr.is_array() && pr.size() == 2, "pairs must be [d, k] entries");
    const int d = pr[0].get<int>(), k = pr[1].get<int>();
    const auto a = planar::check_nondegeneracy(d, k, o);
    json e{{"d", d},       {"k", k},
           {"sigma_min", a.sigma_min}, {"m_at_min", a.m_at_min},
           {"predicted_resonant", planar::predicted_resonant(d, k)}};
    rows.push_back({double(d), double(k), o.h, a.sigma_min, double(a.m_at_min)});
    if (refine) {
      auto f = o;
      f.h *= 0.5;
      const auto b = planar::check_nondegeneracy(d, k, f);
      e["sigma_refined"] = b.sigma_min;
      rows.push_back({double(d), double(k), f.h, b.sigma_min, double(b.m_at_min)});
    }
    res.push_back(e);
  }
  write_text(dir / "nondegeneracy.csv", csv_text(json{{"r_max", o.r_max}}, "d,k,h,sigma_min,m_at_min", rows));
  return {{"results", res}};
}

json run_planar(const json& p, const fs::path& dir) {
  const std::string mode = p.at("mode");
  if (mode == "nondegeneracy") return run_nondeg(p, dir);
  require(mode == "newton", "planar mode must be newton or nondegeneracy");
  return run_newton_planar(p, dir);
}

json report_json(const charge::ChargeReport& r) {
  return {{"Q", r.Q},
          {"d", r.d},
          {"method", charge::to_string(r.method)},
          {"error_estimate", r.quadrature_error},
          {"deficit", r.deficit},
          {"R_max", r.r_max}};
}

json run_charge(const json& p, const fs::path& dir) {
  const int M = integer(p, "m_theta");
  const std::string state = p.at("state");
  if (!state.empty()) {
    fs::path path = state;
    if (fs::is_directory(path)) path = fs::exists(path / "state.csv") ? path / "state.csv" : path / "field.csv";
    const std::string text = read_text(path);
    const auto c = parse_csv(text);
    if (c.header.value("kind", "") == "coupled_state") return report_json(charge::charge_radial(state_from_csv(text)));
    return report_json(charge::charge_2d(field_from_csv(text)));
  }
  json radial = json::array();
  std::vector<std::vector<double>> rows;
  for (int d : ints(p, "degrees")) {
    auto [s, stages] = radial::continue_in_beta(num(p, "beta"), d, num(p, "R"), 0.1, num(p, "h"));
    const auto qr = charge::charge_radial(s);
    const auto q2 = charge::charge_2d(charge::planar_from_radial(s, M, 2));
    json e{{"d", d}, {"radial", report_json(qr)}, {"quadrature_2d", report_json(q2)}};
    json tr = json::array();
    for (double Rt : nums(p, "truncations")) {
      const auto t = charge::truncate(s, Rt);
      const double measured = 0.5 * d - charge::charge_2d(charge::planar_from_radial(t, M, 2)).Q;
      const double predicted = charge::charge_radial(t).deficit;
      tr.push_back({{"R", Rt}, {"measured", measured}, {"predicted", predicted}});
      rows.push_back({double(d), Rt, measured, predicted});
    }
    e["truncation"] = tr;
    radial.push_back(e);
  }
  write_text(dir / "deficit.csv", csv_text(json{{"beta", num(p, "beta")}}, "d,R,measured,predicted", rows));
  json out{{"radial_states", radial}};
  if (p.at("planar").get<bool>()) {
    json q{{"mode", "newton"},
           {"beta", p.at("planar_beta")},
           {"k", p.at("planar_k")},
           {"d", p.at("planar_d")},
           {"l", p.at("planar_l")},
           {"h", p.at("planar_h")},
           {"arc", p.at("planar_h")},
           {"write_field", false}};
    const json full = overlay(defaults_for("planar"), q, "charge.planar");
    fs::create_directories(dir / "planar");
    const json ps = run_newton_planar(full, dir / "planar");
    out["planar_state"] = {{"Q", ps.at("Q")}, {"d", ps.at("d")}, {"l", ps.at("l")}, {"residual", ps.at("residual")}};
  }
  return out;
}

json run_one(const ExperimentConfig& c, const fs::path& dir);

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + '"';
}

/// Flattened scalar view of a summary for the merged sweep table; arrays stay JSON text.
void flatten(const json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out[prefix] = csv_field(j.is_string() ? j.get<std::string>() : j.dump());
  }
}

json run_sweep(const json& p, const fs::path& dir) {
  const std::string target = p.at("target");
  require(target != "sweep", "a sweep cannot target sweep");
  const json base = overlay(defaults_for(target), p.at("params"), "sweep.params");
  const json& grid = p.at("grid");
  std::vector<std::string> keys;
  std::vector<std::vector<json>> axes;
  std::size_t total = grid.empty() ? 0 : 1;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    require(it.value().is_array(), "grid axis " + it.key() + " must be an array");
    require(base.contains(it.key()), "grid axis " + it.key() + " is not a parameter of " + target);
    keys.push_back(it.key());
    axes.emplace_back(it.value().begin(), it.value().end());
    total *= axes.back().size();
  }
  require(total <= 10000, "sweep grids are limited to 10^4 combinations");
  std::vector<ExperimentConfig> runs(total);
  for (std::size_t n = 0; n < total; ++n) {
    json patch = json::object();
    std::size_t rest = n;
    for (std::size_t a = keys.size(); a-- > 0;) {
      patch[keys[a]] = axes[a][rest % axes[a].size()];
      rest /= axes[a].size();
    }
    runs[n] = {target, overlay(base, patch, "sweep.grid")};
  }
  std::vector<json> results(total);
  std::atomic<std::size_t> next{0};
  int threads = integer(p, "threads");
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<std::size_t>(threads, std::max<std::size_t>(total, 1)));
  auto worker = [&] {
    for (std::size_t n; (n = next.fetch_add(1)) < total;) {
      const fs::path sub = dir / "rows" / std::to_string(n);
      try {
        results[n] = {{"status", "ok"}, {"summary", execute(runs[n], sub)}};
      } catch (const Error& e) {
        results[n] = {{"status", to_string(e.kind())}, {"message", e.what()}};
      } catch (const std::exception& e) {
        results[n] = {{"status", "error"}, {"message", e.what()}};
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<std::map<std::string, std::string>> flat(total);
  std::vector<std::string> cols;
  for (std::size_t n = 0; n < total; ++n) {
    if (results[n].contains("summary")) flatten(results[n]["summary"], "", flat[n]);
    for (const auto& [k, v] : flat[n])
      if (std::find(cols.begin(), cols.end(), k) == cols.end() && std::find(keys.begin(), keys.end(), k) == keys.end())
        cols.push_back(k);
  }
  std::sort(cols.begin(), cols.end());
  std::ostringstream os;
  os << "# " << json{{"target", target}, {"grid", grid}, {"rows", total}}.dump() << "\nindex";
  for (const auto& k : keys) os << ',' << k;
  os << ",status";
  for (const auto& c : cols) os << ',' << c;
  os << '\n';
  int failures = 0, config_failures = 0;
  for (std::size_t n = 0; n < total; ++n) {
    const std::string st = results[n]["status"];
    failures += st != "ok";
    config_failures += st == to_string(ErrorKind::config);
    os << n;
    for (const auto& k : keys) os << ',' << csv_field(runs[n].params[k].dump());
    os << ',' << st;
    for (const auto& c : cols) {
      auto it = flat[n].find(c);
      os << ',' << (it == flat[n].end() ? "" : it->second);
    }
    os << '\n';
  }
  write_text(dir / "sweep.csv", os.str());
  json out{{"target", target}, {"rows", total}, {"failures", failures}};
  out["config_failures"] = config_failures;
  return out;
}

json run_one(const ExperimentConfig& c, const fs::path& dir) {
  if (c.command == "spike") return run_spike(c.params, dir);
  if (c.command == "vortex") return run_vortex(c.params, dir);
  if (c.command == "radial") return run_radial(c.params, dir);
  if (c.command == "ansatz") return run_ansatz(c.params, dir);
  if (c.command == "reduce") return run_reduce(c.params, dir);
  if (c.command == "planar") return run_planar(c.params, dir);
  if (c.command == "charge") return run_charge(c.params, dir);
  if (c.command == "sweep") return run_sweep(c.params, dir);
  config_error("unknown subcommand " + c.command);
}

/// Flag text to JSON: literal JSON when it parses, a bare comma list for arrays, else a string.
json flag_value(const std::string& s, const json& def) {
  try {
    return json::parse(s);
  } catch (const json::exception&) {
  }
  if (def.is_array()) {
    try {
      return json::parse("[" + s + "]");
    } catch (const json::exception&) {
    }
  }
  if (def.is_string()) return s;
  config_error("cannot parse value '" + s + "'");
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  j = c.params;
  j["command"] = c.command;
}

void from_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) config_error("config must be a JSON object");
  c.command = j.at("command").get<std::string>();
  c.params = j;
  c.params.erase("command");
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"spike", "vortex", "radial", "ansatz",
                                             "reduce", "planar", "charge", "sweep"};
  return c;
}

json defaults_for(const std::string& command) {
  const auto& t = default_table();
  auto it = t.find(command);
  if (it == t.end()) config_error("unknown subcommand " + command);
  return it->second;
}

json overlay(const json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) config_error(where + ": expected an object");
  json out = base;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (!base.contains(it.key())) config_error(where + ": unknown key " + it.key());
    const json& def = base[it.key()];
    if (!compatible(def, it.value())) config_error(where + ": wrong type for " + it.key());
    // free-form blocks of sweep are replaced wholesale
    if (def.is_object() && !def.empty())
      out[it.key()] = overlay(def, it.value(), where + "." + it.key());
    else
      out[it.key()] = it.value();
  }
  return out;
}

void validate(const ExperimentConfig& c) {
  const json& p = c.params;
  auto positive = [&](const char* k) { require(num(p, k) > 0.0, std::string(k) + " must be positive"); };
  auto k_ok = [&](const char* k) { require(integer(p, k) >= 2 && integer(p, k) <= 12, std::string(k) + " must lie in [2, 12]"); };
  auto d_ok = [&](const char* k) { require(integer(p, k) >= 1 && integer(p, k) <= 6, std::string(k) + " must lie in [1, 6]"); };
  auto mesh_ok = [&] {
    grid::MeshSpec s;
    grid::from_json(p.at("mesh"), s);
    require(s.h_core > 0 && s.ratio >= 1.0 && s.r_max > s.core_end && s.core_end > 0, "bad mesh block");
  };
  if (c.command == "spike") {
    mesh_ok();
    require(num(p, "fit_lo") < num(p, "fit_hi"), "fit window must be increasing");
  } else if (c.command == "vortex") {
    mesh_ok();
    for (int d : ints(p, "degrees")) require(d >= 1 && d <= 6, "degrees must lie in [1, 6]");
  } else if (c.command == "radial") {
    require(num(p, "beta") < 0.0 && num(p, "beta") >= -1.0, "radial beta must lie in [-1, 0)");
    d_ok("d");
    positive("R");
    positive("h");
    positive("dbeta");
  } else if (c.command == "ansatz") {
    k_ok("k");
    d_ok("d");
    positive("h");
    positive("arc");
    require(num(p, "alpha") > 0.0 && num(p, "alpha") < 1.0, "alpha must lie in (0, 1)");
  } else if (c.command == "reduce") {
    k_ok("k");
    d_ok("d");
    if (p.at("mode") == "root") require(num(p, "beta") > 0.0 && num(p, "beta") < 1e-2, "beta must lie in (0, 1e-2)");
    for (double b : nums(p, "beta_grid")) require(b > 0.0 && b < 1.0, "beta_grid entries must lie in (0, 1)");
    positive("gamma");
  } else if (c.command == "planar") {
    k_ok("k");
    d_ok("d");
    positive("h");
    require(num(p, "beta") >= 0.0 && num(p, "beta") < 1e-2, "planar beta must lie in [0, 1e-2)");
    require(integer(p, "max_iter") >= 1, "max_iter must be at least 1");
  } else if (c.command == "charge") {
    require(integer(p, "m_theta") >= 8 && integer(p, "m_theta") % 4 == 0, "m_theta must be a multiple of 4, at least 8");
    require(num(p, "beta") < 0.0, "charge radial beta must be negative");
  } else if (c.command == "sweep") {
    require(std::find(commands().begin(), commands().end(), p.at("target").get<std::string>()) != commands().end(),
            "unknown sweep target");
  }
}

std::string config_hash(const ExperimentConfig& c) {
  json j = c.params;
  j.erase("output");
  const std::string s = json{{"command", c.command}, {"params", j}}.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

fs::path output_root() {
  const char* e = std::getenv("SVLAB_OUTPUT_ROOT");
  return e && *e ? fs::path(e) : fs::path("svlab_out");
}

json execute(const ExperimentConfig& c, const fs::path& dir) {
  validate(c);
  fs::create_directories(dir);
  return run_one(c, dir);
}

std::string state_to_csv(const radial::CoupledState& s) {
  json h{{"kind", "coupled_state"}, {"beta", s.beta}, {"d", s.f.degree}, {"R", s.ball_radius},
         {"energy", s.energy},      {"residual", s.residual}, {"route", s.route}};
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < s.u.size(); ++i) rows.push_back({s.u.mesh.r(i), s.u[i], s.f[i]});
  return csv_text(h, "r,u,f", rows);
}

radial::CoupledState state_from_csv(const std::string& text) {
  const auto c = parse_csv(text);
  if (c.header.value("kind", "") != "coupled_state" || c.columns != std::vector<std::string>{"r", "u", "f"})
    config_error("not a coupled state CSV");
  std::vector<double> r, u, f;
  for (const auto& row : c.rows) {
    r.push_back(row[0]);
    u.push_back(row[1]);
    f.push_back(row[2]);
  }
  radial::CoupledState s;
  const auto mesh = grid::RadialMesh::from_nodes(r, false);
  s.u.mesh = s.f.mesh = mesh;
  s.u.values = u;
  s.u.kind = profiles::Kind::coupled_u;
  s.f.values = f;
  s.f.kind = profiles::Kind::coupled_f;
  s.f.degree = c.header.at("d").get<int>();
  s.beta = c.header.at("beta").get<double>();
  s.ball_radius = c.header.at("R").get<double>();
  s.energy = c.header.value("energy", 0.0);
  s.residual = c.header.value("residual", 0.0);
  const std::string route = c.header.value("route", "");
  for (const char* known : {"decoupled", "newton", "nehari"})
    if (route == known) s.route = known;
  return s;
}

planar::PlanarField field_from_csv(const std::string& text) {
  const auto c = parse_csv(text);
  if (c.columns != std::vector<std::string>{"r", "theta", "u", "v1", "v2"}) config_error("not a planar field CSV");
  const int M = c.header.at("m_theta").get<int>(), k = c.header.at("k").get<int>();
  const std::size_t rings = c.header.at("rings").get<std::size_t>();
  if (c.rows.size() != 1 + (rings - 1) * static_cast<std::size_t>(M)) config_error("planar CSV row count mismatch");
  std::vector<double> r = {0.0};
  for (std::size_t i = 1; i < rings; ++i) r.push_back(c.rows[1 + (i - 1) * M][0]);
  auto mesh = std::make_shared<const grid::SectorMesh>(grid::RadialMesh::from_nodes(r, false), M, k);
  planar::PlanarField f;
  f.mesh = mesh;
  f.k = k;
  f.d = c.header.at("d").get<int>();
  f.u = grid::SectorField(mesh);
  f.v1 = grid::SectorField(mesh);
  f.v2 = grid::SectorField(mesh);
  for (std::size_t n = 0; n < c.rows.size(); ++n) {
    if (std::abs(c.rows[n][0] - mesh->r_of(n)) > 1e-12 * (1 + c.rows[n][0]) ||
        std::abs(c.rows[n][1] - mesh->theta_of(n)) > 1e-12)
      config_error("planar CSV nodes are not in sector layout");
    f.u[n] = c.rows[n][2];
    f.v1[n] = c.rows[n][3];
    f.v2[n] = c.rows[n][4];
  }
  return f;
}

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"spike-vortex laboratory"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, std::string> config_files;
  static const std::map<std::string, std::string> about = {
      {"spike", "ground-state spike and its decay rate"},
      {"vortex", "vortex profiles and far-field check"},
      {"radial", "coupled radial state on a ball"},
      {"ansatz", "polygon ansatz residual scalings"},
      {"reduce", "balance radius or reduced-force root"},
      {"planar", "planar Newton solve or nondegeneracy scan"},
      {"charge", "topological charge of a state"},
      {"sweep", "parameter grid over another command"}};
  for (const auto& name : commands()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->set_help_flag("--help");
    sub->add_option("--config", config_files[name], "JSON config file");
    const json def = defaults_for(name);
    for (auto it = def.begin(); it != def.end(); ++it) sub->add_option("--" + it.key(), flags[name][it.key()], "default " + it.value().dump());
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", to_string(ErrorKind::config)}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  ExperimentConfig cfg{name, defaults_for(name)};
  try {
    if (!config_files[name].empty()) {
      json file;
      try {
        file = json::parse(read_text(config_files[name]));
      } catch (const json::exception& e) {
        config_error(std::string("malformed config: ") + e.what());
      }
      if (!file.is_object()) config_error("config must be a JSON object");
      if (file.contains("command")) {
        if (file["command"] != name) config_error("config is for " + file["command"].dump() + ", not " + name);
        file.erase("command");
      }
      cfg.params = overlay(cfg.params, file, "config");
    }
    json patch = json::object();
    for (const auto& [key, text] : flags[name])
      if (app.get_subcommand(name)->count("--" + key)) patch[key] = flag_value(text, cfg.params[key]);
    cfg.params = overlay(cfg.params, patch, "flags");
    validate(cfg);

    const std::string hash = config_hash(cfg);
    const std::string sub = cfg.params["output"].get<std::string>();
    const fs::path dir = output_root() / (sub.empty() ? name + "-" + hash.substr(0, 12) : sub);
    const auto t0 = std::chrono::steady_clock::now();
    const json summary = execute(cfg, dir);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json record{{"command", name}, {"config_hash", hash}, {"config", cfg}, {"outputs", summary}};
    write_text(dir / "summary.json", record.dump(2) + "\n");
    write_text(dir / "config.json", json(cfg).dump(2) + "\n");
    write_text(dir / "timing.json", json{{"wall_time_s", wall}}.dump() + "\n");
    json line = summary;
    line["command"] = name;
    line["config_hash"] = hash;
    line["output_dir"] = dir.string();
    out << line.dump() << '\n';
    if (name == "sweep" && summary.at("failures").get<int>() > 0)
      return summary.at("config_failures").get<int>() > 0 ? 2 : 3;
    return 0;
  } catch (const Error& e) {
    err << json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump() << '\n';
    return e.is_config() ? 2 : 3;
  } catch (const json::exception& e) {
    err << json{{"error", to_string(ErrorKind::config)}, {"message", e.what()}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << json{{"error", "solver"}, {"message", e.what()}}.dump() << '\n';
    return 3;
  }
}

}  // namespace svlab::cli
