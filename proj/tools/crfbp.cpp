// Batch front end: libration | orbit | family | manifold | connect | search | verify-tables.
// Exit codes: 0 success, 1 solver failure, 2 usage, 3 missing data.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crfbp/bvp.hpp"
#include "crfbp/dynamics.hpp"
#include "crfbp/errors.hpp"
#include "crfbp/io.hpp"
#include "crfbp/manifolds.hpp"
#include "crfbp/orbits.hpp"
#include "crfbp/search.hpp"

namespace fs = std::filesystem;
using namespace crfbp;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::array<double, 3> masses{0.4, 0.35, 0.25};
  int libration = 0;
  std::optional<double> energy;
  std::vector<double> energy_range;  // from, to, step
  int K_orbit = 50, N = 5, K_manifold = 20, M_cheb = 50, segments = 2;
  double scale = 0.1;
  // Raise the manifold order from N until the top-order norm drops below this (0 keeps N).
  double tail_target = 1e-12;
  SearchParams search;
  BvpOptions bvp;
  json connect = json::object();
  std::string out = "out";
  unsigned seed = 0;
  int jobs = 1;
  fs::path base_dir = ".";  // relative paths in the config resolve here
};

json config_json(const RunConfig& c) {
  json j = {{"masses", c.masses},
            {"libration", c.libration},
            {"K_orbit", c.K_orbit},
            {"N", c.N},
            {"K_manifold", c.K_manifold},
            {"M_cheb", c.M_cheb},
            {"segments", c.segments},
            {"scale", c.scale},
            {"tail_target", c.tail_target},
            {"seed", c.seed},
            {"search",
             {{"d_max", c.search.d_max},
              {"dt", c.search.dt},
              {"T_max", c.search.T_max},
              {"v_max", c.search.v_max},
              {"d_lib", c.search.d_lib},
              {"gap_threshold", c.search.gap_threshold},
              {"offset_epochs", c.search.offset_epochs},
              {"candidates_per_epoch", c.search.candidates_per_epoch},
              {"cluster_radius", c.search.cluster_radius},
              {"tol", c.search.tol},
              {"max_vertices", c.search.max_vertices}}},
            {"bvp",
             {{"R1", c.bvp.R1},
              {"R2", c.bvp.R2},
              {"drop_index", c.bvp.drop_index},
              {"max_iterations", c.bvp.max_iterations},
              {"tolerance", c.bvp.tolerance},
              {"adaptive", c.bvp.adaptive},
              {"max_tail", c.bvp.max_tail},
              {"max_segments", c.bvp.max_segments}}},
            {"connect", c.connect}};
  if (c.energy) j["energy"] = *c.energy;
  if (!c.energy_range.empty()) j["energy_range"] = c.energy_range;
  return j;
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

int parse_label(const json& j) {
  if (j.is_number_integer()) return j.get<int>();
  const auto s = j.get<std::string>();
  if (s.size() >= 2 && (s[0] == 'L' || s[0] == 'l')) return std::stoi(s.substr(1));
  return std::stoi(s);
}

void apply_config(RunConfig& c, const json& j) {
  static const std::vector<std::string> known = {
      "masses", "libration", "energy",  "energy_range", "K_orbit", "N",      "K_manifold", "M_cheb",
      "segments", "scale",   "tail_target", "search",   "bvp",     "connect", "seed",      "jobs"};
  for (const auto& [k, _] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw UsageError("unknown config key '" + k + "'");
  if (j.contains("masses")) {
    const auto m = j.at("masses").get<std::vector<double>>();
    if (m.size() == 2)
      c.masses = {m[0], m[1], 1.0 - m[0] - m[1]};
    else if (m.size() == 3)
      c.masses = {m[0], m[1], m[2]};
    else
      throw UsageError("masses must list two or three values");
  }
  if (j.contains("libration")) c.libration = parse_label(j.at("libration"));
  if (j.contains("energy")) c.energy = j.at("energy").get<double>();
  take(j, "energy_range", c.energy_range);
  take(j, "K_orbit", c.K_orbit);
  take(j, "N", c.N);
  take(j, "K_manifold", c.K_manifold);
  take(j, "M_cheb", c.M_cheb);
  take(j, "segments", c.segments);
  take(j, "scale", c.scale);
  take(j, "tail_target", c.tail_target);
  take(j, "seed", c.seed);
  take(j, "jobs", c.jobs);
  if (j.contains("search")) {
    const json& s = j.at("search");
    take(s, "d_max", c.search.d_max);
    take(s, "dt", c.search.dt);
    take(s, "T_max", c.search.T_max);
    take(s, "v_max", c.search.v_max);
    take(s, "d_lib", c.search.d_lib);
    take(s, "gap_threshold", c.search.gap_threshold);
    take(s, "offset_epochs", c.search.offset_epochs);
    take(s, "candidates_per_epoch", c.search.candidates_per_epoch);
    take(s, "cluster_radius", c.search.cluster_radius);
    take(s, "tol", c.search.tol);
    take(s, "max_vertices", c.search.max_vertices);
  }
  if (j.contains("bvp")) {
    const json& b = j.at("bvp");
    take(b, "R1", c.bvp.R1);
    take(b, "R2", c.bvp.R2);
    take(b, "drop_index", c.bvp.drop_index);
    take(b, "max_iterations", c.bvp.max_iterations);
    take(b, "tolerance", c.bvp.tolerance);
    take(b, "adaptive", c.bvp.adaptive);
    take(b, "max_tail", c.bvp.max_tail);
    take(b, "max_segments", c.bvp.max_segments);
  }
  if (j.contains("connect")) c.connect = j.at("connect");
}

void validate(const RunConfig& c) {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw UsageError(std::string(name) + " must be positive");
  };
  positive(c.scale, "scale");
  positive(c.search.d_max, "search.d_max");
  positive(c.search.dt, "search.dt");
  positive(c.search.tol, "search.tol");
  positive(c.search.v_max, "search.v_max");
  positive(c.search.d_lib, "search.d_lib");
  positive(c.bvp.tolerance, "bvp.tolerance");
  positive(c.bvp.max_tail, "bvp.max_tail");
  if (c.search.gap_threshold < 0.0) throw UsageError("search.gap_threshold must be non-negative");
  if (c.tail_target < 0.0) throw UsageError("tail_target must be non-negative");
  if (c.K_orbit < 2 || c.K_manifold < 2 || c.N < 1 || c.M_cheb < 4 || c.segments < 1)
    throw UsageError("solver sizes out of range");
  if (c.bvp.drop_index != 2 && c.bvp.drop_index != 4 && c.bvp.drop_index != 6)
    throw UsageError("bvp.drop_index must be 2, 4 or 6");
  if (!c.energy_range.empty()) {
    if (c.energy_range.size() != 3) throw UsageError("energy_range is [from, to, step]");
    if (!(c.energy_range[2] > 0.0)) throw UsageError("energy_range step must be positive");
    if (c.energy_range[1] < c.energy_range[0]) throw UsageError("energy_range must be ordered");
  }
  if (c.libration < 0 || c.libration > 9) throw UsageError("libration label must be L0..L9");
}

std::vector<double> parse_list(const std::string& s, char sep) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("cannot parse number '" + item + "'");
    }
  }
  return out;
}

MassConfig mass_config(const RunConfig& c) {
  try {
    return primary_positions(c.masses[0], c.masses[1], c.masses[2]);
  } catch (const InvalidMassError& e) {
    throw UsageError(e.what());
  }
}

fs::path resolve(const RunConfig& c, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : c.base_dir / path;
}

json load_json(const fs::path& p) {
  if (!fs::exists(p)) throw MissingData("missing file " + p.string());
  return read_json(p);
}

double required_energy(const RunConfig& c) {
  if (!c.energy) throw UsageError("an energy is required (config 'energy' or --energy)");
  return *c.energy;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Plot stubs: data only, the artifact never renders.
void write_plot_stub(const fs::path& p, const std::string& csv, const std::string& x, const std::string& y) {
  write_text(p, "# Plot stub for " + csv + "; run with python3 after installing matplotlib.\n"
                "import csv, sys\nimport matplotlib.pyplot as plt\n\n"
                "rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else '" + csv + "')))\n"
                "plt.plot([float(r['" + x + "']) for r in rows], [float(r['" + y + "']) for r in rows], '.', ms=1)\n"
                "plt.xlabel('" + x + "')\nplt.ylabel('" + y + "')\nplt.axis('equal')\nplt.show()\n");
}

void write_meta(const RunConfig& c, const std::string& command, double seconds) {
  json meta = {{"command", command},
               {"wall_seconds", seconds},
               {"finished_unix", std::chrono::duration_cast<std::chrono::seconds>(
                                     std::chrono::system_clock::now().time_since_epoch())
                                     .count()}};
  write_json(fs::path(c.out) / "run_meta.json", meta);
}

const LibrationPoint& find_point(const std::vector<LibrationPoint>& pts, int label) {
  try {
    return libration_point(pts, label);
  } catch (const Error&) {
    throw Error("libration point L" + std::to_string(label) + " not found for these masses");
  }
}

PeriodicOrbit orbit_for(const RunConfig& c, const MassConfig& cfg) {
  const auto pts = find_libration_points(cfg);
  return vertical_orbit(find_point(pts, c.libration), required_energy(c), cfg, c.K_orbit);
}

ManifoldOptions manifold_options(const RunConfig& c) {
  ManifoldOptions o;
  o.order = c.N;
  o.modes = c.K_manifold;
  o.scale = c.scale;
  o.tail_target = c.tail_target;
  return o;
}

std::pair<FourierTaylor, FourierTaylor> manifolds_for(const RunConfig& c, const MassConfig& cfg,
                                                      const PeriodicOrbit& orbit) {
  const auto opt = manifold_options(c);
  return {solve_homological(orbit, Stability::Unstable, cfg, opt),
          solve_homological(orbit, Stability::Stable, cfg, opt)};
}

// Manifolds from cmd_manifold output when the config names them, otherwise computed.
std::pair<FourierTaylor, FourierTaylor> manifolds_from_config(const RunConfig& c, const MassConfig& cfg) {
  if (c.connect.contains("manifolds")) {
    const json& m = c.connect.at("manifolds");
    FourierTaylor P = manifold_from_json(load_json(resolve(c, m.at("unstable").get<std::string>())));
    FourierTaylor Q = manifold_from_json(load_json(resolve(c, m.at("stable").get<std::string>())));
    if (P.stability != Stability::Unstable || Q.stability != Stability::Stable)
      throw UsageError("connect.manifolds must name an unstable and a stable manifold");
    return {std::move(P), std::move(Q)};
  }
  return manifolds_for(c, cfg, orbit_for(c, cfg));
}

std::vector<double> range_values(const std::vector<double>& r) {
  std::vector<double> out;
  if (r.empty()) return out;
  const int n = static_cast<int>(std::floor((r[1] - r[0]) / r[2] + 1e-9));
  for (int i = 0; i <= n; ++i) out.push_back(r[0] + i * r[2]);
  return out;
}

// ---------------------------------------------------------------- commands

int cmd_libration(const RunConfig& c) {
  const MassConfig cfg = mass_config(c);
  const auto pts = find_libration_points(cfg);
  json rows = json::array();
  std::printf("%-4s %12s %12s %-14s %12s %10s\n", "name", "x", "y", "planar type", "J", "omega_z");
  for (const auto& p : pts) {
    std::printf("%-4s %12.8f %12.8f %-14s %12.8f %10.6f\n", p.name().c_str(), p.position[0], p.position[1],
                to_string(p.planar_type).c_str(), p.energy, p.omega_z);
    json ev = json::array();
    for (const auto& z : p.planar_eigenvalues) ev.push_back(complex_to_json(z));
    rows.push_back({{"name", p.name()},
                    {"label", p.label},
                    {"position", {p.position[0], p.position[1]}},
                    {"planar_type", to_string(p.planar_type)},
                    {"planar_eigenvalues", ev},
                    {"omega_z", p.omega_z},
                    {"energy", p.energy},
                    {"gradient_norm", p.gradient_norm}});
  }
  write_json(fs::path(c.out) / "libration.json", {{"config", config_json(c)}, {"points", rows}});
  return 0;
}

int cmd_orbit(const RunConfig& c) {
  const MassConfig cfg = mass_config(c);
  PeriodicOrbit orbit = orbit_for(c, cfg);
  orbit.floquet = floquet(orbit, cfg);
  const State6 p0 = orbit.at6(0.0);
  std::printf("L%d J=%.12f T=%.15f n=%d residual=%.2e\n", c.libration, orbit.energy, orbit.period(),
              orbit.floquet->n_unstable, orbit.residual);
  std::printf("P0 = [%.15f, %.15f, %.15f, %.15f, %.15f, %.15f]\n", p0[0], p0[1], p0[2], p0[3], p0[4], p0[5]);
  write_json(fs::path(c.out) / "orbit.json", {{"config", config_json(c)}, {"orbit", to_json(orbit, cfg)}});
  return 0;
}

// Members at the target energies, continued outward from the libration energy.
FamilyResult family_at(const LibrationPoint& lp, const std::vector<double>& targets, const MassConfig& cfg, int K,
                       std::vector<std::size_t>& order) {
  order.resize(targets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(targets[a] - lp.energy) < std::abs(targets[b] - lp.energy);
  });
  FamilyResult out;
  if (targets.empty()) return out;
  // Two sweeps away from the libration energy, one on each side of it.
  std::vector<std::size_t> ib, ia;
  for (std::size_t i : order) (targets[i] <= lp.energy ? ib : ia).push_back(i);
  out.members.resize(targets.size());
  std::vector<bool> have(targets.size(), false);
  for (const auto* side : {&ib, &ia}) {
    if (side->empty()) continue;
    std::vector<double> t;
    for (std::size_t i : *side) t.push_back(targets[i]);
    const PeriodicOrbit start = vertical_orbit(lp, t.front(), cfg, K);
    const FamilyResult r = continue_to_energies(start, t, cfg, K);
    for (std::size_t m = 0; m < r.members.size(); ++m) {
      out.members[(*side)[m]] = r.members[m];
      have[(*side)[m]] = true;
    }
    if (r.truncated) {
      out.truncated = true;
      out.last_energy = r.last_energy;
    }
  }
  std::vector<PeriodicOrbit> kept;
  order.clear();
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (have[i]) {
      kept.push_back(out.members[i]);
      order.push_back(i);
    }
  out.members = std::move(kept);
  return out;
}

int cmd_family(const RunConfig& c) {
  const MassConfig cfg = mass_config(c);
  const auto targets = range_values(c.energy_range);
  const auto pts = find_libration_points(cfg);
  std::vector<std::size_t> idx;
  const FamilyResult fam = targets.empty() ? FamilyResult{} : family_at(find_point(pts, c.libration), targets, cfg, c.K_orbit, idx);
  std::string csv = "x,xdot,y,ydot,z,zdot,T,n,J\n";
  json rows = json::array();
  for (std::size_t m = 0; m < fam.members.size(); ++m) {
    const auto& o = fam.members[m];
    const auto fd = floquet(o, cfg);
    const State6 p = o.at6(0.0);
    char buf[512];
    std::snprintf(buf, sizeof buf, "%.15f,%.15f,%.15f,%.15f,%.15f,%.15f,%.15f,%d,%.12f\n", p[0], p[1], p[2], p[3],
                  p[4], p[5], o.period(), fd.n_unstable, o.energy);
    csv += buf;
    rows.push_back({{"P0", {p[0], p[1], p[2], p[3], p[4], p[5]}},
                    {"T", o.period()},
                    {"n", fd.n_unstable},
                    {"J", o.energy}});
    std::printf("%s", buf);
  }
  write_text(fs::path(c.out) / "family.csv", csv);
  json report = {{"config", config_json(c)}, {"rows", rows}, {"truncated", fam.truncated}};
  if (fam.truncated) report["last_good_energy"] = fam.last_energy;
  write_json(fs::path(c.out) / "family.json", report);
  if (fam.truncated) {
    std::fprintf(stderr, "continuation truncated; last good J = %.12f\n", fam.last_energy);
    return 1;
  }
  return 0;
}

int cmd_manifold(const RunConfig& c) {
  const MassConfig cfg = mass_config(c);
  const PeriodicOrbit orbit = orbit_for(c, cfg);
  const auto [P, Q] = manifolds_for(c, cfg, orbit);
  const fs::path out(c.out);
  std::mt19937 rng(c.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  json diag = json::array();
  for (const FourierTaylor* m : {&P, &Q}) {
    const std::string name = to_string(m->stability);
    write_json(out / ("manifold_" + name + ".json"), to_json(*m));
    write_torus_csv(out / ("torus_" + name + ".csv"), sample_torus(*m, 64, 32));
    // Conjugacy error on random boundary points, pushed toward the orbit.
    double E = 0.0;
    const double t = m->stability == Stability::Stable ? 1e-2 : -1e-2;
    for (int i = 0; i < 20; ++i) {
      const double th = U(rng) * m->period(), ang = 2.0 * std::numbers::pi * U(rng);
      E = std::max(E, conjugacy_error(*m, th, std::cos(ang), std::sin(ang), t, cfg));
    }
    diag.push_back({{"stability", name},
                    {"order", m->order},
                    {"top_order_norm", m->top_order_norm()},
                    {"lambda", complex_to_json(m->lambda1)},
                    {"conjugacy_error_t1e-2", E}});
    std::printf("%-8s order %d  lambda %.10f%+.10fi  top %.2e  E(1e-2) %.2e\n", name.c_str(), m->order,
                m->lambda1.real(), m->lambda1.imag(), m->top_order_norm(), E);
  }
  write_json(out / "orbit.json", to_json(orbit, cfg));
  write_json(out / "manifold_manifest.json", {{"config", config_json(c)}, {"manifolds", diag}});
  write_plot_stub(out / "plot_torus.py", "torus_unstable.csv", "x", "y");
  return 0;
}

ConnectionUnknowns guess_from_config(const RunConfig& c, const json& g, const FourierTaylor& P,
                                     const FourierTaylor& Q, const MassConfig& cfg) {
  if (g.contains("connection"))
    return connection_from_json(load_json(resolve(c, g.at("connection").get<std::string>()))).unknowns;
  if (g.contains("midpoint")) {
    const auto m = g.at("midpoint").get<std::vector<double>>();
    if (m.size() != 6) throw UsageError("connect.guess.midpoint needs six values");
    State6 u;
    for (int i = 0; i < 6; ++i) u[i] = m[i];
    return guess_from_midpoint(P, Q, u, g.at("half_time").get<double>(), cfg, c.segments, c.M_cheb, c.bvp);
  }
  if (g.contains("theta"))
    return guess_from_torus(P, Q, g.at("theta").get<double>(), g.at("alpha").get<double>(),
                            g.at("time").get<double>(), cfg, c.segments, c.M_cheb, c.bvp);
  throw UsageError("connect.guess needs 'midpoint'+'half_time', 'theta'+'alpha'+'time' or 'connection'");
}

void write_connection(const fs::path& dir, const std::string& stem, const ConnectionSolution& sol,
                      const FourierTaylor& P, const FourierTaylor& Q) {
  write_json(dir / (stem + ".json"), to_json(sol));
  write_arc_csv(dir / (stem + ".csv"), sample_connection(sol, P, Q, 400, 2.0));
}

double max_speed(const ConnectionSolution& sol) {
  double v = 0.0;
  for (int j = 0; j <= 2000; ++j) {
    const State6 u = evaluate_connection(sol, sol.flight_time * j / 2000);
    v = std::max(v, std::sqrt(u[1] * u[1] + u[3] * u[3] + u[5] * u[5]));
  }
  return v;
}

int cmd_connect(const RunConfig& c) {
  const MassConfig cfg = mass_config(c);
  if (!c.connect.contains("guess")) throw UsageError("connect needs a 'connect.guess' entry in the config");
  auto [P, Q] = manifolds_from_config(c, cfg);
  const fs::path out(c.out);
  ConnectionSolution sol = newton_connect(guess_from_config(c, c.connect.at("guess"), P, Q, cfg), P, Q, cfg, c.bvp);
  std::printf("J=%.10f T=%.10f defect=%.2e segments=%zu dropped=%.2e drift=%.2e rcond=%.2e vmax=%.4f\n", sol.energy,
              sol.flight_time, sol.defect, sol.unknowns.segments.size(), sol.dropped_mismatch, sol.energy_drift,
              sol.rcond, max_speed(sol));
  write_connection(out, "connection", sol, P, Q);
  write_plot_stub(out / "plot_connection.py", "connection.csv", "x", "y");

  json manifest = {{"config", config_json(c)}, {"solution", {{"flight_time", sol.flight_time}, {"defect", sol.defect}}}};
  int status = 0;
  if (c.connect.contains("continuation")) {
    // Step the energy, re-solve orbit, manifolds and connection from the previous member.
    const json& k = c.connect.at("continuation");
    const double target = k.at("to").get<double>();
    const double step = std::copysign(k.value("step", 0.01), target - sol.energy);
    std::vector<double> energies;
    for (double J = sol.energy + step; (target - J) * step > 1e-9; J += step) energies.push_back(J);
    if (std::abs(target - sol.energy) > 1e-12) energies.push_back(target);
    std::string csv = "J,T,defect,theta,alpha,phi,beta\n";
    auto row = [&](const ConnectionSolution& s) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%.12f,%.12f,%.3e,%.12f,%.12f,%.12f,%.12f\n", s.energy, s.flight_time, s.defect,
                    s.unknowns.theta, s.unknowns.alpha, s.unknowns.phi, s.unknowns.beta);
      csv += buf;
      std::printf("%s", buf);
    };
    row(sol);
    PeriodicOrbit orbit = orbit_for(c, cfg);
    // Secant predictor from the last two members; failed steps are halved up to five times.
    std::optional<std::pair<double, Eigen::VectorXd>> previous;
    int done = 0;
    for (std::size_t i = 1; i <= energies.size() && status == 0; ++i) {
      const double goal = energies[i - 1];
      double h = goal - sol.energy;
      for (int halvings = 0; status == 0;) {
        const double J = sol.energy + h;
        try {
          PeriodicOrbit next_orbit = refine_orbit(orbit.state, J, cfg, c.K_orbit);
          auto [Pn, Qn] = manifolds_for(c, cfg, next_orbit);
          ConnectionUnknowns guess = sol.unknowns;
          const Eigen::VectorXd y = guess.pack();
          if (previous && previous->second.size() == y.size()) {
            const Eigen::VectorXd dy = (y - previous->second) / (sol.energy - previous->first);
            // Skip the predictor across an angle wrap.
            if ((dy * h).cwiseAbs().maxCoeff() < 0.5) guess.unpack(y + h * dy);
          }
          ConnectionSolution next = newton_connect(guess, Pn, Qn, cfg, c.bvp);
          previous.emplace(sol.energy, y);
          sol = std::move(next);
          orbit = std::move(next_orbit);
          P = std::move(Pn);
          Q = std::move(Qn);
          if (std::abs(goal - sol.energy) < 1e-12) break;
          h = goal - sol.energy;
        } catch (const Error& e) {
          if (++halvings > 5) {
            std::fprintf(stderr, "continuation stopped at J=%.6f: %s\n", J, e.what());
            status = 1;
          }
          h /= 2;
        }
      }
      if (status != 0) break;
      row(sol);
      write_connection(out / "family", "connection_" + std::to_string(i), sol, P, Q);
      ++done;
    }
    write_text(out / "connection_family.csv", csv);
    write_plot_stub(out / "plot_connection_family.py", "connection_family.csv", "J", "T");
    manifest["continuation"] = {{"members", done + 1}, {"complete", status == 0}};
  }
  write_json(out / "connect_manifest.json", manifest);
  return status;
}

int cmd_search(const RunConfig& c) {
  const MassConfig cfg = mass_config(c);
  const auto pts = find_libration_points(cfg);
  const auto& lp = find_point(pts, c.libration);
  const auto [P, Q] = manifolds_from_config(c, cfg);
  SearchParams sp = c.search;
  sp.jobs = c.jobs;
  sp.M = c.M_cheb;
  const SearchReport report = search_connections(P, Q, cfg, {lp.position[0], lp.position[1], 0.0}, sp, c.bvp);
  const fs::path out(c.out);
  std::string csv = "index,T,defect,theta,alpha,phi,beta\n";
  for (std::size_t i = 0; i < report.solutions.size(); ++i) {
    const auto& s = report.solutions[i];
    const std::string stem = "connection_" + std::to_string(i);
    write_connection(out / "connections", stem, s, P, Q);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%.12f,%.3e,%.12f,%.12f,%.12f,%.12f\n", i, s.flight_time, s.defect,
                  s.unknowns.theta, s.unknowns.alpha, s.unknowns.phi, s.unknowns.beta);
    csv += buf;
    std::printf("%s", buf);
  }
  write_text(out / "connections.csv", csv);
  write_plot_stub(out / "plot_search.py", "connections/connection_0.csv", "x", "y");
  write_json(out / "search.json", {{"config", config_json(c)}, {"report", to_json(report)}});
  std::printf("%zu candidates, %zu connections\n", report.candidates.size(), report.solutions.size());
  return 0;
}

// ---------------------------------------------------------------- table regression

struct Check {
  std::string name;
  bool pass;
  std::string detail;
  bool informational = false;  // printed, never fails the run
};

std::vector<Check> verify_table(const json& t, const std::string& name) {
  std::vector<Check> out;
  const MassConfig cfg = masses_from_json(t);
  const int label = parse_label(t.at("libration"));
  const double tol = t.at("tolerance").get<double>();
  const auto pts = find_libration_points(cfg);
  const auto& lp = find_point(pts, label);
  std::vector<double> targets;
  std::vector<State6> p0;
  for (const auto& r : t.at("rows")) {
    const auto v = r.at("P0").get<std::vector<double>>();
    State6 p;
    for (int i = 0; i < 6; ++i) p[i] = v[i];
    p0.push_back(p);
    targets.push_back(jacobi(p, cfg));
  }
  std::vector<std::size_t> idx;
  const FamilyResult fam = family_at(lp, targets, cfg, 50, idx);
  std::vector<int> found(targets.size(), -1);
  for (std::size_t m = 0; m < idx.size(); ++m) found[idx[m]] = static_cast<int>(m);
  std::vector<double> real_labels;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const json& r = t.at("rows")[i];
    const std::string row = name + " J=" + fmt("%.1f", r.at("J_label").get<double>());
    if (found[i] < 0) {
      out.push_back({row, false, "continuation did not reach this row"});
      continue;
    }
    const PeriodicOrbit& o = fam.members[found[i]];
    const auto [ts, dist] = align_phase(o.state, p0[i]);
    const double dp = (o.at6(ts) - p0[i]).cwiseAbs().maxCoeff();
    const double dT = std::abs(o.period() - r.at("T").get<double>());
    const auto fd = floquet(o, cfg);
    const int n = r.at("n").get<int>();
    // Only saddle-focus-like rows (two unstable multipliers) can switch between a real and a complex pair.
    for (std::size_t k = 0; k < fd.multipliers.size() && fd.n_unstable == 2; ++k)
      if (!fd.trivial[k] && std::abs(fd.multipliers[k]) > 1.0 + 1e-8 &&
          std::abs(fd.multipliers[k].imag()) <= 1e-8 * std::abs(fd.multipliers[k])) {
        real_labels.push_back(r.at("J_label").get<double>());
        break;
      }
    const bool ok = dp <= tol && dT <= tol && fd.n_unstable == n;
    out.push_back({row, ok,
                   "dP0=" + fmt("%.2e", dp) + " dT=" + fmt("%.2e", dT) + " n=" + std::to_string(fd.n_unstable) +
                       " (table " + std::to_string(n) + ")"});
  }
  // Listed real-multiplier window, reported separately from the rows.
  if (t.contains("real_multiplier_labels")) {
    const auto want = t.at("real_multiplier_labels").get<std::vector<double>>();
    std::string got;
    for (double l : real_labels) got += fmt("%.1f ", l);
    bool same = want.size() == real_labels.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) same = std::abs(want[i] - real_labels[i]) < 1e-9;
    std::string w;
    for (double l : want) w += fmt("%.1f ", l);
    out.push_back({name + " real-multiplier window", same, "found [ " + got + "] listed [ " + w + "]", true});
  }
  return out;
}

std::vector<Check> verify_anchors(const json& a) {
  std::vector<Check> out;
  for (const auto& e : a.at("anchors")) {
    const MassConfig cfg = masses_from_json(e);
    const auto v = e.at("P0").get<std::vector<double>>();
    State6 p;
    for (int i = 0; i < 6; ++i) p[i] = v[i];
    const auto pts = find_libration_points(cfg);
    const PeriodicOrbit o =
        vertical_orbit(find_point(pts, parse_label(e.at("libration"))), jacobi(p, cfg), cfg, 50);
    const auto [ts, dist] = align_phase(o.state, p);
    const double dp = (o.at6(ts) - p).cwiseAbs().maxCoeff();
    const double dT = std::abs(o.period() - e.at("T").get<double>());
    const double tol = e.at("tolerance").get<double>();
    out.push_back({"anchor " + e.at("name").get<std::string>(), dp <= tol && dT <= tol,
                   "dP0=" + fmt("%.2e", dp) + " dT=" + fmt("%.2e", dT)});
  }
  return out;
}

std::vector<Check> verify_connections(const json& f, const json& anchors) {
  std::vector<Check> out;
  const double torus_tol = f.at("torus_tolerance").get<double>();
  const double defect_tol = f.at("defect_tolerance").get<double>();
  struct Setup {
    MassConfig cfg;
    FourierTaylor P, Q;
  };
  std::map<std::string, Setup> setups;
  ManifoldOptions mo;
  mo.tail_target = 1e-12;
  for (const auto& c : f.at("connections")) {
    const std::string orbit = c.at("orbit");
    if (!setups.count(orbit)) {
      const json* anchor = nullptr;
      for (const auto& a : anchors.at("anchors"))
        if (a.at("name") == orbit) anchor = &a;
      if (!anchor) throw MissingData("no anchor orbit named '" + orbit + "'");
      const MassConfig cfg = masses_from_json(*anchor);
      const auto v = anchor->at("P0").get<std::vector<double>>();
      State6 p0;
      for (int i = 0; i < 6; ++i) p0[i] = v[i];
      const auto pts = find_libration_points(cfg);
      const PeriodicOrbit o =
          vertical_orbit(find_point(pts, parse_label(anchor->at("libration"))), jacobi(p0, cfg), cfg, 50);
      setups.emplace(orbit, Setup{cfg, solve_homological(o, Stability::Unstable, cfg, mo),
                                  solve_homological(o, Stability::Stable, cfg, mo)});
    }
    const Setup& s = setups.at(orbit);
    const auto m = c.at("midpoint").get<std::vector<double>>();
    State6 mid;
    for (int i = 0; i < 6; ++i) mid[i] = m[i];
    const double T = c.at("T").get<double>();
    const std::string name = orbit + " " + c.at("group").get<std::string>() + " T=" + fmt("%.4f", T);
    double d_start = INFINITY, d_end = INFINITY;
    try {
      const State6 a = project(flow(lift(mid, s.cfg), -T, s.cfg));
      const State6 b = project(flow(lift(mid, s.cfg), T, s.cfg));
      d_start = (closest_torus_point(s.P, a).state - a).norm();
      d_end = (closest_torus_point(s.Q, b).state - b).norm();
    } catch (const Error&) {
    }
    std::string newton = "not converged";
    bool converged = false;
    try {
      const auto sol = newton_connect(guess_from_midpoint(s.P, s.Q, mid, T, s.cfg), s.P, s.Q, s.cfg);
      converged = sol.defect <= defect_tol;
      newton = "defect " + fmt("%.2e", sol.defect) + " T_total " + fmt("%.6f", sol.flight_time);
    } catch (const Error& e) {
      newton = e.what();
    }
    out.push_back({"connection " + name, d_start <= torus_tol && d_end <= torus_tol && converged,
                   "torus distance " + fmt("%.2e", d_start) + " / " + fmt("%.2e", d_end) + ", " + newton});
  }
  return out;
}

int cmd_verify_tables(const RunConfig& c, const std::vector<std::string>& tables, bool connections) {
  std::vector<std::string> paths = tables;
  const fs::path data = fs::path(CRFBP_DATA_DIR) / "fixtures";
  if (paths.empty()) paths = {(data / "table1.json").string(), (data / "table2.json").string()};
  std::vector<Check> checks;
  for (const auto& p : paths) {
    const json t = load_json(p);
    auto r = verify_table(t, t.value("name", fs::path(p).stem().string()));
    checks.insert(checks.end(), r.begin(), r.end());
  }
  if (tables.empty()) {
    auto r = verify_anchors(load_json(data / "anchors.json"));
    checks.insert(checks.end(), r.begin(), r.end());
  }
  if (connections) {
    auto r = verify_connections(load_json(data / "connections.json"), load_json(data / "anchors.json"));
    checks.insert(checks.end(), r.begin(), r.end());
  }
  int failed = 0;
  json report = json::array();
  for (const auto& ch : checks) {
    std::printf("%s  %s  %s\n", ch.informational ? "INFO" : ch.pass ? "PASS" : "FAIL", ch.name.c_str(),
                ch.detail.c_str());
    failed += !ch.pass && !ch.informational;
    report.push_back(
        {{"name", ch.name}, {"pass", ch.pass}, {"informational", ch.informational}, {"detail", ch.detail}});
  }
  std::printf("%zu checks, %d failed\n", checks.size(), failed);
  write_json(fs::path(c.out) / "verify_tables.json", {{"checks", report}, {"failed", failed}});
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vertical Lyapunov orbits, their manifolds and homoclinic connections in the spatial CRFBP"};
  app.require_subcommand(1);
  std::string config_path, out_dir, masses, energy_range;
  std::optional<unsigned> seed;
  std::optional<int> jobs;
  std::optional<std::string> libration;
  std::optional<double> energy;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (default: out)");
  app.add_option("--seed", seed, "seed for sampled diagnostics");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--masses", masses, "m1,m2,m3 (or m1,m2)");
  app.add_option("--libration", libration, "libration label, e.g. L0 or 5");
  app.add_option("--energy", energy, "Jacobi energy");
  app.add_option("--energy-range", energy_range, "from:to:step");

  std::vector<std::string> tables;
  bool with_connections = false;
  auto* lib = app.add_subcommand("libration", "list libration points and their planar types");
  auto* orb = app.add_subcommand("orbit", "vertical Lyapunov orbit at one energy");
  auto* fam = app.add_subcommand("family", "family table over an energy range");
  auto* man = app.add_subcommand("manifold", "stable and unstable Fourier-Taylor manifolds");
  auto* con = app.add_subcommand("connect", "solve (and optionally continue) one connection");
  auto* sea = app.add_subcommand("search", "triangulated boundary-torus search for connections");
  auto* ver = app.add_subcommand("verify-tables", "regression against the bundled orbit tables");
  ver->add_option("--table", tables, "table fixture(s) to verify instead of the bundled ones");
  ver->add_flag("--connections", with_connections, "also check the bundled connection midpoints");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunConfig c;
  try {
    if (!config_path.empty()) {
      c.base_dir = fs::path(config_path).parent_path();
      json j;
      try {
        j = read_json(config_path);
      } catch (const json::exception& e) {
        throw UsageError(std::string("malformed config: ") + e.what());
      }
      apply_config(c, j);
    }
    if (!masses.empty()) {
      const auto m = parse_list(masses, ',');
      if (m.size() == 2)
        c.masses = {m[0], m[1], 1.0 - m[0] - m[1]};
      else if (m.size() == 3)
        c.masses = {m[0], m[1], m[2]};
      else
        throw UsageError("--masses needs two or three values");
    }
    if (libration) c.libration = parse_label(json(*libration));
    if (energy) c.energy = *energy;
    if (!energy_range.empty()) c.energy_range = parse_list(energy_range, ':');
    if (seed) c.seed = *seed;
    if (jobs) c.jobs = *jobs;
    if (!out_dir.empty()) c.out = out_dir;
    validate(c);
    mass_config(c);

    int status = 0;
    std::string command;
    if (*lib) command = "libration", status = cmd_libration(c);
    if (*orb) command = "orbit", status = cmd_orbit(c);
    if (*fam) command = "family", status = cmd_family(c);
    if (*man) command = "manifold", status = cmd_manifold(c);
    if (*con) command = "connect", status = cmd_connect(c);
    if (*sea) command = "search", status = cmd_search(c);
    if (*ver) command = "verify-tables", status = cmd_verify_tables(c, tables, with_connections);
    write_meta(c, command, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return status;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const MissingData& e) {
    std::fprintf(stderr, "missing data: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "usage error: bad config value: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 1;
  }
}
