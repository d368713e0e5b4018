#include "crfbp/io.hpp"

#include <cstdio>
#include <fstream>

#include "crfbp/errors.hpp"

namespace crfbp {

json complex_to_json(cd z) { return json::array({z.real(), z.imag()}); }
cd complex_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json to_json(const FourierSeries& s) {
  json comps = json::array();
  for (int i = 0; i < s.dim(); ++i) {
    json row = json::array();
    for (int k = -(s.modes() - 1); k < s.modes(); ++k) row.push_back(complex_to_json(s.at(i, k)));
    comps.push_back(std::move(row));
  }
  return {{"omega", s.omega()}, {"modes", s.modes()}, {"dim", s.dim()}, {"coefficients", std::move(comps)}};
}

FourierSeries series_from_json(const json& j) {
  const int K = j.at("modes").get<int>(), d = j.at("dim").get<int>();
  FourierSeries s(d, K, j.at("omega").get<double>());
  const json& c = j.at("coefficients");
  for (int i = 0; i < d; ++i)
    for (int k = -(K - 1); k < K; ++k) s.at(i, k) = complex_from_json(c.at(i).at(k + K - 1));
  return s;
}

json to_json(const FloquetData& f) {
  json mu = json::array(), ex = json::array();
  for (const auto& z : f.multipliers) mu.push_back(complex_to_json(z));
  for (const auto& z : f.exponents) ex.push_back(complex_to_json(z));
  return {{"multipliers", mu}, {"exponents", ex}, {"trivial", f.trivial}, {"n_unstable", f.n_unstable}};
}

FloquetData floquet_from_json(const json& j) {
  FloquetData f;
  for (const auto& z : j.at("multipliers")) f.multipliers.push_back(complex_from_json(z));
  for (const auto& z : j.at("exponents")) f.exponents.push_back(complex_from_json(z));
  f.trivial = j.at("trivial").get<std::vector<bool>>();
  f.n_unstable = j.at("n_unstable").get<int>();
  return f;
}

json to_json(const Bundle& b) {
  return {{"exponent", complex_to_json(b.exponent)},
          {"antiperiodic", b.antiperiodic},
          {"residual", b.residual},
          {"scale", b.scale},
          {"series", to_json(b.series)}};
}

Bundle bundle_from_json(const json& j) {
  Bundle b;
  b.exponent = complex_from_json(j.at("exponent"));
  b.antiperiodic = j.at("antiperiodic").get<bool>();
  b.residual = j.at("residual").get<double>();
  b.scale = j.at("scale").get<double>();
  b.series = series_from_json(j.at("series"));
  return b;
}

json to_json(const PeriodicOrbit& orbit, const MassConfig& cfg) {
  json j = {{"masses", {cfg.m[0], cfg.m[1], cfg.m[2]}},
            {"energy", orbit.energy},
            {"period", orbit.period()},
            {"modes", orbit.modes()},
            {"residual", orbit.residual},
            {"unfolding", orbit.unfolding},
            {"state", to_json(orbit.state)}};
  if (orbit.floquet) j["floquet"] = to_json(*orbit.floquet);
  json bundles = json::array();
  for (const auto& b : orbit.bundles) bundles.push_back(to_json(b));
  j["bundles"] = std::move(bundles);
  return j;
}

MassConfig masses_from_json(const json& j) {
  const auto m = j.at("masses").get<std::vector<double>>();
  if (m.size() == 2) return primary_positions(m[0], m[1]);
  if (m.size() != 3) throw InvalidMassError("masses must list two or three values");
  return primary_positions(m[0], m[1], m[2]);
}

PeriodicOrbit orbit_from_json(const json& j) {
  PeriodicOrbit o;
  o.state = series_from_json(j.at("state"));
  o.energy = j.at("energy").get<double>();
  o.residual = j.value("residual", 0.0);
  if (j.contains("unfolding")) o.unfolding = j.at("unfolding").get<std::array<double, 4>>();
  if (j.contains("floquet")) o.floquet = floquet_from_json(j.at("floquet"));
  if (j.contains("bundles"))
    for (const auto& b : j.at("bundles")) o.bundles.push_back(bundle_from_json(b));
  return o;
}

json to_json(const FourierTaylor& P) {
  json coeffs = json::array();
  for (int j = 0; j < static_cast<int>(P.coefficients.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    coeffs.push_back({{"alpha", {a1, a2}}, {"series", to_json(FourierSeries(P.coefficients[j], P.omega))}});
  }
  return {{"order", P.order},
          {"modes", P.modes},
          {"omega", P.omega},
          {"energy", P.energy},
          {"scale", P.scale},
          {"stability", to_string(P.stability)},
          {"lambda", {complex_to_json(P.lambda1), complex_to_json(P.lambda2)}},
          {"coefficients", std::move(coeffs)}};
}

FourierTaylor manifold_from_json(const json& j) {
  FourierTaylor P;
  P.order = j.at("order").get<int>();
  P.modes = j.at("modes").get<int>();
  P.omega = j.at("omega").get<double>();
  P.energy = j.at("energy").get<double>();
  P.scale = j.at("scale").get<double>();
  const auto st = j.at("stability").get<std::string>();
  if (st != "stable" && st != "unstable") throw Error("unknown stability '" + st + "'");
  P.stability = st == "stable" ? Stability::Stable : Stability::Unstable;
  P.lambda1 = complex_from_json(j.at("lambda").at(0));
  P.lambda2 = complex_from_json(j.at("lambda").at(1));
  P.coefficients.assign(taylor_count(P.order), Eigen::MatrixXcd());
  for (const auto& c : j.at("coefficients")) {
    const int a1 = c.at("alpha").at(0).get<int>(), a2 = c.at("alpha").at(1).get<int>();
    P.at(a1, a2) = series_from_json(c.at("series")).coefficients();
  }
  return P;
}

void write_torus_csv(const std::filesystem::path& path, const std::vector<TorusPoint>& points) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "theta,angle,x,y,z,vx,vy,vz\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g%c", v, sep);
    out << buf;
  };
  for (const auto& p : points) {
    put(p.theta, ',');
    put(p.angle, ',');
    put(p.state[0], ',');
    put(p.state[2], ',');
    put(p.state[4], ',');
    put(p.state[1], ',');
    put(p.state[3], ',');
    put(p.state[5], '\n');
  }
}

json to_json(const ConnectionUnknowns& y) {
  json segs = json::array();
  for (const auto& seg : y.segments) {
    json rows = json::array();
    for (int i = 0; i < seg.a.rows(); ++i) {
      std::vector<double> r(seg.a.cols());
      for (int k = 0; k < seg.a.cols(); ++k) r[k] = seg.a(i, k);
      rows.push_back(r);
    }
    segs.push_back(std::move(rows));
  }
  return {{"L", y.L},         {"theta", y.theta}, {"alpha", y.alpha},         {"phi", y.phi},
          {"beta", y.beta},   {"fractions", y.fractions}, {"segments", std::move(segs)}};
}

ConnectionUnknowns unknowns_from_json(const json& j) {
  ConnectionUnknowns y;
  y.L = j.at("L").get<double>();
  y.theta = j.at("theta").get<double>();
  y.alpha = j.at("alpha").get<double>();
  y.phi = j.at("phi").get<double>();
  y.beta = j.at("beta").get<double>();
  y.fractions = j.at("fractions").get<std::vector<double>>();
  for (const auto& rows : j.at("segments")) {
    ChebyshevSegment seg;
    const int M = static_cast<int>(rows.at(0).size());
    seg.a.resize(static_cast<Eigen::Index>(rows.size()), M);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int k = 0; k < M; ++k) seg.a(static_cast<Eigen::Index>(i), k) = rows[i][k].get<double>();
    y.segments.push_back(std::move(seg));
  }
  if (y.fractions.size() != y.segments.size()) throw Error("connection fractions and segments disagree");
  return y;
}

json to_json(const ConnectionSolution& sol) {
  return {{"flight_time", sol.flight_time},
          {"energy", sol.energy},
          {"defect", sol.defect},
          {"drop_index", sol.drop_index},
          {"R1", sol.R1},
          {"R2", sol.R2},
          {"iterations", sol.iterations},
          {"dropped_mismatch", sol.dropped_mismatch},
          {"energy_drift", sol.energy_drift},
          {"tail", sol.tail},
          {"rcond", sol.rcond},
          {"unknowns", to_json(sol.unknowns)}};
}

ConnectionSolution connection_from_json(const json& j) {
  ConnectionSolution sol;
  sol.unknowns = unknowns_from_json(j.at("unknowns"));
  sol.flight_time = j.at("flight_time").get<double>();
  sol.energy = j.at("energy").get<double>();
  sol.defect = j.at("defect").get<double>();
  sol.drop_index = j.at("drop_index").get<int>();
  sol.R1 = j.at("R1").get<double>();
  sol.R2 = j.at("R2").get<double>();
  sol.iterations = j.at("iterations").get<int>();
  sol.dropped_mismatch = j.at("dropped_mismatch").get<double>();
  sol.energy_drift = j.at("energy_drift").get<double>();
  sol.tail = j.at("tail").get<double>();
  sol.rcond = j.at("rcond").get<double>();
  return sol;
}

void write_arc_csv(const std::filesystem::path& path, const std::vector<ArcSample>& samples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "t,part,x,y,z,vx,vy,vz\n";
  char buf[256];
  for (const auto& s : samples) {
    const auto& u = s.state;
    std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.part, u[0], u[2], u[4],
                  u[1], u[3], u[5]);
    out << buf;
  }
}

json to_json(const SearchReport& report) {
  json epochs = json::array();
  for (const auto& e : report.epochs)
    epochs.push_back({{"time", e.time},
                      {"alive_unstable", e.alive_unstable},
                      {"alive_stable", e.alive_stable},
                      {"min_gap", e.min_gap}});
  json cands = json::array();
  for (const auto& c : report.candidates)
    cands.push_back({{"gap", c.pair.gap},
                     {"time_unstable", c.pair.time_unstable},
                     {"time_stable", c.pair.time_stable},
                     {"theta", c.theta},
                     {"alpha", c.alpha},
                     {"phi", c.phi},
                     {"beta", c.beta},
                     {"converged", c.converged},
                     {"flight_time", c.flight_time},
                     {"message", c.message}});
  json sols = json::array();
  for (const auto& s : report.solutions)
    sols.push_back({{"flight_time", s.flight_time},
                    {"defect", s.defect},
                    {"theta", s.unknowns.theta},
                    {"alpha", s.unknowns.alpha},
                    {"phi", s.unknowns.phi},
                    {"beta", s.unknowns.beta}});
  return {{"epochs", std::move(epochs)},
          {"candidates", std::move(cands)},
          {"solutions", std::move(sols)},
          {"culled_speed", report.culled_speed},
          {"culled_distance", report.culled_distance},
          {"failed", report.failed},
          {"truncated", report.truncated}};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return json::parse(in);
}

void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace crfbp
