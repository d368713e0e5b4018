#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "crfbp/bvp.hpp"
#include "crfbp/dynamics.hpp"
#include "crfbp/fourier.hpp"
#include "crfbp/manifolds.hpp"
#include "crfbp/orbits.hpp"
#include "crfbp/search.hpp"

namespace crfbp {

using json = nlohmann::json;

// Doubles are written as shortest round-trip decimals, so reading back is bit exact.
json to_json(const FourierSeries& s);
FourierSeries series_from_json(const json& j);

json to_json(const FloquetData& f);
FloquetData floquet_from_json(const json& j);

json to_json(const Bundle& b);
Bundle bundle_from_json(const json& j);

json to_json(const PeriodicOrbit& orbit, const MassConfig& cfg);
PeriodicOrbit orbit_from_json(const json& j);
MassConfig masses_from_json(const json& j);

json to_json(const FourierTaylor& P);
FourierTaylor manifold_from_json(const json& j);
// Rows theta, angle, x, y, z, vx, vy, vz.
void write_torus_csv(const std::filesystem::path& path, const std::vector<TorusPoint>& points);

json to_json(const ConnectionUnknowns& y);
ConnectionUnknowns unknowns_from_json(const json& j);
json to_json(const ConnectionSolution& sol);
ConnectionSolution connection_from_json(const json& j);
// Rows t, part (0 unstable tail, 1 arc, 2 stable tail), x, y, z, vx, vy, vz.
void write_arc_csv(const std::filesystem::path& path, const std::vector<ArcSample>& samples);

// Run manifest of a search: counts per epoch, culls, candidates and the solution summaries.
json to_json(const SearchReport& report);

json complex_to_json(cd z);
cd complex_from_json(const json& j);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

}  // namespace crfbp
