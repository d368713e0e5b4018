#include "crfbp/search.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <utility>

#include "crfbp/errors.hpp"
#include "crfbp/integrator.hpp"

namespace crfbp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kCollisionRadius = 1e-3;

// Static chunking keeps results independent of the thread count.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) f(i);
    });
  for (auto& t : pool) t.join();
}

double wrap(double x, double period) {
  x = std::fmod(x, period);
  return x < 0.0 ? x + period : x;
}

// Signed difference b - a reduced to (-period/2, period/2].
double periodic_delta(double a, double b, double period) {
  double d = std::fmod(b - a, period);
  if (d > 0.5 * period) d -= period;
  if (d <= -0.5 * period) d += period;
  return d;
}

double speed(const State9& v) { return std::sqrt(v[1] * v[1] + v[3] * v[3] + v[5] * v[5]); }

double distance_to(const State9& v, const Eigen::Vector3d& c) {
  return std::sqrt((v[0] - c[0]) * (v[0] - c[0]) + (v[2] - c[1]) * (v[2] - c[1]) + (v[4] - c[2]) * (v[4] - c[2]));
}

double phase_distance(const State9& a, const State9& b) { return (a.head<6>() - b.head<6>()).norm(); }

enum class Fate { Alive, Speed, Distance, Failed };

Fate check_limits(const State9& v, const MeshLimits& lim) {
  for (int i = 0; i < 9; ++i)
    if (!std::isfinite(v[i])) return Fate::Failed;
  if (speed(v) > lim.v_max) return Fate::Speed;
  if (distance_to(v, lim.center) > lim.d_lib) return Fate::Distance;
  return Fate::Alive;
}

// Integrates while watching the limits; the vertex is culled at the first accepted step outside them.
Fate flow_limited(State9& v, double t, const MassConfig& cfg, const MeshLimits& lim, double tol) {
  Fate fate = check_limits(v, lim);
  if (fate != Fate::Alive || t == 0.0) return fate;
  using Arr9 = std::array<double, 9>;
  Arr9 x;
  for (int i = 0; i < 9; ++i) x[i] = v[i];
  auto rhs = [&cfg](const Arr9& s, Arr9& ds, double) {
    Eigen::Map<State9>(ds.data()) = field9(Eigen::Map<const State9>(s.data()), cfg);
  };
  auto guard = [&](const Arr9& s) {
    const State9 w = Eigen::Map<const State9>(s.data());
    fate = check_limits(w, lim);
    if (fate == Fate::Alive && (w[6] > 1.0 / kCollisionRadius || w[7] > 1.0 / kCollisionRadius ||
                                w[8] > 1.0 / kCollisionRadius))
      fate = Fate::Failed;
    return fate == Fate::Alive;
  };
  IntegratorOptions opt;
  opt.tol = tol;
  opt.collision_radius = kCollisionRadius;
  try {
    integrate(rhs, x, 0.0, t, opt, guard);
  } catch (const IntegrationError&) {
    return fate == Fate::Alive ? Fate::Failed : fate;
  }
  v = Eigen::Map<const State9>(x.data());
  return Fate::Alive;
}

void record(Mesh& mesh, Fate fate) {
  if (fate == Fate::Speed) ++mesh.culled_speed;
  if (fate == Fate::Distance) ++mesh.culled_distance;
  if (fate == Fate::Failed) ++mesh.failed;
}

State9 torus9(const FourierTaylor& P, double theta, double alpha) {
  return eval_real(P, theta, std::cos(alpha), std::sin(alpha));
}

using EdgeKey = std::pair<int, int>;
EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

double average_edge(const Mesh& m, const std::array<int, 3>& t) {
  const auto& v = m.vertices;
  return (phase_distance(v[t[0]].state, v[t[1]].state) + phase_distance(v[t[1]].state, v[t[2]].state) +
          phase_distance(v[t[2]].state, v[t[0]].state)) /
         3.0;
}

bool triangle_alive(const Mesh& m, const std::array<int, 3>& t) {
  return m.vertices[t[0]].alive && m.vertices[t[1]].alive && m.vertices[t[2]].alive;
}

void drop_dead_triangles(Mesh& m) {
  std::erase_if(m.triangles, [&](const auto& t) { return !triangle_alive(m, t); });
}

// Splits edges of oversized triangles until every triangle meets the average-edge bound.
// new_vertex(theta, alpha) returns the state (or nullopt when it is culled) of a fresh midpoint.
template <class Make>
void refine(Mesh& mesh, double d_max, std::size_t max_vertices, int jobs, Make&& make_vertex) {
  for (int pass = 0; pass < 12; ++pass) {
    std::map<EdgeKey, int> split;
    for (const auto& t : mesh.triangles) {
      if (average_edge(mesh, t) <= d_max) continue;
      for (int e = 0; e < 3; ++e) {
        const int a = t[e], b = t[(e + 1) % 3];
        if (phase_distance(mesh.vertices[a].state, mesh.vertices[b].state) > d_max) split.emplace(edge_key(a, b), -1);
      }
    }
    if (split.empty()) return;
    if (mesh.vertices.size() + split.size() > max_vertices) {
      mesh.truncated = true;
      return;
    }
    std::vector<EdgeKey> edges;
    for (const auto& [k, _] : split) edges.push_back(k);
    std::vector<MeshVertex> fresh(edges.size());
    std::vector<Fate> fates(edges.size());
    parallel_for(edges.size(), jobs, [&](std::size_t i) {
      const auto& a = mesh.vertices[edges[i].first];
      const auto& b = mesh.vertices[edges[i].second];
      MeshVertex& m = fresh[i];
      m.theta = wrap(a.theta + 0.5 * periodic_delta(a.theta, b.theta, mesh.period), mesh.period);
      m.alpha = wrap(a.alpha + 0.5 * periodic_delta(a.alpha, b.alpha, kTwoPi), kTwoPi);
      m.elapsed = mesh.elapsed;
      fates[i] = make_vertex(m);
      m.alive = fates[i] == Fate::Alive;
    });
    for (std::size_t i = 0; i < edges.size(); ++i) {
      record(mesh, fates[i]);
      split[edges[i]] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(fresh[i]);
    }
    std::vector<std::array<int, 3>> next;
    next.reserve(mesh.triangles.size() * 2);
    for (const auto& t : mesh.triangles) {
      std::array<int, 3> mid{};
      int count = 0;
      for (int e = 0; e < 3; ++e) {
        const auto it = split.find(edge_key(t[e], t[(e + 1) % 3]));
        mid[e] = it == split.end() ? -1 : it->second;
        count += mid[e] >= 0;
      }
      if (count == 0) {
        next.push_back(t);
      } else if (count == 3) {
        next.push_back({t[0], mid[0], mid[2]});
        next.push_back({mid[0], t[1], mid[1]});
        next.push_back({mid[2], mid[1], t[2]});
        next.push_back({mid[0], mid[1], mid[2]});
      } else {
        // Rotate so the first split edge is (v0, v1).
        int r = 0;
        while (mid[r] < 0) ++r;
        if (count == 2 && r == 0 && mid[2] >= 0) r = 2;
        const int v0 = t[r], v1 = t[(r + 1) % 3], v2 = t[(r + 2) % 3];
        const int m01 = mid[r], m12 = mid[(r + 1) % 3];
        if (count == 1) {
          next.push_back({v0, m01, v2});
          next.push_back({m01, v1, v2});
        } else {
          next.push_back({m01, v1, m12});
          next.push_back({v0, m01, m12});
          next.push_back({v0, m12, v2});
        }
      }
    }
    mesh.triangles = std::move(next);
    drop_dead_triangles(mesh);
  }
}

int grid_size(double length, double d_max) {
  // Leg lengths of at most 0.7 d_max keep the average edge (two legs and a diagonal) under d_max.
  const double want = length / (0.7 * d_max);
  int n = 4;
  while (n < want) n *= 2;
  return n;
}

// Spatial hash of alive vertex positions.
struct PositionHash {
  double cell;
  std::unordered_map<std::uint64_t, std::vector<int>> buckets;

  static std::uint64_t key(long i, long j, long k) {
    const auto h = [](long x) { return static_cast<std::uint64_t>(x + (1L << 20)) & 0x1FFFFF; };
    return (h(i) << 42) | (h(j) << 21) | h(k);
  }
  std::array<long, 3> coords(const State9& v) const {
    return {static_cast<long>(std::floor(v[0] / cell)), static_cast<long>(std::floor(v[2] / cell)),
            static_cast<long>(std::floor(v[4] / cell))};
  }
  PositionHash(const Mesh& m, double c) : cell(c) {
    for (int i = 0; i < static_cast<int>(m.vertices.size()); ++i)
      if (m.vertices[i].alive) {
        const auto q = coords(m.vertices[i].state);
        buckets[key(q[0], q[1], q[2])].push_back(i);
      }
  }
  template <class F>
  void neighbors(const State9& v, F&& f) const {
    const auto q = coords(v);
    for (long a = -1; a <= 1; ++a)
      for (long b = -1; b <= 1; ++b)
        for (long c = -1; c <= 1; ++c) {
          const auto it = buckets.find(key(q[0] + a, q[1] + b, q[2] + c));
          if (it == buckets.end()) continue;
          for (int j : it->second) f(j);
        }
  }
};

bool better(const CandidatePair& a, const CandidatePair& b) {
  return std::tie(a.gap, a.unstable, a.stable) < std::tie(b.gap, b.unstable, b.stable);
}

struct Snapshot {
  double time;
  Mesh mesh;
};

}  // namespace

std::size_t Mesh::alive_count() const {
  return static_cast<std::size_t>(std::count_if(vertices.begin(), vertices.end(), [](const auto& v) { return v.alive; }));
}

double Mesh::max_edge() const {
  double out = 0.0;
  for (const auto& t : triangles)
    for (int e = 0; e < 3; ++e)
      out = std::max(out, phase_distance(vertices[t[e]].state, vertices[t[(e + 1) % 3]].state));
  return out;
}

double Mesh::max_average_edge() const {
  double out = 0.0;
  for (const auto& t : triangles) out = std::max(out, average_edge(*this, t));
  return out;
}

Mesh triangulate_torus(const FourierTaylor& P, double d_max, int jobs) {
  if (!(d_max > 0.0)) throw Error("d_max must be positive");
  Mesh mesh;
  mesh.direction = P.stability == Stability::Unstable ? 1 : -1;
  mesh.period = P.period();

  // Longest parameter-line speeds over a sample grid set the structured resolution.
  double dtheta = 0.0, dangle = 0.0;
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 32; ++j) {
      const double th = mesh.period * i / 64, al = kTwoPi * j / 32;
      const cd z = std::polar(1.0, al);
      dtheta = std::max(dtheta, P.theta_derivative(th, z, std::conj(z)).head(6).real().norm());
      dangle = std::max(dangle, P.angle_derivative(th, z, std::conj(z)).head(6).real().norm());
    }
  const int nt = grid_size(dtheta * mesh.period, d_max);
  const int na = grid_size(dangle * kTwoPi, d_max);
  mesh.vertices.resize(static_cast<std::size_t>(nt) * na);
  parallel_for(mesh.vertices.size(), jobs, [&](std::size_t idx) {
    const int i = static_cast<int>(idx) / na, j = static_cast<int>(idx) % na;
    MeshVertex& v = mesh.vertices[idx];
    v.theta = mesh.period * i / nt;
    v.alpha = kTwoPi * j / na;
    v.state = torus9(P, v.theta, v.alpha);
  });
  const auto id = [&](int i, int j) { return ((i + nt) % nt) * na + (j + na) % na; };
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < na; ++j) {
      mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  refine(mesh, d_max, std::numeric_limits<std::size_t>::max(), jobs, [&](MeshVertex& m) {
    m.state = torus9(P, m.theta, m.alpha);
    return Fate::Alive;
  });
  return mesh;
}

void advect(Mesh& mesh, double dt, const FourierTaylor& P, const MassConfig& cfg, const MeshLimits& limits,
            const SearchParams& params) {
  if (dt == 0.0) return;
  const double step = mesh.direction * dt;
  std::vector<Fate> fates(mesh.vertices.size(), Fate::Alive);
  parallel_for(mesh.vertices.size(), params.jobs, [&](std::size_t i) {
    MeshVertex& v = mesh.vertices[i];
    if (!v.alive) return;
    fates[i] = flow_limited(v.state, step, cfg, limits, params.tol);
    v.elapsed += dt;
  });
  for (std::size_t i = 0; i < fates.size(); ++i)
    if (fates[i] != Fate::Alive) {
      mesh.vertices[i].alive = false;
      record(mesh, fates[i]);
    }
  mesh.elapsed += dt;
  drop_dead_triangles(mesh);
  const double total = mesh.direction * mesh.elapsed;
  refine(mesh, params.d_max, params.max_vertices, params.jobs, [&](MeshVertex& m) {
    m.state = torus9(P, m.theta, m.alpha);
    return flow_limited(m.state, total, cfg, limits, params.tol);
  });
}

std::optional<CandidatePair> brute_force_closest_pair(const Mesh& unstable, const Mesh& stable) {
  std::optional<CandidatePair> best;
  for (int i = 0; i < static_cast<int>(unstable.vertices.size()); ++i) {
    if (!unstable.vertices[i].alive) continue;
    for (int j = 0; j < static_cast<int>(stable.vertices.size()); ++j) {
      if (!stable.vertices[j].alive) continue;
      const CandidatePair c{i, j, phase_distance(unstable.vertices[i].state, stable.vertices[j].state),
                            unstable.elapsed, stable.elapsed};
      if (!best || better(c, *best)) best = c;
    }
  }
  return best;
}

std::vector<CandidatePair> near_pairs(const Mesh& unstable, const Mesh& stable, double radius) {
  std::vector<CandidatePair> out;
  if (!(radius > 0.0)) {
    // Only exact coincidences qualify.
    if (radius == 0.0)
      if (auto b = brute_force_closest_pair(unstable, stable); b && b->gap == 0.0) out.push_back(*b);
    return out;
  }
  const PositionHash hash(stable, radius);
  for (int i = 0; i < static_cast<int>(unstable.vertices.size()); ++i) {
    const auto& u = unstable.vertices[i];
    if (!u.alive) continue;
    CandidatePair best{i, -1, radius, unstable.elapsed, stable.elapsed};
    hash.neighbors(u.state, [&](int j) {
      const double g = phase_distance(u.state, stable.vertices[j].state);
      if (g < best.gap || (g == best.gap && (best.stable < 0 || j < best.stable))) {
        best.stable = j;
        best.gap = g;
      }
    });
    if (best.stable >= 0) out.push_back(best);
  }
  std::sort(out.begin(), out.end(), better);
  return out;
}

std::optional<CandidatePair> closest_pair(const Mesh& unstable, const Mesh& stable) {
  if (unstable.alive_count() == 0 || stable.alive_count() == 0) return std::nullopt;
  // A pair with gap <= cell has positions in adjacent cells, so the hashed minimum is exact once it is <= cell.
  double extent = 0.0;
  for (const auto* m : {&unstable, &stable})
    for (const auto& v : m->vertices)
      if (v.alive) extent = std::max({extent, std::abs(v.state[0]), std::abs(v.state[2]), std::abs(v.state[4])});
  for (double cell = 0.02; cell <= 4.0 * extent + 1.0; cell *= 4.0) {
    const auto pairs = near_pairs(unstable, stable, cell);
    if (!pairs.empty()) return pairs.front();
  }
  return brute_force_closest_pair(unstable, stable);
}

bool same_connection(const ConnectionSolution& a, const ConnectionSolution& b, double theta_period,
                     double phi_period, double tol) {
  const auto& x = a.unknowns;
  const auto& y = b.unknowns;
  return std::abs(periodic_delta(x.theta, y.theta, theta_period)) < tol &&
         std::abs(periodic_delta(x.alpha, y.alpha, kTwoPi)) < tol &&
         std::abs(periodic_delta(x.phi, y.phi, phi_period)) < tol &&
         std::abs(periodic_delta(x.beta, y.beta, kTwoPi)) < tol && std::abs(a.flight_time - b.flight_time) < tol;
}

SearchReport search_connections(const FourierTaylor& P, const FourierTaylor& Q, const MassConfig& cfg,
                                const Eigen::Vector3d& libration, const SearchParams& params,
                                const BvpOptions& bvp) {
  if (P.stability != Stability::Unstable || Q.stability != Stability::Stable)
    throw Error("search_connections expects an unstable and a stable manifold");
  if (std::abs(P.energy - Q.energy) > 1e-9) throw Error("manifolds lie on different energy levels");
  const MeshLimits limits{libration, params.v_max, params.d_lib};

  SearchReport report;
  Mesh U = triangulate_torus(P, params.d_max, params.jobs);
  Mesh S = triangulate_torus(Q, params.d_max, params.jobs);
  std::vector<Snapshot> history_u, history_s;
  const int epochs = static_cast<int>(std::floor(params.T_max / params.dt + 1e-9));

  auto collect = [&](const Mesh& u, const Mesh& s) {
    std::vector<CandidatePair> kept;
    for (const auto& c : near_pairs(u, s, params.gap_threshold)) {
      if (static_cast<int>(kept.size()) >= params.candidates_per_epoch) break;
      const bool distinct = std::all_of(kept.begin(), kept.end(), [&](const CandidatePair& k) {
        return phase_distance(u.vertices[c.unstable].state, u.vertices[k.unstable].state) > params.cluster_radius ||
               phase_distance(s.vertices[c.stable].state, s.vertices[k.stable].state) > params.cluster_radius;
      });
      if (!distinct) continue;
      kept.push_back(c);
      CandidateRecord r;
      r.pair = c;
      r.theta = u.vertices[c.unstable].theta;
      r.alpha = u.vertices[c.unstable].alpha;
      r.phi = s.vertices[c.stable].theta;
      r.beta = s.vertices[c.stable].alpha;
      report.candidates.push_back(r);
    }
  };

  for (int n = 1; n <= epochs; ++n) {
    advect(U, params.dt, P, cfg, limits, params);
    advect(S, params.dt, Q, cfg, limits, params);
    EpochStats st;
    st.time = U.elapsed;
    st.alive_unstable = U.alive_count();
    st.alive_stable = S.alive_count();
    if (auto c = closest_pair(U, S)) st.min_gap = c->gap;
    report.epochs.push_back(st);

    collect(U, S);
    if (params.offset_epochs > 0) {
      for (const auto& h : history_s) collect(U, h.mesh);
      for (const auto& h : history_u) collect(h.mesh, S);
      history_u.push_back({U.elapsed, U});
      history_s.push_back({S.elapsed, S});
      if (static_cast<int>(history_u.size()) > params.offset_epochs) {
        history_u.erase(history_u.begin());
        history_s.erase(history_s.begin());
      }
    }
    if (U.alive_count() == 0 || S.alive_count() == 0) break;
  }
  report.culled_speed = U.culled_speed + S.culled_speed;
  report.culled_distance = U.culled_distance + S.culled_distance;
  report.failed = U.failed + S.failed;
  report.truncated = U.truncated || S.truncated;

  std::vector<std::optional<ConnectionSolution>> solved(report.candidates.size());
  parallel_for(report.candidates.size(), params.jobs, [&](std::size_t i) {
    CandidateRecord& r = report.candidates[i];
    try {
      const auto guess = guess_from_pair(P, Q, r.theta, r.alpha, r.phi, r.beta, r.pair.time_unstable, cfg,
                                         params.M, bvp, r.pair.time_stable);
      solved[i] = newton_connect(guess, P, Q, cfg, bvp);
      r.converged = true;
      r.flight_time = solved[i]->flight_time;
    } catch (const Error& e) {
      r.message = e.what();
    }
  });
  for (auto& s : solved) {
    if (!s) continue;
    const bool dup = std::any_of(report.solutions.begin(), report.solutions.end(), [&](const auto& k) {
      return same_connection(k, *s, P.period(), Q.period());
    });
    if (!dup) report.solutions.push_back(std::move(*s));
  }
  std::stable_sort(report.solutions.begin(), report.solutions.end(),
                   [](const auto& a, const auto& b) { return a.flight_time < b.flight_time; });
  return report;
}

}  // namespace crfbp
