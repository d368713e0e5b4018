#include "crfbp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "crfbp/errors.hpp"

namespace crfbp {

namespace {

constexpr double kSqrt3 = std::numbers::sqrt3;

inline double cube(double v) { return v * v * v; }

}  // namespace

bool MassConfig::equal_masses(double tol) const {
  return std::abs(m[0] - m[1]) <= tol && std::abs(m[1] - m[2]) <= tol;
}

MassConfig primary_positions(double m1, double m2, double m3) {
  if (!(m3 > 0.0) || m2 < m3 || m1 < m2)
    throw InvalidMassError("masses must satisfy 0 < m3 <= m2 <= m1");
  if (std::abs(m1 + m2 + m3 - 1.0) > 1e-12) throw InvalidMassError("masses must sum to 1");

  MassConfig cfg;
  cfg.m = {m1, m2, m3};
  const double K = m2 * (m3 - m2) + m1 * (m2 + 2.0 * m3);
  const double s = std::sqrt(m2 * m2 + m2 * m3 + m3 * m3);
  const double aK = std::abs(K);
  cfg.K = K;
  cfg.x[0] = -aK * s / K;
  cfg.y[0] = 0.0;
  cfg.x[1] = aK * ((m2 - m3) * m3 + m1 * (2.0 * m2 + m3)) / (2.0 * K * s);
  cfg.y[1] = -kSqrt3 * m3 / (2.0 * std::pow(m2, 1.5)) * std::sqrt(cube(m2) / (s * s));
  cfg.x[2] = aK / (2.0 * s);
  cfg.y[2] = kSqrt3 / (2.0 * std::sqrt(m2)) * std::sqrt(cube(m2) / (s * s));
  cfg.z = {0.0, 0.0, 0.0};
  return cfg;
}

MassConfig primary_positions(double m1, double m2) { return primary_positions(m1, m2, 1.0 - m1 - m2); }

std::array<double, 3> distances(const State6& u, const MassConfig& cfg) {
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i) {
    const double dx = u[0] - cfg.x[i], dy = u[2] - cfg.y[i], dz = u[4] - cfg.z[i];
    r[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (!(r[i] > 0.0)) throw SingularityError("state coincides with primary " + std::to_string(i + 1));
  }
  return r;
}

Eigen::Vector3d potential_gradient(const Eigen::Vector3d& q, const MassConfig& cfg) {
  Eigen::Vector3d g(q[0], q[1], 0.0);
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d d(q[0] - cfg.x[i], q[1] - cfg.y[i], q[2] - cfg.z[i]);
    const double r = d.norm();
    if (!(r > 0.0)) throw SingularityError("gradient evaluated at a primary");
    g -= cfg.m[i] / cube(r) * d;
  }
  return g;
}

Eigen::Matrix3d potential_hessian(const Eigen::Vector3d& q, const MassConfig& cfg) {
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  H(0, 0) = 1.0;
  H(1, 1) = 1.0;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d d(q[0] - cfg.x[i], q[1] - cfg.y[i], q[2] - cfg.z[i]);
    const double r = d.norm();
    if (!(r > 0.0)) throw SingularityError("hessian evaluated at a primary");
    const double r3 = cube(r), r5 = r3 * r * r;
    H += cfg.m[i] * (3.0 * d * d.transpose() / r5 - Eigen::Matrix3d::Identity() / r3);
  }
  return H;
}

double potential(const State6& u, const MassConfig& cfg) {
  const auto r = distances(u, cfg);
  return 0.5 * (u[0] * u[0] + u[2] * u[2]) + cfg.m[0] / r[0] + cfg.m[1] / r[1] + cfg.m[2] / r[2];
}

State6 field6(const State6& u, const MassConfig& cfg) {
  const Eigen::Vector3d g = potential_gradient(Eigen::Vector3d(u[0], u[2], u[4]), cfg);
  State6 f;
  f << u[1], 2.0 * u[3] + g[0], u[3], -2.0 * u[1] + g[1], u[5], g[2];
  return f;
}

Mat6 jacobian6(const State6& u, const MassConfig& cfg) {
  const Eigen::Matrix3d H = potential_hessian(Eigen::Vector3d(u[0], u[2], u[4]), cfg);
  Mat6 A = Mat6::Zero();
  A(0, 1) = 1.0;
  A(2, 3) = 1.0;
  A(4, 5) = 1.0;
  A(1, 3) = 2.0;
  A(3, 1) = -2.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) A(2 * i + 1, 2 * j) = H(i, j);
  return A;
}

State9 lift(const State6& u, const MassConfig& cfg) {
  const auto r = distances(u, cfg);
  State9 v;
  v.head<6>() = u;
  for (int i = 0; i < 3; ++i) v[6 + i] = 1.0 / r[i];
  return v;
}

State6 project(const State9& v) { return v.head<6>(); }

Mat96 lift_jacobian(const State6& u, const MassConfig& cfg) {
  const auto r = distances(u, cfg);
  Mat96 D = Mat96::Zero();
  D.topRows<6>().setIdentity();
  for (int i = 0; i < 3; ++i) {
    const double r3 = cube(r[i]);
    D(6 + i, 0) = -(u[0] - cfg.x[i]) / r3;
    D(6 + i, 2) = -(u[2] - cfg.y[i]) / r3;
    D(6 + i, 4) = -(u[4] - cfg.z[i]) / r3;
  }
  return D;
}

State9 field9(const State9& v, const MassConfig& cfg) {
  State9 f;
  double ax = 0.0, ay = 0.0, az = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double w3 = cube(v[6 + i]);
    const double dx = cfg.x[i] - v[0], dy = cfg.y[i] - v[2], dz = cfg.z[i] - v[4];
    ax += cfg.m[i] * dx * w3;
    ay += cfg.m[i] * dy * w3;
    az += cfg.m[i] * dz * w3;
    f[6 + i] = (dx * v[1] + dy * v[3] + dz * v[5]) * w3;
  }
  f[0] = v[1];
  f[1] = 2.0 * v[3] + v[0] + ax;
  f[2] = v[3];
  f[3] = -2.0 * v[1] + v[2] + ay;
  f[4] = v[5];
  f[5] = az;
  return f;
}

Mat9 jacobian9(const State9& v, const MassConfig& cfg) {
  Mat9 A = Mat9::Zero();
  A(0, 1) = 1.0;
  A(2, 3) = 1.0;
  A(4, 5) = 1.0;
  A(1, 3) = 2.0;
  A(3, 1) = -2.0;
  A(1, 0) = 1.0;
  A(3, 2) = 1.0;
  for (int i = 0; i < 3; ++i) {
    const double w = v[6 + i], w2 = w * w, w3 = w2 * w;
    const double d[3] = {cfg.x[i] - v[0], cfg.y[i] - v[2], cfg.z[i] - v[4]};
    const double m = cfg.m[i];
    // accelerations: m * d_c * w^3
    for (int c = 0; c < 3; ++c) {
      A(2 * c + 1, 2 * c) -= m * w3;
      A(2 * c + 1, 6 + i) += 3.0 * m * d[c] * w2;
    }
    // reciprocal distance rate: (d . vel) * w^3
    const double dv = d[0] * v[1] + d[1] * v[3] + d[2] * v[5];
    for (int c = 0; c < 3; ++c) {
      A(6 + i, 2 * c) = -v[2 * c + 1] * w3;
      A(6 + i, 2 * c + 1) = d[c] * w3;
    }
    A(6 + i, 6 + i) = 3.0 * dv * w2;
  }
  return A;
}

double jacobi(const State6& u, const MassConfig& cfg) {
  return 2.0 * potential(u, cfg) - (u[1] * u[1] + u[3] * u[3] + u[5] * u[5]);
}

double jacobi9(const State9& v, const MassConfig& cfg) {
  return v[0] * v[0] + v[2] * v[2] + 2.0 * (cfg.m[0] * v[6] + cfg.m[1] * v[7] + cfg.m[2] * v[8]) -
         (v[1] * v[1] + v[3] * v[3] + v[5] * v[5]);
}

Eigen::Matrix<double, 9, 1> jacobi9_gradient(const State9& v, const MassConfig& cfg) {
  Eigen::Matrix<double, 9, 1> g;
  g << 2.0 * v[0], -2.0 * v[1], 2.0 * v[2], -2.0 * v[3], 0.0, -2.0 * v[5], 2.0 * cfg.m[0], 2.0 * cfg.m[1],
      2.0 * cfg.m[2];
  return g;
}

std::array<int, 3> rotation_permutation(int turns) {
  // A +120 degree turn carries p1 -> p2 -> p3 -> p1 for the equal-mass triangle.
  const int t = ((turns % 3) + 3) % 3;
  return {t % 3, (1 + t) % 3, (2 + t) % 3};
}

State6 rotate_state(const State6& u, int turns) {
  const double ang = 2.0 * std::numbers::pi / 3.0 * turns;
  const double c = std::cos(ang), s = std::sin(ang);
  State6 w = u;
  w[0] = c * u[0] - s * u[2];
  w[2] = s * u[0] + c * u[2];
  w[1] = c * u[1] - s * u[3];
  w[3] = s * u[1] + c * u[3];
  return w;
}

State9 rotate_state(const State9& v, int turns) {
  State9 w;
  w.head<6>() = rotate_state(State6(v.head<6>()), turns);
  const auto perm = rotation_permutation(turns);
  for (int i = 0; i < 3; ++i) w[6 + perm[i]] = v[6 + i];
  return w;
}

std::string to_string(PlanarType t) {
  switch (t) {
    case PlanarType::SaddleFocus: return "saddle-focus";
    case PlanarType::CenterSaddle: return "center-saddle";
    default: return "other";
  }
}

State6 LibrationPoint::state() const {
  State6 u = State6::Zero();
  u[0] = position[0];
  u[2] = position[1];
  return u;
}

namespace {

bool inside_triangle(const Eigen::Vector2d& q, const MassConfig& cfg) {
  auto side = [&](int a, int b) {
    return (cfg.x[b] - cfg.x[a]) * (q[1] - cfg.y[a]) - (cfg.y[b] - cfg.y[a]) * (q[0] - cfg.x[a]);
  };
  const double s0 = side(0, 1), s1 = side(1, 2), s2 = side(2, 0);
  return (s0 > 0 && s1 > 0 && s2 > 0) || (s0 < 0 && s1 < 0 && s2 < 0);
}

double angle_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return std::min(d, 2.0 * std::numbers::pi - d);
}

void classify(LibrationPoint& lp, const MassConfig& cfg) {
  const Eigen::Vector3d q(lp.position[0], lp.position[1], 0.0);
  const Eigen::Matrix3d H = potential_hessian(q, cfg);
  Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
  A(0, 1) = 1.0;
  A(2, 3) = 1.0;
  A(1, 0) = H(0, 0);
  A(1, 2) = H(0, 1);
  A(3, 0) = H(1, 0);
  A(3, 2) = H(1, 1);
  A(1, 3) = 2.0;
  A(3, 1) = -2.0;
  Eigen::EigenSolver<Eigen::Matrix4d> es(A);
  int focus = 0, real = 0, imag = 0;
  for (int i = 0; i < 4; ++i) {
    const auto ev = es.eigenvalues()[i];
    lp.planar_eigenvalues[i] = ev;
    const bool re = std::abs(ev.real()) > 1e-9, im = std::abs(ev.imag()) > 1e-9;
    if (re && im) ++focus;
    else if (re) ++real;
    else if (im) ++imag;
  }
  if (focus == 4) lp.planar_type = PlanarType::SaddleFocus;
  else if (real == 2 && imag == 2) lp.planar_type = PlanarType::CenterSaddle;
  else lp.planar_type = PlanarType::Other;
  lp.omega_z = std::sqrt(-H(2, 2));
  lp.energy = jacobi(lp.state(), cfg);
  lp.gradient_norm = potential_gradient(q, cfg).head<2>().norm();
}

void assign_labels(std::vector<LibrationPoint>& pts, const MassConfig& cfg) {
  const double pi = std::numbers::pi;
  std::vector<int> interior, exterior;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i)
    (inside_triangle(pts[i].position, cfg) ? interior : exterior).push_back(i);

  if (!interior.empty()) {
    auto it = std::min_element(interior.begin(), interior.end(),
                               [&](int a, int b) { return pts[a].position.norm() < pts[b].position.norm(); });
    pts[*it].label = 0;
    interior.erase(it);
  }
  if (!interior.empty()) {
    // L2 sits closest to the x-axis; L1 and L3 follow by +-120 degree turns.
    auto ang = [&](int i) { return std::atan2(pts[i].position[1], pts[i].position[0]); };
    auto it = std::min_element(interior.begin(), interior.end(),
                               [&](int a, int b) { return std::abs(std::sin(ang(a))) < std::abs(std::sin(ang(b))); });
    const double base = ang(*it);
    pts[*it].label = 2;
    interior.erase(it);
    const std::array<std::pair<int, double>, 2> dirs{{{1, base + 2.0 * pi / 3.0}, {3, base - 2.0 * pi / 3.0}}};
    for (const auto& [label, dir] : dirs) {
      if (interior.empty()) break;
      auto jt = std::min_element(interior.begin(), interior.end(), [&](int a, int b) {
        return angle_distance(ang(a), dir) < angle_distance(ang(b), dir);
      });
      pts[*jt].label = label;
      interior.erase(jt);
    }
  }

  // Exterior points: saddle-foci face away from a primary, the others sit beyond a vertex.
  std::vector<std::pair<int, double>> dirs;
  const std::array<int, 3> anti_label{5, 4, 6}, vertex_label{8, 7, 9};
  for (int i = 0; i < 3; ++i) {
    const double a = std::atan2(cfg.y[i], cfg.x[i]);
    dirs.emplace_back(anti_label[i], a + pi);
    dirs.emplace_back(vertex_label[i], a);
  }
  std::vector<bool> taken(dirs.size(), false);
  // Greedy assignment by increasing angular mismatch.
  struct Match {
    double cost;
    int point, dir;
  };
  std::vector<Match> cands;
  for (int p : exterior) {
    const double a = std::atan2(pts[p].position[1], pts[p].position[0]);
    for (int d = 0; d < static_cast<int>(dirs.size()); ++d) cands.push_back({angle_distance(a, dirs[d].second), p, d});
  }
  std::sort(cands.begin(), cands.end(), [](const Match& a, const Match& b) { return a.cost < b.cost; });
  for (const auto& c : cands) {
    if (pts[c.point].label >= 0 || taken[c.dir]) continue;
    pts[c.point].label = dirs[c.dir].first;
    taken[c.dir] = true;
  }
}

}  // namespace

std::vector<LibrationPoint> find_libration_points(const MassConfig& cfg) {
  std::vector<LibrationPoint> found;
  constexpr int n = 40;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Eigen::Vector3d q(-2.0 + 4.0 * (i + 0.5) / n, -2.0 + 4.0 * (j + 0.5) / n, 0.0);
      bool ok = false;
      try {
        for (int it = 0; it < 60; ++it) {
          const Eigen::Vector2d g = potential_gradient(q, cfg).head<2>();
          if (g.norm() <= 1e-14) {
            ok = true;
            break;
          }
          const Eigen::Matrix2d H = potential_hessian(q, cfg).topLeftCorner<2, 2>();
          const Eigen::Vector2d dq = H.fullPivLu().solve(-g);
          if (!dq.allFinite()) break;
          q.head<2>() += dq;
          if (q.head<2>().norm() > 4.0) break;
          if (dq.norm() < 1e-15 * (1.0 + q.norm())) {
            ok = potential_gradient(q, cfg).head<2>().norm() <= 1e-12;
            break;
          }
        }
        if (!ok) ok = potential_gradient(q, cfg).head<2>().norm() <= 1e-12;
      } catch (const SingularityError&) {
        ok = false;
      }
      if (!ok) continue;
      bool near_primary = false;
      for (int p = 0; p < 3; ++p) near_primary |= std::hypot(q[0] - cfg.x[p], q[1] - cfg.y[p]) < 1e-3;
      if (near_primary) continue;
      const Eigen::Vector2d pos = q.head<2>();
      const bool dup = std::any_of(found.begin(), found.end(),
                                   [&](const LibrationPoint& lp) { return (lp.position - pos).norm() < 1e-8; });
      if (dup) continue;
      LibrationPoint lp;
      lp.position = pos;
      classify(lp, cfg);
      found.push_back(lp);
    }
  }
  assign_labels(found, cfg);
  std::sort(found.begin(), found.end(), [](const LibrationPoint& a, const LibrationPoint& b) { return a.label < b.label; });
  return found;
}

const LibrationPoint& libration_point(const std::vector<LibrationPoint>& points, int label) {
  for (const auto& p : points)
    if (p.label == label) return p;
  throw Error("libration point L" + std::to_string(label) + " not found");
}

}  // namespace crfbp
