#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace crfbp {

// Phase-space ordering follows (x, xdot, y, ydot, z, zdot); the lifted state appends the
// reciprocal distances 1/r1, 1/r2, 1/r3 to the three primaries.
using State6 = Eigen::Matrix<double, 6, 1>;
using State9 = Eigen::Matrix<double, 9, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat96 = Eigen::Matrix<double, 9, 6>;

struct MassConfig {
  std::array<double, 3> m{};
  std::array<double, 3> x{};
  std::array<double, 3> y{};
  std::array<double, 3> z{};
  double K = 0.0;

  bool equal_masses(double tol = 1e-14) const;
};

// Primaries of unit mutual distance in the Lagrange triangle, centroid at the origin.
MassConfig primary_positions(double m1, double m2, double m3);
MassConfig primary_positions(double m1, double m2);

std::array<double, 3> distances(const State6& u, const MassConfig& cfg);

State6 field6(const State6& u, const MassConfig& cfg);
Mat6 jacobian6(const State6& u, const MassConfig& cfg);

State9 lift(const State6& u, const MassConfig& cfg);
State6 project(const State9& v);
// Derivative of the lift map.
Mat96 lift_jacobian(const State6& u, const MassConfig& cfg);

// Polynomial field of the lifted system; smooth on all of R^9.
State9 field9(const State9& v, const MassConfig& cfg);
Mat9 jacobian9(const State9& v, const MassConfig& cfg);

double potential(const State6& u, const MassConfig& cfg);
Eigen::Vector3d potential_gradient(const Eigen::Vector3d& q, const MassConfig& cfg);
Eigen::Matrix3d potential_hessian(const Eigen::Vector3d& q, const MassConfig& cfg);

double jacobi(const State6& u, const MassConfig& cfg);
// Jacobi integral written in the lifted variables; a first integral of field9 on all of R^9.
double jacobi9(const State9& v, const MassConfig& cfg);
Eigen::Matrix<double, 9, 1> jacobi9_gradient(const State9& v, const MassConfig& cfg);

// Rotation by `turns` * 120 degrees about the z-axis (equal masses only). The reciprocal
// distance components are permuted to follow the primaries.
State6 rotate_state(const State6& u, int turns);
State9 rotate_state(const State9& v, int turns);
// Permutation applied to primaries by a +120 degree turn: primary i lands on primary perm[i].
std::array<int, 3> rotation_permutation(int turns);

enum class PlanarType { SaddleFocus, CenterSaddle, Other };
std::string to_string(PlanarType t);

struct LibrationPoint {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  int label = -1;
  PlanarType planar_type = PlanarType::Other;
  std::array<std::complex<double>, 4> planar_eigenvalues{};
  double omega_z = 0.0;
  double energy = 0.0;
  double gradient_norm = 0.0;

  std::string name() const { return "L" + std::to_string(label); }
  State6 state() const;
};

std::vector<LibrationPoint> find_libration_points(const MassConfig& cfg);
const LibrationPoint& libration_point(const std::vector<LibrationPoint>& points, int label);

}  // namespace crfbp
