#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "crfbp/dynamics.hpp"
#include "crfbp/fourier.hpp"
#include "crfbp/orbits.hpp"

namespace crfbp {

// Multi-indices alpha = (a1, a2) with |alpha| <= N, ordered by degree then by a2.
inline int taylor_index(int a1, int a2) {
  const int n = a1 + a2;
  return n * (n + 1) / 2 + a2;
}
inline int taylor_count(int order) { return (order + 1) * (order + 2) / 2; }
std::pair<int, int> taylor_multi_index(int index);

// Scalar Fourier-Taylor series: one coefficient row (modes -(K-1)..K-1) per multi-index.
struct FTSeries {
  int order = 0;
  int modes = 1;
  std::vector<Eigen::VectorXcd> c;

  FTSeries() = default;
  FTSeries(int order, int modes);
  cd& at(int a1, int a2, int k) { return c[taylor_index(a1, a2)](k + modes - 1); }
  const cd& at(int a1, int a2, int k) const { return c[taylor_index(a1, a2)](k + modes - 1); }
  // sum_alpha sum_k c e^{i omega k theta} z1^a1 z2^a2
  cd evaluate(double omega, double theta, cd z1, cd z2) const;
};

// Truncated Fourier convolution of two coefficient rows of equal length 2K-1.
Eigen::VectorXcd fourier_convolve(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b);
// Cauchy product in both Taylor and Fourier directions, truncated back to (N, K).
FTSeries ft_convolve(const FTSeries& a, const FTSeries& b);

enum class Stability { Stable, Unstable };
const char* to_string(Stability s);

struct Resonance {
  int a1, a2;
  cd exponent;
  double distance;
};
// Multi-indices 2 <= |alpha| <= N with |<alpha, Lambda> - lambda_i| <= tol for some exponent.
std::vector<Resonance> resonance_check(cd lambda1, cd lambda2, const std::vector<cd>& exponents, int order,
                                       double tol = 1e-8);

struct FourierTaylor {
  int order = 0;
  int modes = 0;
  double omega = 1.0;
  double energy = 0.0;
  double scale = 0.0;
  cd lambda1, lambda2;
  Stability stability = Stability::Stable;
  std::vector<Eigen::MatrixXcd> coefficients;  // per multi-index, 9 x (2K-1)

  const Eigen::MatrixXcd& at(int a1, int a2) const { return coefficients[taylor_index(a1, a2)]; }
  Eigen::MatrixXcd& at(int a1, int a2) { return coefficients[taylor_index(a1, a2)]; }
  FTSeries component(int i) const;
  double period() const;

  Eigen::VectorXcd evaluate_complex(double theta, cd z1, cd z2) const;
  // Derivatives in theta and in the polar angle of z = R e^{i angle}, z2 = conj(z).
  Eigen::VectorXcd theta_derivative(double theta, cd z1, cd z2) const;
  Eigen::VectorXcd angle_derivative(double theta, cd z1, cd z2) const;

  // Number of coefficient slots: 9 components times multi-indices times Fourier modes.
  long coefficient_slots() const;
  // Largest coefficient magnitude among |alpha| = N.
  double top_order_norm() const;
  // max |a_{(a1,a2),k} - conj(a_{(a2,a1),-k})|.
  double symmetry_defect() const;
};

struct ManifoldOptions {
  int order = 5;
  int modes = 20;
  double scale = 0.1;
  bool symmetry_reduced = true;
  // Solve for the field -F with the orbit and bundles given for that field.
  bool reverse_time = false;
  // When positive, raise the order from `order` up to `max_order` until top_order_norm() < tail_target.
  double tail_target = 0.0;
  int max_order = 16;
};

// Homological solve from an orbit and its two bundles (bundle2 must be the conjugate of bundle1).
// Orbit and bundles must share the Fourier size opt.modes.
FourierTaylor solve_homological(const FourierSeries& orbit, const FourierSeries& bundle1,
                                const FourierSeries& bundle2, cd lambda1, cd lambda2, double energy,
                                Stability stability, const MassConfig& cfg, const ManifoldOptions& opt = {});

// Full pipeline: re-refine the orbit at opt.modes, compute the saddle-focus pair and its
// normalized bundles, and solve. The exponent pair must have nonreal multipliers.
FourierTaylor solve_homological(const PeriodicOrbit& orbit, Stability stability, const MassConfig& cfg,
                                const ManifoldOptions& opt = {});

// Per multi-index sup norm of (i omega k + <alpha, lambda>) a_alpha - F(a)_alpha, recomputed from scratch.
std::vector<double> homological_residuals(const FourierTaylor& P, const MassConfig& cfg, bool reverse_time = false);

// Real form P(theta, s1 + i s2, s1 - i s2); throws SymmetryError if the imaginary residue exceeds 1e-10.
State9 eval_real(const FourierTaylor& P, double theta, double s1, double s2);

struct TorusPoint {
  double theta = 0.0;
  double angle = 0.0;
  double radius = 1.0;
  State6 state;
};

TorusPoint torus_point(const FourierTaylor& P, double theta, double angle, double radius = 1.0);
// n_theta x n_angle grid on the torus of the given radius.
std::vector<TorusPoint> sample_torus(const FourierTaylor& P, int n_theta, int n_angle, double radius = 1.0);
// Minimizes the 6D distance from u to the torus of the given radius over (theta, angle).
TorusPoint closest_torus_point(const FourierTaylor& P, const State6& u, double radius = 1.0);

// Image of the parameterization under a turns * 120 degree rotation (equal masses).
FourierTaylor rotate_manifold(const FourierTaylor& P, int turns);

// Sup norm of flow(P(theta0, sigma0), t) - P(theta0 + t, e^{Lambda t} sigma0) over the nine components,
// with sigma0 = s1 + i s2.
double conjugacy_error(const FourierTaylor& P, double theta0, double s1, double s2, double t,
                       const MassConfig& cfg, double tol = 1e-13);

}  // namespace crfbp
