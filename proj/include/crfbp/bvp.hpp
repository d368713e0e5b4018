#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "crfbp/dynamics.hpp"
#include "crfbp/manifolds.hpp"

namespace crfbp {

// Chebyshev coefficients use the normalization f(s) = a_0 + 2 sum_{k>=1} a_k T_k(s) on [-1, 1].
double cheb_evaluate(const Eigen::VectorXd& a, double s);
// Product (b * c)_k = sum_{k1 + k2 = k} b_|k1| c_|k2|, truncated to the common length.
Eigen::VectorXd cheb_convolve(const Eigen::VectorXd& b, const Eigen::VectorXd& c);

// Transforms between M coefficients and values at the n + 1 Lobatto nodes s_j = cos(pi j / n).
class ChebyshevTransform {
 public:
  ChebyshevTransform(int coefficients, int nodes);
  int coefficients() const { return m_; }
  int nodes() const { return n_; }
  double node(int j) const;
  const Eigen::MatrixXd& to_values() const { return B_; }        // (n+1) x M
  const Eigen::MatrixXd& to_coefficients() const { return C_; }  // M x (n+1), first M coefficients

 private:
  int m_, n_;
  Eigen::MatrixXd B_, C_;
};

struct ChebyshevSegment {
  Eigen::MatrixXd a;  // 9 x M

  int size() const { return static_cast<int>(a.cols()); }
  State9 evaluate(double s) const;
  State9 left() const { return evaluate(-1.0); }
  State9 right() const { return evaluate(1.0); }
  // Largest magnitude in the last retained coefficient.
  double tail() const { return a.col(a.cols() - 1).cwiseAbs().maxCoeff(); }
};

// Chebyshev coefficients of the lifted field along a segment by nested star products.
Eigen::MatrixXd field_coefficients(const ChebyshevSegment& seg, const MassConfig& cfg);

// Fits M coefficients interpolating f on [-1, 1] at M Lobatto nodes.
ChebyshevSegment fit_segment(const std::function<State9(double)>& f, int M);

struct ConnectionUnknowns {
  double L = 0.0;  // half of the total flight time
  double theta = 0.0, alpha = 0.0;
  double phi = 0.0, beta = 0.0;
  std::vector<double> fractions;  // share of the flight time per segment, summing to one
  std::vector<ChebyshevSegment> segments;

  double flight_time() const { return 2.0 * L; }
  int size() const;
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& y);
  // Lifted state at physical time t in [0, T].
  State9 evaluate9(double t) const;
};

struct BvpOptions {
  double R1 = 1.0, R2 = 1.0;
  int drop_index = 4;  // 1-based velocity component (2, 4 or 6) left out of the final condition
  int max_iterations = 30;
  double tolerance = 1e-13;
  // Split every segment in half and re-solve while the converged tail exceeds this.
  bool adaptive = true;
  double max_tail = 1e-9;
  int max_segments = 8;
};

// Residual: 9 start rows, 9(M-1) integral rows per segment, 9 rows per junction, 5 final rows.
Eigen::VectorXd assemble_operator(const ConnectionUnknowns& y, const FourierTaylor& P, const FourierTaylor& Q,
                                  const MassConfig& cfg, const BvpOptions& opt = {});
Eigen::MatrixXd assemble_jacobian(const ConnectionUnknowns& y, const FourierTaylor& P, const FourierTaylor& Q,
                                  const MassConfig& cfg, const BvpOptions& opt = {});

struct ConnectionSolution {
  ConnectionUnknowns unknowns;
  double defect = 0.0;
  double flight_time = 0.0;
  double energy = 0.0;
  int drop_index = 4;
  double R1 = 1.0, R2 = 1.0;
  int iterations = 0;
  double dropped_mismatch = 0.0;  // |Gamma(T) - Q| in the dropped component
  double energy_drift = 0.0;      // max |J(Gamma(t)) - J| over samples
  double tail = 0.0;
  double rcond = 0.0;  // reciprocal condition estimate of the Jacobian at the solution
};

ConnectionSolution newton_connect(ConnectionUnknowns guess, const FourierTaylor& P, const FourierTaylor& Q,
                                  const MassConfig& cfg, const BvpOptions& opt = {});

// Re-expands the arc on new segments with boundaries at the given interior times (0 < t < T).
ConnectionUnknowns subdivide(const ConnectionUnknowns& y, const std::vector<double>& breakpoints);

// Arc rotated by turns * 120 degrees; torus coordinates refer to the equally rotated manifolds.
ConnectionUnknowns rotate_connection(const ConnectionUnknowns& y, int turns);

State6 evaluate_connection(const ConnectionSolution& sol, double t);

// Guess from a trajectory through the unstable torus point (theta, alpha), integrated for time T.
ConnectionUnknowns guess_from_torus(const FourierTaylor& P, const FourierTaylor& Q, double theta, double alpha,
                                    double T, const MassConfig& cfg, int segments = 2, int M = 50,
                                    const BvpOptions& opt = {});
// Guess from a midpoint state integrated backward and forward for half_time each.
ConnectionUnknowns guess_from_midpoint(const FourierTaylor& P, const FourierTaylor& Q, const State6& midpoint,
                                       double half_time, const MassConfig& cfg, int segments = 2, int M = 50,
                                       const BvpOptions& opt = {});
// Guess joining a forward arc of duration t from P(theta, alpha) and a backward arc from Q(phi, beta)
// of duration t_stable (t when not positive).
ConnectionUnknowns guess_from_pair(const FourierTaylor& P, const FourierTaylor& Q, double theta, double alpha,
                                   double phi, double beta, double t, const MassConfig& cfg, int M = 50,
                                   const BvpOptions& opt = {}, double t_stable = -1.0);

// Samples (t, state) along the arc and, for tail_time > 0, the asymptotic pieces reconstructed
// through the conjugacies: t in [-tail_time, 0) from P and t in (T, T + tail_time] from Q.
struct ArcSample {
  double t;
  State6 state;
  int part;  // 0 unstable tail, 1 arc, 2 stable tail
};
std::vector<ArcSample> sample_connection(const ConnectionSolution& sol, const FourierTaylor& P,
                                         const FourierTaylor& Q, int samples, double tail_time = 0.0);

}  // namespace crfbp
