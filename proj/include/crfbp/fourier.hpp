#pragma once

#include <complex>

#include <Eigen/Dense>

namespace crfbp {

using cd = std::complex<double>;

// Truncated real-valued Fourier series: coefficients c_k for |k| < K stored column-wise,
// column k + K - 1, one row per component.
class FourierSeries {
 public:
  FourierSeries() = default;
  FourierSeries(int dim, int modes, double omega);
  FourierSeries(Eigen::MatrixXcd coefficients, double omega);

  int dim() const { return static_cast<int>(c_.rows()); }
  int modes() const { return modes_; }
  double omega() const { return omega_; }
  double period() const;
  void set_omega(double w) { omega_ = w; }

  cd& at(int component, int k) { return c_(component, k + modes_ - 1); }
  const cd& at(int component, int k) const { return c_(component, k + modes_ - 1); }
  const Eigen::MatrixXcd& coefficients() const { return c_; }
  Eigen::MatrixXcd& coefficients() { return c_; }

  Eigen::VectorXcd evaluate_complex(double t) const;
  Eigen::VectorXd evaluate(double t) const { return evaluate_complex(t).real(); }
  Eigen::VectorXd derivative(double t) const;

  // Truncates or zero-pads to a new number of modes.
  FourierSeries resized(int modes) const;
  // Largest coefficient magnitude in the outermost retained mode.
  double tail_norm() const;
  double symmetry_defect() const;
  void enforce_symmetry();

 private:
  Eigen::MatrixXcd c_;
  int modes_ = 0;
  double omega_ = 1.0;
};

// Uniform-grid transforms between sampled values on [0, T) and Fourier coefficients.
class SpectralGrid {
 public:
  SpectralGrid(int modes, int points);
  int modes() const { return modes_; }
  int points() const { return points_; }
  // Values at t_j = j T / points of a series with `modes` modes (dim x points).
  Eigen::MatrixXcd synthesize(const Eigen::MatrixXcd& coefficients) const;
  // Coefficients |k| < modes of sampled values (dim x points).
  Eigen::MatrixXcd analyze(const Eigen::MatrixXcd& values) const;

 private:
  int modes_, points_;
  Eigen::MatrixXcd synth_;  // (2K-1) x points
  Eigen::MatrixXcd anal_;   // points x (2K-1)
};

}  // namespace crfbp
