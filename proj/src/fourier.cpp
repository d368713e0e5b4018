#include "crfbp/fourier.hpp"

#include <cmath>
#include <numbers>

#include "crfbp/errors.hpp"

namespace crfbp {

FourierSeries::FourierSeries(int dim, int modes, double omega)
    : c_(Eigen::MatrixXcd::Zero(dim, 2 * modes - 1)), modes_(modes), omega_(omega) {}

FourierSeries::FourierSeries(Eigen::MatrixXcd coefficients, double omega)
    : c_(std::move(coefficients)), modes_(static_cast<int>((c_.cols() + 1) / 2)), omega_(omega) {
  if (c_.cols() % 2 == 0) throw Error("Fourier coefficient array needs an odd number of columns");
}

double FourierSeries::period() const { return 2.0 * std::numbers::pi / omega_; }

Eigen::VectorXcd FourierSeries::evaluate_complex(double t) const {
  Eigen::VectorXcd out = c_.col(modes_ - 1);
  const cd step = std::polar(1.0, omega_ * t);
  cd e = 1.0;
  for (int k = 1; k < modes_; ++k) {
    e *= step;
    out += c_.col(modes_ - 1 + k) * e + c_.col(modes_ - 1 - k) * std::conj(e);
  }
  return out;
}

Eigen::VectorXd FourierSeries::derivative(double t) const {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim());
  const cd step = std::polar(1.0, omega_ * t);
  cd e = 1.0;
  for (int k = 1; k < modes_; ++k) {
    e *= step;
    const cd f(0.0, omega_ * k);
    out += f * (c_.col(modes_ - 1 + k) * e - c_.col(modes_ - 1 - k) * std::conj(e));
  }
  return out.real();
}

FourierSeries FourierSeries::resized(int modes) const {
  FourierSeries out(dim(), modes, omega_);
  const int m = std::min(modes, modes_);
  for (int k = -(m - 1); k <= m - 1; ++k) out.c_.col(k + modes - 1) = c_.col(k + modes_ - 1);
  return out;
}

double FourierSeries::tail_norm() const {
  if (modes_ < 2) return 0.0;
  return std::max(c_.col(0).cwiseAbs().maxCoeff(), c_.col(2 * modes_ - 2).cwiseAbs().maxCoeff());
}

double FourierSeries::symmetry_defect() const {
  double d = 0.0;
  for (int k = 0; k < modes_; ++k)
    d = std::max(d, (c_.col(modes_ - 1 - k) - c_.col(modes_ - 1 + k).conjugate()).cwiseAbs().maxCoeff());
  return d;
}

void FourierSeries::enforce_symmetry() {
  c_.col(modes_ - 1) = c_.col(modes_ - 1).real().cast<cd>();
  for (int k = 1; k < modes_; ++k) c_.col(modes_ - 1 - k) = c_.col(modes_ - 1 + k).conjugate();
}

SpectralGrid::SpectralGrid(int modes, int points)
    : modes_(modes), points_(points), synth_(2 * modes - 1, points), anal_(points, 2 * modes - 1) {
  for (int k = -(modes - 1); k <= modes - 1; ++k) {
    for (int j = 0; j < points; ++j) {
      // Reduce the phase index exactly before converting to an angle.
      const long idx = (static_cast<long>(k) * j) % points;
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(idx) / points;
      const cd e = std::polar(1.0, ang);
      synth_(k + modes - 1, j) = e;
      anal_(j, k + modes - 1) = std::conj(e) / static_cast<double>(points);
    }
  }
}

Eigen::MatrixXcd SpectralGrid::synthesize(const Eigen::MatrixXcd& coefficients) const {
  if (coefficients.cols() != 2 * modes_ - 1) throw Error("coefficient size does not match spectral grid");
  return coefficients * synth_;
}

Eigen::MatrixXcd SpectralGrid::analyze(const Eigen::MatrixXcd& values) const {
  if (values.cols() != points_) throw Error("sample count does not match spectral grid");
  return values * anal_;
}

}  // namespace crfbp
