#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "crfbp/dynamics.hpp"
#include "crfbp/fourier.hpp"
#include "crfbp/integrator.hpp"

namespace crfbp {

struct FloquetData {
  std::vector<cd> multipliers;  // eigenvalues of the 6D monodromy matrix
  std::vector<cd> exponents;    // principal log(multiplier) / T
  std::vector<bool> trivial;    // the pair closest to 1 (time shift and energy)
  int n_unstable = 0;

  // Exponents of the lifted system: the six above plus three zeros from the lift.
  std::vector<cd> lifted_exponents() const;
  // Nontrivial exponent with largest real part (and positive imaginary part for pairs).
  cd leading_unstable() const;
  cd leading_stable() const;
};

struct Bundle {
  cd exponent;
  FourierSeries series;  // frequency omega, or omega/2 with odd modes only when antiperiodic
  bool antiperiodic = false;
  double residual = 0.0;
  double scale = 0.0;
};

struct PeriodicOrbit {
  FourierSeries state;  // nine lifted components
  double energy = 0.0;  // energy the orbit was solved at
  double residual = 0.0;
  int iterations = 0;
  std::array<double, 4> unfolding{};  // vanish at a true periodic orbit
  std::optional<FloquetData> floquet;
  std::vector<Bundle> bundles;

  double period() const { return state.period(); }
  double omega() const { return state.omega(); }
  int modes() const { return state.modes(); }
  State9 at(double t) const { return state.evaluate(t); }
  State6 at6(double t) const { return project(State9(state.evaluate(t))); }
};

struct OrbitSolverOptions {
  int max_iterations = 50;
  double tolerance = 1e-13;
};

FourierSeries vertical_seed(const LibrationPoint& lp, double amplitude, const MassConfig& cfg, int modes = 50);

// Fourier representation of the trajectory through u over [0, T], from integration samples.
FourierSeries series_from_flow(const State6& u, double period, const MassConfig& cfg, int modes = 50);

// Galerkin Newton solve at fixed energy. `reference` fixes the phase (defaults to the guess).
PeriodicOrbit refine_orbit(const FourierSeries& guess, double target_energy, const MassConfig& cfg, int modes = 50,
                           const OrbitSolverOptions& opt = {}, const FourierSeries* reference = nullptr);

// Sup norm of the Galerkin residual i omega k c_k - F(c)_k over all |k| < K.
double galerkin_residual(const FourierSeries& state, const MassConfig& cfg);
// max |J(gamma(t)) - J| over `samples` equally spaced phases.
double energy_variation(const PeriodicOrbit& orbit, const MassConfig& cfg, int samples = 256);

struct FamilyResult {
  std::vector<PeriodicOrbit> members;
  bool truncated = false;
  double last_energy = 0.0;
};

// Zeroth-order predictor continuation in energy, halving failed steps up to five times.
FamilyResult continue_family(const PeriodicOrbit& orbit, double dJ, int steps, const MassConfig& cfg, int modes = 50);
// Continues through a list of target energies with intermediate steps no larger than max_step.
FamilyResult continue_to_energies(const PeriodicOrbit& start, const std::vector<double>& targets,
                                  const MassConfig& cfg, int modes = 50, double max_step = 0.1);

// Vertical family member at the given energy, seeded at the libration point.
PeriodicOrbit vertical_orbit(const LibrationPoint& lp, double energy, const MassConfig& cfg, int modes = 50);

FloquetData floquet(const PeriodicOrbit& orbit, const MassConfig& cfg, const IntegratorOptions& opt = {});

struct BundleOptions {
  double scale = 0.1;
  int normalization_modes = 5;
};

Bundle bundle_solve(const PeriodicOrbit& orbit, cd exponent, const MassConfig& cfg, int modes,
                    const BundleOptions& opt = {});
// Residual of i omega k v_k + lambda v_k - (DF(gamma) v)_k in coefficient sup norm.
double bundle_residual(const PeriodicOrbit& orbit, const Bundle& bundle, const MassConfig& cfg);

// Minimizes |gamma(t) - target| over t; returns the time and distance (6D).
std::pair<double, double> align_phase(const FourierSeries& state, const State6& target);

// Applies a time shift: the returned series satisfies new(t) = old(t + shift).
FourierSeries shift_phase(const FourierSeries& s, double shift);
// Rotates a lifted orbit by turns * 120 degrees (equal masses).
FourierSeries rotate_series(const FourierSeries& s, int turns);

}  // namespace crfbp
