#include "crfbp/orbits.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/tools/minima.hpp>

#include "crfbp/errors.hpp"
#include "crfbp/spectral_jacobian.hpp"

namespace crfbp {

namespace {

constexpr int kDim = 9;

// Real unknown layout per component: Re c0, Re c1, Im c1, ..., Re c_{K-1}, Im c_{K-1}.
struct Layout {
  int K;
  int block() const { return 2 * K - 1; }
  int coeffs() const { return kDim * block(); }
  int omega() const { return coeffs(); }
  int beta(int j) const { return coeffs() + 1 + j; }
  int size() const { return coeffs() + 5; }
  int re(int i, int k) const { return i * block() + (k == 0 ? 0 : 2 * k - 1); }
  int im(int i, int k) const { return i * block() + 2 * k; }
};

struct Unknowns {
  Eigen::MatrixXcd c;  // 9 x (2K-1)
  double omega;
  std::array<double, 4> beta;
};

Unknowns unpack(const Eigen::VectorXd& y, const Layout& L) {
  Unknowns u;
  const int K = L.K;
  u.c.resize(kDim, L.block());
  for (int i = 0; i < kDim; ++i) {
    u.c(i, K - 1) = y[L.re(i, 0)];
    for (int k = 1; k < K; ++k) {
      const cd v(y[L.re(i, k)], y[L.im(i, k)]);
      u.c(i, K - 1 + k) = v;
      u.c(i, K - 1 - k) = std::conj(v);
    }
  }
  u.omega = y[L.omega()];
  for (int j = 0; j < 4; ++j) u.beta[j] = y[L.beta(j)];
  return u;
}

Eigen::VectorXd pack(const FourierSeries& s, const Layout& L) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(L.size());
  for (int i = 0; i < kDim; ++i) {
    y[L.re(i, 0)] = s.at(i, 0).real();
    for (int k = 1; k < L.K; ++k) {
      y[L.re(i, k)] = s.at(i, k).real();
      y[L.im(i, k)] = s.at(i, k).imag();
    }
  }
  y[L.omega()] = s.omega();
  return y;
}

// Unfolding fields: a velocity damping term plus one cubic term per reciprocal distance.
// Their pairing with the four first integrals is triangular and nonsingular, so every
// periodic solution of the unfolded field has zero unfolding parameters.
State9 unfolded_field(const State9& v, const std::array<double, 4>& beta, const MassConfig& cfg) {
  State9 f = field9(v, cfg);
  f[1] += beta[0] * v[1];
  f[3] += beta[0] * v[3];
  f[5] += beta[0] * v[5];
  for (int j = 0; j < 3; ++j) f[6 + j] += beta[1 + j] * v[6 + j] * v[6 + j] * v[6 + j];
  return f;
}

Mat9 unfolded_jacobian(const State9& v, const std::array<double, 4>& beta, const MassConfig& cfg) {
  Mat9 A = jacobian9(v, cfg);
  A(1, 1) += beta[0];
  A(3, 3) += beta[0];
  A(5, 5) += beta[0];
  for (int j = 0; j < 3; ++j) A(6 + j, 6 + j) += 3.0 * beta[1 + j] * v[6 + j] * v[6 + j];
  return A;
}

State9 value_at_zero(const Eigen::MatrixXcd& c) { return c.rowwise().sum().real(); }

class GalerkinSystem {
 public:
  GalerkinSystem(const MassConfig& cfg, int K, double target, const FourierSeries& ref)
      : cfg_(cfg), L_{K}, target_(target), grid_(K, 6 * K), jac_grid_(2 * K - 1, 6 * K), ref_(ref.resized(K)) {
    double norm2 = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int k = 1; k < K; ++k) norm2 += 4.0 * k * k * std::norm(ref_.at(i, k));
    phase_scale_ = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 1.0;
  }

  const Layout& layout() const { return L_; }

  Eigen::VectorXd residual(const Eigen::VectorXd& y, double* galerkin_only = nullptr) const {
    const Unknowns u = unpack(y, L_);
    const int K = L_.K;
    const Eigen::MatrixXd vals = grid_.synthesize(u.c).real();
    Eigen::MatrixXcd fv(kDim, grid_.points());
    Eigen::MatrixXcd fv0(kDim, grid_.points());
    for (int j = 0; j < grid_.points(); ++j) {
      const State9 v = vals.col(j);
      fv.col(j) = unfolded_field(v, u.beta, cfg_).cast<cd>();
      if (galerkin_only) fv0.col(j) = field9(v, cfg_).cast<cd>();
    }
    const Eigen::MatrixXcd fh = grid_.analyze(fv);
    Eigen::VectorXd r(L_.size());
    for (int i = 0; i < kDim; ++i) {
      for (int k = 0; k < K; ++k) {
        const cd rk = cd(0.0, u.omega * k) * u.c(i, K - 1 + k) - fh(i, K - 1 + k);
        r[L_.re(i, k)] = rk.real();
        if (k > 0) r[L_.im(i, k)] = rk.imag();
      }
    }
    if (galerkin_only) {
      const Eigen::MatrixXcd fh0 = grid_.analyze(fv0);
      double g = 0.0;
      for (int i = 0; i < kDim; ++i)
        for (int k = -(K - 1); k < K; ++k)
          g = std::max(g, std::abs(cd(0.0, u.omega * k) * u.c(i, K - 1 + k) - fh0(i, K - 1 + k)));
      *galerkin_only = g;
    }
    const State9 v0 = value_at_zero(u.c);
    int row = L_.coeffs();
    r[row++] = jacobi9(v0, cfg_) - target_;
    r[row++] = phase(u.c);
    for (int j = 0; j < 3; ++j) r[row++] = lift_constraint(v0, j);
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& y) const {
    const Unknowns u = unpack(y, L_);
    const int K = L_.K;
    const int n = L_.size();
    Eigen::MatrixXd Jm = Eigen::MatrixXd::Zero(n, n);

    const Eigen::MatrixXd vals = grid_.synthesize(u.c).real();
    const ToeplitzBlocks D = toeplitz_blocks(vals, jac_grid_, [&](const State9& v) {
      return unfolded_jacobian(v, u.beta, cfg_);
    });

    for (const auto& blk : D.blocks) {
      const int i = blk.row, l = blk.col;
      auto Dm = [&](int m) { return blk.coeff(m); };
      for (int k = 0; k < K; ++k) {
        for (int q = 0; q < K; ++q) {
          cd da, db;
          if (q == 0) {
            da = -Dm(k);
            db = 0.0;
          } else {
            da = -(Dm(k - q) + Dm(k + q));
            db = -cd(0.0, 1.0) * (Dm(k - q) - Dm(k + q));
          }
          Jm(L_.re(i, k), L_.re(l, q)) += da.real();
          if (q > 0) Jm(L_.re(i, k), L_.im(l, q)) += db.real();
          if (k > 0) {
            Jm(L_.im(i, k), L_.re(l, q)) += da.imag();
            if (q > 0) Jm(L_.im(i, k), L_.im(l, q)) += db.imag();
          }
        }
      }
    }
    for (int i = 0; i < kDim; ++i) {
      for (int k = 1; k < K; ++k) {
        // d/da of i w k (a + i b) = i w k ; d/db = -w k
        Jm(L_.im(i, k), L_.re(i, k)) += u.omega * k;
        Jm(L_.re(i, k), L_.im(i, k)) += -u.omega * k;
        const cd dw = cd(0.0, k) * u.c(i, K - 1 + k);
        Jm(L_.re(i, k), L_.omega()) = dw.real();
        Jm(L_.im(i, k), L_.omega()) = dw.imag();
      }
    }
    // Unfolding parameter columns: minus the coefficients of each unfolding field.
    Eigen::MatrixXcd g(kDim, grid_.points());
    g.setZero();
    for (int j = 0; j < grid_.points(); ++j) {
      g(1, j) = vals(1, j);
      g(3, j) = vals(3, j);
      g(5, j) = vals(5, j);
    }
    Eigen::MatrixXcd gh = grid_.analyze(g);
    for (int i : {1, 3, 5})
      for (int k = 0; k < K; ++k) {
        Jm(L_.re(i, k), L_.beta(0)) = -gh(i, K - 1 + k).real();
        if (k > 0) Jm(L_.im(i, k), L_.beta(0)) = -gh(i, K - 1 + k).imag();
      }
    for (int jj = 0; jj < 3; ++jj) {
      Eigen::MatrixXcd w(1, grid_.points());
      for (int j = 0; j < grid_.points(); ++j) w(0, j) = std::pow(vals(6 + jj, j), 3);
      const Eigen::MatrixXcd wh = grid_.analyze(w);
      for (int k = 0; k < K; ++k) {
        Jm(L_.re(6 + jj, k), L_.beta(1 + jj)) = -wh(0, K - 1 + k).real();
        if (k > 0) Jm(L_.im(6 + jj, k), L_.beta(1 + jj)) = -wh(0, K - 1 + k).imag();
      }
    }

    // Scalar constraint rows. gamma(0) = c0 + 2 sum Re c_k.
    const State9 v0 = value_at_zero(u.c);
    auto fill_point_row = [&](int row, const Eigen::Matrix<double, 9, 1>& grad) {
      for (int i = 0; i < kDim; ++i) {
        Jm(row, L_.re(i, 0)) = grad[i];
        for (int k = 1; k < K; ++k) Jm(row, L_.re(i, k)) = 2.0 * grad[i];
      }
    };
    int row = L_.coeffs();
    fill_point_row(row++, jacobi9_gradient(v0, cfg_));
    for (int i = 0; i < 6; ++i)
      for (int k = 1; k < K; ++k) {
        const cd r = ref_.at(i, k);
        Jm(row, L_.re(i, k)) = -2.0 * k * r.imag() * phase_scale_;
        Jm(row, L_.im(i, k)) = 2.0 * k * r.real() * phase_scale_;
      }
    ++row;
    for (int j = 0; j < 3; ++j) fill_point_row(row++, lift_constraint_gradient(v0, j));
    return Jm;
  }

 private:
  double phase(const Eigen::MatrixXcd& c) const {
    const int K = L_.K;
    double p = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int k = 1; k < K; ++k) {
        const cd d = c(i, K - 1 + k) - ref_.at(i, k);
        const cd r = ref_.at(i, k);
        p += 2.0 * k * (-d.real() * r.imag() + d.imag() * r.real());
      }
    return p * phase_scale_;
  }

  double lift_constraint(const State9& v, int j) const {
    const double dx = v[0] - cfg_.x[j], dy = v[2] - cfg_.y[j], dz = v[4] - cfg_.z[j];
    return v[6 + j] * v[6 + j] * (dx * dx + dy * dy + dz * dz) - 1.0;
  }

  Eigen::Matrix<double, 9, 1> lift_constraint_gradient(const State9& v, int j) const {
    const double dx = v[0] - cfg_.x[j], dy = v[2] - cfg_.y[j], dz = v[4] - cfg_.z[j];
    const double w = v[6 + j];
    Eigen::Matrix<double, 9, 1> g = Eigen::Matrix<double, 9, 1>::Zero();
    g[0] = 2.0 * w * w * dx;
    g[2] = 2.0 * w * w * dy;
    g[4] = 2.0 * w * w * dz;
    g[6 + j] = 2.0 * w * (dx * dx + dy * dy + dz * dz);
    return g;
  }

  const MassConfig& cfg_;
  Layout L_;
  double target_;
  SpectralGrid grid_;
  SpectralGrid jac_grid_;
  FourierSeries ref_;
  double phase_scale_ = 1.0;
};

}  // namespace

FourierSeries vertical_seed(const LibrationPoint& lp, double amplitude, const MassConfig& cfg, int modes) {
  const double w = lp.omega_z;
  const int n = 6 * modes;
  const SpectralGrid grid(modes, n);
  Eigen::MatrixXcd vals(kDim, n);
  const double T = 2.0 * std::numbers::pi / w;
  for (int j = 0; j < n; ++j) {
    const double t = T * j / n;
    State6 u = lp.state();
    u[4] = amplitude * std::cos(w * t);
    u[5] = -amplitude * w * std::sin(w * t);
    vals.col(j) = lift(u, cfg).cast<cd>();
  }
  FourierSeries s(grid.analyze(vals), w);
  s.enforce_symmetry();
  return s;
}

FourierSeries series_from_flow(const State6& u, double period, const MassConfig& cfg, int modes) {
  const int n = 6 * modes;
  std::vector<double> times;
  for (int j = 1; j < n; ++j) times.push_back(period * j / n);
  const State9 v0 = lift(u, cfg);
  const auto samples = flow_samples(v0, times, cfg);
  Eigen::MatrixXcd vals(kDim, n);
  vals.col(0) = v0.cast<cd>();
  for (int j = 1; j < n; ++j) vals.col(j) = samples[j - 1].cast<cd>();
  FourierSeries s(SpectralGrid(modes, n).analyze(vals), 2.0 * std::numbers::pi / period);
  s.enforce_symmetry();
  return s;
}

double galerkin_residual(const FourierSeries& state, const MassConfig& cfg) {
  const int K = state.modes();
  const SpectralGrid grid(K, 6 * K);
  const Eigen::MatrixXd vals = grid.synthesize(state.coefficients()).real();
  Eigen::MatrixXcd fv(kDim, grid.points());
  for (int j = 0; j < grid.points(); ++j) fv.col(j) = field9(vals.col(j), cfg).cast<cd>();
  const Eigen::MatrixXcd fh = grid.analyze(fv);
  double r = 0.0;
  for (int i = 0; i < kDim; ++i)
    for (int k = -(K - 1); k < K; ++k)
      r = std::max(r, std::abs(cd(0.0, state.omega() * k) * state.at(i, k) - fh(i, K - 1 + k)));
  return r;
}

double energy_variation(const PeriodicOrbit& orbit, const MassConfig& cfg, int samples) {
  double worst = 0.0;
  for (int j = 0; j < samples; ++j) {
    const double t = orbit.period() * j / samples;
    worst = std::max(worst, std::abs(jacobi(orbit.at6(t), cfg) - orbit.energy));
  }
  return worst;
}

PeriodicOrbit refine_orbit(const FourierSeries& guess, double target_energy, const MassConfig& cfg, int modes,
                           const OrbitSolverOptions& opt, const FourierSeries* reference) {
  if (modes < 2) throw Error("orbit solve needs at least two Fourier modes");
  const FourierSeries start = guess.resized(modes);
  const GalerkinSystem sys(cfg, modes, target_energy, reference ? *reference : start);
  const Layout& L = sys.layout();
  Eigen::VectorXd y = pack(start, L);
  std::vector<double> history;
  bool converged = false;
  int iterations = 0;
  for (int it = 0; it <= opt.max_iterations; ++it) {
    iterations = it;
    const Eigen::VectorXd r = sys.residual(y);
    const double rn = r.cwiseAbs().maxCoeff();
    history.push_back(rn);
    if (!std::isfinite(rn) || rn > 1e3) break;
    if (rn <= opt.tolerance) {
      converged = true;
      break;
    }
    if (it == opt.max_iterations) break;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.jacobian(y));
    const Eigen::VectorXd dy = lu.solve(r);
    if (!dy.allFinite()) break;
    y -= dy;
    // Roundoff floor: accept once the update is negligible and the residual small.
    if (dy.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + y.cwiseAbs().maxCoeff())) {
      const double rn2 = sys.residual(y).cwiseAbs().maxCoeff();
      history.push_back(rn2);
      converged = rn2 <= 1e-11;
      break;
    }
    if (history.size() >= 4 && rn <= 1e-11 && history[history.size() - 2] <= 1e-11 &&
        rn >= 0.5 * history[history.size() - 2]) {
      converged = true;
      break;
    }
  }
  if (!converged) throw DivergenceError("periodic orbit Newton iteration did not converge", history);

  const Unknowns u = unpack(y, L);
  PeriodicOrbit orbit;
  orbit.state = FourierSeries(u.c, u.omega);
  orbit.state.enforce_symmetry();
  orbit.energy = target_energy;
  orbit.unfolding = u.beta;
  orbit.iterations = iterations;
  orbit.residual = galerkin_residual(orbit.state, cfg);
  return orbit;
}

FamilyResult continue_to_energies(const PeriodicOrbit& start, const std::vector<double>& targets,
                                  const MassConfig& cfg, int modes, double max_step) {
  FamilyResult res;
  PeriodicOrbit current = start;
  res.last_energy = start.energy;
  for (double target : targets) {
    double step = std::clamp(target - current.energy, -max_step, max_step);
    int halvings = 0;
    while (std::abs(target - current.energy) > 1e-14) {
      const double J = std::abs(target - current.energy) <= std::abs(step) ? target : current.energy + step;
      try {
        current = refine_orbit(current.state, J, cfg, modes, {}, &current.state);
        halvings = 0;
      } catch (const Error&) {
        if (++halvings > 5) {
          res.truncated = true;
          res.last_energy = current.energy;
          return res;
        }
        step *= 0.5;
      }
    }
    res.members.push_back(current);
    res.last_energy = current.energy;
  }
  return res;
}

FamilyResult continue_family(const PeriodicOrbit& orbit, double dJ, int steps, const MassConfig& cfg, int modes) {
  if (std::abs(dJ) > 0.1) throw Error("continuation step must satisfy |dJ| <= 0.1");
  std::vector<double> targets;
  for (int i = 1; i <= steps; ++i) targets.push_back(orbit.energy + i * dJ);
  FamilyResult res = continue_to_energies(orbit, targets, cfg, modes, std::abs(dJ));
  res.members.insert(res.members.begin(), orbit);
  return res;
}

PeriodicOrbit vertical_orbit(const LibrationPoint& lp, double energy, const MassConfig& cfg, int modes) {
  const FourierSeries seed = vertical_seed(lp, 1e-2, cfg, modes);
  const double J0 = jacobi9(seed.evaluate(0.0), cfg);
  PeriodicOrbit orbit = refine_orbit(seed, J0, cfg, modes);
  const FamilyResult fam = continue_to_energies(orbit, {energy}, cfg, modes);
  if (fam.truncated || fam.members.empty())
    throw DivergenceError("continuation stopped at J = " + std::to_string(fam.last_energy), {});
  return fam.members.back();
}

std::vector<cd> FloquetData::lifted_exponents() const {
  std::vector<cd> out = exponents;
  out.insert(out.end(), 3, cd(0.0, 0.0));
  return out;
}

cd FloquetData::leading_unstable() const {
  int best = -1;
  for (int i = 0; i < static_cast<int>(exponents.size()); ++i) {
    if (trivial[i]) continue;
    if (best < 0 || exponents[i].real() > exponents[best].real() + 1e-12 ||
        (std::abs(exponents[i].real() - exponents[best].real()) <= 1e-12 && exponents[i].imag() > exponents[best].imag()))
      best = i;
  }
  if (best < 0) throw Error("no nontrivial Floquet exponent");
  return exponents[best];
}

cd FloquetData::leading_stable() const {
  int best = -1;
  for (int i = 0; i < static_cast<int>(exponents.size()); ++i) {
    if (trivial[i]) continue;
    if (best < 0 || exponents[i].real() < exponents[best].real() - 1e-12 ||
        (std::abs(exponents[i].real() - exponents[best].real()) <= 1e-12 && exponents[i].imag() > exponents[best].imag()))
      best = i;
  }
  if (best < 0) throw Error("no nontrivial Floquet exponent");
  return exponents[best];
}

FloquetData floquet(const PeriodicOrbit& orbit, const MassConfig& cfg, const IntegratorOptions& opt) {
  const double T = orbit.period();
  const Mat6 M = transition_matrix6(orbit.at6(0.0), T, cfg, opt);
  Eigen::EigenSolver<Mat6> es(M);
  FloquetData fd;
  std::vector<int> order(6);
  for (int i = 0; i < 6; ++i) {
    fd.multipliers.push_back(es.eigenvalues()[i]);
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(fd.multipliers[a] - 1.0) < std::abs(fd.multipliers[b] - 1.0);
  });
  fd.trivial.assign(6, false);
  fd.trivial[order[0]] = fd.trivial[order[1]] = true;
  for (int i = 0; i < 6; ++i) {
    fd.exponents.push_back(std::log(fd.multipliers[i]) / T);
    if (!fd.trivial[i] && std::abs(fd.multipliers[i]) > 1.0 + 1e-8) ++fd.n_unstable;
  }
  return fd;
}

namespace {

// Dense operator v -> i omega (k + shift) v_k - (DF(gamma) v)_k on modes k in [kmin, kmax].
Eigen::MatrixXcd bundle_operator(const PeriodicOrbit& orbit, const MassConfig& cfg, int kmin, int kmax,
                                 double shift) {
  const int nm = kmax - kmin + 1;
  const int Ko = orbit.modes();
  const int span = kmax - kmin;
  const int pts = 4 * (Ko - 1) + span + 2;
  const SpectralGrid vgrid(Ko, pts);
  const Eigen::MatrixXd vals = vgrid.synthesize(orbit.state.coefficients()).real();
  const SpectralGrid dgrid(span + 1, pts);
  const ToeplitzBlocks D = toeplitz_blocks(vals, dgrid, [&](const State9& v) { return jacobian9(v, cfg); });
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(kDim * nm, kDim * nm);
  for (const auto& blk : D.blocks)
    for (int a = 0; a < nm; ++a)
      for (int b = 0; b < nm; ++b) A(blk.row * nm + a, blk.col * nm + b) -= blk.coeff(a - b);
  for (int i = 0; i < kDim; ++i)
    for (int a = 0; a < nm; ++a) A(i * nm + a, i * nm + a) += cd(0.0, orbit.omega() * (kmin + a + shift));
  return A;
}

struct EigenSolve {
  Eigen::VectorXcd v;
  cd lambda;
  double residual;
  bool ok;
};

EigenSolve bordered_solve(const Eigen::MatrixXcd& A, cd lambda0) {
  const int n = static_cast<int>(A.rows());
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
  std::mt19937_64 rng(20240607);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = cd(nd(rng), nd(rng));
  v.normalize();
  cd lambda = lambda0;
  {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A + lambda * I);
    for (int it = 0; it < 4; ++it) {
      Eigen::VectorXcd x = lu.solve(v);
      if (!x.allFinite()) break;
      const cd nu = x.dot(v) / x.squaredNorm();  // (A + lambda0) x ~ nu x
      x.normalize();
      v = x;
      lambda = lambda0 - nu;
    }
  }
  // The eigen-estimate from inverse iteration is only used to polish in the bordered Newton.
  lambda = std::abs(lambda - lambda0) < 1e-3 * (1.0 + std::abs(lambda0)) ? lambda : lambda0;
  const Eigen::VectorXcd w = v;
  EigenSolve out{v, lambda, 0.0, false};
  for (int it = 0; it < 8; ++it) {
    Eigen::MatrixXcd B(n + 1, n + 1);
    B.topLeftCorner(n, n) = A + lambda * I;
    B.topRightCorner(n, 1) = v;
    B.bottomLeftCorner(1, n) = w.adjoint();
    B(n, n) = 0.0;
    Eigen::VectorXcd rhs(n + 1);
    rhs.head(n) = (A + lambda * I) * v;
    rhs[n] = w.dot(v) - 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(B);
    if (lu.rcond() < 1e-15) throw NonSimpleExponentError("bundle exponent is not simple");
    const Eigen::VectorXcd d = lu.solve(rhs);
    v -= d.head(n);
    lambda -= d[n];
    const double res = ((A + lambda * I) * v).cwiseAbs().maxCoeff() / v.cwiseAbs().maxCoeff();
    out = {v, lambda, res, res <= 1e-11};
    if (d.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + v.cwiseAbs().maxCoeff())) break;
  }
  out.ok = out.ok && std::abs(out.lambda - lambda0) <= 1e-6 * (1.0 + std::abs(lambda0));
  return out;
}

}  // namespace

Bundle bundle_solve(const PeriodicOrbit& orbit, cd exponent, const MassConfig& cfg, int modes,
                    const BundleOptions& opt) {
  Bundle b;
  b.scale = opt.scale;
  EigenSolve es{};
  int kmin = -(modes - 1), kmax = modes - 1;
  double shift = 0.0;
  {
    const Eigen::MatrixXcd A = bundle_operator(orbit, cfg, kmin, kmax, 0.0);
    es = bordered_solve(A, exponent);
  }
  if (!es.ok) {
    // No T-periodic null vector: look for an antiperiodic one on half-integer modes.
    kmin = -modes;
    kmax = modes - 1;
    shift = 0.5;
    const Eigen::MatrixXcd A = bundle_operator(orbit, cfg, kmin, kmax, shift);
    es = bordered_solve(A, exponent);
    if (!es.ok) throw NonSimpleExponentError("no normal bundle found for the requested exponent");
    b.antiperiodic = true;
  }
  const int nm = kmax - kmin + 1;
  Eigen::VectorXcd v = es.v;
  // Scale: sum over components of |v_k|^2 for low modes equals scale^2.
  double low = 0.0;
  for (int i = 0; i < kDim; ++i)
    for (int a = 0; a < nm; ++a)
      if (std::abs(kmin + a + shift) < opt.normalization_modes) low += std::norm(v[i * nm + a]);
  v *= opt.scale / std::sqrt(low);
  // Phase: the mean of v . v over a period is made real and positive.
  cd q = 0.0;
  for (int i = 0; i < kDim; ++i)
    for (int a = 0; a < nm; ++a) {
      const int partner = (kmax + kmin) - (kmin + a);  // index of -(k + shift) - shift
      const int pa = partner - kmin;
      if (pa >= 0 && pa < nm) q += v[i * nm + a] * v[i * nm + pa];
    }
  if (std::abs(q) > 1e-14) v *= std::polar(1.0, -std::arg(q) / 2.0);
  // Remaining sign: the largest real part among the leading entries is positive.
  Eigen::Index imax = 0;
  v.real().cwiseAbs().maxCoeff(&imax);
  if (v[imax].real() < 0.0) v = -v;

  if (!b.antiperiodic) {
    b.series = FourierSeries(kDim, modes, orbit.omega());
    for (int i = 0; i < kDim; ++i)
      for (int a = 0; a < nm; ++a) b.series.at(i, kmin + a) = v[i * nm + a];
  } else {
    b.series = FourierSeries(kDim, 2 * modes, orbit.omega() / 2.0);
    for (int i = 0; i < kDim; ++i)
      for (int a = 0; a < nm; ++a) b.series.at(i, 2 * (kmin + a) + 1) = v[i * nm + a];
  }
  b.exponent = es.lambda;
  b.residual = bundle_residual(orbit, b, cfg);
  return b;
}

double bundle_residual(const PeriodicOrbit& orbit, const Bundle& bundle, const MassConfig& cfg) {
  int kmin, kmax;
  double shift;
  Eigen::VectorXcd v;
  if (!bundle.antiperiodic) {
    const int K = bundle.series.modes();
    kmin = -(K - 1);
    kmax = K - 1;
    shift = 0.0;
    v.resize(kDim * (2 * K - 1));
    for (int i = 0; i < kDim; ++i)
      for (int k = kmin; k <= kmax; ++k) v[i * (2 * K - 1) + (k - kmin)] = bundle.series.at(i, k);
  } else {
    const int K = bundle.series.modes() / 2;
    kmin = -K;
    kmax = K - 1;
    shift = 0.5;
    v.resize(kDim * 2 * K);
    for (int i = 0; i < kDim; ++i)
      for (int k = kmin; k <= kmax; ++k) v[i * 2 * K + (k - kmin)] = bundle.series.at(i, 2 * k + 1);
  }
  const Eigen::MatrixXcd A = bundle_operator(orbit, cfg, kmin, kmax, shift);
  return (A * v + bundle.exponent * v).cwiseAbs().maxCoeff();
}

std::pair<double, double> align_phase(const FourierSeries& state, const State6& target) {
  const double T = state.period();
  const int n = 1024;
  double best_t = 0.0, best_d = 1e300;
  for (int j = 0; j < n; ++j) {
    const double t = T * j / n;
    const double d = (state.evaluate(t).head<6>() - target).norm();
    if (d < best_d) {
      best_d = d;
      best_t = t;
    }
  }
  auto f = [&](double t) { return (state.evaluate(t).head<6>() - target).squaredNorm(); };
  const auto r = boost::math::tools::brent_find_minima(f, best_t - T / n, best_t + T / n, 60);
  // Polish with Newton on the stationarity condition (brent stops at sqrt(eps) in t).
  double t = r.first;
  for (int it = 0; it < 4; ++it) {
    const Eigen::VectorXd x = state.evaluate(t).head<6>() - target;
    const Eigen::VectorXd dx = state.derivative(t).head<6>();
    const double h = 1e-5;
    const Eigen::VectorXd ddx = (state.derivative(t + h).head<6>() - state.derivative(t - h).head<6>()) / (2 * h);
    const double g = x.dot(dx), gp = dx.squaredNorm() + x.dot(ddx);
    if (gp <= 0.0) break;
    t -= g / gp;
  }
  double tt = std::fmod(t, T);
  if (tt < 0) tt += T;
  return {tt, (state.evaluate(tt).head<6>() - target).norm()};
}

FourierSeries shift_phase(const FourierSeries& s, double shift) {
  FourierSeries out = s;
  for (int k = -(s.modes() - 1); k < s.modes(); ++k) {
    const cd e = std::polar(1.0, s.omega() * k * shift);
    for (int i = 0; i < s.dim(); ++i) out.at(i, k) = s.at(i, k) * e;
  }
  return out;
}

FourierSeries rotate_series(const FourierSeries& s, int turns) {
  FourierSeries out = s;
  const double ang = 2.0 * std::numbers::pi / 3.0 * turns;
  const double c = std::cos(ang), sn = std::sin(ang);
  const auto perm = rotation_permutation(turns);
  for (int k = -(s.modes() - 1); k < s.modes(); ++k) {
    out.at(0, k) = c * s.at(0, k) - sn * s.at(2, k);
    out.at(2, k) = sn * s.at(0, k) + c * s.at(2, k);
    out.at(1, k) = c * s.at(1, k) - sn * s.at(3, k);
    out.at(3, k) = sn * s.at(1, k) + c * s.at(3, k);
    if (s.dim() == 9)
      for (int i = 0; i < 3; ++i) out.at(6 + perm[i], k) = s.at(6 + i, k);
  }
  return out;
}

}  // namespace crfbp
