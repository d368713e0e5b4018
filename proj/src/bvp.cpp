#include "crfbp/bvp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "crfbp/errors.hpp"
#include "crfbp/integrator.hpp"

namespace crfbp {

namespace {

constexpr int kDim = 9;

double weight(int k) { return k == 0 ? 1.0 : 2.0; }

// Lobatto node count for the pseudo-spectral field: products of degree 4(M-1) keep their first M
// coefficients free of aliasing when 2n - M >= 4(M-1).
int field_nodes(int M) { return 3 * M; }

const ChebyshevTransform& transform_for(int M) {
  thread_local std::vector<std::unique_ptr<ChebyshevTransform>> cache;
  for (const auto& t : cache)
    if (t->coefficients() == M) return *t;
  cache.push_back(std::make_unique<ChebyshevTransform>(M, field_nodes(M)));
  return *cache.back();
}

struct SegmentField {
  Eigen::MatrixXd values;  // (n+1) x 9
  Eigen::MatrixXd c;       // 9 x M coefficients of F
  std::vector<Mat9> jac;   // at each node
};

SegmentField segment_field(const ChebyshevSegment& seg, const MassConfig& cfg, bool with_jacobian) {
  const ChebyshevTransform& tr = transform_for(seg.size());
  SegmentField out;
  out.values = tr.to_values() * seg.a.transpose();
  Eigen::MatrixXd f(out.values.rows(), kDim);
  if (with_jacobian) out.jac.resize(out.values.rows());
  for (int j = 0; j < out.values.rows(); ++j) {
    const State9 v = out.values.row(j).transpose();
    f.row(j) = field9(v, cfg).transpose();
    if (with_jacobian) out.jac[j] = jacobian9(v, cfg);
  }
  out.c = (tr.to_coefficients() * f).transpose();
  return out;
}

State9 torus_state(const FourierTaylor& P, double theta, double angle, double R) {
  return eval_real(P, theta, R * std::cos(angle), R * std::sin(angle));
}

std::vector<int> kept_rows(int drop_index) {
  if (drop_index != 2 && drop_index != 4 && drop_index != 6)
    throw AssemblyError("drop_index must be 2, 4 or 6, got " + std::to_string(drop_index));
  std::vector<int> rows;
  for (int i = 0; i < 6; ++i)
    if (i != drop_index - 1) rows.push_back(i);
  return rows;
}

void check_layout(const ConnectionUnknowns& y, const FourierTaylor& P, const FourierTaylor& Q) {
  if (y.segments.empty() || y.segments.size() != y.fractions.size())
    throw AssemblyError("segments and fractions disagree");
  for (const auto& s : y.segments)
    if (s.a.rows() != kDim || s.size() < 3) throw AssemblyError("segment must be 9 x M with M >= 3");
  if (std::abs(P.energy - Q.energy) > 1e-9) throw Error("manifolds lie on different energy levels");
}

// Values of the arc at monotone times measured from v (all of one sign), by one integration.
std::vector<State9> trajectory(const State9& v, const std::vector<double>& times, const MassConfig& cfg) {
  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<State9> out(times.size());
  std::vector<std::size_t> fwd, bwd;
  for (auto i : order) (times[i] >= 0.0 ? fwd : bwd).push_back(i);
  std::sort(fwd.begin(), fwd.end(), [&](auto a, auto b) { return times[a] < times[b]; });
  std::sort(bwd.begin(), bwd.end(), [&](auto a, auto b) { return times[a] > times[b]; });
  for (const auto* idx : {&fwd, &bwd}) {
    std::vector<double> ts;
    for (auto i : *idx) ts.push_back(times[i]);
    const auto vals = flow_samples(v, ts, cfg);
    for (std::size_t j = 0; j < idx->size(); ++j) out[(*idx)[j]] = vals[j];
  }
  return out;
}

Eigen::MatrixXd lobatto_basis(int M) {
  Eigen::MatrixXd B(M, M);
  for (int j = 0; j < M; ++j)
    for (int k = 0; k < M; ++k) B(j, k) = weight(k) * std::cos(std::numbers::pi * k * j / (M - 1));
  return B;
}

double lobatto_node(int j, int M) { return std::cos(std::numbers::pi * j / (M - 1)); }

// Segment from values at the M Lobatto nodes s_j = cos(pi j / (M - 1)).
ChebyshevSegment fit_values(const std::vector<State9>& values) {
  const int M = static_cast<int>(values.size());
  Eigen::MatrixXd V(M, kDim);
  for (int j = 0; j < M; ++j) V.row(j) = values[j].transpose();
  ChebyshevSegment s;
  s.a = lobatto_basis(M).partialPivLu().solve(V).transpose();
  return s;
}

double wrap(double x, double period) {
  x = std::fmod(x, period);
  return x < 0.0 ? x + period : x;
}

}  // namespace

double cheb_evaluate(const Eigen::VectorXd& a, double s) {
  double y1 = 0.0, y2 = 0.0;
  for (int k = static_cast<int>(a.size()) - 1; k >= 1; --k) {
    const double y = 2.0 * a[k] + 2.0 * s * y1 - y2;
    y2 = y1;
    y1 = y;
  }
  return a.size() ? a[0] + s * y1 - y2 : 0.0;
}

Eigen::VectorXd cheb_convolve(const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  const int M = static_cast<int>(std::min(b.size(), c.size()));
  Eigen::VectorXd d = Eigen::VectorXd::Zero(M);
  for (int k = 0; k < M; ++k) {
    double s = 0.0;
    for (int k1 = k - (M - 1); k1 <= M - 1; ++k1) {
      const int k2 = k - k1;
      if (std::abs(k2) <= M - 1) s += b[std::abs(k1)] * c[std::abs(k2)];
    }
    d[k] = s;
  }
  return d;
}

ChebyshevTransform::ChebyshevTransform(int coefficients, int nodes)
    : m_(coefficients), n_(nodes), B_(nodes + 1, coefficients), C_(coefficients, nodes + 1) {
  if (nodes < coefficients) throw Error("Chebyshev transform needs at least as many nodes as coefficients");
  for (int j = 0; j <= n_; ++j)
    for (int k = 0; k < m_; ++k) {
      const double c = std::cos(std::numbers::pi * static_cast<double>((static_cast<long>(k) * j) % (2 * n_)) / n_);
      B_(j, k) = weight(k) * c;
      C_(k, j) = (j == 0 || j == n_ ? 0.5 : 1.0) * c / n_;
    }
}

double ChebyshevTransform::node(int j) const { return std::cos(std::numbers::pi * j / n_); }

State9 ChebyshevSegment::evaluate(double s) const {
  State9 v;
  for (int i = 0; i < kDim; ++i) v[i] = cheb_evaluate(a.row(i).transpose(), s);
  return v;
}

Eigen::MatrixXd field_coefficients(const ChebyshevSegment& seg, const MassConfig& cfg) {
  const int M = seg.size();
  auto row = [&](int i) -> Eigen::VectorXd { return seg.a.row(i).transpose(); };
  auto constant = [M](double v) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(M);
    c[0] = v;
    return c;
  };
  Eigen::MatrixXd F(kDim, M);
  Eigen::VectorXd acc[3] = {Eigen::VectorXd::Zero(M), Eigen::VectorXd::Zero(M), Eigen::VectorXd::Zero(M)};
  const std::array<double, 3>* pos[3] = {&cfg.x, &cfg.y, &cfg.z};
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd w = row(6 + i);
    const Eigen::VectorXd w3 = cheb_convolve(cheb_convolve(w, w), w);
    Eigen::VectorXd dv = Eigen::VectorXd::Zero(M);
    for (int c = 0; c < 3; ++c) {
      const Eigen::VectorXd rel = row(2 * c) - constant((*pos[c])[i]);
      acc[c] -= cfg.m[i] * cheb_convolve(rel, w3);
      dv += cheb_convolve(rel, row(2 * c + 1));
    }
    F.row(6 + i) = -cheb_convolve(dv, w3).transpose();
  }
  F.row(0) = row(1).transpose();
  F.row(1) = (2.0 * row(3) + row(0) + acc[0]).transpose();
  F.row(2) = row(3).transpose();
  F.row(3) = (-2.0 * row(1) + row(2) + acc[1]).transpose();
  F.row(4) = row(5).transpose();
  F.row(5) = acc[2].transpose();
  return F;
}

ChebyshevSegment fit_segment(const std::function<State9(double)>& f, int M) {
  std::vector<State9> vals(M);
  for (int j = 0; j < M; ++j) vals[j] = f(lobatto_node(j, M));
  return fit_values(vals);
}

int ConnectionUnknowns::size() const {
  int n = 5;
  for (const auto& s : segments) n += kDim * s.size();
  return n;
}

Eigen::VectorXd ConnectionUnknowns::pack() const {
  Eigen::VectorXd y(size());
  y.head(5) << L, theta, alpha, phi, beta;
  int off = 5;
  for (const auto& s : segments)
    for (int i = 0; i < kDim; ++i) {
      y.segment(off, s.size()) = s.a.row(i).transpose();
      off += s.size();
    }
  return y;
}

void ConnectionUnknowns::unpack(const Eigen::VectorXd& y) {
  if (y.size() != size()) throw AssemblyError("unknown vector has the wrong length");
  L = y[0];
  theta = y[1];
  alpha = y[2];
  phi = y[3];
  beta = y[4];
  int off = 5;
  for (auto& s : segments)
    for (int i = 0; i < kDim; ++i) {
      s.a.row(i) = y.segment(off, s.size()).transpose();
      off += s.size();
    }
}

State9 ConnectionUnknowns::evaluate9(double t) const {
  const double T = flight_time();
  double start = 0.0;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    const double dur = fractions[j] * T;
    if (t <= start + dur || j + 1 == segments.size())
      return segments[j].evaluate(std::clamp(2.0 * (t - start) / dur - 1.0, -1.0, 1.0));
    start += dur;
  }
  return segments.back().right();
}

Eigen::VectorXd assemble_operator(const ConnectionUnknowns& y, const FourierTaylor& P, const FourierTaylor& Q,
                                  const MassConfig& cfg, const BvpOptions& opt) {
  check_layout(y, P, Q);
  const auto kept = kept_rows(opt.drop_index);
  Eigen::VectorXd r(y.size());
  int row = 0;
  r.segment(row, kDim) = y.segments.front().left() - torus_state(P, y.theta, y.alpha, opt.R1);
  row += kDim;
  for (std::size_t j = 0; j < y.segments.size(); ++j) {
    const auto& seg = y.segments[j];
    const int M = seg.size();
    const double h = y.L * y.fractions[j];
    const Eigen::MatrixXd c = segment_field(seg, cfg, false).c;
    for (int i = 0; i < kDim; ++i)
      for (int k = 1; k < M; ++k) {
        const double next = k + 1 < M ? c(i, k + 1) : 0.0;
        r[row++] = 2.0 * k * seg.a(i, k) - h * (c(i, k - 1) - next);
      }
  }
  for (std::size_t j = 0; j + 1 < y.segments.size(); ++j) {
    r.segment(row, kDim) = y.segments[j].right() - y.segments[j + 1].left();
    row += kDim;
  }
  const State9 end = y.segments.back().right() - torus_state(Q, y.phi, y.beta, opt.R2);
  for (int i : kept) r[row++] = end[i];
  if (row != r.size()) throw AssemblyError("operator rows do not balance the unknowns");
  return r;
}

Eigen::MatrixXd assemble_jacobian(const ConnectionUnknowns& y, const FourierTaylor& P, const FourierTaylor& Q,
                                  const MassConfig& cfg, const BvpOptions& opt) {
  check_layout(y, P, Q);
  const auto kept = kept_rows(opt.drop_index);
  const int n = y.size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> offset(y.segments.size());
  {
    int off = 5;
    for (std::size_t j = 0; j < y.segments.size(); ++j) {
      offset[j] = off;
      off += kDim * y.segments[j].size();
    }
  }
  int row = 0;
  {
    const cd z = std::polar(opt.R1, y.alpha);
    const Eigen::VectorXd dth = P.theta_derivative(y.theta, z, std::conj(z)).real();
    const Eigen::VectorXd dal = P.angle_derivative(y.theta, z, std::conj(z)).real();
    const int M = y.segments.front().size();
    for (int i = 0; i < kDim; ++i) {
      for (int k = 0; k < M; ++k) J(row + i, offset[0] + i * M + k) = weight(k) * (k % 2 ? -1.0 : 1.0);
      J(row + i, 1) = -dth[i];
      J(row + i, 2) = -dal[i];
    }
    row += kDim;
  }
  for (std::size_t j = 0; j < y.segments.size(); ++j) {
    const auto& seg = y.segments[j];
    const int M = seg.size();
    const double f = y.fractions[j], h = y.L * f;
    const SegmentField sf = segment_field(seg, cfg, true);
    const ChebyshevTransform& tr = transform_for(M);
    const int nodes = static_cast<int>(sf.jac.size());
    for (int i = 0; i < kDim; ++i) {
      const int r0 = row + i * (M - 1);
      for (int k = 1; k < M; ++k) {
        J(r0 + k - 1, offset[j] + i * M + k) += 2.0 * k;
        J(r0 + k - 1, 0) = -f * (sf.c(i, k - 1) - (k + 1 < M ? sf.c(i, k + 1) : 0.0));
      }
      for (int s = 0; s < kDim; ++s) {
        Eigen::VectorXd d(nodes);
        for (int q = 0; q < nodes; ++q) d[q] = sf.jac[q](i, s);
        if (d.cwiseAbs().maxCoeff() == 0.0) continue;
        const Eigen::MatrixXd D = tr.to_coefficients() * d.asDiagonal() * tr.to_values();  // M x M
        for (int k = 1; k < M; ++k) {
          Eigen::RowVectorXd g = D.row(k - 1);
          if (k + 1 < M) g -= D.row(k + 1);
          J.block(r0 + k - 1, offset[j] + s * M, 1, M) -= h * g;
        }
      }
    }
    row += kDim * (M - 1);
  }
  for (std::size_t j = 0; j + 1 < y.segments.size(); ++j) {
    const int Ma = y.segments[j].size(), Mb = y.segments[j + 1].size();
    for (int i = 0; i < kDim; ++i) {
      for (int k = 0; k < Ma; ++k) J(row + i, offset[j] + i * Ma + k) = weight(k);
      for (int k = 0; k < Mb; ++k) J(row + i, offset[j + 1] + i * Mb + k) = -weight(k) * (k % 2 ? -1.0 : 1.0);
    }
    row += kDim;
  }
  {
    const cd z = std::polar(opt.R2, y.beta);
    const Eigen::VectorXd dph = Q.theta_derivative(y.phi, z, std::conj(z)).real();
    const Eigen::VectorXd dbe = Q.angle_derivative(y.phi, z, std::conj(z)).real();
    const int M = y.segments.back().size(), last = static_cast<int>(y.segments.size()) - 1;
    for (int i : kept) {
      for (int k = 0; k < M; ++k) J(row, offset[last] + i * M + k) = weight(k);
      J(row, 3) = -dph[i];
      J(row, 4) = -dbe[i];
      ++row;
    }
  }
  return J;
}

ConnectionSolution newton_connect(ConnectionUnknowns guess, const FourierTaylor& P, const FourierTaylor& Q,
                                  const MassConfig& cfg, const BvpOptions& opt) {
  ConnectionUnknowns y = std::move(guess);
  std::vector<double> history;
  Eigen::VectorXd F = assemble_operator(y, P, Q, cfg, opt);
  double res = F.cwiseAbs().maxCoeff();
  history.push_back(res);
  int it = 0;
  double rcond = 0.0;
  for (; it < opt.max_iterations && res > opt.tolerance; ++it) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(assemble_jacobian(y, P, Q, cfg, opt));
    const Eigen::VectorXd step = lu.solve(-F);
    ConnectionUnknowns trial = y;
    trial.unpack(y.pack() + step);
    Eigen::VectorXd Ft;
    try {
      Ft = assemble_operator(trial, P, Q, cfg, opt);
    } catch (const SymmetryError&) {
      break;
    }
    const double rt = Ft.cwiseAbs().maxCoeff();
    if (!std::isfinite(rt) || trial.L <= 0.0) break;
    const bool stalled = rt >= 0.5 * res && rt <= 1e-11;
    y = std::move(trial);
    F = std::move(Ft);
    res = rt;
    history.push_back(res);
    if (stalled) break;
  }
  if (!(res <= 1e-11))
    throw DivergenceError("connection Newton did not converge (residual " + std::to_string(res) + ")", history);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(assemble_jacobian(y, P, Q, cfg, opt));
  rcond = lu.rcond();

  double tail = 0.0;
  for (const auto& s : y.segments) tail = std::max(tail, s.tail());
  if (opt.adaptive && tail > opt.max_tail && 2 * y.segments.size() <= static_cast<std::size_t>(opt.max_segments)) {
    std::vector<double> cuts;
    double start = 0.0;
    for (std::size_t j = 0; j < y.segments.size(); ++j) {
      const double dur = y.fractions[j] * y.flight_time();
      if (j > 0) cuts.push_back(start);
      cuts.push_back(start + 0.5 * dur);
      start += dur;
    }
    return newton_connect(subdivide(y, cuts), P, Q, cfg, opt);
  }

  ConnectionSolution sol;
  y.theta = wrap(y.theta, P.period());
  y.alpha = wrap(y.alpha, 2.0 * std::numbers::pi);
  y.phi = wrap(y.phi, Q.period());
  y.beta = wrap(y.beta, 2.0 * std::numbers::pi);
  sol.unknowns = y;
  sol.defect = res;
  sol.flight_time = y.flight_time();
  sol.energy = P.energy;
  sol.drop_index = opt.drop_index;
  sol.R1 = opt.R1;
  sol.R2 = opt.R2;
  sol.iterations = it;
  sol.tail = tail;
  sol.rcond = rcond;
  const State9 end = y.segments.back().right(), target = torus_state(Q, y.phi, y.beta, opt.R2);
  sol.dropped_mismatch = std::abs(end[opt.drop_index - 1] - target[opt.drop_index - 1]);
  for (int j = 0; j <= 200; ++j) {
    const State9 v = y.evaluate9(sol.flight_time * j / 200);
    sol.energy_drift = std::max(sol.energy_drift, std::abs(jacobi(project(v), cfg) - sol.energy));
  }
  if (sol.dropped_mismatch > 1e-9)
    throw PseudoSolutionError("dropped component mismatch " + std::to_string(sol.dropped_mismatch),
                              sol.dropped_mismatch);
  return sol;
}

ConnectionUnknowns subdivide(const ConnectionUnknowns& y, const std::vector<double>& breakpoints) {
  if (breakpoints.empty()) return y;
  const double T = y.flight_time();
  std::vector<double> cuts = breakpoints;
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts)
    if (!(c > 0.0 && c < T)) throw Error("breakpoints must lie strictly inside (0, T)");
  cuts.insert(cuts.begin(), 0.0);
  cuts.push_back(T);
  const int M = y.segments.front().size();
  ConnectionUnknowns out = y;
  out.segments.clear();
  out.fractions.clear();
  for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
    const double t0 = cuts[j], t1 = cuts[j + 1];
    out.fractions.push_back((t1 - t0) / T);
    out.segments.push_back(fit_segment([&](double s) { return y.evaluate9(t0 + 0.5 * (s + 1.0) * (t1 - t0)); }, M));
  }
  return out;
}

ConnectionUnknowns rotate_connection(const ConnectionUnknowns& y, int turns) {
  Mat9 R;
  for (int j = 0; j < 9; ++j) R.col(j) = rotate_state(State9(State9::Unit(j)), turns);
  ConnectionUnknowns out = y;
  for (auto& s : out.segments) s.a = R * s.a;
  return out;
}

State6 evaluate_connection(const ConnectionSolution& sol, double t) {
  const double T = sol.unknowns.flight_time();
  if (t < 0.0 || t > T) throw Error("time outside the connection interval");
  return project(sol.unknowns.evaluate9(t));
}

namespace {

// Segments covering physical times [0, T] from a trajectory sampler v(t') with t' = t + shift.
std::vector<ChebyshevSegment> segments_from_flow(const State9& v, double shift, double T, int segments, int M,
                                                 const MassConfig& cfg) {
  std::vector<double> times;
  for (int j = 0; j < segments; ++j)
    for (int q = 0; q < M; ++q) {
      const double s = lobatto_node(q, M);
      times.push_back(T * (j + 0.5 * (s + 1.0)) / segments + shift);
    }
  const auto vals = trajectory(v, times, cfg);
  std::vector<ChebyshevSegment> out;
  for (int j = 0; j < segments; ++j)
    out.push_back(fit_values(std::vector<State9>(vals.begin() + j * M, vals.begin() + (j + 1) * M)));
  return out;
}

}  // namespace

ConnectionUnknowns guess_from_torus(const FourierTaylor& P, const FourierTaylor& Q, double theta, double alpha,
                                    double T, const MassConfig& cfg, int segments, int M, const BvpOptions& opt) {
  ConnectionUnknowns y;
  y.L = 0.5 * T;
  y.theta = theta;
  y.alpha = alpha;
  const State9 v = torus_state(P, theta, alpha, opt.R1);
  y.segments = segments_from_flow(v, 0.0, T, segments, M, cfg);
  y.fractions.assign(segments, 1.0 / segments);
  const TorusPoint end = closest_torus_point(Q, project(y.segments.back().right()), opt.R2);
  y.phi = end.theta;
  y.beta = end.angle;
  return y;
}

ConnectionUnknowns guess_from_midpoint(const FourierTaylor& P, const FourierTaylor& Q, const State6& midpoint,
                                       double half_time, const MassConfig& cfg, int segments, int M,
                                       const BvpOptions& opt) {
  ConnectionUnknowns y;
  y.L = half_time;
  const State9 v = lift(midpoint, cfg);
  y.segments = segments_from_flow(v, -half_time, 2.0 * half_time, segments, M, cfg);
  y.fractions.assign(segments, 1.0 / segments);
  const TorusPoint start = closest_torus_point(P, project(y.segments.front().left()), opt.R1);
  const TorusPoint end = closest_torus_point(Q, project(y.segments.back().right()), opt.R2);
  y.theta = start.theta;
  y.alpha = start.angle;
  y.phi = end.theta;
  y.beta = end.angle;
  return y;
}

ConnectionUnknowns guess_from_pair(const FourierTaylor& P, const FourierTaylor& Q, double theta, double alpha,
                                   double phi, double beta, double t, const MassConfig& cfg, int M,
                                   const BvpOptions& opt, double t_stable) {
  const double ts = t_stable > 0.0 ? t_stable : t;
  ConnectionUnknowns y;
  y.L = 0.5 * (t + ts);
  y.theta = theta;
  y.alpha = alpha;
  y.phi = phi;
  y.beta = beta;
  y.segments = segments_from_flow(torus_state(P, theta, alpha, opt.R1), 0.0, t, 1, M, cfg);
  const auto back = segments_from_flow(torus_state(Q, phi, beta, opt.R2), -ts, ts, 1, M, cfg);
  y.segments.push_back(back.front());
  y.fractions = {t / (t + ts), ts / (t + ts)};
  return y;
}

std::vector<ArcSample> sample_connection(const ConnectionSolution& sol, const FourierTaylor& P,
                                         const FourierTaylor& Q, int samples, double tail_time) {
  const auto& y = sol.unknowns;
  const double T = y.flight_time();
  std::vector<ArcSample> out;
  if (tail_time > 0.0) {
    const cd z0 = std::polar(sol.R1, y.alpha);
    for (int j = samples; j >= 1; --j) {
      const double tau = -tail_time * j / samples;
      const cd z = std::exp(P.lambda1 * tau) * z0;
      out.push_back({tau, project(eval_real(P, y.theta + tau, z.real(), z.imag())), 0});
    }
  }
  for (int j = 0; j <= samples; ++j) {
    const double t = T * j / samples;
    out.push_back({t, project(y.evaluate9(t)), 1});
  }
  if (tail_time > 0.0) {
    const cd z0 = std::polar(sol.R2, y.beta);
    for (int j = 1; j <= samples; ++j) {
      const double tau = tail_time * j / samples;
      const cd z = std::exp(Q.lambda1 * tau) * z0;
      out.push_back({T + tau, project(eval_real(Q, y.phi + tau, z.real(), z.imag())), 2});
    }
  }
  return out;
}

}  // namespace crfbp
