#pragma once

#include <vector>

#include "crfbp/dynamics.hpp"
#include "crfbp/fourier.hpp"

namespace crfbp {

// Fourier coefficients D_m (|m| <= max_mode) of one entry of a periodic 9x9 Jacobian.
struct ToeplitzBlock {
  int row = 0, col = 0, max_mode = 0;
  Eigen::VectorXcd c;
  cd coeff(int m) const { return (m < -max_mode || m > max_mode) ? cd(0.0) : c[m + max_mode]; }
};

struct ToeplitzBlocks {
  std::vector<ToeplitzBlock> blocks;  // structurally nonzero entries only
};

// `values` holds grid samples (9 x grid.points()) of a periodic state; `jac` maps a state to
// a 9x9 matrix. The grid must be fine enough for the products to be alias free.
template <class JacFn>
ToeplitzBlocks toeplitz_blocks(const Eigen::MatrixXd& values, const SpectralGrid& grid, JacFn&& jac) {
  const int pts = grid.points();
  Eigen::MatrixXcd entries(81, pts);
  for (int j = 0; j < pts; ++j) {
    const Mat9 A = jac(State9(values.col(j)));
    for (int i = 0; i < 9; ++i)
      for (int l = 0; l < 9; ++l) entries(9 * i + l, j) = A(i, l);
  }
  std::vector<int> nz;
  for (int e = 0; e < 81; ++e)
    if (entries.row(e).cwiseAbs().maxCoeff() > 0.0) nz.push_back(e);
  Eigen::MatrixXcd sel(static_cast<Eigen::Index>(nz.size()), pts);
  for (std::size_t e = 0; e < nz.size(); ++e) sel.row(static_cast<Eigen::Index>(e)) = entries.row(nz[e]);
  const Eigen::MatrixXcd coeffs = grid.analyze(sel);
  ToeplitzBlocks out;
  for (std::size_t e = 0; e < nz.size(); ++e) {
    ToeplitzBlock b;
    b.row = nz[e] / 9;
    b.col = nz[e] % 9;
    b.max_mode = grid.modes() - 1;
    b.c = coeffs.row(static_cast<Eigen::Index>(e)).transpose();
    out.blocks.push_back(std::move(b));
  }
  return out;
}

}  // namespace crfbp
