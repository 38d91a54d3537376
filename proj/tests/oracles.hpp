#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

#include "statorguard/plant.hpp"

namespace statorguard::testing {

using plant::cplx;

/// Dense complex Gaussian elimination with partial pivoting.
inline std::vector<cplx> dense_solve(std::vector<std::vector<cplx>> A, std::vector<cplx> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    }
    std::swap(A[col], A[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const cplx m = A[r][col] / A[col][col];
      if (m == cplx{}) continue;
      for (std::size_t c = col; c < n; ++c) A[r][c] -= m * A[col][c];
      b[r] -= m * b[col];
    }
  }
  std::vector<cplx> x(n);
  for (std::size_t i = n; i-- > 0;) {
    cplx acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= A[i][c] * x[c];
    x[i] = acc / A[i][i];
  }
  return x;
}

/// Modified nodal analysis of the full ladder: node voltages V_0..V_M, one
/// current per EMF source, plus one for a zero-ohm fault modelled as a 0 V
/// source to ground. Shares nothing with the closed-form solver but the
/// segment EMFs.
inline plant::ThirdHarmonicPhasors mna_oracle(const plant::MachineConfig& cfg, const std::optional<plant::FaultSpec>& fault,
                                const plant::OperatingPoint& op) {
  const int M = cfg.M;
  const auto emf = plant::segment_emfs(cfg, op);
  const double w = 2.0 * std::numbers::pi * 3.0 * cfg.f1 * op.speed;
  const bool short_fault = fault && fault->Rf == 0.0;
  const int fnode = fault ? static_cast<int>(std::lround(fault->x * M)) : -1;
  const std::size_t nv = static_cast<std::size_t>(M + 1);
  const std::size_t n = nv + static_cast<std::size_t>(M) + (short_fault ? 1 : 0);
  std::vector<std::vector<cplx>> A(n, std::vector<cplx>(n));
  std::vector<cplx> b(n);

  // Shunt admittances: Cs/M lumped per segment, split half to each end.
  for (int k = 0; k < M; ++k) {
    const cplx half{0.0, 0.5 * w * cfg.Cs / M};
    A[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] += half;
    A[static_cast<std::size_t>(k + 1)][static_cast<std::size_t>(k + 1)] += half;
  }
  A[0][0] += 1.0 / (3.0 * cfg.N * cfg.N * cfg.Rn);
  A[nv - 1][nv - 1] += cplx{0.0, w * cfg.Ct};
  if (fault && !short_fault) A[static_cast<std::size_t>(fnode)][static_cast<std::size_t>(fnode)] += 1.0 / fault->Rf;

  // Source k between node k and k+1: V_{k+1} - V_k = e_k, current J_k from k into k+1.
  for (int k = 0; k < M; ++k) {
    const std::size_t j = nv + static_cast<std::size_t>(k);
    A[static_cast<std::size_t>(k)][j] += 1.0;
    A[static_cast<std::size_t>(k + 1)][j] -= 1.0;
    A[j][static_cast<std::size_t>(k + 1)] = 1.0;
    A[j][static_cast<std::size_t>(k)] = -1.0;
    b[j] = emf[static_cast<std::size_t>(k)];
  }
  if (short_fault) {
    const std::size_t j = n - 1;
    A[static_cast<std::size_t>(fnode)][j] += 1.0;
    A[j][static_cast<std::size_t>(fnode)] = 1.0;
  }
  const auto x = dense_solve(std::move(A), std::move(b));
  return {x[0], x[nv - 1]};
}

}  // namespace statorguard::testing
