#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "mpsense/scenario.hpp"
#include "mpsense/types.hpp"

namespace mpsense {

/// Expanded transmit/receive angle grid.
///
/// Cell q = i * Q + j (0-based) pairs transmit base angle i with receive base
/// angle j; the diagonal cells i == j hold direct paths, the others first-order
/// paths. This is the (i-1)Q+j convention in 1-based terms.
template <typename Real>
struct GridModel {
  Index q_base = 0;
  Index q_total = 0;
  RVec<Real> base_grid;  // Q cell centres over [-pi/2, pi/2]
  RVec<Real> theta_t;    // length Q^2
  RVec<Real> theta_r;    // length Q^2
  Real spacing = 0;

  Index index(Index tx, Index rx) const { return tx * q_base + rx; }
  Index tx_of(Index q) const { return q / q_base; }
  Index rx_of(Index q) const { return q % q_base; }
  bool is_diagonal(Index q) const { return tx_of(q) == rx_of(q); }
  Index diagonal(Index i) const { return index(i, i); }
  Real half_spacing() const { return spacing / Real(2); }
};

template <typename Real>
struct OffsetVectors {
  RVec<Real> dtheta_t;
  RVec<Real> dtheta_r;

  static OffsetVectors zeros(Index n) { return {RVec<Real>::Zero(n), RVec<Real>::Zero(n)}; }
  Index size() const { return dtheta_t.size(); }
};

template <typename Real>
struct Dictionaries {
  CMat<Real> A_t;  // m_t x Q1
  CMat<Real> A_r;  // m_r x Q1
  CMat<Real> F;    // (m_t m_r) x Q1
};

enum class Axis { Transmit, Receive };

template <typename Real>
GridModel<Real> build_grid(Index q) {
  if (q < 2) throw std::invalid_argument("build_grid: Q must be >= 2");
  GridModel<Real> g;
  g.q_base = q;
  g.q_total = q * q;
  g.spacing = kPi<Real> / Real(q);
  g.base_grid.resize(q);
  for (Index i = 0; i < q; ++i) g.base_grid[i] = -kPi<Real> / Real(2) + (Real(i) + Real(0.5)) * g.spacing;
  g.theta_t.resize(g.q_total);
  g.theta_r.resize(g.q_total);
  for (Index i = 0; i < q; ++i)
    for (Index j = 0; j < q; ++j) {
      g.theta_t[g.index(i, j)] = g.base_grid[i];
      g.theta_r[g.index(i, j)] = g.base_grid[j];
    }
  return g;
}

/// Index of the base grid point nearest to angle.
template <typename Real>
Index nearest_base_index(const GridModel<Real>& grid, Real angle) {
  Index best = 0;
  (grid.base_grid.array() - angle).abs().minCoeff(&best);
  return best;
}

namespace detail {

template <typename Real>
void check_dims(const GridModel<Real>& grid, const OffsetVectors<Real>& off, const CMat<Real>& gram) {
  if (off.dtheta_t.size() != grid.q_total || off.dtheta_r.size() != grid.q_total)
    throw std::invalid_argument("measurement_matrix: offsets must have length Q^2");
  if (gram.rows() != gram.cols() || gram.rows() < 1)
    throw std::invalid_argument("measurement_matrix: waveform gram must be square");
}

/// (G^T a_t) kron a_r, the matched-filtered response of one cell.
template <typename Real>
CVec<Real> filtered_column(const CMat<Real>& gram, const CVec<Real>& at, const CVec<Real>& ar) {
  const CVec<Real> gt = gram.transpose() * at;
  CVec<Real> col(gt.size() * ar.size());
  for (Index m = 0; m < gt.size(); ++m) col.segment(m * ar.size(), ar.size()) = gt[m] * ar;
  return col;
}

}  // namespace detail

/// Rebuilds the listed columns of A_t, A_r and F in place.
template <typename Real>
void refresh_columns(Dictionaries<Real>& dict, const GridModel<Real>& grid,
                     const OffsetVectors<Real>& off, const CMat<Real>& gram, Index m_r,
                     std::span<const Index> columns) {
  const Index mt = gram.rows();
  for (Index q : columns) {
    const CVec<Real> at = steering_vector<Real>(grid.theta_t[q] + off.dtheta_t[q], mt);
    const CVec<Real> ar = steering_vector<Real>(grid.theta_r[q] + off.dtheta_r[q], m_r);
    dict.A_t.col(q) = at;
    dict.A_r.col(q) = ar;
    dict.F.col(q) = detail::filtered_column(gram, at, ar);
  }
}

/// F = ((U U^H)^T kron I_{m_r}) (A_t Khatri-Rao A_r).
template <typename Real>
Dictionaries<Real> measurement_matrix(const GridModel<Real>& grid, const OffsetVectors<Real>& off,
                                      const CMat<Real>& gram, Index m_r) {
  detail::check_dims(grid, off, gram);
  if (m_r < 1) throw std::invalid_argument("measurement_matrix: m_r must be >= 1");
  Dictionaries<Real> d;
  d.A_t.resize(gram.rows(), grid.q_total);
  d.A_r.resize(m_r, grid.q_total);
  d.F.resize(gram.rows() * m_r, grid.q_total);
  std::vector<Index> all(static_cast<std::size_t>(grid.q_total));
  for (Index q = 0; q < grid.q_total; ++q) all[static_cast<std::size_t>(q)] = q;
  refresh_columns(d, grid, off, gram, m_r, std::span<const Index>(all));
  return d;
}

/// Analytic derivative of column q of F with respect to its transmit or receive offset.
template <typename Real>
CVec<Real> column_derivative(const GridModel<Real>& grid, const OffsetVectors<Real>& off,
                             const CMat<Real>& gram, Index m_r, Index q, Axis wrt) {
  detail::check_dims(grid, off, gram);
  if (q < 0 || q >= grid.q_total) throw std::out_of_range("column_derivative: invalid grid index");
  const Index mt = gram.rows();
  const Real tt = grid.theta_t[q] + off.dtheta_t[q];
  const Real tr = grid.theta_r[q] + off.dtheta_r[q];
  if (wrt == Axis::Transmit)
    return detail::filtered_column(gram, steering_derivative<Real>(tt, mt), steering_vector<Real>(tr, m_r));
  return detail::filtered_column(gram, steering_vector<Real>(tt, mt), steering_derivative<Real>(tr, m_r));
}

/// Nearest cells of every ordered target pair (i, j), i-major, diagonal included.
struct GridAssignment {
  std::vector<Index> cells;           // K^2 entries, cells[i * K + j]
  OffsetVectors<double> offsets;      // true offsets on the active cells, zero elsewhere
  std::vector<Index> direct_cells;    // cells[i * K + i]
};

/// Raised when two target pairs share a nearest cell; callers redraw the scene.
class GridCollision : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

GridAssignment nearest_grid_assignment(std::span<const double> angles, const GridModel<double>& grid);

}  // namespace mpsense
