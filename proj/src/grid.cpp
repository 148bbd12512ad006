#include "mpsense/grid.hpp"

#include <set>

namespace mpsense {

template struct GridModel<double>;

GridAssignment nearest_grid_assignment(std::span<const double> angles, const GridModel<double>& grid) {
  const Index k = static_cast<Index>(angles.size());
  if (k < 1) throw std::invalid_argument("nearest_grid_assignment: need at least one target");
  if (k * k > grid.q_total) throw std::invalid_argument("nearest_grid_assignment: K^2 exceeds grid size");

  // |theta_i - theta_t,q| + |theta_j - theta_r,q| separates over the two axes.
  std::vector<Index> base(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) base[i] = nearest_base_index(grid, angles[i]);

  GridAssignment out;
  out.offsets = OffsetVectors<double>::zeros(grid.q_total);
  out.cells.resize(static_cast<std::size_t>(k * k));
  std::set<Index> used;
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) {
      const Index q = grid.index(base[i], base[j]);
      if (!used.insert(q).second)
        throw GridCollision("nearest_grid_assignment: two paths share grid cell " + std::to_string(q));
      out.cells[i * k + j] = q;
      out.offsets.dtheta_t[q] = angles[i] - grid.theta_t[q];
      out.offsets.dtheta_r[q] = angles[j] - grid.theta_r[q];
    }
  for (Index i = 0; i < k; ++i) out.direct_cells.push_back(out.cells[i * k + i]);
  return out;
}

}  // namespace mpsense
