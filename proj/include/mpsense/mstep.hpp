#pragma once

#include <vector>

#include "mpsense/grid.hpp"
#include "mpsense/prior.hpp"
#include "mpsense/types.hpp"

namespace mpsense {

/// Cells whose posterior activity exceeds the selection threshold.
struct ActiveSet {
  VectorXi s_hat;
  std::vector<Index> indices;  // ascending

  Index size() const { return static_cast<Index>(indices.size()); }
  bool empty() const { return indices.empty(); }
};

/// s_hat[q] = 1 iff lambda[q] > tau_s.
ActiveSet select_grids(const VectorXd& lambda, double tau_s);
ActiveSet full_set(Index n);

struct ArmijoConfig {
  double initial_step = 1e-2;
  double shrink = 0.5;
  double c1 = 1e-4;
  int max_backtracks = 20;
};

struct MStepConfig {
  double tau_s = 0.8;
  int max_inner = 20;
  ArmijoConfig offset_armijo{};
  ArmijoConfig omega_armijo{0.5, 0.5, 1e-4, 20};
  double stall_tol = 1e-4;
  double omega_min = -4.0;
  double omega_max = 4.0;
  bool profile_amplitudes = true;  // refit the active amplitudes at every offset evaluation

  void validate() const;
};

/// Residual objective -<gamma> ||y - F_S mu_S||^2 over the active columns.
///
/// Offsets are stored per active cell in the order of `cells`. With precisions set, the
/// amplitudes are profiled out: mu_S = argmax of -<gamma> ||y - F_S mu||^2 - sum rho |mu|^2
/// at the current offsets, and that penalized value is the objective. The gradient keeps the
/// fixed-amplitude form evaluated at the refitted mu_S.
class OffsetProblem {
 public:
  OffsetProblem(const VectorXc& y, const GridModel<double>& grid, const MatrixXc& gram, Index m_r,
                std::vector<Index> cells, VectorXc mu, double mean_gamma);
  OffsetProblem(const VectorXc& y, const GridModel<double>& grid, const MatrixXc& gram, Index m_r,
                std::vector<Index> cells, double mean_gamma, VectorXd precision);

  bool profiled() const { return precision_.size() != 0; }
  VectorXc amplitudes(const VectorXd& dt, const VectorXd& dr) const;

  Index size() const { return static_cast<Index>(cells_.size()); }
  const std::vector<Index>& cells() const { return cells_; }
  double half_spacing() const { return grid_.half_spacing(); }

  VectorXc residual(const VectorXd& dt, const VectorXd& dr) const;
  double value(const VectorXd& dt, const VectorXd& dr) const;
  /// Analytic gradient with respect to the transmit and receive offsets.
  std::pair<VectorXd, VectorXd> gradient(const VectorXd& dt, const VectorXd& dr) const;

 private:
  VectorXc column(Index k, double dt, double dr) const;
  MatrixXc columns(const VectorXd& dt, const VectorXd& dr) const;

  const VectorXc& y_;
  const GridModel<double>& grid_;
  const MatrixXc& gram_;
  Index m_r_;
  std::vector<Index> cells_;
  VectorXc mu_;
  double gamma_;
  VectorXd precision_;
};

double objective(const VectorXc& y, const GridModel<double>& grid, const MatrixXc& gram, Index m_r,
                 const std::vector<Index>& cells, const VectorXd& dt, const VectorXd& dr, const VectorXc& mu,
                 double mean_gamma);

std::pair<VectorXd, VectorXd> grad_offsets(const VectorXc& y, const GridModel<double>& grid, const MatrixXc& gram,
                                           Index m_r, const std::vector<Index>& cells, const VectorXd& dt,
                                           const VectorXd& dr, const VectorXc& mu, double mean_gamma);

struct ArmijoStep {
  bool accepted = false;
  double value = 0.0;  // objective after the step (unchanged when rejected)
  int backtracks = 0;
};

/// One projected Armijo step along the max-norm scaled gradient of one axis.
ArmijoStep offset_step(const OffsetProblem& problem, VectorXd& dt, VectorXd& dr, Axis axis,
                       const ArmijoConfig& armijo);

struct OffsetAscent {
  VectorXd dt;
  VectorXd dr;
  int iterations = 0;
  bool stalled = false;
  std::vector<double> values;  // objective after each iteration, starting value first
};

/// Alternating transmit / receive Armijo steps until the offsets stop moving.
OffsetAscent ascend_offsets(const OffsetProblem& problem, VectorXd dt, VectorXd dr, const MStepConfig& config);

/// Mean local field bias_q + sum_e omega_e lambda_neighbour.
VectorXd mean_field(const VectorXd& lambda, const VectorXd& bias, const CrossIsing& ising);

/// Expected pseudo-log-likelihood sum_q lambda_q h_q - softplus(h_q) at h = mean_field.
double pseudo_likelihood(const VectorXd& lambda, const VectorXd& bias, const CrossIsing& ising);
VectorXd pseudo_likelihood_grad(const VectorXd& lambda, const VectorXd& bias, const CrossIsing& ising);

struct OmegaUpdate {
  VectorXd omega;
  bool accepted = false;
  double value = 0.0;
};

/// One projected Armijo ascent step on the couplings. bias holds node log-odds.
OmegaUpdate update_omega(const VectorXd& lambda, const VectorXd& bias, const CrossIsing& ising,
                         const MStepConfig& config);

}  // namespace mpsense
