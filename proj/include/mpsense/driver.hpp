#pragma once

#include <string>
#include <vector>

#include "mpsense/crossmp.hpp"
#include "mpsense/grid.hpp"
#include "mpsense/inference.hpp"
#include "mpsense/mstep.hpp"
#include "mpsense/scenario.hpp"

namespace mpsense {

enum class Algorithm { SfTvbi, SfTvbiNoCross, TurboVbi, Omp };

std::string to_string(Algorithm a);
/// Accepts "sf_tvbi", "sf_tvbi_no_cross", "turbo_vbi" and "omp".
Algorithm algorithm_from_string(const std::string& name);

struct AlgorithmConfig {
  int outer_iterations = 20;
  bool cross_sparsity = true;
  bool learn_omega = true;
  bool strict_extrinsic = false;
  bool select_grids = true;   // false: every cell takes part in the offset update
  double initial_pi = 0.01;
  double omega_init = 0.5;
  double outer_tol = 1e-3;    // largest change of q(s) that still counts as settled
  // Coefficient units: median matched-filter coefficient -> median_level, peak capped at peak_max.
  double median_level = 0.2;
  double peak_max = 10.0;
  double clearance = 4.0;     // deflation stops once no coefficient exceeds clearance x median
  bool seeded_start = true;   // seed q(rho) with residual matched-filter energies
  SparsityHyper hyper{};
  VbiOptions vbi{};
  CrossMpOptions mp{};
  MStepConfig mstep{};

  static AlgorithmConfig sf_tvbi();
  static AlgorithmConfig no_cross();
  static AlgorithmConfig turbo_vbi();
  void validate() const;
};

struct OuterDiagnostics {
  double elbo = 0.0;
  int estep_sweeps = 0;
  int mp_sweeps = 0;
  bool mp_converged = true;
  Index active = 0;
  int mstep_iterations = 0;
  std::vector<double> objective;  // residual objective after each inner iteration
  double lambda_change = 0.0;
};

struct Estimate {
  VectorXi support;
  OffsetVectors<double> offsets;
  PosteriorState posterior;
  VectorXd omega;
  VectorXd prior;
  std::vector<double> direct_angles;
  std::vector<OuterDiagnostics> diagnostics;
  int outer_iterations = 0;
  bool converged = false;
  double elapsed_ms = 0.0;
};

/// Two-timescale EM with grid selection.
Estimate sf_tvbi(const Observation& obs, const GridModel<double>& grid, const AlgorithmConfig& config);

/// Same E-step; one offset step over every cell per outer iteration.
Estimate turbo_vbi(const Observation& obs, const GridModel<double>& grid, const AlgorithmConfig& config);

/// Greedy pursuit on the zero-offset dictionary. max_atoms = 0 stops on the residual alone.
Estimate omp(const Observation& obs, const GridModel<double>& grid, Index max_atoms, double residual_fraction = 0.01);

/// Grid angle plus transmit offset of every active diagonal cell, ascending.
std::vector<double> extract_angles(const Estimate& estimate, const GridModel<double>& grid);

}  // namespace mpsense
