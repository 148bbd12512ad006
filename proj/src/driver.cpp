#include "mpsense/driver.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace mpsense {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::SfTvbi: return "sf_tvbi";
    case Algorithm::SfTvbiNoCross: return "sf_tvbi_no_cross";
    case Algorithm::TurboVbi: return "turbo_vbi";
    case Algorithm::Omp: return "omp";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (Algorithm a : {Algorithm::SfTvbi, Algorithm::SfTvbiNoCross, Algorithm::TurboVbi, Algorithm::Omp})
    if (to_string(a) == name) return a;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

AlgorithmConfig AlgorithmConfig::sf_tvbi() { return {}; }

AlgorithmConfig AlgorithmConfig::no_cross() {
  AlgorithmConfig c;
  c.cross_sparsity = false;
  c.learn_omega = false;
  return c;
}

AlgorithmConfig AlgorithmConfig::turbo_vbi() {
  AlgorithmConfig c;
  c.outer_iterations = 200;
  c.select_grids = false;
  c.mstep.max_inner = 1;
  c.mstep.profile_amplitudes = false;
  return c;
}

void AlgorithmConfig::validate() const {
  if (outer_iterations < 1) throw std::invalid_argument("AlgorithmConfig: outer_iterations must be >= 1");
  if (vbi.max_sweeps < 1) throw std::invalid_argument("AlgorithmConfig: E-step sweeps must be >= 1");
  if (mp.max_sweeps < 1) throw std::invalid_argument("AlgorithmConfig: message sweeps must be >= 1");
  if (!(initial_pi > 0 && initial_pi < 1)) throw std::invalid_argument("AlgorithmConfig: initial_pi must lie in (0, 1)");
  if (!(outer_tol > 0)) throw std::invalid_argument("AlgorithmConfig: outer_tol must be positive");
  hyper.validate();
  mstep.validate();
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Divides out the waveform power so the gram has unit mean diagonal.
struct Normalized {
  MatrixXc gram;
  VectorXc y;
  Index m_r = 0;
};

Normalized normalize(const Observation& obs) {
  const Index mt = obs.waveform_gram.rows();
  if (mt < 1 || obs.waveform_gram.cols() != mt || obs.y.size() % mt != 0)
    throw std::invalid_argument("observation: inconsistent waveform gram and y");
  Normalized n;
  n.m_r = obs.y.size() / mt;
  const double c = obs.waveform_gram.trace().real() / double(mt);
  if (!(c > 0)) throw std::invalid_argument("observation: waveform gram must have positive trace");
  n.gram = obs.waveform_gram / c;
  n.y = obs.y / c;
  return n;
}

// Greedy deflation: atoms whose matched-filter coefficient stands clear of the median are
// projected out one at a time. The residual coefficients then reflect noise and weak paths
// rather than sidelobes of the strong ones.
struct Deflation {
  VectorXd energy;      // least-squares energy of deflated atoms, residual matched-filter energy elsewhere
  double median = 0.0;  // median residual coefficient magnitude
  double peak = 0.0;    // largest coefficient magnitude of y itself
};

Deflation deflate(const MatrixXc& f, const VectorXc& y, double clearance) {
  const VectorXd norm2 = f.colwise().squaredNorm().transpose();
  auto coefficients = [&](const VectorXc& r) -> VectorXc { return (f.adjoint() * r).cwiseQuotient(norm2.cast<cdouble>()); };
  auto median_of = [](VectorXd v) {
    std::nth_element(v.data(), v.data() + v.size() / 2, v.data() + v.size());
    return v[v.size() / 2];
  };
  Deflation d;
  VectorXc c = coefficients(y);
  d.peak = c.cwiseAbs().maxCoeff();
  d.median = median_of(c.cwiseAbs());
  const Index max_atoms = std::min<Index>(f.cols(), y.size()) / 8;
  std::vector<Index> chosen;
  VectorXc fit;
  while (static_cast<Index>(chosen.size()) < max_atoms) {
    Index best = 0;
    if (!(c.cwiseAbs().maxCoeff(&best) > clearance * d.median)) break;
    chosen.push_back(best);
    MatrixXc sub(f.rows(), static_cast<Index>(chosen.size()));
    for (std::size_t k = 0; k < chosen.size(); ++k) sub.col(static_cast<Index>(k)) = f.col(chosen[k]);
    fit = sub.colPivHouseholderQr().solve(y);
    c = coefficients(y - sub * fit);
    d.median = median_of(c.cwiseAbs());
  }
  d.energy = c.cwiseAbs2();
  for (std::size_t k = 0; k < chosen.size(); ++k) d.energy[chosen[k]] = std::norm(fit[static_cast<Index>(k)]);
  return d;
}

// Coefficient unit: the noise median maps to median_level unless the peak would pass peak_max.
double amplitude_unit(const Deflation& d, double median_level, double peak_max) {
  if (!(d.peak > 0)) return 1.0;
  if (!(d.median > 0)) return d.peak / peak_max;
  return std::max(d.median / median_level, d.peak / peak_max);
}

VectorXd logits(const VectorXd& p) {
  VectorXd out(p.size());
  for (Index q = 0; q < p.size(); ++q) out[q] = logit(p[q]);
  return out;
}

Estimate run_em(const Observation& obs, const GridModel<double>& grid, const AlgorithmConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  Normalized nz = normalize(obs);
  const Index n = grid.q_total;

  Estimate est;
  est.offsets = OffsetVectors<double>::zeros(n);
  Dictionaries<double> dict = measurement_matrix(grid, est.offsets, nz.gram, nz.m_r);
  const Deflation defl = deflate(dict.F, nz.y, cfg.clearance);
  const double unit = amplitude_unit(defl, cfg.median_level, cfg.peak_max);
  nz.y /= unit;
  VbiContext ctx(dict.F, nz.y);
  TurboPrior prior = TurboPrior::uniform(n, cfg.initial_pi);
  PosteriorState st = initial_state(ctx, prior, cfg.hyper, cfg.vbi,
                                    cfg.seeded_start ? VectorXd(defl.energy / (unit * unit)) : VectorXd());
  CrossIsing ising = CrossIsing::uniform(grid.q_base, cfg.cross_sparsity ? cfg.omega_init : 0.0);
  VectorXi prev_support;

  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    OuterDiagnostics diag;
    const VectorXd lambda_before = st.s_prob;
    const VbiReport rep = run_vbi(st, ctx, prior, cfg.hyper, cfg.vbi);
    diag.elbo = rep.elbo;
    diag.estep_sweeps = rep.sweeps;
    diag.lambda_change = (st.s_prob - lambda_before).cwiseAbs().maxCoeff();

    const VectorXd pi_b = extrinsic_out(st.s_prob, prior);
    VectorXd pi_next;
    if (cfg.cross_sparsity) {
      const CrossMpResult mp = run(pi_b, ising, cfg.mp);
      diag.mp_sweeps = mp.sweeps;
      diag.mp_converged = mp.converged;
      pi_next = outbound(mp.messages, pi_b, cfg.strict_extrinsic);
    } else {
      pi_next = cfg.strict_extrinsic ? VectorXd::Constant(n, 0.5) : pi_b;
    }

    const ActiveSet active = cfg.select_grids ? select_grids(st.s_prob, cfg.mstep.tau_s) : full_set(n);
    diag.active = active.size();
    VectorXd dt(active.size()), dr(active.size());
    VectorXc mu(active.size());
    for (Index k = 0; k < active.size(); ++k) {
      const Index q = active.indices[static_cast<std::size_t>(k)];
      dt[k] = est.offsets.dtheta_t[q];
      dr[k] = est.offsets.dtheta_r[q];
      mu[k] = st.mu_x[q];
    }
    const VectorXd all_rho = st.mean_rho();
    VectorXd rho(active.size());
    for (Index k = 0; k < active.size(); ++k) rho[k] = all_rho[active.indices[static_cast<std::size_t>(k)]];
    const OffsetProblem problem = cfg.mstep.profile_amplitudes
                                      ? OffsetProblem(nz.y, grid, nz.gram, nz.m_r, active.indices, st.mean_gamma(), rho)
                                      : OffsetProblem(nz.y, grid, nz.gram, nz.m_r, active.indices, mu, st.mean_gamma());
    const VectorXd bias = logits(pi_b);
    const VectorXd dt0 = dt, dr0 = dr;
    double moved_total = 0.0;

    for (int inner = 0; inner < cfg.mstep.max_inner; ++inner) {
      const VectorXd old_t = dt, old_r = dr;
      if (!active.empty()) {
        offset_step(problem, dt, dr, Axis::Transmit, cfg.mstep.offset_armijo);
        const ArmijoStep s = offset_step(problem, dt, dr, Axis::Receive, cfg.mstep.offset_armijo);
        diag.objective.push_back(s.value);
      }
      double omega_moved = 0.0;
      if (cfg.cross_sparsity && cfg.learn_omega) {
        const OmegaUpdate u = update_omega(st.s_prob, bias, ising, cfg.mstep);
        omega_moved = (u.omega - ising.omega).cwiseAbs().maxCoeff();
        ising.omega = u.omega;
      }
      diag.mstep_iterations = inner + 1;
      const double moved = std::sqrt((dt - old_t).squaredNorm() + (dr - old_r).squaredNorm());
      if (moved <= cfg.mstep.stall_tol && omega_moved <= cfg.mstep.stall_tol) break;
    }

    std::vector<Index> changed;
    for (Index k = 0; k < active.size(); ++k) {
      if (dt[k] == dt0[k] && dr[k] == dr0[k]) continue;
      const Index q = active.indices[static_cast<std::size_t>(k)];
      est.offsets.dtheta_t[q] = dt[k];
      est.offsets.dtheta_r[q] = dr[k];
      changed.push_back(q);
    }
    moved_total = std::sqrt((dt - dt0).squaredNorm() + (dr - dr0).squaredNorm());
    if (!changed.empty()) {
      refresh_columns(dict, grid, est.offsets, nz.gram, nz.m_r, std::span<const Index>(changed));
      ctx.update_columns(dict.F, std::span<const Index>(changed));
    }
    prior = TurboPrior{pi_next}.floored();
    est.diagnostics.push_back(std::move(diag));
    est.outer_iterations = outer + 1;

    const VectorXi support = select_grids(st.s_prob, cfg.mstep.tau_s).s_hat;
    const bool settled = outer > 0 && support == prev_support && est.diagnostics.back().lambda_change < cfg.outer_tol &&
                         moved_total <= cfg.mstep.stall_tol;
    prev_support = support;
    if (settled) {
      est.converged = true;
      break;
    }
  }

  est.support = select_grids(st.s_prob, cfg.mstep.tau_s).s_hat;
  est.posterior = std::move(st);
  est.omega = ising.omega;
  est.prior = prior.pi;
  est.direct_angles = extract_angles(est, grid);
  est.elapsed_ms = ms_since(t0);
  return est;
}

}  // namespace

Estimate sf_tvbi(const Observation& obs, const GridModel<double>& grid, const AlgorithmConfig& config) {
  return run_em(obs, grid, config);
}

Estimate turbo_vbi(const Observation& obs, const GridModel<double>& grid, const AlgorithmConfig& config) {
  AlgorithmConfig c = config;
  c.select_grids = false;
  c.mstep.max_inner = 1;
  return run_em(obs, grid, c);
}

Estimate omp(const Observation& obs, const GridModel<double>& grid, Index max_atoms, double residual_fraction) {
  const auto t0 = Clock::now();
  const Normalized nz = normalize(obs);
  const Index n = grid.q_total;
  if (max_atoms < 0 || max_atoms > n) throw std::invalid_argument("omp: max_atoms must lie in [0, Q^2]");
  const Index budget = max_atoms > 0 ? max_atoms : std::min<Index>(n, nz.y.size());

  Estimate est;
  est.offsets = OffsetVectors<double>::zeros(n);
  const MatrixXc f = measurement_matrix(grid, est.offsets, nz.gram, nz.m_r).F;
  const VectorXd col_norm = f.colwise().norm().transpose();
  const double stop = residual_fraction * nz.y.squaredNorm();

  std::vector<Index> chosen;
  VectorXc r = nz.y, coef;
  est.support = VectorXi::Zero(n);
  while (static_cast<Index>(chosen.size()) < budget && r.squaredNorm() > stop) {
    VectorXd score = (f.adjoint() * r).cwiseAbs().cwiseQuotient(col_norm);
    for (Index q : chosen) score[q] = -1.0;
    Index best = 0;
    score.maxCoeff(&best);
    chosen.push_back(best);
    est.support[best] = 1;
    MatrixXc sub(f.rows(), static_cast<Index>(chosen.size()));
    for (std::size_t k = 0; k < chosen.size(); ++k) sub.col(static_cast<Index>(k)) = f.col(chosen[k]);
    coef = sub.colPivHouseholderQr().solve(nz.y);
    r = nz.y - sub * coef;
  }
  est.posterior.mu_x = VectorXc::Zero(n);
  for (std::size_t k = 0; k < chosen.size(); ++k) est.posterior.mu_x[chosen[k]] = coef[static_cast<Index>(k)];
  est.converged = true;
  est.outer_iterations = static_cast<int>(chosen.size());
  est.direct_angles = extract_angles(est, grid);
  est.elapsed_ms = ms_since(t0);
  return est;
}

std::vector<double> extract_angles(const Estimate& estimate, const GridModel<double>& grid) {
  std::vector<double> out;
  if (estimate.support.size() != grid.q_total) return out;
  for (Index i = 0; i < grid.q_base; ++i) {
    const Index q = grid.diagonal(i);
    if (!estimate.support[q]) continue;
    const double off = estimate.offsets.size() == grid.q_total ? estimate.offsets.dtheta_t[q] : 0.0;
    out.push_back(grid.base_grid[i] + off);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mpsense
