#include "mpsense/mstep.hpp"

#include <algorithm>
#include <cmath>

namespace mpsense {

ActiveSet select_grids(const VectorXd& lambda, double tau_s) {
  ActiveSet a;
  a.s_hat = VectorXi::Zero(lambda.size());
  for (Index q = 0; q < lambda.size(); ++q)
    if (lambda[q] > tau_s) {
      a.s_hat[q] = 1;
      a.indices.push_back(q);
    }
  return a;
}

ActiveSet full_set(Index n) {
  ActiveSet a;
  a.s_hat = VectorXi::Ones(n);
  a.indices.resize(static_cast<std::size_t>(n));
  for (Index q = 0; q < n; ++q) a.indices[static_cast<std::size_t>(q)] = q;
  return a;
}

void MStepConfig::validate() const {
  if (!(tau_s > 0 && tau_s < 1)) throw std::invalid_argument("MStepConfig: tau_s must lie in (0, 1)");
  if (max_inner < 1) throw std::invalid_argument("MStepConfig: max_inner must be >= 1");
  for (const ArmijoConfig* a : {&offset_armijo, &omega_armijo})
    if (!(a->initial_step > 0 && a->shrink > 0 && a->shrink < 1 && a->c1 > 0 && a->c1 < 1 && a->max_backtracks >= 0))
      throw std::invalid_argument("MStepConfig: invalid Armijo parameters");
  if (!(stall_tol > 0)) throw std::invalid_argument("MStepConfig: stall_tol must be positive");
  if (!(omega_min <= 0 && omega_max >= 0)) throw std::invalid_argument("MStepConfig: omega bounds must bracket 0");
}

// ---------------------------------------------------------------------------

OffsetProblem::OffsetProblem(const VectorXc& y, const GridModel<double>& grid, const MatrixXc& gram, Index m_r,
                             std::vector<Index> cells, VectorXc mu, double mean_gamma)
    : y_(y), grid_(grid), gram_(gram), m_r_(m_r), cells_(std::move(cells)), mu_(std::move(mu)), gamma_(mean_gamma) {
  if (mu_.size() != size()) throw std::invalid_argument("OffsetProblem: mu must match the active set");
  if (gram_.rows() * m_r_ != y_.size()) throw std::invalid_argument("OffsetProblem: observation length mismatch");
  for (Index q : cells_)
    if (q < 0 || q >= grid_.q_total) throw std::out_of_range("OffsetProblem: invalid grid index");
}

OffsetProblem::OffsetProblem(const VectorXc& y, const GridModel<double>& grid, const MatrixXc& gram, Index m_r,
                             std::vector<Index> cells, double mean_gamma, VectorXd precision)
    : OffsetProblem(y, grid, gram, m_r, std::move(cells), VectorXc::Zero(precision.size()), mean_gamma) {
  if ((precision.array() <= 0).any()) throw std::invalid_argument("OffsetProblem: precisions must be positive");
  precision_ = std::move(precision);
}

VectorXc OffsetProblem::column(Index k, double dt, double dr) const {
  const Index q = cells_[static_cast<std::size_t>(k)];
  return detail::filtered_column<double>(gram_, steering_vector(grid_.theta_t[q] + dt, gram_.rows()),
                                         steering_vector(grid_.theta_r[q] + dr, m_r_));
}

MatrixXc OffsetProblem::columns(const VectorXd& dt, const VectorXd& dr) const {
  MatrixXc f(y_.size(), size());
  for (Index k = 0; k < size(); ++k) f.col(k) = column(k, dt[k], dr[k]);
  return f;
}

VectorXc OffsetProblem::amplitudes(const VectorXd& dt, const VectorXd& dr) const {
  if (!profiled()) return mu_;
  const MatrixXc f = columns(dt, dr);
  MatrixXc a = gamma_ * (f.adjoint() * f);
  a.diagonal() += precision_.cast<cdouble>();
  return a.ldlt().solve(gamma_ * (f.adjoint() * y_));
}

VectorXc OffsetProblem::residual(const VectorXd& dt, const VectorXd& dr) const {
  const VectorXc mu = amplitudes(dt, dr);
  VectorXc r = y_;
  for (Index k = 0; k < size(); ++k) r -= column(k, dt[k], dr[k]) * mu[k];
  return r;
}

double OffsetProblem::value(const VectorXd& dt, const VectorXd& dr) const {
  if (!profiled()) return -gamma_ * residual(dt, dr).squaredNorm();
  const VectorXc mu = amplitudes(dt, dr);
  const VectorXc r = y_ - columns(dt, dr) * mu;
  return -gamma_ * r.squaredNorm() - precision_.dot(mu.cwiseAbs2());
}

std::pair<VectorXd, VectorXd> OffsetProblem::gradient(const VectorXd& dt, const VectorXd& dr) const {
  const VectorXc mu = amplitudes(dt, dr);
  const VectorXc r = y_ - (size() ? columns(dt, dr) * mu : VectorXc::Zero(y_.size()).eval());
  VectorXd gt(size()), gr(size());
  const Index mt = gram_.rows();
  for (Index k = 0; k < size(); ++k) {
    const Index q = cells_[static_cast<std::size_t>(k)];
    const double tt = grid_.theta_t[q] + dt[k], tr = grid_.theta_r[q] + dr[k];
    const VectorXc at = steering_vector(tt, mt), ar = steering_vector(tr, m_r_);
    const VectorXc dft = detail::filtered_column<double>(gram_, steering_derivative(tt, mt), ar);
    const VectorXc dfr = detail::filtered_column<double>(gram_, at, steering_derivative(tr, m_r_));
    // d(-g ||r||^2) = 2 g Re{r^H dF mu}
    gt[k] = 2.0 * gamma_ * std::real(r.dot(dft) * mu[k]);
    gr[k] = 2.0 * gamma_ * std::real(r.dot(dfr) * mu[k]);
  }
  return {gt, gr};
}

double objective(const VectorXc& y, const GridModel<double>& grid, const MatrixXc& gram, Index m_r,
                 const std::vector<Index>& cells, const VectorXd& dt, const VectorXd& dr, const VectorXc& mu,
                 double mean_gamma) {
  return OffsetProblem(y, grid, gram, m_r, cells, mu, mean_gamma).value(dt, dr);
}

std::pair<VectorXd, VectorXd> grad_offsets(const VectorXc& y, const GridModel<double>& grid, const MatrixXc& gram,
                                           Index m_r, const std::vector<Index>& cells, const VectorXd& dt,
                                           const VectorXd& dr, const VectorXc& mu, double mean_gamma) {
  return OffsetProblem(y, grid, gram, m_r, cells, mu, mean_gamma).gradient(dt, dr);
}

ArmijoStep offset_step(const OffsetProblem& problem, VectorXd& dt, VectorXd& dr, Axis axis,
                       const ArmijoConfig& armijo) {
  ArmijoStep out;
  out.value = problem.value(dt, dr);
  if (problem.size() == 0) return out;
  const auto grads = problem.gradient(dt, dr);
  const VectorXd& g = axis == Axis::Transmit ? grads.first : grads.second;
  const double scale = g.cwiseAbs().maxCoeff();
  if (!(scale > 0)) return out;
  const VectorXd dir = g / scale;
  const double h = problem.half_spacing();
  VectorXd& x = axis == Axis::Transmit ? dt : dr;

  double t = armijo.initial_step;
  for (int b = 0; b <= armijo.max_backtracks; ++b, t *= armijo.shrink) {
    const VectorXd cand = (x + t * dir).cwiseMax(-h).cwiseMin(h);
    const VectorXd step = cand - x;
    if (step.cwiseAbs().maxCoeff() == 0.0) break;
    const double v = axis == Axis::Transmit ? problem.value(cand, dr) : problem.value(dt, cand);
    if (v >= out.value + armijo.c1 * g.dot(step)) {
      x = cand;
      out.accepted = true;
      out.value = v;
      out.backtracks = b;
      return out;
    }
  }
  out.backtracks = armijo.max_backtracks;
  return out;
}

OffsetAscent ascend_offsets(const OffsetProblem& problem, VectorXd dt, VectorXd dr, const MStepConfig& config) {
  OffsetAscent out;
  out.values.push_back(problem.value(dt, dr));
  for (int it = 0; it < config.max_inner; ++it) {
    const VectorXd old_t = dt, old_r = dr;
    offset_step(problem, dt, dr, Axis::Transmit, config.offset_armijo);
    const ArmijoStep s = offset_step(problem, dt, dr, Axis::Receive, config.offset_armijo);
    out.iterations = it + 1;
    out.values.push_back(s.value);
    const double moved = std::sqrt((dt - old_t).squaredNorm() + (dr - old_r).squaredNorm());
    if (moved <= config.stall_tol) {
      out.stalled = true;
      break;
    }
  }
  out.dt = std::move(dt);
  out.dr = std::move(dr);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void check_sizes(const VectorXd& lambda, const VectorXd& bias, const CrossIsing& ising) {
  if (lambda.size() != ising.q_total() || bias.size() != ising.q_total())
    throw std::invalid_argument("pseudo-likelihood: beliefs and bias must have length Q^2");
  if (ising.omega.size() != ising.edge_count()) throw std::invalid_argument("pseudo-likelihood: bad omega length");
}

}  // namespace

VectorXd mean_field(const VectorXd& lambda, const VectorXd& bias, const CrossIsing& ising) {
  check_sizes(lambda, bias, ising);
  VectorXd h = bias;
  const auto e = edges(ising);
  for (std::size_t k = 0; k < e.size(); ++k) {
    const double w = ising.omega[static_cast<Index>(k)];
    h[e[k].offdiag] += w * lambda[e[k].diag];
    h[e[k].diag] += w * lambda[e[k].offdiag];
  }
  return h;
}

double pseudo_likelihood(const VectorXd& lambda, const VectorXd& bias, const CrossIsing& ising) {
  const VectorXd h = mean_field(lambda, bias, ising);
  double v = 0.0;
  for (Index q = 0; q < h.size(); ++q) v += lambda[q] * h[q] - softplus(h[q]);
  return v;
}

VectorXd pseudo_likelihood_grad(const VectorXd& lambda, const VectorXd& bias, const CrossIsing& ising) {
  const VectorXd h = mean_field(lambda, bias, ising);
  const auto e = edges(ising);
  VectorXd g(ising.edge_count());
  for (std::size_t k = 0; k < e.size(); ++k) {
    const Index a = e[k].offdiag, b = e[k].diag;
    g[static_cast<Index>(k)] = lambda[b] * (lambda[a] - sigmoid(h[a])) + lambda[a] * (lambda[b] - sigmoid(h[b]));
  }
  return g;
}

OmegaUpdate update_omega(const VectorXd& lambda, const VectorXd& bias, const CrossIsing& ising,
                         const MStepConfig& config) {
  OmegaUpdate out;
  out.omega = ising.omega;
  out.value = pseudo_likelihood(lambda, bias, ising);
  const VectorXd g = pseudo_likelihood_grad(lambda, bias, ising);
  if (!(g.cwiseAbs().maxCoeff() > 0)) return out;
  CrossIsing trial = ising;
  double t = config.omega_armijo.initial_step;
  for (int b = 0; b <= config.omega_armijo.max_backtracks; ++b, t *= config.omega_armijo.shrink) {
    trial.omega = (ising.omega + t * g).cwiseMax(config.omega_min).cwiseMin(config.omega_max);
    const VectorXd step = trial.omega - ising.omega;
    if (step.cwiseAbs().maxCoeff() == 0.0) break;
    const double v = pseudo_likelihood(lambda, bias, trial);
    if (v >= out.value + config.omega_armijo.c1 * g.dot(step)) {
      out.omega = trial.omega;
      out.accepted = true;
      out.value = v;
      return out;
    }
  }
  return out;
}

}  // namespace mpsense
