#include "mpsense/inference.hpp"

#include <cmath>
#include <unsupported/Eigen/SpecialFunctions>

namespace mpsense {

namespace {

double digamma(double x) { return Eigen::numext::digamma(x); }

double log_sigmoid_odds(double p) { return std::log(p) - std::log1p(-p); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double gamma_entropy(double shape, double rate) {
  return shape - std::log(rate) + std::lgamma(shape) + (1.0 - shape) * digamma(shape);
}

double bernoulli_entropy(double p) {
  double h = 0.0;
  if (p > 0) h -= p * std::log(p);
  if (p < 1) h -= (1 - p) * std::log1p(-p);
  return h;
}

}  // namespace

VectorXd PosteriorState::mean_log_rho() const {
  VectorXd out(rho_shape.size());
  for (Index n = 0; n < out.size(); ++n) out[n] = digamma(rho_shape[n]) - std::log(rho_rate[n]);
  return out;
}

double PosteriorState::mean_log_gamma() const { return digamma(gamma_shape) - std::log(gamma_rate); }

QxUpdate update_qx_gram(const MatrixXc& gram, const VectorXc& fhy, double mean_gamma, const VectorXd& mean_rho) {
  if (!(mean_gamma > 0) || (mean_rho.array() <= 0).any())
    throw std::invalid_argument("update_qx: precisions must be positive");
  if (gram.rows() != mean_rho.size() || fhy.size() != mean_rho.size())
    throw std::invalid_argument("update_qx: dimension mismatch");

  MatrixXc a = mean_gamma * gram;
  a.diagonal().real() += mean_rho;
  QxUpdate out;
  Eigen::LLT<MatrixXc> llt(a);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-12 * a.diagonal().real().mean();
    a.diagonal().real().array() += jitter;
    llt.compute(a);
    if (llt.info() != Eigen::Success) throw FactorizationError("update_qx: normal matrix is not positive definite");
    out.jittered = true;
  }
  const Index n = a.rows();
  out.sigma = llt.solve(MatrixXc::Identity(n, n));
  out.sigma = (0.5 * (out.sigma + out.sigma.adjoint())).eval();
  out.mu = llt.solve(mean_gamma * fhy);
  out.log_det_sigma = -2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
  return out;
}

GammaShapeRate update_qrho(const VectorXd& mean_s, const VectorXd& second_moment_x, const SparsityHyper& hyper) {
  if (mean_s.size() != second_moment_x.size()) throw std::invalid_argument("update_qrho: dimension mismatch");
  GammaShapeRate out;
  const auto s = mean_s.array();
  out.shape = (s * hyper.a + (1.0 - s) * hyper.a_bar + 1.0).matrix();
  out.rate = (s * hyper.b + (1.0 - s) * hyper.b_bar + second_moment_x.array()).matrix();
  return out;
}

VectorXd log_c_active(const VectorXd& mean_rho, const VectorXd& mean_log_rho, const SparsityHyper& h) {
  const double base = h.a * std::log(h.b) - std::lgamma(h.a);
  return ((h.a - 1.0) * mean_log_rho.array() - h.b * mean_rho.array() + base).matrix();
}

VectorXd log_c_inactive(const VectorXd& mean_rho, const VectorXd& mean_log_rho, const SparsityHyper& h) {
  const double base = h.a_bar * std::log(h.b_bar) - std::lgamma(h.a_bar);
  return ((h.a_bar - 1.0) * mean_log_rho.array() - h.b_bar * mean_rho.array() + base).matrix();
}

VectorXd update_qs(const TurboPrior& prior, const VectorXd& rho_shape, const VectorXd& rho_rate,
                   const SparsityHyper& hyper) {
  const Index n = rho_shape.size();
  if (prior.pi.size() != n || rho_rate.size() != n) throw std::invalid_argument("update_qs: dimension mismatch");
  VectorXd mean_rho = rho_shape.cwiseQuotient(rho_rate);
  VectorXd mean_log_rho(n);
  for (Index k = 0; k < n; ++k) mean_log_rho[k] = digamma(rho_shape[k]) - std::log(rho_rate[k]);
  const VectorXd lc = log_c_active(mean_rho, mean_log_rho, hyper);
  const VectorXd lcb = log_c_inactive(mean_rho, mean_log_rho, hyper);
  VectorXd out(n);
  for (Index k = 0; k < n; ++k) {
    const double p = prior.pi[k];
    if (p >= 1.0) {
      out[k] = 1.0;
    } else if (p <= 0.0) {
      out[k] = 0.0;
    } else {
      out[k] = sigmoid(log_sigmoid_odds(p) + lc[k] - lcb[k]);
    }
  }
  return out;
}

double likelihood_dim(LikelihoodDim dim, Index q_total, Index measurements) {
  return dim == LikelihoodDim::GridCount ? double(q_total) : double(measurements);
}

GammaScalar update_qgamma(const VectorXc& y, const MatrixXc& f, const VectorXc& mu, const MatrixXc& sigma,
                          const SparsityHyper& hyper, LikelihoodDim dim) {
  if (f.rows() != y.size() || f.cols() != mu.size() || sigma.rows() != mu.size())
    throw std::invalid_argument("update_qgamma: dimension mismatch");
  const double resid = (y - f * mu).squaredNorm();
  const double trace = (f * sigma * f.adjoint()).trace().real();
  return {hyper.c + likelihood_dim(dim, f.cols(), f.rows()), hyper.d + resid + trace};
}

VectorXd extrinsic_out(const VectorXd& lambda, const TurboPrior& prior) {
  if (lambda.size() != prior.pi.size()) throw std::invalid_argument("extrinsic_out: dimension mismatch");
  VectorXd out(lambda.size());
  for (Index q = 0; q < lambda.size(); ++q) {
    const double l = lambda[q], p = prior.pi[q];
    const double on = l * (1.0 - p);
    const double off = (1.0 - l) * p;
    out[q] = on + off > 0 ? on / (on + off) : 0.5;
  }
  return out;
}

// ---------------------------------------------------------------------------

VbiContext::VbiContext(const MatrixXc& f, const VectorXc& y) : f_(f), y_(y) {
  if (f.rows() != y.size()) throw std::invalid_argument("VbiContext: dimension mismatch");
  gram_ = f_.adjoint() * f_;
  fhy_ = f_.adjoint() * y_;
}

void VbiContext::reset(const MatrixXc& f) {
  f_ = f;
  gram_ = f_.adjoint() * f_;
  fhy_ = f_.adjoint() * y_;
}

void VbiContext::update_columns(const MatrixXc& f, std::span<const Index> columns) {
  if (f.rows() != f_.rows() || f.cols() != f_.cols()) throw std::invalid_argument("VbiContext: shape changed");
  if (columns.empty()) return;
  if (static_cast<Index>(columns.size()) * 4 > f_.cols()) {
    reset(f);
    return;
  }
  f_ = f;
  for (Index q : columns) {
    const VectorXc g = f_.adjoint() * f_.col(q);
    gram_.col(q) = g;
    gram_.row(q) = g.adjoint();
    fhy_[q] = f_.col(q).dot(y_);
  }
}

double VbiContext::expected_residual(const VectorXc& mu, const MatrixXc& sigma) const {
  const double resid = (y_ - f_ * mu).squaredNorm();
  const double trace = (sigma.array() * gram_.array().conjugate()).sum().real();
  return resid + trace;
}

PosteriorState initial_state(const VbiContext& ctx, const TurboPrior& prior, const SparsityHyper& hyper,
                             const VbiOptions& options, const VectorXd& seed_energy) {
  const Index n = ctx.q_total();
  if (seed_energy.size() != 0 && seed_energy.size() != n)
    throw std::invalid_argument("initial_state: seed energy must have one entry per cell");
  PosteriorState s;
  s.mu_x = VectorXc::Zero(n);
  s.s_prob = prior.pi;
  const auto rho = update_qrho(s.s_prob, seed_energy.size() ? seed_energy : VectorXd::Zero(n), hyper);
  s.rho_shape = rho.shape;
  s.rho_rate = rho.rate;
  const VectorXd inv_rho = s.mean_rho().cwiseInverse();
  s.sigma_x = inv_rho.cast<cdouble>().asDiagonal();
  s.log_det_sigma = inv_rho.array().log().sum();
  s.gamma_shape = hyper.c + likelihood_dim(options.dim, n, ctx.measurements());
  const double power = ctx.y().squaredNorm() / double(ctx.measurements());
  s.gamma_rate = std::max(s.gamma_shape * options.initial_noise_fraction * power, hyper.d);
  return s;
}

double elbo(const PosteriorState& st, const VbiContext& ctx, const TurboPrior& prior, const SparsityHyper& h,
            LikelihoodDim dim) {
  const Index n = st.size();
  const double log_pi = std::log(kPi<double>);
  const double e_gamma = st.mean_gamma();
  const double e_log_gamma = st.mean_log_gamma();
  const VectorXd e_rho = st.mean_rho();
  const VectorXd e_log_rho = st.mean_log_rho();
  const VectorXd x2 = st.second_moment_x();
  const double big_n = likelihood_dim(dim, n, ctx.measurements());

  double v = big_n * (e_log_gamma - log_pi) - e_gamma * ctx.expected_residual(st.mu_x, st.sigma_x);
  v += (e_log_rho.array() - log_pi - e_rho.array() * x2.array()).sum();

  const VectorXd lc = log_c_active(e_rho, e_log_rho, h);
  const VectorXd lcb = log_c_inactive(e_rho, e_log_rho, h);
  for (Index k = 0; k < n; ++k) {
    const double l = st.s_prob[k], p = prior.pi[k];
    v += l * lc[k] + (1 - l) * lcb[k];
    if (l > 0) v += l * std::log(p);
    if (l < 1) v += (1 - l) * std::log1p(-p);
    v += bernoulli_entropy(l);
    v += gamma_entropy(st.rho_shape[k], st.rho_rate[k]);
  }
  v += h.c * std::log(h.d) - std::lgamma(h.c) + (h.c - 1) * e_log_gamma - h.d * e_gamma;
  v += double(n) * (1.0 + log_pi) + st.log_det_sigma;
  v += gamma_entropy(st.gamma_shape, st.gamma_rate);
  return v;
}

double elbo(const PosteriorState& state, const MatrixXc& f, const VectorXc& y, const TurboPrior& prior,
            const SparsityHyper& hyper, LikelihoodDim dim) {
  return elbo(state, VbiContext(f, y), prior, hyper, dim);
}

void apply_qx(PosteriorState& st, const VbiContext& ctx) {
  QxUpdate u = update_qx_gram(ctx.gram(), ctx.fhy(), st.mean_gamma(), st.mean_rho());
  st.mu_x = std::move(u.mu);
  st.sigma_x = std::move(u.sigma);
  st.log_det_sigma = u.log_det_sigma;
}

void apply_qrho(PosteriorState& st, const SparsityHyper& hyper) {
  auto r = update_qrho(st.s_prob, st.second_moment_x(), hyper);
  st.rho_shape = std::move(r.shape);
  st.rho_rate = std::move(r.rate);
}

void apply_qs(PosteriorState& st, const TurboPrior& prior, const SparsityHyper& hyper) {
  st.s_prob = update_qs(prior, st.rho_shape, st.rho_rate, hyper);
}

void apply_qgamma(PosteriorState& st, const VbiContext& ctx, const SparsityHyper& hyper, LikelihoodDim dim) {
  st.gamma_shape = hyper.c + likelihood_dim(dim, ctx.q_total(), ctx.measurements());
  st.gamma_rate = hyper.d + ctx.expected_residual(st.mu_x, st.sigma_x);
}

VbiReport run_vbi(PosteriorState& st, const VbiContext& ctx, const TurboPrior& prior, const SparsityHyper& hyper,
                  const VbiOptions& options) {
  if (options.max_sweeps < 1) throw std::invalid_argument("run_vbi: max_sweeps must be >= 1");
  VbiReport rep;
  double prev = elbo(st, ctx, prior, hyper, options.dim);
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    apply_qx(st, ctx);
    apply_qrho(st, hyper);
    apply_qs(st, prior, hyper);
    apply_qgamma(st, ctx, hyper, options.dim);
    rep.sweeps = sweep + 1;
    const double cur = elbo(st, ctx, prior, hyper, options.dim);
    rep.elbo = cur;
    if (std::abs(cur - prev) <= options.stall_tol * std::max(1.0, std::abs(cur))) {
      rep.stalled = true;
      break;
    }
    prev = cur;
  }
  return rep;
}

}  // namespace mpsense
