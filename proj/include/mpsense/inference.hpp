#pragma once

#include <span>
#include <stdexcept>

#include "mpsense/prior.hpp"
#include "mpsense/types.hpp"

namespace mpsense {

/// Which count multiplies ln(gamma) in the likelihood term.
///
/// GridCount reproduces the noise-precision shape update c + Q1 as derived
/// for the model; MeasurementCount uses the Gaussian dimension m_t m_r. The
/// two coincide whenever Q1 = m_t m_r.
enum class LikelihoodDim { GridCount, MeasurementCount };

/// Factorized variational posterior q(x) q(rho) q(s) q(gamma).
struct PosteriorState {
  VectorXc mu_x;
  MatrixXc sigma_x;
  double log_det_sigma = 0.0;
  VectorXd rho_shape;
  VectorXd rho_rate;
  VectorXd s_prob;
  double gamma_shape = 1.0;
  double gamma_rate = 1.0;

  Index size() const { return mu_x.size(); }
  VectorXd mean_rho() const { return rho_shape.cwiseQuotient(rho_rate); }
  VectorXd mean_log_rho() const;
  double mean_gamma() const { return gamma_shape / gamma_rate; }
  double mean_log_gamma() const;
  /// <|x_n|^2> = |mu_n|^2 + sigma[n, n].
  VectorXd second_moment_x() const { return mu_x.cwiseAbs2() + sigma_x.diagonal().real(); }
};

/// Activation priors pi_q handed to the VBI module by the support module.
struct TurboPrior {
  VectorXd pi;

  static constexpr double kFloor = 1e-9;
  static TurboPrior uniform(Index n, double p) { return {VectorXd::Constant(n, p)}; }
  /// Clips every entry to [1e-9, 1 - 1e-9].
  TurboPrior floored() const { return {pi.cwiseMax(kFloor).cwiseMin(1.0 - kFloor)}; }
};

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QxUpdate {
  VectorXc mu;
  MatrixXc sigma;
  double log_det_sigma = 0.0;
  bool jittered = false;
};

struct GammaShapeRate {
  VectorXd shape;
  VectorXd rate;
};

/// sigma = (<gamma> G + diag(<rho>))^-1 and mu = <gamma> sigma F^H y, given G = F^H F.
QxUpdate update_qx_gram(const MatrixXc& gram, const VectorXc& fhy, double mean_gamma, const VectorXd& mean_rho);

/// Same update from the dictionary and the observation.
template <typename DerivedF, typename DerivedY>
QxUpdate update_qx(const Eigen::MatrixBase<DerivedF>& f, const Eigen::MatrixBase<DerivedY>& y,
                   double mean_gamma, const VectorXd& mean_rho) {
  if (f.rows() != y.size() || f.cols() != mean_rho.size())
    throw std::invalid_argument("update_qx: dimension mismatch");
  const MatrixXc gram = f.adjoint() * f;
  const VectorXc fhy = f.adjoint() * y;
  return update_qx_gram(gram, fhy, mean_gamma, mean_rho);
}

GammaShapeRate update_qrho(const VectorXd& mean_s, const VectorXd& second_moment_x, const SparsityHyper& hyper);

/// Log of C_n (active) and C_bar_n (inactive) from <rho> and <ln rho>.
VectorXd log_c_active(const VectorXd& mean_rho, const VectorXd& mean_log_rho, const SparsityHyper& hyper);
VectorXd log_c_inactive(const VectorXd& mean_rho, const VectorXd& mean_log_rho, const SparsityHyper& hyper);

/// lambda_n = pi C / (pi C + (1 - pi) C_bar), evaluated in log-odds.
VectorXd update_qs(const TurboPrior& prior, const VectorXd& rho_shape, const VectorXd& rho_rate,
                   const SparsityHyper& hyper);

struct GammaScalar {
  double shape;
  double rate;
};

double likelihood_dim(LikelihoodDim dim, Index q_total, Index measurements);

/// c~ = c + N and d~ = d + ||y - F mu||^2 + tr(F sigma F^H).
GammaScalar update_qgamma(const VectorXc& y, const MatrixXc& f, const VectorXc& mu, const MatrixXc& sigma,
                          const SparsityHyper& hyper, LikelihoodDim dim = LikelihoodDim::GridCount);

/// Extrinsic Bernoulli parameter lambda(1 - pi) / (lambda(1 - pi) + (1 - lambda) pi).
VectorXd extrinsic_out(const VectorXd& lambda, const TurboPrior& prior);

/// Dictionary-side quantities shared by every sweep of one E-step.
///
/// The gram matrix is kept in sync with F column-wise so that an M-step that
/// moved only a few offsets costs O(S_q m_t m_r Q1) to refresh.
class VbiContext {
 public:
  VbiContext(const MatrixXc& f, const VectorXc& y);

  const MatrixXc& f() const { return f_; }
  const VectorXc& y() const { return y_; }
  const MatrixXc& gram() const { return gram_; }
  const VectorXc& fhy() const { return fhy_; }
  Index measurements() const { return y_.size(); }
  Index q_total() const { return f_.cols(); }

  /// Replaces F and refreshes G, F^H y for the listed columns only.
  void update_columns(const MatrixXc& f, std::span<const Index> columns);
  void reset(const MatrixXc& f);

  /// E_q(x) ||y - F x||^2 = ||y - F mu||^2 + tr(sigma G).
  double expected_residual(const VectorXc& mu, const MatrixXc& sigma) const;

 private:
  MatrixXc f_;
  VectorXc y_;
  MatrixXc gram_;
  VectorXc fhy_;
};

struct VbiOptions {
  int max_sweeps = 10;
  double stall_tol = 1e-6;  // relative ELBO change that ends the sweep loop
  LikelihoodDim dim = LikelihoodDim::GridCount;
  double initial_noise_fraction = 0.1;
};

struct VbiReport {
  int sweeps = 0;
  double elbo = 0.0;
  bool stalled = false;
};

/// Starting point: mu = 0, q(s) = pi, q(rho) from the prior mixture at lambda = pi with
/// seed_energy standing in for E|x|^2 (zero when empty), noise variance set to a fraction
/// of the per-entry observation power.
PosteriorState initial_state(const VbiContext& ctx, const TurboPrior& prior, const SparsityHyper& hyper,
                             const VbiOptions& options, const VectorXd& seed_energy = {});

double elbo(const PosteriorState& state, const VbiContext& ctx, const TurboPrior& prior, const SparsityHyper& hyper,
            LikelihoodDim dim = LikelihoodDim::GridCount);

double elbo(const PosteriorState& state, const MatrixXc& f, const VectorXc& y, const TurboPrior& prior,
            const SparsityHyper& hyper, LikelihoodDim dim = LikelihoodDim::GridCount);

/// Single coordinate updates applied in place.
void apply_qx(PosteriorState& state, const VbiContext& ctx);
void apply_qrho(PosteriorState& state, const SparsityHyper& hyper);
void apply_qs(PosteriorState& state, const TurboPrior& prior, const SparsityHyper& hyper);
void apply_qgamma(PosteriorState& state, const VbiContext& ctx, const SparsityHyper& hyper, LikelihoodDim dim);

/// Sweeps qx -> qrho -> qs -> qgamma until the ELBO stalls or max_sweeps is reached.
VbiReport run_vbi(PosteriorState& state, const VbiContext& ctx, const TurboPrior& prior, const SparsityHyper& hyper,
                  const VbiOptions& options);

}  // namespace mpsense
