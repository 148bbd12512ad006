#pragma once

#include "mpsense/prior.hpp"
#include "mpsense/types.hpp"

namespace mpsense {

/// Bernoulli parameters of every message on the cross-sparsity factor graph.
///
/// Each ordered pair p = (i, j) owns two factors: factor 1 ties the
/// off-diagonal cell to diagonal (i, i), factor 2 ties it to (j, j).
/// Messages are indexed by pair, in the order of CrossIsing::pair_index.
///
///   p_tp1, p_tp2   off-diagonal cell -> factor 1 / factor 2
///   p_tr1, p_tr2   factor 1 -> (i, i), factor 2 -> (j, j)
///   n_tr1, n_tr2   (i, i) -> factor 1, (j, j) -> factor 2
///   n_tp1, n_tp2   factor 1 / factor 2 -> off-diagonal cell
struct MessageState {
  Index q_base = 0;
  VectorXd p_tp1, p_tp2, p_tr1, p_tr2;
  VectorXd n_tr1, n_tr2, n_tp1, n_tp2;

  static MessageState uninformative(Index q);
  Index pair_count() const { return p_tp1.size(); }
};

struct CrossMpOptions {
  int max_sweeps = 100;
  double tol = 1e-6;
  double damping = 0.5;       // weight on the previous value once oscillation is seen
  int oscillation_sweeps = 3;  // consecutive sign flips that switch damping on
  bool strict_extrinsic = false;
};

struct CrossMpResult {
  MessageState messages;
  int sweeps = 0;
  bool converged = false;
  bool damped = false;
  double last_change = 0.0;
};

/// Logit clamp used by every conversion on the graph.
inline constexpr double kMaxLogit = 700.0;

double logit(double p);
double logistic(double t);

/// Log-odds passed through a pairwise factor exp(omega s_a s_b): log(1 + p (e^omega - 1)).
double factor_message(double omega, double p);

/// One flood pass over all pairs. Returns the signed change of every
/// factor -> variable message, packed as [p_tr1, p_tr2, n_tp1, n_tp2].
/// damping in [0, 1) blends the new factor messages with the old ones.
VectorXd sweep(MessageState& messages, const VectorXd& inbound, const CrossIsing& ising, double damping = 0.0);

/// Sweeps from uninformative messages until the largest factor -> variable change drops below tol.
CrossMpResult run(const VectorXd& inbound, const CrossIsing& ising, const CrossMpOptions& options = {});

/// Next priors for the estimator: all incoming factor messages combined
/// with the inbound prior, or without it when strict_extrinsic is set.
VectorXd outbound(const MessageState& messages, const VectorXd& inbound, bool strict_extrinsic = false);

}  // namespace mpsense
