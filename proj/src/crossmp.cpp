#include "mpsense/crossmp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpsense {

MessageState MessageState::uninformative(Index q) {
  if (q < 2) throw std::invalid_argument("MessageState: Q must be >= 2");
  const Index n = q * (q - 1);
  const VectorXd half = VectorXd::Constant(n, 0.5);
  return {q, half, half, half, half, half, half, half, half};
}

double logit(double p) {
  if (p <= 0.0) return -kMaxLogit;
  if (p >= 1.0) return kMaxLogit;
  if (p == 0.5) return 0.0;
  return std::clamp(std::log(p) - std::log1p(-p), -kMaxLogit, kMaxLogit);
}

double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double factor_message(double omega, double p) {
  if (omega == 0.0) return 0.0;
  return std::clamp(std::log1p(p * std::expm1(omega)), -kMaxLogit, kMaxLogit);
}

namespace {

void check(const MessageState& m, const VectorXd& inbound, const CrossIsing& ising) {
  if (ising.q_base != m.q_base) throw std::invalid_argument("crossmp: grid size mismatch");
  if (inbound.size() != ising.q_total()) throw std::invalid_argument("crossmp: inbound must have length Q^2");
  if (ising.omega.size() != ising.edge_count()) throw std::invalid_argument("crossmp: omega must have 2Q(Q-1) entries");
}

// Sum of the logits of every factor message entering each diagonal cell.
VectorXd diagonal_totals(const MessageState& m) {
  const Index q = m.q_base;
  VectorXd tot = VectorXd::Zero(q);
  for (Index i = 0; i < q; ++i)
    for (Index j = 0; j < q; ++j) {
      if (i == j) continue;
      const Index p = i * (q - 1) + (j < i ? j : j - 1);
      tot[i] += logit(m.p_tr1[p]);
      tot[j] += logit(m.p_tr2[p]);
    }
  return tot;
}

double blend(double fresh, double old, double damping) { return damping > 0 ? (1 - damping) * fresh + damping * old : fresh; }

}  // namespace

VectorXd sweep(MessageState& m, const VectorXd& inbound, const CrossIsing& ising, double damping) {
  check(m, inbound, ising);
  const Index q = m.q_base, np = m.pair_count();
  VectorXd delta(4 * np);

  for (Index i = 0; i < q; ++i)
    for (Index j = 0; j < q; ++j) {
      if (i == j) continue;
      const Index p = ising.pair_index(i, j);
      const double lb = logit(inbound[i * q + j]);
      m.p_tp1[p] = logistic(lb + logit(m.n_tp2[p]));
      const double tr1 = blend(logistic(factor_message(ising.omega[2 * p], m.p_tp1[p])), m.p_tr1[p], damping);
      delta[p] = tr1 - m.p_tr1[p];
      m.p_tr1[p] = tr1;
      m.p_tp2[p] = logistic(lb + logit(m.n_tp1[p]));
      const double tr2 = blend(logistic(factor_message(ising.omega[2 * p + 1], m.p_tp2[p])), m.p_tr2[p], damping);
      delta[np + p] = tr2 - m.p_tr2[p];
      m.p_tr2[p] = tr2;
    }

  const VectorXd tot = diagonal_totals(m);
  for (Index i = 0; i < q; ++i)
    for (Index j = 0; j < q; ++j) {
      if (i == j) continue;
      const Index p = ising.pair_index(i, j);
      m.n_tr1[p] = logistic(logit(inbound[i * q + i]) + tot[i] - logit(m.p_tr1[p]));
      const double tp1 = blend(logistic(factor_message(ising.omega[2 * p], m.n_tr1[p])), m.n_tp1[p], damping);
      delta[2 * np + p] = tp1 - m.n_tp1[p];
      m.n_tp1[p] = tp1;
      m.n_tr2[p] = logistic(logit(inbound[j * q + j]) + tot[j] - logit(m.p_tr2[p]));
      const double tp2 = blend(logistic(factor_message(ising.omega[2 * p + 1], m.n_tr2[p])), m.n_tp2[p], damping);
      delta[3 * np + p] = tp2 - m.n_tp2[p];
      m.n_tp2[p] = tp2;
    }
  return delta;
}

CrossMpResult run(const VectorXd& inbound, const CrossIsing& ising, const CrossMpOptions& options) {
  if (options.max_sweeps < 1) throw std::invalid_argument("crossmp run: max_sweeps must be >= 1");
  CrossMpResult res;
  res.messages = MessageState::uninformative(ising.q_base);
  VectorXd prev;
  Eigen::VectorXi flips;
  for (int s = 0; s < options.max_sweeps; ++s) {
    const VectorXd d = sweep(res.messages, inbound, ising, res.damped ? options.damping : 0.0);
    res.sweeps = s + 1;
    res.last_change = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
    if (res.last_change < options.tol) {
      res.converged = true;
      break;
    }
    if (!res.damped) {
      if (prev.size() == 0) {
        flips = Eigen::VectorXi::Zero(d.size());
      } else {
        for (Index k = 0; k < d.size(); ++k) flips[k] = d[k] * prev[k] < 0 ? flips[k] + 1 : 0;
        if (flips.maxCoeff() >= options.oscillation_sweeps) res.damped = true;
      }
      prev = d;
    }
  }
  return res;
}

VectorXd outbound(const MessageState& m, const VectorXd& inbound, bool strict_extrinsic) {
  const Index q = m.q_base;
  if (inbound.size() != q * q) throw std::invalid_argument("outbound: inbound must have length Q^2");
  VectorXd ext = VectorXd::Zero(q * q);
  const VectorXd tot = diagonal_totals(m);
  for (Index i = 0; i < q; ++i) ext[i * q + i] = tot[i];
  for (Index i = 0; i < q; ++i)
    for (Index j = 0; j < q; ++j) {
      if (i == j) continue;
      const Index p = i * (q - 1) + (j < i ? j : j - 1);
      ext[i * q + j] = logit(m.n_tp1[p]) + logit(m.n_tp2[p]);
    }
  VectorXd out(q * q);
  for (Index c = 0; c < q * q; ++c) {
    if (strict_extrinsic)
      out[c] = logistic(ext[c]);
    else
      out[c] = ext[c] == 0.0 ? inbound[c] : logistic(logit(inbound[c]) + ext[c]);
  }
  return out;
}

}  // namespace mpsense
