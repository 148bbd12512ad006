#pragma once

#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "mpsense/types.hpp"

namespace mpsense {

/// ULA response with half-wavelength spacing; element m is exp(j*pi*m*sin(angle)).
template <typename Real>
CVec<Real> steering_vector(Real angle, Index n) {
  if (n < 1) throw std::invalid_argument("steering_vector: element count must be >= 1");
  CVec<Real> a(n);
  const Real phase = kPi<Real> * std::sin(angle);
  for (Index m = 0; m < n; ++m) a[m] = std::polar(Real(1), phase * Real(m));
  return a;
}

/// d/d(angle) of steering_vector: entry m is j*pi*m*cos(angle)*a[m].
template <typename Real>
CVec<Real> steering_derivative(Real angle, Index n) {
  CVec<Real> a = steering_vector(angle, n);
  const Real c = kPi<Real> * std::cos(angle);
  for (Index m = 0; m < n; ++m) a[m] *= std::complex<Real>(Real(0), c * Real(m));
  return a;
}

/// Large-scale amplitude of a monostatic (direct) echo.
template <typename Real>
Real gain_direct(Real range, Real rcs, Real wavelength) {
  if (!(range > 0) || !(rcs > 0) || !(wavelength > 0))
    throw std::domain_error("gain_direct: inputs must be positive");
  const Real pi = kPi<Real>;
  return std::sqrt(wavelength * wavelength * rcs / (Real(64) * pi * pi * pi * std::pow(range, 4)));
}

/// Large-scale amplitude of the radar -> i -> j -> radar echo.
template <typename Real>
Real gain_first_order(Real range_i, Real range_j, Real pair_range, Real rcs_ij, Real rcs_ji,
                      Real wavelength) {
  if (!(range_i > 0) || !(range_j > 0) || !(pair_range > 0) || !(rcs_ij > 0) || !(rcs_ji > 0) ||
      !(wavelength > 0))
    throw std::domain_error("gain_first_order: inputs must be positive");
  const Real four_pi = Real(4) * kPi<Real>;
  const Real denom = std::pow(four_pi, 4) * range_i * range_i * pair_range * pair_range *
                     range_j * range_j;
  return std::sqrt(wavelength * wavelength * rcs_ij * rcs_ji / denom);
}

enum class WaveformKind { Orthogonal, RandomUnitModulus };

struct RadarConfig {
  int m_t = 16;
  int m_r = 16;
  double wavelength = 299792458.0 / 4e9;
  int snapshots = 16;
  double transmit_power = 1.0;  // watts (30 dBm)
  WaveformKind waveform = WaveformKind::Orthogonal;

  void validate() const;
};

struct Target {
  double angle = 0.0;  // radians, (-pi/2, pi/2)
  double range = 1.0;  // meters
  double rcs = 0.1;    // m^2
};

/// Target placement plus the quantities the fading draw does not touch.
struct SceneGeometry {
  std::vector<Target> targets;
  double bistatic_rcs = 1.0;  // m^2, used for every ordered pair
  // Receive SNR in dB; +inf gives a noiseless scene.
  double snr_db = std::numeric_limits<double>::infinity();
};

struct Scenario {
  std::vector<Target> targets;
  VectorXc direct_gains;       // alpha_k
  VectorXc first_order_gains;  // beta_{i,j}, see pair_index
  MatrixXd pair_ranges;        // l_{i,j}, symmetric, zero diagonal
  MatrixXd bistatic_rcs;       // Psi_{i,j}
  double noise_variance = 0.0;

  Index target_count() const { return static_cast<Index>(targets.size()); }
  /// Position of ordered pair (i, j), i != j, in first_order_gains (i-major).
  static Index pair_index(Index i, Index j, Index k) { return i * (k - 1) + (j < i ? j : j - 1); }
};

struct Observation {
  VectorXc y;              // vec(R U^H), length m_t * m_r, column-major
  MatrixXc waveform_gram;  // U U^H
};

/// Law-of-cosines distance between two targets given in polar form around the radar.
double pair_distance(const Target& a, const Target& b);

/// Expected ||H U||_F^2 over the fading draw, with E[U U^H] = (P_T L / m_t) I.
double expected_signal_energy(const RadarConfig& config, const Scenario& scenario);

/// Received NLoS-to-LoS large-scale power ratio sum(h^2) / sum(g^2).
double nlos_los_ratio(const RadarConfig& config, const SceneGeometry& geometry);

/// Draws small-scale fading and derives the noise level from the requested SNR.
template <typename Rng>
Scenario synthesize(const RadarConfig& config, const SceneGeometry& geometry, Rng& rng);

/// Transmit waveform U (m_t x L).
template <typename Rng>
MatrixXc make_waveform(const RadarConfig& config, Rng& rng);

/// Builds R = H U + N and returns y = vec(R U^H).
template <typename Rng>
Observation generate_observation(const Scenario& scenario, const RadarConfig& config, Rng& rng);

/// Noise-free channel H (m_r x m_t) of the scene.
MatrixXc channel_matrix(const Scenario& scenario, const RadarConfig& config);

Scenario synthesize_with_fading(const RadarConfig& config, const SceneGeometry& geometry,
                                const VectorXc& zeta, const VectorXc& epsilon);

void to_json(nlohmann::json& j, const RadarConfig& c);
void from_json(const nlohmann::json& j, RadarConfig& c);
void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);
void to_json(nlohmann::json& j, const Observation& o);
void from_json(const nlohmann::json& j, Observation& o);

// ---------------------------------------------------------------------------

template <typename Rng>
Scenario synthesize(const RadarConfig& config, const SceneGeometry& geometry, Rng& rng) {
  const Index k = static_cast<Index>(geometry.targets.size());
  VectorXc zeta(k);
  for (Index i = 0; i < k; ++i) zeta[i] = complex_normal<double>(rng);
  VectorXc eps(k * (k - 1));
  for (Index p = 0; p < eps.size(); ++p) eps[p] = complex_normal<double>(rng);
  return synthesize_with_fading(config, geometry, zeta, eps);
}

template <typename Rng>
MatrixXc make_waveform(const RadarConfig& config, Rng& rng) {
  const Index mt = config.m_t, len = config.snapshots;
  const double amp = std::sqrt(config.transmit_power / double(mt));
  MatrixXc u(mt, len);
  if (config.waveform == WaveformKind::Orthogonal) {
    // Rows of the L-point DFT: U U^H = (P_T L / m_t) I.
    for (Index m = 0; m < mt; ++m)
      for (Index l = 0; l < len; ++l)
        u(m, l) = std::polar(amp, -2.0 * kPi<double> * double(m * l) / double(len));
  } else {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi<double>);
    for (Index m = 0; m < mt; ++m)
      for (Index l = 0; l < len; ++l) u(m, l) = std::polar(amp, phase(rng));
  }
  return u;
}

template <typename Rng>
Observation generate_observation(const Scenario& scenario, const RadarConfig& config, Rng& rng) {
  config.validate();
  const MatrixXc u = make_waveform(config, rng);
  MatrixXc r = channel_matrix(scenario, config) * u;
  if (scenario.noise_variance > 0) {
    for (Index l = 0; l < r.cols(); ++l)
      for (Index m = 0; m < r.rows(); ++m) r(m, l) += complex_normal<double>(rng, scenario.noise_variance);
  }
  Observation obs;
  const MatrixXc y = r * u.adjoint();
  obs.y = Eigen::Map<const VectorXc>(y.data(), y.size());
  obs.waveform_gram = u * u.adjoint();
  return obs;
}

}  // namespace mpsense
