#include "mpsense/scenario.hpp"

#include <cmath>
#include <stdexcept>

namespace mpsense {

void RadarConfig::validate() const {
  if (m_t < 1 || m_r < 1) throw std::invalid_argument("RadarConfig: antenna counts must be >= 1");
  if (snapshots < m_t) throw std::invalid_argument("RadarConfig: snapshots must be >= m_t");
  if (!(wavelength > 0)) throw std::invalid_argument("RadarConfig: wavelength must be positive");
  if (!(transmit_power > 0)) throw std::invalid_argument("RadarConfig: transmit power must be positive");
}

double pair_distance(const Target& a, const Target& b) {
  const double d2 = a.range * a.range + b.range * b.range -
                    2.0 * a.range * b.range * std::cos(a.angle - b.angle);
  return std::sqrt(std::max(d2, 0.0));
}

namespace {

void validate_geometry(const SceneGeometry& g) {
  for (std::size_t i = 0; i < g.targets.size(); ++i) {
    const Target& t = g.targets[i];
    if (!(std::abs(t.angle) < kPi<double> / 2))
      throw std::invalid_argument("SceneGeometry: target angle outside (-pi/2, pi/2)");
    if (!(t.range > 0) || !(t.rcs > 0))
      throw std::invalid_argument("SceneGeometry: target range and rcs must be positive");
    for (std::size_t j = 0; j < i; ++j)
      if (g.targets[j].angle == t.angle)
        throw std::invalid_argument("SceneGeometry: coincident target angles");
  }
  if (!(g.bistatic_rcs > 0)) throw std::invalid_argument("SceneGeometry: bistatic rcs must be positive");
}

}  // namespace

double nlos_los_ratio(const RadarConfig& config, const SceneGeometry& geometry) {
  double direct = 0.0, nlos = 0.0;
  const auto& t = geometry.targets;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double g = gain_direct(t[i].range, t[i].rcs, config.wavelength);
    direct += g * g;
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (i == j) continue;
      const double h = gain_first_order(t[i].range, t[j].range, pair_distance(t[i], t[j]),
                                        geometry.bistatic_rcs, geometry.bistatic_rcs,
                                        config.wavelength);
      nlos += h * h;
    }
  }
  return direct > 0 ? nlos / direct : 0.0;
}

Scenario synthesize_with_fading(const RadarConfig& config, const SceneGeometry& geometry,
                                const VectorXc& zeta, const VectorXc& epsilon) {
  config.validate();
  validate_geometry(geometry);
  const Index k = static_cast<Index>(geometry.targets.size());
  if (zeta.size() != k || epsilon.size() != k * (k - 1))
    throw std::invalid_argument("synthesize: fading vector sizes do not match target count");

  Scenario s;
  s.targets = geometry.targets;
  s.direct_gains.resize(k);
  s.first_order_gains.resize(k * (k - 1));
  s.pair_ranges = MatrixXd::Zero(k, k);
  s.bistatic_rcs = MatrixXd::Constant(k, k, geometry.bistatic_rcs);
  s.bistatic_rcs.diagonal().setZero();

  double large_scale_power = 0.0;
  for (Index i = 0; i < k; ++i) {
    const Target& t = s.targets[i];
    const double g = gain_direct(t.range, t.rcs, config.wavelength);
    s.direct_gains[i] = zeta[i] * g;
    large_scale_power += g * g;
  }
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      if (i == j) continue;
      const double l = pair_distance(s.targets[i], s.targets[j]);
      s.pair_ranges(i, j) = l;
      const double h = gain_first_order(s.targets[i].range, s.targets[j].range, l,
                                        s.bistatic_rcs(i, j), s.bistatic_rcs(j, i),
                                        config.wavelength);
      s.first_order_gains[Scenario::pair_index(i, j, k)] = epsilon[Scenario::pair_index(i, j, k)] * h;
      large_scale_power += h * h;
    }
  }

  // Receive SNR = E||H U||^2 / E||N||^2 = P_T L m_r S / (m_r L sigma^2).
  const double snr = db_to_linear(geometry.snr_db);
  s.noise_variance = std::isinf(snr) ? 0.0 : config.transmit_power * large_scale_power / snr;
  return s;
}

double expected_signal_energy(const RadarConfig& config, const Scenario& scenario) {
  double s = 0.0;
  for (Index i = 0; i < scenario.direct_gains.size(); ++i) {
    const Target& t = scenario.targets[i];
    const double g = gain_direct(t.range, t.rcs, config.wavelength);
    s += g * g;
  }
  const Index k = scenario.target_count();
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) {
      if (i == j) continue;
      const double h = gain_first_order(scenario.targets[i].range, scenario.targets[j].range,
                                        scenario.pair_ranges(i, j), scenario.bistatic_rcs(i, j),
                                        scenario.bistatic_rcs(j, i), config.wavelength);
      s += h * h;
    }
  return config.transmit_power * config.snapshots * config.m_r * s;
}

MatrixXc channel_matrix(const Scenario& scenario, const RadarConfig& config) {
  const Index k = scenario.target_count();
  MatrixXc h = MatrixXc::Zero(config.m_r, config.m_t);
  std::vector<VectorXc> at(k), ar(k);
  for (Index i = 0; i < k; ++i) {
    at[i] = steering_vector(scenario.targets[i].angle, Index(config.m_t));
    ar[i] = steering_vector(scenario.targets[i].angle, Index(config.m_r));
  }
  for (Index i = 0; i < k; ++i) h += scenario.direct_gains[i] * ar[i] * at[i].transpose();
  // Ordered pair (i, j): departs towards target i, arrives from target j.
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) {
      if (i == j) continue;
      h += scenario.first_order_gains[Scenario::pair_index(i, j, k)] * ar[j] * at[i].transpose();
    }
  return h;
}

// ---------------------------------------------------------------------------
// JSON: complex numbers as [re, im], vectors as arrays, matrices as row arrays.

namespace {

nlohmann::json complex_array(const VectorXc& v) {
  auto out = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back({v[i].real(), v[i].imag()});
  return out;
}

VectorXc complex_vector(const nlohmann::json& j) {
  VectorXc v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = {j[i].at(0).get<double>(), j[i].at(1).get<double>()};
  return v;
}

template <typename Scalar, typename Convert>
nlohmann::json matrix_rows(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m, Convert conv) {
  auto out = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(conv(m(r, c)));
    out.push_back(row);
  }
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const RadarConfig& c) {
  j = {{"m_t", c.m_t},
       {"m_r", c.m_r},
       {"wavelength", c.wavelength},
       {"snapshots", c.snapshots},
       {"transmit_power", c.transmit_power},
       {"waveform", c.waveform == WaveformKind::Orthogonal ? "orthogonal" : "random_unit_modulus"}};
}

void from_json(const nlohmann::json& j, RadarConfig& c) {
  c.m_t = j.value("m_t", c.m_t);
  c.m_r = j.value("m_r", c.m_r);
  if (j.contains("carrier_hz")) c.wavelength = 299792458.0 / j.at("carrier_hz").get<double>();
  c.wavelength = j.value("wavelength", c.wavelength);
  c.snapshots = j.value("snapshots", c.snapshots);
  if (j.contains("transmit_power_dbm"))
    c.transmit_power = db_to_linear(j.at("transmit_power_dbm").get<double>() - 30.0);
  c.transmit_power = j.value("transmit_power", c.transmit_power);
  const std::string w = j.value("waveform", std::string("orthogonal"));
  if (w == "orthogonal")
    c.waveform = WaveformKind::Orthogonal;
  else if (w == "random_unit_modulus")
    c.waveform = WaveformKind::RandomUnitModulus;
  else
    throw std::invalid_argument("unknown waveform '" + w + "'");
}

void to_json(nlohmann::json& j, const Scenario& s) {
  auto targets = nlohmann::json::array();
  for (const auto& t : s.targets) targets.push_back({{"angle", t.angle}, {"range", t.range}, {"rcs", t.rcs}});
  j = {{"targets", targets},
       {"direct_gains", complex_array(s.direct_gains)},
       {"first_order_gains", complex_array(s.first_order_gains)},
       {"pair_ranges", matrix_rows(s.pair_ranges, [](double v) { return v; })},
       {"bistatic_rcs", matrix_rows(s.bistatic_rcs, [](double v) { return v; })},
       {"noise_variance", s.noise_variance}};
}

void from_json(const nlohmann::json& j, Scenario& s) {
  s.targets.clear();
  for (const auto& t : j.at("targets"))
    s.targets.push_back({t.at("angle").get<double>(), t.at("range").get<double>(), t.at("rcs").get<double>()});
  s.direct_gains = complex_vector(j.at("direct_gains"));
  s.first_order_gains = complex_vector(j.at("first_order_gains"));
  const Index k = static_cast<Index>(s.targets.size());
  s.pair_ranges.resize(k, k);
  s.bistatic_rcs.resize(k, k);
  for (Index r = 0; r < k; ++r)
    for (Index c = 0; c < k; ++c) {
      s.pair_ranges(r, c) = j.at("pair_ranges")[r][c].get<double>();
      s.bistatic_rcs(r, c) = j.at("bistatic_rcs")[r][c].get<double>();
    }
  s.noise_variance = j.at("noise_variance").get<double>();
}

void to_json(nlohmann::json& j, const Observation& o) {
  j = {{"y", complex_array(o.y)},
       {"waveform_gram", matrix_rows(o.waveform_gram, [](const cdouble& v) {
          return nlohmann::json::array({v.real(), v.imag()});
        })}};
}

void from_json(const nlohmann::json& j, Observation& o) {
  o.y = complex_vector(j.at("y"));
  const auto& g = j.at("waveform_gram");
  const Index n = static_cast<Index>(g.size());
  o.waveform_gram.resize(n, n);
  for (Index r = 0; r < n; ++r) {
    if (static_cast<Index>(g[r].size()) != n) throw std::invalid_argument("waveform_gram must be square");
    for (Index c = 0; c < n; ++c) o.waveform_gram(r, c) = {g[r][c].at(0).get<double>(), g[r][c].at(1).get<double>()};
  }
}

}  // namespace mpsense
