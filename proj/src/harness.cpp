#include "mpsense/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace mpsense {

using nlohmann::json;

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::SnrDb: return "snr_db";
    case SweepAxis::NlosLosRatioDb: return "nlos_los_ratio_db";
    case SweepAxis::TargetCount: return "target_count";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  try {
    radar.validate();
    sf.validate();
    turbo.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (q < 2) throw ConfigError("q must be >= 2");
  if (targets < 1) throw ConfigError("targets must be >= 1");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  for (double v : sweep_values) {
    if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
    if (axis == SweepAxis::TargetCount && (v < 1 || v != std::floor(v)))
      throw ConfigError("target_count sweep values must be positive integers");
  }
  if (!(jitter >= 0 && jitter <= 1)) throw ConfigError("jitter must lie in [0, 1]");
  if (!(max_angle_deg > 0 && max_angle_deg <= 90)) throw ConfigError("max_angle_deg must lie in (0, 90]");
  if (!(min_range > 0 && max_range >= min_range)) throw ConfigError("ranges must satisfy 0 < min_range <= max_range");
  if (!(rcs > 0 && bistatic_rcs > 0)) throw ConfigError("rcs values must be positive");
  if (algorithms.empty()) throw ConfigError("at least one algorithm is required");
}

namespace {

json algorithm_json(const AlgorithmConfig& a) {
  return {{"outer_iterations", a.outer_iterations},
          {"estep_sweeps", a.vbi.max_sweeps},
          {"mstep_iterations", a.mstep.max_inner},
          {"initial_pi", a.initial_pi},
          {"omega_init", a.omega_init},
          {"learn_omega", a.learn_omega},
          {"strict_extrinsic", a.strict_extrinsic},
          {"tau_s", a.mstep.tau_s},
          {"stall_tol", a.mstep.stall_tol},
          {"outer_tol", a.outer_tol},
          {"initial_noise_fraction", a.vbi.initial_noise_fraction}};
}

void algorithm_from(const json& j, AlgorithmConfig& a) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "outer_iterations") a.outer_iterations = v.get<int>();
    else if (k == "estep_sweeps") a.vbi.max_sweeps = v.get<int>();
    else if (k == "mstep_iterations") a.mstep.max_inner = v.get<int>();
    else if (k == "initial_pi") a.initial_pi = v.get<double>();
    else if (k == "omega_init") a.omega_init = v.get<double>();
    else if (k == "learn_omega") a.learn_omega = v.get<bool>();
    else if (k == "strict_extrinsic") a.strict_extrinsic = v.get<bool>();
    else if (k == "tau_s") a.mstep.tau_s = v.get<double>();
    else if (k == "stall_tol") a.mstep.stall_tol = v.get<double>();
    else if (k == "outer_tol") a.outer_tol = v.get<double>();
    else if (k == "initial_noise_fraction") a.vbi.initial_noise_fraction = v.get<double>();
    else throw ConfigError("unknown algorithm setting '" + k + "'");
  }
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  std::vector<std::string> algs;
  for (Algorithm a : c.algorithms) algs.push_back(to_string(a));
  j = json{{"radar", c.radar},
           {"q", c.q},
           {"targets", c.targets},
           {"sweep", {{"axis", to_string(c.axis)}, {"values", c.sweep_values}}},
           {"snr_db", c.snr_db},
           {"trials", c.trials},
           {"seed", c.seed},
           {"algorithms", algs},
           {"jitter", c.jitter},
           {"max_angle_deg", c.max_angle_deg},
           {"min_range", c.min_range},
           {"max_range", c.max_range},
           {"rcs", c.rcs},
           {"bistatic_rcs", c.bistatic_rcs},
           {"sf_tvbi", algorithm_json(c.sf)},
           {"turbo_vbi", algorithm_json(c.turbo)},
           {"omp_atoms", c.omp_atoms},
           {"threads", c.threads}};
  if (std::isnan(c.nlos_los_ratio_db))
    j["nlos_los_ratio_db"] = nullptr;
  else
    j["nlos_los_ratio_db"] = c.nlos_los_ratio_db;
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "radar") c.radar = v.get<RadarConfig>();
      else if (k == "q") c.q = v.get<Index>();
      else if (k == "targets") c.targets = v.get<int>();
      else if (k == "sweep") {
        const std::string axis = v.at("axis").get<std::string>();
        if (axis == "snr_db") c.axis = SweepAxis::SnrDb;
        else if (axis == "nlos_los_ratio_db") c.axis = SweepAxis::NlosLosRatioDb;
        else if (axis == "target_count") c.axis = SweepAxis::TargetCount;
        else throw ConfigError("unknown sweep axis '" + axis + "'");
        c.sweep_values = v.value("values", std::vector<double>{});
      } else if (k == "snr_db") c.snr_db = v.get<double>();
      else if (k == "nlos_los_ratio_db") c.nlos_los_ratio_db = v.is_null() ? std::nan("") : v.get<double>();
      else if (k == "trials") c.trials = v.get<int>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "algorithms") {
        c.algorithms.clear();
        for (const auto& name : v) c.algorithms.push_back(algorithm_from_string(name.get<std::string>()));
      } else if (k == "jitter") c.jitter = v.get<double>();
      else if (k == "max_angle_deg") c.max_angle_deg = v.get<double>();
      else if (k == "min_range") c.min_range = v.get<double>();
      else if (k == "max_range") c.max_range = v.get<double>();
      else if (k == "rcs") c.rcs = v.get<double>();
      else if (k == "bistatic_rcs") c.bistatic_rcs = v.get<double>();
      else if (k == "sf_tvbi") algorithm_from(v, c.sf);
      else if (k == "turbo_vbi") algorithm_from(v, c.turbo);
      else if (k == "omp_atoms") c.omp_atoms = v.get<Index>();
      else if (k == "threads") c.threads = v.get<int>();
      else throw ConfigError("unknown config key '" + k + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return experiment_from_json(j);
}

// ---------------------------------------------------------------------------

const AlgorithmResult& TrialRecord::result(Algorithm a) const {
  for (const auto& r : results)
    if (r.algorithm == a) return r;
  throw std::out_of_range("TrialRecord: algorithm " + to_string(a) + " was not run");
}

std::uint64_t trial_seed(std::uint64_t base, Index sweep_index, int trial, int attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(sweep_index), static_cast<std::uint32_t>(trial),
                    static_cast<std::uint32_t>(attempt)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

std::vector<double> associate_errors(const std::vector<double>& truth, const std::vector<double>& estimate) {
  struct Cand {
    double d;
    std::size_t t, e;
  };
  std::vector<Cand> cands;
  for (std::size_t t = 0; t < truth.size(); ++t)
    for (std::size_t e = 0; e < estimate.size(); ++e) cands.push_back({std::abs(truth[t] - estimate[e]), t, e});
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });
  std::vector<double> err(truth.size(), kMissPenalty * kMissPenalty);
  std::vector<bool> used_t(truth.size(), false), used_e(estimate.size(), false);
  for (const Cand& c : cands) {
    if (used_t[c.t] || used_e[c.e]) continue;
    used_t[c.t] = used_e[c.e] = true;
    err[c.t] = c.d * c.d;
  }
  return err;
}

namespace {

struct Drawn {
  SceneGeometry geometry;
  std::vector<Index> base;
};

Drawn draw_geometry(const ExperimentConfig& c, const GridModel<double>& grid, int k, double snr_db,
                    double ratio_db, std::mt19937_64& rng) {
  std::vector<Index> allowed;
  const double limit = c.max_angle_deg * kPi<double> / 180.0;
  for (Index i = 0; i < grid.q_base; ++i)
    if (std::abs(grid.base_grid[i]) < limit) allowed.push_back(i);
  if (static_cast<Index>(allowed.size()) < k) throw ConfigError("not enough grid cells for the requested targets");

  Drawn d;
  std::sample(allowed.begin(), allowed.end(), std::back_inserter(d.base), k, rng);
  std::shuffle(d.base.begin(), d.base.end(), rng);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> range(c.min_range, c.max_range);
  for (Index i : d.base) {
    Target t;
    t.angle = grid.base_grid[i] + c.jitter * grid.half_spacing() * unit(rng);
    t.range = range(rng);
    t.rcs = c.rcs;
    d.geometry.targets.push_back(t);
  }
  d.geometry.bistatic_rcs = c.bistatic_rcs;
  d.geometry.snr_db = snr_db;
  if (std::isfinite(ratio_db) && k >= 2) {
    const double natural = nlos_los_ratio(c.radar, d.geometry);
    const double s = std::sqrt(natural / db_to_linear(ratio_db));
    for (auto& t : d.geometry.targets) t.range *= s;
  }
  return d;
}

AlgorithmResult run_algorithm(const ExperimentConfig& c, Algorithm a, const Observation& obs,
                              const GridModel<double>& grid, const std::vector<double>& truth,
                              const std::vector<Index>& true_diag, int k) {
  AlgorithmResult r;
  r.algorithm = a;
  try {
    Estimate est;
    switch (a) {
      case Algorithm::SfTvbi: est = sf_tvbi(obs, grid, c.sf); break;
      case Algorithm::SfTvbiNoCross: {
        AlgorithmConfig nc = c.sf;
        nc.cross_sparsity = false;
        nc.learn_omega = false;
        est = sf_tvbi(obs, grid, nc);
        break;
      }
      case Algorithm::TurboVbi: est = turbo_vbi(obs, grid, c.turbo); break;
      case Algorithm::Omp: est = omp(obs, grid, c.omp_atoms < 0 ? Index(k) * k : c.omp_atoms); break;
    }
    r.estimated = est.direct_angles;
    r.ms = est.elapsed_ms;
    r.converged = est.converged;
    for (Index i : true_diag) r.detected.push_back(est.support[grid.diagonal(i)] != 0);
  } catch (const std::exception& e) {
    r.error = e.what();
    r.detected.assign(truth.size(), false);
  }
  r.sq_errors = associate_errors(truth, r.estimated);
  return r;
}

double point_value(const ExperimentConfig& c, Index sweep_index) {
  return c.sweep_values.empty() ? 0.0 : c.sweep_values[static_cast<std::size_t>(sweep_index)];
}

}  // namespace

TrialRecord run_trial_seeded(const ExperimentConfig& c, double sweep_value, std::uint64_t seed) {
  const GridModel<double> grid = build_grid<double>(c.q);
  int k = c.targets;
  double snr = c.snr_db, ratio = c.nlos_los_ratio_db;
  switch (c.axis) {
    case SweepAxis::SnrDb: snr = sweep_value; break;
    case SweepAxis::NlosLosRatioDb: ratio = sweep_value; break;
    case SweepAxis::TargetCount: k = static_cast<int>(sweep_value); break;
  }
  std::mt19937_64 rng(seed);
  const Drawn d = draw_geometry(c, grid, k, snr, ratio, rng);
  std::vector<double> angles;
  for (const auto& t : d.geometry.targets) angles.push_back(t.angle);
  nearest_grid_assignment(std::span<const double>(angles), grid);  // throws GridCollision

  const Scenario sc = synthesize(c.radar, d.geometry, rng);
  const Observation obs = generate_observation(sc, c.radar, rng);

  TrialRecord rec;
  rec.sweep_value = sweep_value;
  rec.seed = seed;
  rec.true_angles = angles;
  std::sort(rec.true_angles.begin(), rec.true_angles.end());
  std::vector<Index> diag;
  for (double a : angles) diag.push_back(nearest_base_index(grid, a));
  for (Algorithm a : c.algorithms) rec.results.push_back(run_algorithm(c, a, obs, grid, rec.true_angles, diag, k));
  return rec;
}

TrialRecord run_trial(const ExperimentConfig& c, Index sweep_index, int trial) {
  const double value = point_value(c, sweep_index);
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::uint64_t seed = trial_seed(c.seed, sweep_index, trial, attempt);
    try {
      TrialRecord rec = run_trial_seeded(c, value, seed);
      rec.sweep_index = sweep_index;
      rec.trial = trial;
      rec.attempts = attempt + 1;
      return rec;
    } catch (const GridCollision& e) {
      std::clog << "trial " << trial << " at sweep point " << sweep_index << ": " << e.what() << ", resampling\n";
    }
  }
  throw std::runtime_error("run_trial: no collision-free scene after repeated resampling");
}

double rmse_deg(const std::vector<TrialRecord>& records, Algorithm a) {
  if (records.empty()) throw std::invalid_argument("rmse_deg: no records");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& rec : records) {
    const auto& r = rec.result(a);
    for (double e : r.sq_errors) sum += e;
    n += r.sq_errors.size();
  }
  return n ? std::sqrt(sum / double(n)) * 180.0 / kPi<double> : 0.0;
}

double detection_probability(const std::vector<TrialRecord>& records, Algorithm a) {
  if (records.empty()) throw std::invalid_argument("detection_probability: no records");
  std::size_t hit = 0, n = 0;
  for (const auto& rec : records) {
    const auto& r = rec.result(a);
    for (bool d : r.detected) hit += d;
    n += r.detected.size();
  }
  return n ? double(hit) / double(n) : 0.0;
}

std::vector<SummaryRow> summarize(const ExperimentConfig& c, const std::vector<std::vector<TrialRecord>>& records) {
  std::vector<SummaryRow> rows;
  for (std::size_t p = 0; p < records.size(); ++p) {
    const auto& recs = records[p];
    if (recs.empty()) continue;
    for (Algorithm a : c.algorithms) {
      SummaryRow row;
      row.sweep_value = recs.front().sweep_value;
      row.algorithm = to_string(a);
      row.rmse_deg = rmse_deg(recs, a);
      row.p_detect = detection_probability(recs, a);
      double ms = 0.0, conv = 0.0;
      for (const auto& rec : recs) {
        ms += rec.result(a).ms;
        conv += rec.result(a).converged;
      }
      row.mean_ms = ms / double(recs.size());
      row.convergence_rate = conv / double(recs.size());
      row.trials = static_cast<int>(recs.size());
      rows.push_back(row);
    }
  }
  return rows;
}

SweepResult sweep(const ExperimentConfig& c) {
  c.validate();
  const Index points = static_cast<Index>(c.sweep_values.size());
  SweepResult res;
  res.records.assign(static_cast<std::size_t>(points), std::vector<TrialRecord>(static_cast<std::size_t>(c.trials)));
  const std::size_t total = static_cast<std::size_t>(points) * static_cast<std::size_t>(c.trials);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t w = next++; w < total; w = next++) {
      const Index p = static_cast<Index>(w / static_cast<std::size_t>(c.trials));
      const int t = static_cast<int>(w % static_cast<std::size_t>(c.trials));
      TrialRecord rec;
      try {
        rec = run_trial(c, p, t);
      } catch (const std::exception& e) {
        rec.sweep_index = p;
        rec.sweep_value = point_value(c, p);
        rec.trial = t;
        rec.seed = trial_seed(c.seed, p, t, 0);
        for (Algorithm a : c.algorithms) {
          AlgorithmResult r;
          r.algorithm = a;
          r.error = e.what();
          rec.results.push_back(r);
        }
      }
      res.records[static_cast<std::size_t>(p)][static_cast<std::size_t>(t)] = std::move(rec);
    }
  };
  unsigned n = c.threads > 0 ? unsigned(c.threads) : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(total, 1)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  res.rows = summarize(c, res.records);
  return res;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr const char* kSummaryHeader = "sweep_value,algorithm,rmse_deg,p_detect,mean_ms,convergence_rate,trials";

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  auto out = open_out(path);
  out << kSummaryHeader << '\n';
  for (const auto& r : rows)
    out << fmt(r.sweep_value) << ',' << r.algorithm << ',' << fmt(r.rmse_deg) << ',' << fmt(r.p_detect) << ','
        << fmt(r.mean_ms) << ',' << fmt(r.convergence_rate) << ',' << r.trials << '\n';
}

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kSummaryHeader) throw std::runtime_error("unexpected summary header");
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell[7];
    for (auto& s : cell) std::getline(ss, s, ',');
    rows.push_back({std::stod(cell[0]), cell[1], std::stod(cell[2]), std::stod(cell[3]), std::stod(cell[4]),
                    std::stod(cell[5]), std::stoi(cell[6])});
  }
  return rows;
}

void write_trials_csv(const std::filesystem::path& path, const SweepResult& result) {
  auto out = open_out(path);
  out << "sweep_value,trial,seed,attempts,algorithm,true_angles_deg,estimated_angles_deg,sq_error_deg2,detected,ms,"
         "converged,error\n";
  auto join_deg = [](const std::vector<double>& v, double scale) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + fmt(v[i] * scale);
    return s;
  };
  const double deg = 180.0 / kPi<double>;
  for (const auto& point : result.records)
    for (const auto& rec : point)
      for (const auto& r : rec.results) {
        std::string det;
        for (std::size_t i = 0; i < r.detected.size(); ++i) det += (i ? ";" : "") + std::string(r.detected[i] ? "1" : "0");
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        out << fmt(rec.sweep_value) << ',' << rec.trial << ',' << rec.seed << ',' << rec.attempts << ','
            << to_string(r.algorithm) << ',' << join_deg(rec.true_angles, deg) << ',' << join_deg(r.estimated, deg)
            << ',' << join_deg(r.sq_errors, deg * deg) << ',' << det << ',' << fmt(r.ms) << ','
            << (r.converged ? 1 : 0) << ',' << err << '\n';
      }
}

void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& config, const SweepResult& result) {
  std::filesystem::create_directories(dir);
  write_summary_csv(dir / "summary.csv", result.rows);
  write_trials_csv(dir / "trials.csv", result);
  json rows = json::array();
  for (const auto& r : result.rows)
    rows.push_back({{"sweep_value", r.sweep_value},
                    {"algorithm", r.algorithm},
                    {"rmse_deg", r.rmse_deg},
                    {"p_detect", r.p_detect},
                    {"mean_ms", r.mean_ms},
                    {"convergence_rate", r.convergence_rate},
                    {"trials", r.trials}});
  json j{{"config", config}, {"axis", to_string(config.axis)}, {"rows", rows}};
  auto out = open_out(dir / "summary.json");
  out << j.dump(2) << '\n';
}

}  // namespace mpsense
