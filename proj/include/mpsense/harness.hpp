#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpsense/driver.hpp"
#include "mpsense/scenario.hpp"

namespace mpsense {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SweepAxis { SnrDb, NlosLosRatioDb, TargetCount };

std::string to_string(SweepAxis axis);

struct ExperimentConfig {
  RadarConfig radar{};
  Index q = 16;
  int targets = 1;
  SweepAxis axis = SweepAxis::SnrDb;
  std::vector<double> sweep_values;
  double snr_db = 10.0;  // used when the sweep is over another axis
  // NLoS/LoS power ratio in dB; NaN keeps the drawn geometry unscaled.
  double nlos_los_ratio_db = std::numeric_limits<double>::quiet_NaN();
  int trials = 100;
  std::uint64_t seed = 1;
  std::vector<Algorithm> algorithms{Algorithm::SfTvbi, Algorithm::SfTvbiNoCross, Algorithm::TurboVbi, Algorithm::Omp};

  // Scene placement.
  double jitter = 0.0;          // uniform off-grid jitter as a fraction of half the grid spacing
  double max_angle_deg = 90.0;  // only base cells with |angle| below this hold targets
  double min_range = 1.0;
  double max_range = 3.0;
  double rcs = 0.1;
  double bistatic_rcs = 1.0;

  AlgorithmConfig sf = AlgorithmConfig::sf_tvbi();
  AlgorithmConfig turbo = AlgorithmConfig::turbo_vbi();
  Index omp_atoms = -1;  // -1: K^2, 0: residual stop only

  int threads = 0;  // 0: hardware concurrency

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown algorithms or bad values raise ConfigError.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

struct AlgorithmResult {
  Algorithm algorithm = Algorithm::SfTvbi;
  std::vector<double> estimated;   // radians, ascending
  std::vector<double> sq_errors;   // rad^2 per true target after association
  std::vector<bool> detected;      // per true target
  double ms = 0.0;
  bool converged = false;
  std::string error;
};

struct TrialRecord {
  Index sweep_index = 0;
  double sweep_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;  // replays the trial through run_trial_seeded
  int attempts = 1;
  std::vector<double> true_angles;
  std::vector<AlgorithmResult> results;

  const AlgorithmResult& result(Algorithm a) const;
};

/// Per-trial seed derived from (base seed, sweep index, trial, attempt).
std::uint64_t trial_seed(std::uint64_t base, Index sweep_index, int trial, int attempt);

/// Synthesizes, observes and runs every configured algorithm. Deterministic in its arguments.
TrialRecord run_trial(const ExperimentConfig& config, Index sweep_index, int trial);
TrialRecord run_trial_seeded(const ExperimentConfig& config, double sweep_value, std::uint64_t seed);

/// Greedy nearest association; unmatched true targets cost (pi/2)^2.
std::vector<double> associate_errors(const std::vector<double>& truth, const std::vector<double>& estimate);

inline constexpr double kMissPenalty = 1.5707963267948966;

double rmse_deg(const std::vector<TrialRecord>& records, Algorithm a);
double detection_probability(const std::vector<TrialRecord>& records, Algorithm a);

struct SummaryRow {
  double sweep_value = 0.0;
  std::string algorithm;
  double rmse_deg = 0.0;
  double p_detect = 0.0;
  double mean_ms = 0.0;
  double convergence_rate = 0.0;
  int trials = 0;

  bool operator==(const SummaryRow&) const = default;
};

struct SweepResult {
  std::vector<SummaryRow> rows;
  std::vector<std::vector<TrialRecord>> records;  // per sweep point
};

/// Runs every trial of every sweep point on a worker pool, then reduces in order.
SweepResult sweep(const ExperimentConfig& config);

std::vector<SummaryRow> summarize(const ExperimentConfig& config, const std::vector<std::vector<TrialRecord>>& records);

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);
void write_trials_csv(const std::filesystem::path& path, const SweepResult& result);
void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& config, const SweepResult& result);

}  // namespace mpsense
