#pragma once

#include "nlrec/objective.hpp"
#include "nlrec/solvers.hpp"
#include "nlrec/synth.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace nlrec {

enum class SolverKind { Rtr2, Altmin1, Altmin2, Simple };
const char* to_string(SolverKind s);
SolverKind parse_solver(const std::string& name);

struct LambdaSchedule {
  double lambda0 = 1e-6;
  double factor = 10.0;
  int steps = 13;
  double plateau_factor = 1.5;  // ‖A(X*) − b̃‖ within this factor of its minimum
};

struct ExperimentConfig {
  enum class Data { Uos, Clusters };
  enum class Sensing { Mask, Dense };

  Data data = Data::Uos;
  UosSpec uos;
  ClusterSpec clusters;

  Sensing sensing = Sensing::Mask;
  double delta = 0.6;        // mask: observed fraction; dense: m = round(δ·n·s) unless m is set
  Eigen::Index m = 0;
  double noise_sigma = 0.0;

  LiftingSpec lifting;       // n is filled in from the data spec
  std::optional<Eigen::Index> rank;  // default: numerical rank of the lifted truth
  double rank_tol = 1e-8;

  SolverKind solver = SolverKind::Rtr2;
  RtrConfig rtr;
  AltminConfig altmin;

  int trials = 1;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out;
  double success_rmse = 1e-3;

  // Sweeps.
  std::vector<double> deltas;
  std::string sweep_param;  // "pts_per", "k", "dim", "n" or empty
  std::vector<double> sweep_values;
  LambdaSchedule lambda;
  std::vector<int> rank_offsets{-2, -1, 0, 1, 2, 3, 4};

  void validate() const;
  Eigen::Index ambient() const { return data == Data::Uos ? uos.n : clusters.n; }
  Eigen::Index columns() const;
};

/// Reads a JSON config; unknown or malformed fields raise ConfigError naming the field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// One generated problem: truth, measurements, objective and start point.
struct Problem {
  Matrix truth;
  std::vector<int> labels;
  std::shared_ptr<const MeasurementSubspace> meas;
  Vector clean;  // A(M); equals meas->rhs() without noise
  Eigen::Index true_rank = 0;
  Objective objective;
  ProductPoint start;
};

std::uint64_t trial_seed(std::uint64_t base, int trial);
Problem make_problem(const ExperimentConfig& cfg, std::uint64_t seed,
                     std::optional<Eigen::Index> rank_override = std::nullopt);
SolveResult run_solver(const ExperimentConfig& cfg, const Objective& obj, const ProductPoint& z0,
                       const Matrix* truth);

struct TrialResult {
  int index = 0;
  std::uint64_t seed = 0;
  Eigen::Index rank = 0;
  double rmse = 0.0;
  bool success = false;
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;
  double final_gnorm = 0.0;
  double final_cost = 0.0;
  double rand_index = -1.0;  // clustering runs only
  double seconds = 0.0;
  SolveTrace trace;
};

struct RecoverReport {
  std::vector<TrialResult> trials;
  double success_fraction = 0.0;
  double mean_rmse = 0.0;
};

RecoverReport run_recover(const ExperimentConfig& cfg);
RecoverReport run_cluster(const ExperimentConfig& cfg);

struct PhaseReport {
  std::vector<double> deltas;
  std::vector<double> params;
  std::vector<std::vector<double>> fraction;  // [param][delta]
};

PhaseReport run_phase(const ExperimentConfig& cfg);
/// Clustering grid over deltas × number of clusters.
PhaseReport run_cluster_grid(const ExperimentConfig& cfg);

struct NoiseStep {
  double lambda = 0.0;
  double resid_clean = 0.0;   // ‖A(X*) − b̃‖, b̃ = A(M)
  double resid_noisy = 0.0;   // ‖A(X*) − b‖
  double error = 0.0;         // ‖X* − M‖
  double lifted_resid = 0.0;  // ‖Φ(X*) − P_U Φ(X*)‖
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIter;
};

struct NoiseReport {
  std::vector<NoiseStep> steps;
  int selected = -1;
  double noise_norm = 0.0;  // ‖A(M) − b‖
};

NoiseReport run_noise(const ExperimentConfig& cfg, std::uint64_t seed);
/// Index of λ*: least lifted residual among steps whose clean residual is on the plateau.
int select_lambda(const std::vector<NoiseStep>& steps, double plateau_factor);

struct RankSweepReport {
  std::vector<int> offsets;
  std::vector<double> fraction;
  std::vector<std::vector<TrialResult>> trials;  // [offset][trial]
};

RankSweepReport run_rank_sweep(const ExperimentConfig& cfg);

// Output helpers; all floats with 17 significant digits.
void write_trials_csv(const std::string& path, const std::vector<TrialResult>& trials);
void write_heatmap_csv(const std::string& path, const PhaseReport& rep, const std::string& param);
void write_json(const std::string& path, const nlohmann::json& j);

}  // namespace nlrec
