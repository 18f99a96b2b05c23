#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "monose3/denoising.hpp"
#include "monose3/metrics.hpp"
#include "monose3/reverse.hpp"

namespace monose3 {

inline constexpr const char* kVersion = "0.1.0";

/// Every knob of a harness run. Defaults are the reference hyperparameters
/// where they exist.
struct RunConfig {
  // schedule
  int steps = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double eta = 1.0;
  std::string sigma_form = "absolute";  // absolute | standard
  // normalization and forward diffusion
  double cz = 1.5;
  double z_min = 0.3;
  double z_max = 3.0;
  double gamma = 3.0;
  double margin = 0.05;
  std::string bound = "clamp";  // clamp | reject | none
  // reverse process
  int ddim_steps = 5;
  int refine_steps = 5;
  int refine_timestep = 1;
  int direct_iterations = 10;
  int track_start = 20;
  int track_noise_t = 0;
  std::string init = "canonical";  // canonical | prior | previous
  std::string mode = "ddim";       // ddim | direct | tracking
  std::string denoiser = "perfect";
  // scenarios
  int scenarios = 100;
  int samples = 1000;
  std::uint64_t seed = 0;
  double f_min = 400.0;
  double f_max = 900.0;
  double pixel_noise = 0.0;
  std::string timesteps = "all";  // "all" or comma separated list
  std::string chain;  // chain JSON path or inline JSON text; empty = built-in arm
  // outputs and execution (not part of the reproducibility metadata)
  std::string out = "out";
  bool write_csv = true;
  bool trajectories = false;
  int threads = 0;  // 0 = hardware concurrency

  /// Sets one field from its string form; keys use the CLI spelling with
  /// dashes or underscores.
  void set(const std::string& key, const std::string& value);
  void merge_json(const nlohmann::json& doc);
  /// Fields that determine the output bytes.
  nlohmann::json to_json() const;
  /// Throws InvalidConfig naming the offending field.
  void validate() const;

  Schedule make_schedule() const;
  NormConfig norm_config() const;
  NoiseScales noise_scales() const;
  FrustumBox frustum_box() const;
  BoundMode bound_mode() const;
  ScenarioRanges scenario_ranges() const;
  ChainSpec chain_spec() const;
  DenoiserSpec denoiser_spec() const;
  std::vector<int> timestep_list() const;
};

struct CommandResult {
  int exit_code = 0;
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;
};

CommandResult cmd_schedule(const RunConfig& cfg);
CommandResult cmd_diffuse(const RunConfig& cfg);
CommandResult cmd_estimate(const RunConfig& cfg);
CommandResult cmd_trainsim(const RunConfig& cfg);

/// Dispatches on "schedule", "diffuse", "estimate" or "trainsim".
CommandResult run_command(const RunConfig& cfg, const std::string& command);

/// Per-scenario outcome of the estimate command.
struct EstimateRecord {
  std::uint64_t index = 0;
  double add = 0.0;
  int steps = 0;
  int clamp_events = 0;
  bool aborted = false;
  std::string reason;
  /// Wall time of the reverse process alone, excluding scenario synthesis.
  double estimator_seconds = 0.0;
  Trajectory trajectory;
};

/// The estimate loop without file output; used by cmd_estimate and tests.
std::vector<EstimateRecord> estimate_scenarios(const RunConfig& cfg);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace monose3
