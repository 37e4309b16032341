#pragma once

/// Flat line-oriented scenario configuration (`section.key = value`) with
/// strict validation: unknown keys are errors, all violations are reported at
/// once, and nothing is computed before validation passes.

#include <filesystem>

#include "oedsteer/steering.hpp"

namespace oedsteer {

struct BlobSpec {
  double x = 0, y = 0, radius = 25.0, cap = 0.5, eps = 1e-3;
};

struct Scenario {
  std::string experiment;  // oed1 | oed2 | steer
  std::uint64_t seed = 1;

  int nx = 64, ny = 64;
  double width = 400, height = 400, x0 = -200, y0 = -200;
  std::vector<RegionRect> obstacles;

  std::string wind_mode = "potential";  // potential | uniform | file
  double wind_speed = 10.0;
  std::string wind_inflow = "south";
  double wind_ux = 0.0, wind_uy = 0.0;
  std::string wind_file;

  TransportConfig transport;

  std::vector<BlobSpec> blobs;

  double obs_t0 = 2.0, obs_t_end = 12.0, obs_rate_hz = 5.0, sigma = 0.005;

  int sensors_nx = 12, sensors_ny = 8;
  double sensors_margin = 20.0;

  PriorConfig prior;
  std::string prior_mean_file;

  bool rom_use = false;
  Index rom_rank = 100, rom_oversample = 10;
  int rom_power_iters = 1;

  double design_alpha = 0.1;
  Index design_rank = 60;
  double design_threshold = 0.5;
  int design_maxiter = 500;

  RegionRect qoi_region;
  double qoi_t_start = 0.0, qoi_t_end = 0.0;

  SteeringConfig steer;
  int steer_mobile_nx = 12, steer_mobile_ny = 12;
  double steer_mobile_margin = 20.0;
  std::vector<std::pair<double, double>> steer_stationary;

  int snapshot_stride = 0;

  std::filesystem::path source_path;
  std::vector<std::pair<std::string, std::string>> entries;  // raw, for hashing
};

Scenario parse_scenario(const std::filesystem::path& path);

/// Observation time lattice [t0, t_end] at the given rate, snapped to the
/// transport time grid.
std::vector<double> observation_times(double t0, double t_end, double rate_hz, double dt);

/// All run-of-the-mill objects a scenario describes, built once and wired up.
struct ScenarioContext {
  Scenario scenario;
  std::unique_ptr<Grid> grid;
  std::unique_ptr<WindField> wind;
  std::unique_ptr<TransportOperator> transport;
  std::unique_ptr<BiLaplacianPrior> prior;
  std::unique_ptr<CandidateSet> candidates;  // experiment lattice (sensors or steering)
  std::unique_ptr<ForwardMap> forward;
  std::unique_ptr<RomOperator> rom;  // present iff rom.use (or forced)
  ScalarField truth;
  MobileGrid mobile;          // steer experiment only
  Index num_stationary = 0;   // steer experiment only

  const RomOperator* romPtr() const { return rom ? rom.get() : nullptr; }
};

struct ContextOptions {
  bool force_rom = false;   // build the ROM even if the scenario disables it
  bool skip_rom = false;    // never build the ROM
  std::optional<std::uint64_t> seed_override;
};

ScenarioContext build_context(const Scenario& s, const ContextOptions& opts = {});

}  // namespace oedsteer
