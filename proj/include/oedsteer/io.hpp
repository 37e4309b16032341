#pragma once

/// Text artifact formats: field and wind files, low-rank posterior and ROM
/// factors, CSV outputs, PPM rendering, and run manifests. All writers are
/// deterministic: identical inputs give byte-identical files.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "oedsteer/inversion.hpp"
#include "oedsteer/rom.hpp"
#include "oedsteer/steering.hpp"

namespace oedsteer {

/// `FIELD nx ny x0 y0 dx dy t`, then ny rows of nx values from y0 upward;
/// masked cells written as `nan`.
void write_field(const std::filesystem::path& path, const ScalarField& field);
ScalarField read_field(const std::filesystem::path& path, const Grid& grid);
/// Reads the header only and rebuilds the grid (masked cells from `nan`s).
Grid read_field_grid(const std::filesystem::path& path);

/// `WIND nx ny x0 y0 dx dy`, then the (nx+1)*ny u-face block and the
/// nx*(ny+1) v-face block.
void write_wind(const std::filesystem::path& path, const WindField& wind);
WindField read_wind(const std::filesystem::path& path, const Grid& grid);

/// `LRPOST r n_dof`, eigenvalue line, then r eigenvector lines.
void write_lowrank(const std::filesystem::path& path, const LowRankPosterior& lr);
LowRankPosterior read_lowrank(const std::filesystem::path& path, const BiLaplacianPrior& prior);

/// `ROM r n_dof q precond_flag`, then S, U, V blocks.
void write_rom(const std::filesystem::path& path, const RomOperator& rom);
RomOperator read_rom(const std::filesystem::path& path, const Grid& grid);

/// `index,t,x,y,value` per measurement.
void write_observations_csv(const std::filesystem::path& path, const Observations& obs);

/// `index,x,y,weight,selected` per candidate position.
void write_design_csv(const std::filesystem::path& path, const CandidateSet& cs,
                      const Vector& weights, const Vector& selected);

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<std::array<double, 3>>& trajectory);
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<CycleRecord>& metrics);

/// Binary P6 pixmap; grayscale over the finite value range, masked cells in a
/// distinct color. Deterministic bytes for identical input.
void render_field_ppm(const std::filesystem::path& field_file,
                      const std::filesystem::path& out_image);

/// FNV-1a hash of the canonicalized scenario text (sorted key=value lines).
std::uint64_t config_hash(const std::vector<std::pair<std::string, std::string>>& entries);

struct Manifest {
  std::uint64_t scenario_hash = 0;
  std::uint64_t seed = 0;
  std::string command;
  std::vector<std::string> artifacts;
  std::vector<std::pair<std::string, std::string>> notes;
};
void write_manifest(const std::filesystem::path& path, const Manifest& m);

}  // namespace oedsteer
