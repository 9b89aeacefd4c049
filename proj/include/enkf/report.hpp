#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "enkf/experiments.hpp"

namespace enkf {

inline constexpr int kSchemaVersion = 1;

// FNV-1a 64-bit content hash, used for config identity and artifact
// checksums in manifest.json.
std::uint64_t fnv1a64(std::string_view data);
std::string hash_hex(std::uint64_t h);
std::uint64_t file_checksum(const std::string& path);

// ---------------------------------------------------------------------------
// results.csv

// Row kinds: `replicate` (final-step error of one run and test function),
// `aggregate` (RMS over replicates per cell and test function), `epsilon`
// (per-epsilon d_g and max Gaussianity gap of grid sweeps). Inapplicable
// fields are written empty and parsed as 0.
struct ResultsRow {
  std::string row_kind;
  Eigen::Index j = 0;
  double epsilon = 0.0;
  int replicate = 0;
  std::string phi;
  double error = 0.0;
  double rms = 0.0;
  double rms_stderr = 0.0;
  double dg = 0.0;
  double max_gap = 0.0;
};

std::vector<ResultsRow> rows_from_report(const SweepReport& report);
void write_results_csv(const SweepReport& report, const std::string& path);
std::vector<ResultsRow> parse_results_csv(const std::string& path);

// ---------------------------------------------------------------------------
// report.json / rates.svg / manifest.json

void write_report_json(const SweepReport& report, const std::string& path);

// Log-log scatter of the sweep cells with the fitted rate line; a
// self-contained SVG document, one circle per plottable sweep cell.
void write_rates_svg(const SweepReport& report, const std::string& path);
void write_rates_svg(const std::vector<ResultsRow>& rows,
                     const std::string& path);

// Writes results.csv, report.json and rates.svg under out_dir and returns
// the paths. Refuses (InsufficientDataError) when the report holds no
// run records.
struct ArtifactPaths {
  std::vector<std::string> paths;
};
ArtifactPaths emit_report(const SweepReport& report,
                          const std::string& out_dir);

// manifest.json: config hash, seed, and an FNV-1a checksum per artifact.
void write_manifest(const std::string& out_dir, std::uint64_t config_hash,
                    std::uint64_t seed,
                    const std::vector<std::string>& artifact_paths);

// ---------------------------------------------------------------------------
// Trajectory / posterior / density CSV

void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path);

// One row per step (starting at step 1): mean components then the full
// covariance in row-major order.
void write_posterior_csv(const std::vector<GaussianMoments>& posteriors,
                         const std::string& path);

// One row per cell: center coordinates then the density value.
void write_density_csv(const GridDensity& density, const std::string& path);

}  // namespace enkf
