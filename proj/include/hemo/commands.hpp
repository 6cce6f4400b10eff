#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hemo/config.hpp"
#include "hemo/estimation.hpp"
#include "hemo/fixtures.hpp"
#include "hemo/qoi.hpp"

namespace hemo {

/// Outcome of the estimate command; resistances in Pa s / m^3.
struct EstimationReport {
  EstimationResult result;
  std::vector<double> retuned;  ///< empty unless a new SVR was requested
  double delta_p = 0.0;
};

/// Runs the resistance estimation and writes estimation.csv,
/// estimation_history.csv and resistances.txt (MPa s / m^3, retuned values
/// when requested) into the output directory.
EstimationReport cmd_estimate(const RunConfig& config);

struct RunSummary {
  double average_start = 0.0, average_end = 0.0;
  std::vector<double> mean_outflows;  ///< time-averaged Q_k in m^3/s
  double mean_inflow = 0.0;
  int max_picard_iterations = 0;
};

/// Runs the transient simulation and writes flows.csv, run_summary.txt,
/// qoi/ (inline QoI series) and snapshots/ into the output directory.
RunSummary cmd_run(const RunConfig& config);

/// Recomputes the QoI series from the snapshots in snapshot_dir and writes
/// them to out_dir.
void cmd_qoi(const RunConfig& config, const std::filesystem::path& snapshot_dir,
             const std::filesystem::path& out_dir);

/// Mesh statistics and space dimensions as text.
std::string cmd_mesh_stats(const std::filesystem::path& mesh_path);

/// Resistances in MPa s / m^3 read from whitespace separated numbers.
std::vector<double> read_resistances_file(const std::filesystem::path& path);

/// Averaging interval of a run: the configured bounds, else the whole run.
std::pair<double, double> averaging_interval(const RunConfig& config);

}  // namespace hemo
