#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hemo/estimation.hpp"
#include "hemo/ns_solver.hpp"
#include "hemo/qoi.hpp"

namespace hemo {

/// Schema or validation error in a run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SectionSpec {
  Vec3 origin = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  friend bool operator==(const SectionSpec&, const SectionSpec&) = default;
};

struct PatchSpec {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  Vec3 forward = Vec3::UnitX();
  friend bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

/// Complete description of a simulation. Resistances and SVR are given in
/// MPa s / m^3, flows in m^3/s, times in s, lengths in m.
struct RunConfig {
  // [mesh]
  std::string mesh_path;
  // [discretization]
  ElementPair element_pair = ElementPair::P2P1;
  int quadrature_degree = 0;
  // [model]
  std::string model = "none";  ///< none, smagorinsky, vreman, sigma, rbvms
  std::optional<double> model_constant;  ///< c_S, c_V or c_sigma; default per model
  std::string rbvms_mode = "auto";       ///< auto, equal_order, inf_sup
  double rbvms_ci = 1.0;
  double rbvms_delta0 = 1.0;
  double rbvms_delta1 = 0.25;
  // [physics]
  double density_kg_per_m3 = 1060.0;
  double viscosity_pa_s = 3.5e-3;
  // [inflow]
  std::string profile = "parabolic";  ///< parabolic or a profile file path
  std::optional<double> flow_m3_per_s;  ///< flow at amplitude 1; default sum of targets
  std::string waveform = "synthetic";  ///< synthetic, constant or a table file path
  double period_s = 1.0;
  double smooth_start_s = 0.1;
  // [outlets]
  std::vector<double> targets_m3_per_s;
  std::vector<double> resistances_mpa_s_per_m3;
  std::string resistances_file;
  std::optional<double> rsv_mpa_s_per_m3;
  // [estimation]
  double estimation_rate_per_s = 25.0;
  double estimation_ramp_s = 0.05;
  double estimation_window_start_s = 0.25;
  double estimation_window_end_s = 0.5;
  std::optional<double> estimation_dt_s;
  std::optional<double> retune_rsv_mpa_s_per_m3;
  // [time]
  double dt_s = 1.25e-4;
  double end_time_s = 1.0;
  int output_every = 1;
  int checkpoint_every = 0;
  // [solver]
  double picard_tolerance = 1e-10;
  int picard_max_iterations = 20;
  std::string linear_solver = "direct";  ///< direct or iterative
  double linear_tolerance = 1e-10;
  double backflow_beta = 1.0;
  bool convection = true;
  // [qoi]
  double resolution_m = 1e-3;
  std::vector<SectionSpec> sections;
  std::vector<std::array<int, 2>> wedges;
  std::optional<PatchSpec> wss_patch;
  std::optional<double> average_start_s;
  std::optional<double> average_end_s;
  // [output]
  std::string output_dir = "output";
  int snapshot_every = 0;
  // [run]
  unsigned long seed = 0;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses configuration text; every unknown section or key is an error and
/// messages carry the line number.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);
/// Text that parses back to an equal configuration.
std::string serialize_config(const RunConfig& config);
/// Throws ConfigError when fields are inconsistent.
void validate(const RunConfig& config);
/// Makes relative file paths relative to base.
RunConfig resolve_paths(RunConfig config, const std::filesystem::path& base);

TurbulenceModel make_turbulence_model(const RunConfig& config);
FlowConfig make_flow_config(const RunConfig& config);
PhysicalParams make_physics(const RunConfig& config);

}  // namespace hemo
