#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hemo/fe.hpp"
#include "hemo/linear_solver.hpp"
#include "hemo/mesh.hpp"
#include "hemo/turbulence.hpp"

namespace hemo {

/// Fluid properties and reference scales. The solver works in kinematic SI
/// units (coordinates in m, velocity in m/s, pressure divided by density),
/// which is the dimensionless formulation for length_scale = 1 m and
/// velocity_scale = 1 m/s.
struct PhysicalParams {
  double density = 1060.0;     ///< kg/m^3
  double viscosity = 3.5e-3;   ///< dynamic viscosity, Pa s
  double length_scale = 1.0;   ///< m
  double velocity_scale = 1.0; ///< m/s

  /// Dimensionless viscosity mu / (rho L U).
  double nu() const { return viscosity / (density * length_scale * velocity_scale); }
  /// Kinematic viscosity mu / rho in m^2/s used by the solver.
  double kinematic_viscosity() const { return viscosity / density; }
};

/// Re = rho L U / mu.
double reynolds_number(const PhysicalParams& params, double length, double velocity);

/// Inflow amplitude a(t) = s(t) w(t mod T0): a periodic waveform w given as
/// a sampled table (periodic cubic spline) multiplied by a smooth start s
/// that rises from 0 to 1 over [0, t0].
class PulseProfile {
 public:
  /// times must start at 0 and increase strictly; the last time is the
  /// period T0 and the last value must equal the first.
  PulseProfile(std::vector<double> times, std::vector<double> values, double smooth_start);

  double operator()(double t) const;
  double waveform(double t) const;
  double period() const { return times_.back(); }
  double smooth_start() const { return t0_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> times_, values_, second_;
  double t0_;
};

/// Reads a waveform table of `t value` lines.
PulseProfile read_waveform(const std::filesystem::path& path, double smooth_start);
/// Synthetic two-peak systole/diastole waveform with period 1 s and values
/// in [0.1, 1].
PulseProfile synthetic_waveform(double smooth_start = 0.1, double period = 1.0);

/// Ramp (1 - cos(pi t / t1)) / 2 for t < t1 and 1 afterwards.
double estimation_ramp(double t, double t1 = 0.05);

enum class ElementPair { P2P1, P1P1 };
std::string to_string(ElementPair pair);
ElementPair parse_element_pair(const std::string& s);

struct PicardConfig {
  double tolerance = 1e-10;  ///< Euclidean norm of the nonlinear residual
  int max_iterations = 20;
};

/// Non-convergence or breakdown during a time step.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FlowConfig {
  PhysicalParams physics;
  ElementPair pair = ElementPair::P2P1;
  TurbulenceModel model = NoModel{};
  double backflow_beta = 1.0;
  /// Convective term on/off (off gives the unsteady Stokes problem).
  bool convection = true;
  /// Outlet resistances in Pa s / m^3, entry k-1 for outlet k.
  std::vector<double> resistances;
  double dt = 1.25e-4;
  PicardConfig picard;
  LinearSolverConfig linear;
  /// Cell quadrature degree; 0 selects 4 for P2/P1 and 2 for P1/P1.
  int quadrature_degree = 0;
};

/// Throws std::invalid_argument when the configuration is inconsistent
/// with itself or with the mesh.
void validate(const FlowConfig& config, const Mesh& mesh);

/// Assembled linear system; unknowns are ordered velocity then pressure.
struct SparseSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  std::size_t n_velocity = 0;
  std::size_t n_pressure = 0;
};

/// Time discretization of one step.
struct StepContext {
  TimeWeights weights = TimeWeights::steady();
  double dt = 1.0;
  double time = 0.0;  ///< time level being solved for
  std::array<const FEFunction*, 2> history{nullptr, nullptr};
};

struct PicardReport {
  int iterations = 0;     ///< number of linear solves
  double residual = 0.0;  ///< nonlinear residual norm at exit
};

/// Per-outlet flow rates Q_k = int u . n (outward normal), entry k-1 for
/// outlet k.
std::vector<double> compute_outflows(const FEFunction& u);
/// Flow rate entering through the inlet, - int_in u . n.
double compute_inflow(const FEFunction& u);
/// Flow rate carried by inlet nodal values on a velocity space.
double inlet_flow(std::shared_ptr<const FESpace> space, const std::vector<InletNodeValue>& values);
/// Scales inlet nodal values so that they carry the flow rate q.
std::vector<InletNodeValue> scale_inlet_to_flow(std::shared_ptr<const FESpace> space,
                                                std::vector<InletNodeValue> values, double q);

/// Navier-Stokes solver on one mesh: assembles the linearized system, runs
/// Picard iterations, and advances in time with backward Euler for the
/// first step and BDF-2 afterwards.
class FlowSolver {
 public:
  using PointFunction = std::function<Vec3(const Vec3&, double)>;

  FlowSolver(std::shared_ptr<const Mesh> mesh, FlowConfig config);

  const Mesh& mesh() const { return *mesh_; }
  const FlowConfig& config() const { return config_; }
  const std::shared_ptr<const FESpace>& velocity_space() const { return vspace_; }
  const std::shared_ptr<const FESpace>& pressure_space() const { return pspace_; }

  /// Reference inlet profile in m/s; multiplied by the inflow amplitude.
  void set_inlet(std::vector<InletNodeValue> values);
  void set_inflow_amplitude(std::function<double(double)> amplitude);
  void set_resistances(std::vector<double> resistances);
  const std::vector<double>& resistances() const { return config_.resistances; }
  /// Body force per unit mass, f(x, t).
  void set_body_force(PointFunction f);
  /// Replaces the inlet and wall Dirichlet data by g(x, t) on every
  /// inlet/wall node.
  void set_boundary_velocity(PointFunction g);

  const FEFunction& velocity() const { return u_; }
  /// Kinematic pressure (pressure / density).
  const FEFunction& pressure() const { return p_; }
  double time() const { return time_; }
  long step_index() const { return step_; }
  /// Number of stored previous states (0 right after a restart, else 1).
  int history_size() const { return static_cast<int>(history_.size()); }
  const FEFunction& history(int k) const { return history_.at(k); }

  /// Replaces the state and clears the history so that the next step uses
  /// backward Euler.
  void set_state(FEFunction u, FEFunction p, double time, long step = 0);
  /// Restores the full state including the BDF history.
  void restore(FEFunction u, FEFunction p, std::vector<FEFunction> history, double time,
               long step);
  void restart_time_integration() { history_.clear(); }

  SparseSystem assemble(const StepContext& ctx, const FEFunction& u_conv,
                        const FEFunction& p_conv) const;

  /// Solves the steady problem at the current time.
  PicardReport solve_steady();
  /// Advances the state by one time step.
  PicardReport step();

  std::vector<double> outflows() const { return compute_outflows(u_); }
  double inflow() const { return compute_inflow(u_); }
  double inflow_amplitude(double t) const { return amplitude_ ? amplitude_(t) : 1.0; }

 private:
  PicardReport picard(const StepContext& ctx);
  void build_pattern();
  void build_boundary_data();

  std::shared_ptr<const Mesh> mesh_;
  FlowConfig config_;
  std::shared_ptr<const FESpace> vspace_, pspace_;
  int qdeg_ = 4;

  std::vector<InletNodeValue> inlet_;
  std::function<double(double)> amplitude_;
  PointFunction body_force_;
  PointFunction boundary_velocity_;

  // Velocity nodes with a Dirichlet condition: 1 = inlet, 2 = wall.
  std::vector<char> node_kind_;
  std::vector<int> dirichlet_nodes_;
  bool pin_pressure_ = false;
  // Outlet functionals c_k[dof] = int phi n_comp.
  std::vector<Eigen::SparseVector<double>> outlet_c_;
  Eigen::SparseVector<double> inlet_c_;
  std::vector<std::vector<std::size_t>> outlet_faces_;

  SparseMatrix pattern_;

  FEFunction u_, p_;
  std::vector<FEFunction> history_;  ///< previous velocity u^{n-1}, if any
  double time_ = 0.0;
  long step_ = 0;
};

/// Field snapshot with optional BDF history.
struct Snapshot {
  std::uint64_t mesh_hash = 0;
  double time = 0.0;
  long step = 0;
  int velocity_order = 2;
  int pressure_order = 1;
  Eigen::VectorXd velocity, pressure;
  std::vector<Eigen::VectorXd> history;
  std::vector<double> resistances;
};

Snapshot make_snapshot(const FlowSolver& solver);
void write_snapshot(const std::filesystem::path& path, const Snapshot& snap);
Snapshot read_snapshot(const std::filesystem::path& path);
/// Restores a solver from a snapshot; the mesh hash and spaces must match.
void restore_snapshot(FlowSolver& solver, const Snapshot& snap);

struct TransientOptions {
  double end_time = 0.0;
  int output_every = 1;
  /// Called after every output_every-th step (and for the initial state
  /// when call_at_start is set).
  std::vector<std::function<void(const FlowSolver&, const PicardReport&)>> observers;
  bool call_at_start = false;
  /// Called after every step, before observers; may change resistances.
  std::function<void(FlowSolver&)> controller;
  std::optional<std::filesystem::path> checkpoint_path;
  int checkpoint_every = 0;
};

/// Advances until time >= end_time; returns the largest Picard count.
int run_transient(FlowSolver& solver, const TransientOptions& options);

}  // namespace hemo
