#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "hemo/ns_solver.hpp"

namespace hemo {

/// Systemic vascular resistance (sum_k 1/R_k)^-1 of resistances in parallel.
double svr_of(const std::vector<double>& resistances);

/// Settings of the conductance controller dG_k/dt = (gamma0/Q_in)(Q*_k - Q_k).
struct EstimationConfig {
  double r_sv = 0.0;             ///< target SVR in Pa s / m^3
  /// Relaxation rate in 1/s; the controller gain is gamma0 = rate / r_sv.
  double rate = 25.0;
  std::vector<double> targets;   ///< Q*_k in m^3/s, sum equals Q_in
  /// Initial conductances; empty selects Q*_k / (Q_in r_sv).
  std::vector<double> initial_conductances;
  double window_start = 0.25;    ///< averaging window in s
  double window_end = 0.5;
  double ramp_time = 0.05;       ///< inflow ramp duration t1 in s

  double inflow() const;
  double gain() const { return rate / r_sv; }
  /// Throws std::invalid_argument when inconsistent.
  void validate() const;
  std::vector<double> start_conductances() const;
};

/// Controller state with its sampled history.
struct ConductanceState {
  std::vector<double> conductances;
  std::vector<double> times;
  std::vector<std::vector<double>> conductance_history;
  std::vector<std::vector<double>> flow_history;
};

/// Records (t, G, Q) and applies one explicit Euler step of the controller.
/// Targets are multiplied by target_scale (the inflow ramp). Throws
/// NumericalError when a conductance becomes nonpositive.
void conductance_step(ConductanceState& state, double time, const std::vector<double>& flows,
                      const EstimationConfig& config, double dt, double target_scale = 1.0);

struct EstimationResult {
  std::vector<double> resistances;    ///< R*_k = 1 / mean of G_k over the window
  std::vector<double> window_errors;  ///< 4 |int (Q_k/Q*_k - 1) dt| over the window
  /// False when the flow error in the second half of the window is not
  /// smaller than in the first half.
  bool decaying = true;
  ConductanceState state;
};

/// Advances a flow model by one step with the given resistances and returns
/// the new time and the outlet flows.
struct FlowSample {
  double time;
  std::vector<double> flows;
};
using FlowModel = std::function<FlowSample(const std::vector<double>& resistances)>;

/// Runs the controller against a flow model with step dt until the end of the
/// averaging window.
EstimationResult estimate_resistances(const FlowModel& model, const EstimationConfig& config,
                                      double dt);

/// Runs the estimation with a Navier-Stokes solver whose inlet profile
/// carries the full inflow Q_in; the inflow amplitude is set to the ramp.
EstimationResult run_estimation(FlowSolver& solver, const EstimationConfig& config);

/// Integral of the piecewise linear interpolant of (times, values) over [a, b].
double window_integral(const std::vector<double>& times, const std::vector<double>& values,
                       double a, double b);

struct Retune {
  std::vector<double> resistances;
  double delta_p;
};

/// Shifts every outlet pressure drop by the same delta_p so that the
/// resistances R_k + delta_p / Q*_k have SVR r_sv_new.
Retune retune_svr(const std::vector<double>& resistances, const std::vector<double>& targets,
                  double r_sv_new);

/// Splits q_total between two branches proportionally to D^3.
std::pair<double, double> murray_split(double q_total, double d2, double d3);

/// Outlet flows for a three-branch arch: q_main is prescribed, the first
/// branch takes half of the remainder and the other two share the rest by
/// Murray's law. Returns (Q1, Q2, Q3, Q_main).
std::vector<double> arch_flow_split(double q_in, double q_main, double d2, double d3);

}  // namespace hemo
