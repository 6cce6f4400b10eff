#include "hemo/estimation.hpp"

#include "hemo/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hemo {

double svr_of(const std::vector<double>& resistances) {
  if (resistances.empty()) throw std::invalid_argument("svr_of: no resistances");
  double g = 0.0;
  for (double r : resistances) {
    if (!(r > 0.0)) throw std::invalid_argument("svr_of: resistances must be positive");
    g += 1.0 / r;
  }
  return 1.0 / g;
}

double EstimationConfig::inflow() const {
  return std::accumulate(targets.begin(), targets.end(), 0.0);
}

void EstimationConfig::validate() const {
  if (!(r_sv > 0.0)) throw std::invalid_argument("estimation: R_SV must be positive");
  if (!(rate > 0.0)) throw std::invalid_argument("estimation: gain must be positive");
  if (targets.empty()) throw std::invalid_argument("estimation: no target flows");
  for (double q : targets) {
    if (!(q > 0.0)) throw std::invalid_argument("estimation: target flows must be positive");
  }
  if (!initial_conductances.empty()) {
    if (initial_conductances.size() != targets.size()) {
      throw std::invalid_argument("estimation: initial conductances do not match the outlets");
    }
    double sum = 0.0;
    for (double g : initial_conductances) {
      if (!(g > 0.0)) throw std::invalid_argument("estimation: conductances must be positive");
      sum += g;
    }
    if (std::abs(sum * r_sv - 1.0) > 1e-10) {
      throw std::invalid_argument("estimation: initial conductances must sum to 1/R_SV");
    }
  }
  if (!(ramp_time > 0.0)) throw std::invalid_argument("estimation: ramp time must be positive");
  if (!(window_start >= ramp_time && window_end > window_start)) {
    throw std::invalid_argument("estimation: averaging window must follow the ramp");
  }
}

std::vector<double> EstimationConfig::start_conductances() const {
  if (!initial_conductances.empty()) return initial_conductances;
  const double q_in = inflow();
  std::vector<double> g(targets.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = targets[k] / (q_in * r_sv);
  return g;
}

void conductance_step(ConductanceState& state, double time, const std::vector<double>& flows,
                      const EstimationConfig& config, double dt, double target_scale) {
  if (!(config.rate > 0.0)) throw std::invalid_argument("conductance_step: gain must be positive");
  if (flows.size() != state.conductances.size() || config.targets.size() != flows.size()) {
    throw std::invalid_argument("conductance_step: outlet count mismatch");
  }
  state.times.push_back(time);
  state.conductance_history.push_back(state.conductances);
  state.flow_history.push_back(flows);
  const double c = dt * config.gain() / config.inflow();
  for (std::size_t k = 0; k < flows.size(); ++k) {
    state.conductances[k] += c * (target_scale * config.targets[k] - flows[k]);
    if (!(state.conductances[k] > 0.0)) {
      throw NumericalError("conductance of outlet " + std::to_string(k + 1) +
                           " became nonpositive; reduce the estimation gain");
    }
  }
}

double window_integral(const std::vector<double>& times, const std::vector<double>& values,
                       double a, double b) {
  if (times.size() != values.size() || times.size() < 2) {
    throw std::invalid_argument("window_integral: need at least two samples");
  }
  if (a < times.front() - 1e-12 || b > times.back() + 1e-12) {
    throw std::invalid_argument("window_integral: window outside the sampled range");
  }
  auto at = [&](std::size_t i, double t) {
    const double s = (t - times[i]) / (times[i + 1] - times[i]);
    return values[i] + s * (values[i + 1] - values[i]);
  };
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double lo = std::max(a, times[i]);
    const double hi = std::min(b, times[i + 1]);
    if (hi <= lo) continue;
    sum += 0.5 * (hi - lo) * (at(i, lo) + at(i, hi));
  }
  return sum;
}

EstimationResult estimate_resistances(const FlowModel& model, const EstimationConfig& config,
                                      double dt) {
  config.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("estimation: time step must be positive");
  EstimationResult result;
  ConductanceState& state = result.state;
  state.conductances = config.start_conductances();
  const std::size_t n = config.targets.size();

  double t = 0.0;
  while (t < config.window_end - 1e-9 * dt) {
    std::vector<double> r(n);
    for (std::size_t k = 0; k < n; ++k) r[k] = 1.0 / state.conductances[k];
    const FlowSample s = model(r);
    if (s.flows.size() != n) throw std::invalid_argument("estimation: outlet count mismatch");
    if (!(s.time > t)) throw NumericalError("estimation: flow model did not advance in time");
    conductance_step(state, s.time, s.flows, config, s.time - t,
                     estimation_ramp(s.time, config.ramp_time));
    t = s.time;
  }
  if (state.times.size() < 2 || state.times.back() < config.window_end - 1e-9 * dt) {
    throw NumericalError("estimation: averaging window not reached");
  }

  const double len = config.window_end - config.window_start;
  result.resistances.resize(n);
  result.window_errors.resize(n);
  const double mid = 0.5 * (config.window_start + config.window_end);
  double first = 0.0, second = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> g(state.times.size()), e(state.times.size()), ae(state.times.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = state.conductance_history[i][k];
      e[i] = state.flow_history[i][k] / config.targets[k] - 1.0;
      ae[i] = std::abs(e[i]);
    }
    const double g_mean =
        window_integral(state.times, g, config.window_start, config.window_end) / len;
    result.resistances[k] = 1.0 / g_mean;
    result.window_errors[k] =
        4.0 * std::abs(window_integral(state.times, e, config.window_start, config.window_end));
    first = std::max(first, window_integral(state.times, ae, config.window_start, mid));
    second = std::max(second, window_integral(state.times, ae, mid, config.window_end));
  }
  result.decaying = second < first || second < 1e-9 * len;
  return result;
}

EstimationResult run_estimation(FlowSolver& solver, const EstimationConfig& config) {
  config.validate();
  if (static_cast<std::size_t>(solver.mesh().n_outlets()) != config.targets.size()) {
    throw std::invalid_argument("estimation: target count does not match the mesh outlets");
  }
  const double t0 = solver.time();
  const double t1 = config.ramp_time;
  solver.set_inflow_amplitude([t0, t1](double t) { return estimation_ramp(t - t0, t1); });
  const double q_in = config.inflow();
  bool checked = false;
  FlowModel model = [&](const std::vector<double>& r) {
    solver.set_resistances(r);
    solver.step();
    const double t = solver.time() - t0;
    if (!checked && estimation_ramp(t, t1) > 0.0) {
      const double expected = estimation_ramp(t, t1) * q_in;
      if (std::abs(solver.inflow() - expected) > 1e-6 * q_in) {
        throw std::invalid_argument("estimation: inlet flow " + format_double(solver.inflow()) +
                                    " does not match the sum of targets " +
                                    format_double(expected));
      }
      checked = true;
    }
    return FlowSample{t, solver.outflows()};
  };
  return estimate_resistances(model, config, solver.config().dt);
}

Retune retune_svr(const std::vector<double>& resistances, const std::vector<double>& targets,
                  double r_sv_new) {
  if (!(r_sv_new > 0.0)) throw std::invalid_argument("retune_svr: R_SV must be positive");
  if (resistances.size() != targets.size() || resistances.empty()) {
    throw std::invalid_argument("retune_svr: resistances and targets differ in size");
  }
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (!(resistances[k] > 0.0) || !(targets[k] > 0.0)) {
      throw std::invalid_argument("retune_svr: inputs must be positive");
    }
    lo = std::min(lo, targets[k] * resistances[k]);
  }
  lo = -lo;
  // SVR of the shifted resistances, increasing in dp on (lo, inf).
  auto svr = [&](double dp) {
    double g = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const double r = resistances[k] + dp / targets[k];
      if (r <= 0.0) return 0.0;
      g += 1.0 / r;
    }
    return 1.0 / g;
  };
  double a = lo, b = 0.0;
  if (svr(0.0) < r_sv_new) {
    a = 0.0;
    b = -lo;
    while (svr(b) < r_sv_new) {
      a = b;
      b *= 2.0;
    }
  }
  for (int it = 0; it < 400; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    (svr(m) < r_sv_new ? a : b) = m;
  }
  const double fa = svr(a) - r_sv_new, fb = svr(b) - r_sv_new;
  const double dp = std::abs(fa) <= std::abs(fb) ? a : b;
  Retune out{resistances, dp};
  for (std::size_t k = 0; k < targets.size(); ++k) out.resistances[k] += dp / targets[k];
  return out;
}

std::pair<double, double> murray_split(double q_total, double d2, double d3) {
  if (!(d2 > 0.0) || !(d3 > 0.0)) {
    throw std::invalid_argument("murray_split: diameters must be positive");
  }
  const double w2 = d2 * d2 * d2, w3 = d3 * d3 * d3;
  const double q2 = q_total * w2 / (w2 + w3);
  return {q2, q_total - q2};
}

std::vector<double> arch_flow_split(double q_in, double q_main, double d2, double d3) {
  if (!(q_in > 0.0) || !(q_main > 0.0) || q_main >= q_in) {
    throw std::invalid_argument("arch_flow_split: need 0 < Q_main < Q_in");
  }
  const double rest = q_in - q_main;
  const double q1 = 0.5 * rest;
  const auto [q2, q3] = murray_split(rest - q1, d2, d3);
  return {q1, q2, q3, q_main};
}

}  // namespace hemo
