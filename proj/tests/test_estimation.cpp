#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "hemo/estimation.hpp"
#include "hemo/fixtures.hpp"

using namespace hemo;

namespace {

// 0-D network: outlet k is a series pair (r_k, R_k) fed by a common node
// pressure P chosen so that the outlet flows sum to the ramped inflow.
struct Surrogate {
  std::vector<double> series;
  double q_in;
  double ramp_time;
  double dt;
  double t = 0.0;

  FlowSample operator()(const std::vector<double>& r) {
    t += dt;
    double g = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) g += 1.0 / (series[k] + r[k]);
    const double p = estimation_ramp(t, ramp_time) * q_in / g;
    std::vector<double> q(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) q[k] = p / (series[k] + r[k]);
    return {t, q};
  }
};

// Fixed point of the surrogate: R_k = P/Q*_k - r_k with sum 1/R_k = 1/R_SV,
// solved for P by bisection.
std::vector<double> surrogate_fixed_point(const std::vector<double>& series,
                                          const std::vector<double>& targets, double r_sv) {
  auto excess = [&](double p) {
    double g = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) g += 1.0 / (p / targets[k] - series[k]);
    return g - 1.0 / r_sv;
  };
  double lo = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) lo = std::max(lo, series[k] * targets[k]);
  lo *= 1.0 + 1e-15;
  double hi = 2.0 * lo + 1.0;
  while (excess(hi) > 0.0) hi *= 2.0;
  for (int i = 0; i < 300; ++i) {
    const double m = 0.5 * (lo + hi);
    (excess(m) > 0.0 ? lo : hi) = m;
  }
  std::vector<double> r(targets.size());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = hi / targets[k] - series[k];
  return r;
}

EstimationConfig surrogate_config() {
  EstimationConfig c;
  c.r_sv = 2e8;
  c.rate = 100.0;
  c.targets = {1e-5, 2e-5, 3e-5};
  return c;
}

}  // namespace

TEST(Svr, Examples) {
  EXPECT_DOUBLE_EQ(svr_of({4, 4, 4, 4}), 1.0);
  EXPECT_DOUBLE_EQ(svr_of({7.5}), 7.5);
  EXPECT_NEAR(svr_of({725.77, 1333.4, 1282.9, 172.76}), 115.0, 0.005 * 115.0);
  EXPECT_THROW(svr_of({1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(svr_of({}), std::invalid_argument);
}

TEST(ConductanceStep, HandEulerStep) {
  EstimationConfig c;
  c.r_sv = 1.0;
  c.rate = 1.0;  // gain = rate / r_sv = 1
  c.targets = {0.6, 0.4};
  ConductanceState s;
  s.conductances = {1.0, 1.0};
  conductance_step(s, 0.1, {0.5, 0.4}, c, 0.1);
  EXPECT_NEAR(s.conductances[0], 1.01, 1e-15);
  EXPECT_DOUBLE_EQ(s.conductances[1], 1.0);
  ASSERT_EQ(s.times.size(), 1u);
  EXPECT_EQ(s.conductance_history[0], (std::vector<double>{1.0, 1.0}));
}

TEST(ConductanceStep, RejectsNonpositiveConductance) {
  EstimationConfig c;
  c.r_sv = 1.0;
  c.rate = 1.0;
  c.targets = {0.5, 0.5};
  ConductanceState s;
  s.conductances = {0.01, 1.99};
  EXPECT_THROW(conductance_step(s, 1.0, {1.0, 0.0}, c, 1.0), NumericalError);
  c.rate = 0.0;
  EXPECT_THROW(conductance_step(s, 1.0, {0.5, 0.5}, c, 1.0), std::invalid_argument);
}

TEST(ConductanceStep, SumConservedWhenFlowsBalance) {
  EstimationConfig c;
  c.r_sv = 3.0;
  c.rate = 5.0;
  c.targets = {0.2, 0.3, 0.5};
  ConductanceState s;
  s.conductances = c.start_conductances();
  const double sum0 = std::accumulate(s.conductances.begin(), s.conductances.end(), 0.0);
  EXPECT_NEAR(sum0, 1.0 / 3.0, 1e-16);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng);
    conductance_step(s, 0.01 * i, {0.2 + a, 0.3 + b, 0.5 - a - b}, c, 0.01);
    const double sum = std::accumulate(s.conductances.begin(), s.conductances.end(), 0.0);
    EXPECT_NEAR(sum, sum0, 1e-12 * sum0);
  }
}

TEST(EstimationConfig, Validation) {
  EstimationConfig c = surrogate_config();
  EXPECT_NO_THROW(c.validate());
  EstimationConfig bad = c;
  bad.initial_conductances = {1.0, 1.0, 1.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.targets[1] = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.window_start = 0.01;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(WindowIntegral, PiecewiseLinear) {
  const std::vector<double> t{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> v{0.0, 1.0, 2.0, 3.0};
  EXPECT_NEAR(window_integral(t, v, 0.5, 2.5), 0.5 * (2.5 * 2.5 - 0.25), 1e-15);
  EXPECT_THROW(window_integral(t, v, -1.0, 1.0), std::invalid_argument);
}

TEST(Estimation, SurrogateRecoversFixedPoint) {
  const EstimationConfig c = surrogate_config();
  const std::vector<double> series{1e7, 3e7, 5e6};
  Surrogate model{series, c.inflow(), c.ramp_time, 1e-3};
  const auto result = estimate_resistances(std::ref(model), c, 1e-3);
  const auto expected = surrogate_fixed_point(series, c.targets, c.r_sv);
  for (std::size_t k = 0; k < expected.size(); ++k) {
    EXPECT_NEAR(result.resistances[k], expected[k], 1e-8 * expected[k]) << k;
    EXPECT_LT(result.window_errors[k], 1e-3);
  }
  EXPECT_NEAR(svr_of(result.resistances), c.r_sv, 1e-8 * c.r_sv);
  EXPECT_TRUE(result.decaying);
  // The conductance sum stays at 1/R_SV throughout, ramp included.
  for (const auto& g : result.state.conductance_history) {
    EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0) * c.r_sv, 1.0, 1e-12);
  }
}

TEST(Estimation, WindowMustBeReached) {
  const EstimationConfig c = surrogate_config();
  Surrogate model{{0, 0, 0}, c.inflow(), c.ramp_time, 1e-3};
  int calls = 0;
  FlowModel stalling = [&](const std::vector<double>& r) {
    if (++calls > 10) return FlowSample{model.t, std::vector<double>(r.size(), 0.0)};
    return model(r);
  };
  EXPECT_THROW(estimate_resistances(stalling, c, 1e-3), NumericalError);
}

TEST(Estimation, SymmetricTeeGivesEqualResistances) {
  TeeOptions o;
  o.h = 0.0015;
  auto mesh = std::make_shared<const Mesh>(make_tee(o));
  FlowConfig fc;
  fc.convection = false;
  fc.dt = 0.01;
  fc.resistances = {1e8, 1e8};
  FlowSolver solver(mesh, fc);
  const double q = 2e-6;
  solver.set_inlet(scale_inlet_to_flow(solver.velocity_space(),
                                       parabolic_inlet_values(*solver.velocity_space(), 1.0), q));
  EstimationConfig c;
  c.r_sv = 5e7;
  c.targets = {0.5 * q, 0.5 * q};
  const auto result = run_estimation(solver, c);
  EXPECT_NEAR(result.resistances[0], result.resistances[1], 0.01 * result.resistances[0]);
  EXPECT_NEAR(svr_of(result.resistances), c.r_sv, 1e-6 * c.r_sv);
}

TEST(Estimation, InflowMismatchIsRejected) {
  TeeOptions o;
  o.h = 0.0015;
  auto mesh = std::make_shared<const Mesh>(make_tee(o));
  FlowConfig fc;
  fc.convection = false;
  fc.dt = 0.01;
  fc.resistances = {1e8, 1e8};
  FlowSolver solver(mesh, fc);
  solver.set_inlet(scale_inlet_to_flow(solver.velocity_space(),
                                       parabolic_inlet_values(*solver.velocity_space(), 1.0),
                                       1e-6));
  EstimationConfig c;
  c.r_sv = 5e7;
  c.targets = {1e-6, 1e-6};
  EXPECT_THROW(run_estimation(solver, c), std::invalid_argument);
}

TEST(Retune, TwoOutletClosedForm) {
  const auto r = retune_svr({1.0, 1.0}, {1.0, 1.0}, 1.0);
  EXPECT_NEAR(r.delta_p, 1.0, 1e-10);
  EXPECT_NEAR(r.resistances[0], 2.0, 1e-10);
  EXPECT_NEAR(r.resistances[1], 2.0, 1e-10);
}

TEST(Retune, IdentityAndLimit) {
  const std::vector<double> r{725.77, 1333.4, 1282.9, 172.76};
  const std::vector<double> q{7.43e-5, 3.80e-5, 3.63e-5, 2.93e-4};
  const auto same = retune_svr(r, q, svr_of(r));
  EXPECT_NEAR(same.delta_p, 0.0, 1e-12 * 172.76 * 2.93e-4);
  double bound = 1e300;
  for (std::size_t k = 0; k < r.size(); ++k) bound = std::min(bound, r[k] * q[k]);
  const auto tiny = retune_svr(r, q, 1e-9);
  EXPECT_GT(tiny.delta_p, -bound);
  EXPECT_NEAR(tiny.delta_p, -bound, 1e-6 * bound);
  EXPECT_THROW(retune_svr(r, q, 0.0), std::invalid_argument);
}

TEST(Retune, RoundTripAndRandomInputs) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ur(1e2, 1e4), uq(1e-6, 1e-4), us(0.2, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 4;
    std::vector<double> r(n), q(n);
    for (int k = 0; k < n; ++k) {
      r[k] = ur(rng);
      q[k] = uq(rng);
    }
    const double svr0 = svr_of(r);
    const double target = svr0 * us(rng);
    const auto fwd = retune_svr(r, q, target);
    EXPECT_NEAR(svr_of(fwd.resistances), target, 1e-9 * target);
    const auto back = retune_svr(fwd.resistances, q, svr0);
    for (int k = 0; k < n; ++k) EXPECT_NEAR(back.resistances[k], r[k], 1e-9 * r[k]);
  }
}

TEST(Retune, SvrMonotoneInPressureShift) {
  const std::vector<double> r{725.77, 1333.4, 1282.9, 172.76};
  const std::vector<double> q{7.43e-5, 3.80e-5, 3.63e-5, 2.93e-4};
  double prev = 0.0;
  for (double s = 0.05; s < 10.0; s += 0.05) {
    const double svr = svr_of(retune_svr(r, q, s * 115.0).resistances);
    EXPECT_GT(svr, prev);
    prev = svr;
  }
}

TEST(Murray, Split) {
  auto [a, b] = murray_split(2.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(a, 1.0);
  EXPECT_DOUBLE_EQ(b, 1.0);
  std::tie(a, b) = murray_split(9.0, 2.0, 1.0);
  EXPECT_NEAR(a / b, 8.0, 1e-14);
  EXPECT_DOUBLE_EQ(a + b, 9.0);
  EXPECT_THROW(murray_split(1.0, 0.0, 1.0), std::invalid_argument);
}

TEST(Murray, ArchSplitSumsToInflow) {
  const auto q = arch_flow_split(4.42e-4, 2.93e-4, 1.0, 0.9);
  ASSERT_EQ(q.size(), 4u);
  EXPECT_NEAR(q[0] + q[1] + q[2] + q[3], 4.42e-4, 1e-19);
  EXPECT_DOUBLE_EQ(q[0], q[1] + q[2]);
}
