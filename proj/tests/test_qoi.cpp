#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "hemo/fixtures.hpp"
#include "hemo/qoi.hpp"

using namespace hemo;

namespace {

std::shared_ptr<const Mesh> pipe(double radius, int n_cross, double length = 0.05, int n_axial = 20) {
  PipeOptions o;
  o.radius = radius;
  o.length = length;
  o.n_cross = n_cross;
  o.n_axial = n_axial;
  return std::make_shared<const Mesh>(make_pipe(o));
}

// Area and perimeter of the rim polygon of the pipe inlet by the shoelace
// formula.
std::pair<double, double> rim_polygon(const Mesh& m, double radius) {
  std::vector<Vec3> rim;
  for (const auto& v : m.vertices()) {
    if (v.z() == 0.0 && std::abs(std::hypot(v.x(), v.y()) - radius) < 1e-12 * radius) rim.push_back(v);
  }
  std::sort(rim.begin(), rim.end(), [](const Vec3& a, const Vec3& b) {
    return std::atan2(a.y(), a.x()) < std::atan2(b.y(), b.x());
  });
  double area = 0.0, perimeter = 0.0;
  for (std::size_t i = 0; i < rim.size(); ++i) {
    const Vec3& a = rim[i];
    const Vec3& b = rim[(i + 1) % rim.size()];
    area += 0.5 * (a.x() * b.y() - b.x() * a.y());
    perimeter += (b - a).norm();
  }
  return {area, perimeter};
}

std::shared_ptr<const FESpace> p2(const std::shared_ptr<const Mesh>& m) {
  return std::make_shared<const FESpace>(m, 2, 3);
}

}  // namespace

TEST(Barycentric, RoundTrip) {
  auto m = pipe(0.005, 3, 0.02, 4);
  const std::array<double, 4> l{0.1, 0.2, 0.3, 0.4};
  for (std::size_t c = 0; c < m->n_tets(); c += 7) {
    Vec3 x = Vec3::Zero();
    for (int i = 0; i < 4; ++i) x += l[i] * m->vertices()[m->tets()[c][i]];
    const auto r = barycentric_coordinates(*m, c, x);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(r[i], l[i], 1e-12);
  }
}

TEST(CrossSection, CircleMatchesRimPolygon) {
  const double r = 0.005;
  auto m = pipe(r, 16);
  const auto [area, perimeter] = rim_polygon(*m, r);
  for (double z : {0.02625, 0.025}) {
    const auto s = build_cross_section(*m, Vec3(0, 0, z), Vec3(0, 0, 1), 5e-4);
    EXPECT_NEAR(s.area, area, 1e-12 * area) << z;
    EXPECT_NEAR(s.perimeter, perimeter, 1e-12 * perimeter) << z;
    EXPECT_DOUBLE_EQ(s.hydraulic_radius(), s.area / s.perimeter);
    // The inscribed polygon approaches the circle, whose hydraulic radius
    // is half the radius.
    EXPECT_NEAR(s.hydraulic_radius(), r / 2, 0.005 * r / 2);
    EXPECT_NEAR(s.polygon_centroid.z(), z, 1e-15);
    EXPECT_NEAR(s.polygon_centroid.head<2>().norm(), 0.0, 1e-12);
  }
}

TEST(CrossSection, HydraulicRadiusConvergesToHalfRadius) {
  const double r = 0.005;
  double prev = 1.0;
  for (int n : {4, 8, 16, 32}) {
    auto m = pipe(r, n, 0.01, 2);
    const auto s = build_cross_section(*m, Vec3(0, 0, 0.0025), Vec3(0, 0, 1), 1e-3);
    const double err = std::abs(s.hydraulic_radius() - r / 2);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-3 * r / 2);
}

TEST(CrossSection, TableFourPlaneTwo) {
  auto m = pipe(8.46e-3, 24, 0.02, 8);
  const auto s = build_cross_section(*m, Vec3(0, 0, 0.01), Vec3(0, 0, 1), 1e-3);
  EXPECT_NEAR(s.area * 1e6, 225.0, 0.5);
  EXPECT_NEAR(s.perimeter * 1e3, 53.0, 0.5);
  EXPECT_NEAR(s.hydraulic_radius() * 1e3, 4.2, 0.05);
  EXPECT_NEAR(static_cast<double>(s.points.size()), 225.0, 0.05 * 225.0);
}

TEST(CrossSection, TiltedPlaneAndResolution) {
  auto m = pipe(0.005, 12);
  const Vec3 n = Vec3(0.2, 0.1, 1.0).normalized();
  const auto coarse = build_cross_section(*m, Vec3(0, 0, 0.025), n, 5e-4);
  const auto fine = build_cross_section(*m, Vec3(0, 0, 0.025), n, 2.5e-4);
  // An oblique cut of a cylinder is an ellipse of area pi r^2 / cos(theta).
  EXPECT_NEAR(coarse.area, std::numbers::pi * 0.005 * 0.005 / n.z(), 0.01 * coarse.area);
  EXPECT_NEAR(coarse.grid_area(), coarse.area, 0.02 * coarse.area);
  EXPECT_NEAR(fine.grid_area(), coarse.grid_area(), 0.02 * coarse.grid_area());
  for (const auto& p : coarse.points) EXPECT_NEAR((p - coarse.origin).dot(n), 0.0, 1e-15);
}

TEST(CrossSection, KeepsComponentOfOrigin) {
  TeeOptions o;
  auto m = std::make_shared<const Mesh>(make_tee(o));
  // A vertical plane through the left arm of the tee does not include the
  // right arm.
  const auto s = build_cross_section(*m, Vec3(0.005, 0.0, 0.0), Vec3(1, 0, 0), 5e-4);
  for (const auto& p : s.points) EXPECT_NEAR(p.x(), 0.005, 1e-15);
  EXPECT_NEAR(s.area, std::numbers::pi * 0.003 * 0.003, 0.25 * s.area);
}

TEST(CrossSection, EmptyIntersectionThrows) {
  auto m = pipe(0.005, 4);
  EXPECT_THROW(build_cross_section(*m, Vec3(0, 0, 0.2), Vec3(0, 0, 1)), std::invalid_argument);
  EXPECT_THROW(build_cross_section(*m, Vec3(0, 0, 0.02), Vec3(0, 0, 0)), std::invalid_argument);
}

TEST(Pressure, ConstantAndLinearFields) {
  auto m = pipe(0.005, 8);
  auto ps = std::make_shared<const FESpace>(m, 1, 1);
  const auto a = build_cross_section(*m, Vec3(0, 0, 0.01), Vec3(0, 0, 1));
  const auto b = build_cross_section(*m, Vec3(0, 0, 0.04), Vec3(0, 0, 1));
  const auto c = interpolate(ps, [](const Vec3&) { return 3.5; });
  EXPECT_NEAR(pressure_difference(c, b, a), 0.0, 1e-14);
  const double alpha = -120.0;
  const auto lin = interpolate(ps, [&](const Vec3& x) { return alpha * x.z() + 7.0 * x.x(); });
  EXPECT_NEAR(mean_pressure(lin, a), alpha * 0.01 + 7.0 * a.center.x(), 1e-12);
  EXPECT_NEAR(pressure_difference(lin, b, a), alpha * 0.03 + 7.0 * (b.center.x() - a.center.x()),
              1e-12);
}

TEST(MaxVelocity, ConstantScaledAndParabolic) {
  auto m = pipe(0.005, 8);
  auto vs = p2(m);
  const Vec3 c(0.3, -0.1, 0.2);
  const auto s = build_cross_section(*m, Vec3(0, 0, 0.02), Vec3(0, 0, 1), 5e-4);
  const auto u = interpolate_vector(vs, [&](const Vec3&) -> Vec3 { return c; });
  EXPECT_NEAR(max_velocity(u, s), c.norm(), 1e-14);
  const double umax = 0.4, r2 = 0.005 * 0.005;
  const auto poi = interpolate_vector(vs, [&](const Vec3& x) -> Vec3 {
    return Vec3(0, 0, umax * (1.0 - (x.x() * x.x() + x.y() * x.y()) / r2));
  });
  FEFunction twice(vs, 2.0 * poi.coefficients());
  EXPECT_NEAR(max_velocity(twice, s), 2.0 * max_velocity(poi, s), 1e-14);
  // The origin is a grid point on the axis.
  EXPECT_NEAR(max_velocity(poi, s), umax, 1e-12);
  std::vector<CrossSection> secs{build_cross_section(*m, Vec3(0, 0, 0.01), Vec3(0, 0, 1)),
                                 build_cross_section(*m, Vec3(0, 0, 0.03), Vec3(0, 0, 1))};
  const auto w = build_wedge(*m, secs, 0, 1);
  for (std::size_t cell : w.cells) {
    EXPECT_GE(m->cell_centroid(cell).z(), 0.01);
    EXPECT_LE(m->cell_centroid(cell).z(), 0.03);
  }
  EXPECT_NEAR(max_velocity(poi, w), umax, 1e-12);
  EXPECT_NEAR(max_velocity(u, w), c.norm(), 1e-14);
}

TEST(Sfd, Examples) {
  auto m = pipe(0.005, 8);
  auto vs = p2(m);
  const auto s = build_cross_section(*m, Vec3(0, 0, 0.02), Vec3(0, 0, 1), 5e-4);
  auto field = [&](Vec3 c) { return interpolate_vector(vs, [c](const Vec3&) -> Vec3 { return c; }); };
  EXPECT_NEAR(sfd(field(Vec3(0, 0, 2)), s), 0.0, 1e-14);
  EXPECT_NEAR(sfd(field(Vec3(1, 0, 1)), s), 1.0, 1e-12);
  const auto f = section_flow(field(Vec3(0, 1, 1)), s);
  EXPECT_NEAR(f.sfd, 1.0, 1e-12);
  const std::vector<double> t{0.0, 0.5, 1.0};
  EXPECT_NEAR(sfd_time_average(t, {f, f, f}), 1.0, 1e-12);
  EXPECT_THROW(sfd(field(Vec3(1, 0, 0)), s), std::domain_error);
}

TEST(Sfd, TimeAverageIsRatioOfIntegrals) {
  SectionFlow a, b;
  a.defined = b.defined = true;
  a.tangential = 1.0;
  a.normal = 1.0;
  a.sfd = 1.0;
  b.tangential = 1.0;
  b.normal = 3.0;
  b.sfd = 1.0 / 3.0;
  const std::vector<double> t{0.0, 1.0, 2.0};
  // Integrals: tangential 2, normal 4 (trapezoid).
  EXPECT_NEAR(sfd_time_average(t, {a, b, a}), 2.0 / 4.0, 1e-15);
  // NFD weighted by normal flow.
  a.nfd = 0.2;
  b.nfd = 0.6;
  const double num = 0.5 * (0.2 + 1.8) + 0.5 * (1.8 + 0.2);
  EXPECT_NEAR(nfd_time_average(t, {a, b, a}), num / 4.0, 1e-15);
  SectionFlow undefined;
  undefined.tangential = 5.0;
  EXPECT_NEAR(sfd_time_average(t, {a, a, undefined}), (0.5 + 0.5 * 1.0) / (0.5 + 0.5), 1e-15);
}

TEST(Nfd, UniformSymmetricAndConcentrated) {
  const double r = 0.005;
  auto m = pipe(r, 12);
  auto vs = p2(m);
  const auto s = build_cross_section(*m, Vec3(0, 0, 0.025), Vec3(0, 0, 1), 2.5e-4);
  const auto uni = interpolate_vector(vs, [](const Vec3&) -> Vec3 { return Vec3(0.1, 0, 1); });
  EXPECT_NEAR(nfd(uni, s), 0.0, 1e-12);
  const double k = 1.0 / (0.001 * 0.001);
  const auto jets = interpolate_vector(vs, [&](const Vec3& x) -> Vec3 {
    const Vec3 a(0.002, 0.001, x.z()), b(-0.002, -0.001, x.z());
    return Vec3(0, 0, std::exp(-k * (x - a).squaredNorm()) + std::exp(-k * (x - b).squaredNorm()));
  });
  EXPECT_NEAR(nfd(jets, s), 0.0, 1e-9);
  // Flow concentrated at the rim point (r, 0) approaches |x_b - x_S| / r_H = 2.
  const auto edge = interpolate_vector(vs, [&](const Vec3& x) -> Vec3 {
    return Vec3(0, 0, std::pow(std::max(0.0, x.x() / r), 80));
  });
  const auto f = section_flow(edge, s);
  const Vec3 xn = f.moment / f.normal;
  double reach = 0.0;
  for (const auto& p : s.points) reach = std::max(reach, (p - s.center).norm());
  EXPECT_GT(f.nfd, 1.85);
  EXPECT_LE(f.nfd, reach / s.hydraulic_radius() + 1e-12);
  EXPECT_NEAR(xn.y(), 0.0, 1e-9);
}

TEST(SfdNfd, ScaleInvariance) {
  auto m = pipe(0.005, 6);
  auto vs = p2(m);
  const auto s = build_cross_section(*m, Vec3(0, 0, 0.02), Vec3(0, 0, 1), 5e-4);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::VectorXd c(vs->n_dofs());
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = d(rng);
  const FEFunction u(vs, c);
  const auto base = section_flow(u, s);
  for (double lam : {0.5, 3.0}) {
    const auto scaled = section_flow(FEFunction(vs, lam * c), s);
    EXPECT_NEAR(scaled.sfd, base.sfd, 1e-12 * base.sfd);
    EXPECT_NEAR(scaled.nfd, base.nfd, 1e-12 * std::max(1.0, base.nfd));
  }
}

TEST(Wss, PoiseuilleFaceOracleAndMean) {
  const double r = 0.005, umax = 0.2, mu = 3.5e-3;
  auto m = pipe(r, 12);
  auto vs = p2(m);
  const auto u = interpolate_vector(vs, [&](const Vec3& x) -> Vec3 {
    return Vec3(0, 0, umax * (1.0 - (x.x() * x.x() + x.y() * x.y()) / (r * r)));
  });
  const auto patch = make_wss_patch(*m, Vec3(0, 0, 0.025), 0.01, Vec3(0, 0, 1));
  const auto tau = wall_shear_stress(u, patch, mu);
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const std::size_t f = patch.faces[i];
    const Vec3 n = m->face_normal(f);
    const Vec3 x = m->face_centroid(f);
    // grad u = -2 umax / r^2 e_z (x, y, 0)^T; the shear on the wall is
    // -mu times its tangential normal derivative.
    const Vec3 dudn = Vec3(0, 0, -2.0 * umax / (r * r) * (x.x() * n.x() + x.y() * n.y()));
    const Vec3 expected = -mu * (dudn - dudn.dot(n) * n);
    EXPECT_NEAR((tau[i] - expected).norm(), 0.0, 1e-12 * expected.norm());
    // Decomposition identity for v orthogonal to n.
    if (std::abs(n.z()) < 1e-14) {
      const double fwd = tau[i].dot(patch.forward);
      const double lat = (tau[i] - fwd * patch.forward).norm();
      EXPECT_NEAR(tau[i].squaredNorm(), fwd * fwd + lat * lat, 1e-12 * tau[i].squaredNorm());
    }
  }
  const auto avg = wss_averages(*m, patch, tau);
  const double mean_speed = umax / 2;
  EXPECT_NEAR(avg.magnitude, 4.0 * mu * mean_speed / r, 0.05 * 4.0 * mu * mean_speed / r);
  EXPECT_GT(avg.forward, 0.0);
  EXPECT_NEAR(avg.forward, avg.magnitude, 1e-12 * avg.magnitude);
  EXPECT_NEAR(avg.lateral, 0.0, 1e-12 * avg.magnitude);
}

TEST(Wss, ConstantFieldHasNoShear) {
  auto m = pipe(0.005, 4);
  auto vs = p2(m);
  const auto u = interpolate_vector(vs, [](const Vec3&) -> Vec3 { return Vec3(0.3, 0.2, 0.1); });
  const auto patch = make_wss_patch(*m, Vec3(0, 0, 0.025), 1.0, Vec3(0, 0, 1));
  for (const auto& t : wall_shear_stress(u, patch, 3.5e-3)) EXPECT_NEAR(t.norm(), 0.0, 1e-15);
  EXPECT_THROW(make_wss_patch(*m, Vec3(1, 1, 1), 1e-3, Vec3(0, 0, 1)), std::invalid_argument);
  EXPECT_THROW(make_wss_patch(*m, Vec3(0, 0, 0), 1.0, Vec3(0, 0, 0)), std::invalid_argument);
}

TEST(Osi, Examples) {
  const std::vector<double> t{0.0, 0.25, 0.5, 0.75, 1.0};
  const Vec3 a(1, 0, 0);
  EXPECT_NEAR(osi(t, {a, a, a, a, a}), 0.0, 1e-15);
  // Alternating sign over equal durations.
  EXPECT_NEAR(osi({0.0, 0.5, 0.5, 1.0}, {a, a, -a, -a}), 0.5, 1e-15);
  // Half the interval along x, half along y.
  const Vec3 b(0, 1, 0);
  EXPECT_NEAR(osi({0.0, 0.5, 0.5, 1.0}, {a, a, b, b}), 0.5 * (1.0 - std::sqrt(2.0) / 2.0), 1e-15);
  EXPECT_DOUBLE_EQ(osi(t, std::vector<Vec3>(5, Vec3::Zero())), 0.0);
  std::mt19937 rng(9);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> tau(5);
    for (auto& v : tau) v = Vec3(d(rng), d(rng), d(rng));
    const double o = osi(t, tau);
    EXPECT_GE(o, 0.0);
    EXPECT_LE(o, 0.5);
    std::vector<Vec3> scaled = tau;
    for (auto& v : scaled) v *= 3.0;
    EXPECT_NEAR(osi(t, scaled), o, 1e-14);
  }
  // A direction fixed up to nonnegative scaling gives zero.
  EXPECT_NEAR(osi(t, {a, 2 * a, 0 * a, 0.5 * a, a}), 0.0, 1e-15);
}

TEST(Energy, ZeroConstantAndRandomField) {
  auto m = pipe(0.005, 4, 0.02, 6);
  auto vs = p2(m);
  double vol = 0.0;
  for (std::size_t c = 0; c < m->n_tets(); ++c) vol += m->cell_volume(c);
  const FEFunction zero(vs);
  EXPECT_EQ(kinetic_energy(zero), 0.0);
  EXPECT_EQ(mean_velocity_magnitude(zero), 0.0);
  const Vec3 c(0.3, 0.4, 0.0);
  const auto u = interpolate_vector(vs, [&](const Vec3&) -> Vec3 { return c; });
  EXPECT_NEAR(kinetic_energy(u), 0.5 * 0.25 * vol, 1e-14 * vol);
  EXPECT_NEAR(mean_velocity_magnitude(u), 0.5, 1e-13);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::VectorXd x(vs->n_dofs());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = d(rng);
  const FEFunction r(vs, x);
  const auto& rule = tet_quadrature(8);
  double oracle = 0.0;
  for (std::size_t cell = 0; cell < m->n_tets(); ++cell) {
    for (std::size_t q = 0; q < rule.size(); ++q) {
      oracle += 0.5 * rule.weights[q] * 6.0 * m->cell_volume(cell) *
                r.evaluate_vector(cell, rule.points[q]).value.squaredNorm();
    }
  }
  EXPECT_NEAR(kinetic_energy(r), oracle, 1e-10 * oracle);
}

TEST(QoITimeSeries, RecordSummarizeAndWrite) {
  auto m = pipe(0.005, 6);
  auto vs = p2(m);
  auto ps = std::make_shared<const FESpace>(m, 1, 1);
  QoIDefinition def;
  for (double z : {0.005, 0.025, 0.045}) def.sections.push_back(build_cross_section(*m, Vec3(0, 0, z), Vec3(0, 0, 1)));
  def.wedges = {{0, 1}};
  def.patch = make_wss_patch(*m, Vec3(0, 0, 0.025), 0.01, Vec3(0, 0, 1));
  PhysicalParams phys;
  QoITimeSeries series(m, def, phys);
  const double r2 = 0.005 * 0.005;
  for (int i = 0; i <= 4; ++i) {
    const double t = 0.1 * i;
    const double a = 1.0 + i;
    const auto u = interpolate_vector(vs, [&](const Vec3& x) -> Vec3 {
      return Vec3(0, 0, a * (1.0 - (x.x() * x.x() + x.y() * x.y()) / r2));
    });
    const auto p = interpolate(ps, [&](const Vec3& x) { return -a * x.z(); });
    series.record(t, u, p);
  }
  EXPECT_THROW(series.record(0.0, FEFunction(vs), FEFunction(ps)), std::invalid_argument);
  const auto s = series.summarize(0.0, 0.4);
  // Mean of -rho a (z_k - z_0) with a = 1 + 10 t averaged over [0, 0.4].
  EXPECT_NEAR(s.pressure_difference[2], -phys.density * 3.0 * 0.04, 1e-9);
  EXPECT_NEAR(s.peak_pressure_difference[2], phys.density * 5.0 * 0.04, 1e-9);
  EXPECT_NEAR(s.sfd[1], 0.0, 1e-14);
  EXPECT_NEAR(s.nfd[1], 0.0, 1e-9);
  EXPECT_NEAR(s.osi, 0.0, 1e-14);
  EXPECT_NEAR(s.wedge_max_velocity[0], 5.0, 1e-12);
  const auto dir = std::filesystem::temp_directory_path() / "hemo_qoi_test";
  std::filesystem::remove_all(dir);
  series.write(dir, 0.0, 0.4);
  for (const char* f : {"pressure.csv", "pressure_difference.csv", "sfd.csv", "nfd.csv", "max_velocity.csv",
                        "wss.csv", "energy.csv", "summary.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "pressure.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "time,S0,S1,S2");
  std::ifstream sum(dir / "summary.txt");
  std::string all((std::istreambuf_iterator<char>(sum)), {});
  EXPECT_NE(all.find("reference_pressure_difference_pa 2666.4"), std::string::npos);
  std::filesystem::remove_all(dir);
}
