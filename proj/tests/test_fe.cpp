#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hemo/fe.hpp"
#include "hemo/fixtures.hpp"

using namespace hemo;

namespace {

// Exact integral of x^a y^b z^c over the reference tetrahedron:
// a! b! c! / (a + b + c + 3)!
double monomial_tet(int a, int b, int c) {
  return std::tgamma(a + 1) * std::tgamma(b + 1) * std::tgamma(c + 1) /
         std::tgamma(a + b + c + 4);
}
double monomial_tri(int a, int b) {
  return std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 3);
}

std::shared_ptr<const Mesh> pipe_mesh() {
  PipeOptions o;
  o.n_cross = 3;
  o.n_axial = 4;
  o.length = 0.02;
  return std::make_shared<const Mesh>(make_pipe(o));
}

Vec3 point_of(const Mesh& m, std::size_t cell, const std::array<double, 4>& l) {
  Vec3 x = Vec3::Zero();
  for (int i = 0; i < 4; ++i) x += l[i] * m.vertices()[m.tets()[cell][i]];
  return x;
}

std::array<double, 4> random_bary(std::mt19937& rng) {
  std::exponential_distribution<double> e(1.0);
  std::array<double, 4> l;
  double s = 0;
  for (auto& v : l) s += (v = e(rng));
  for (auto& v : l) v /= s;
  return l;
}

}  // namespace

TEST(Quadrature, TetExactness) {
  for (int d = 1; d <= 8; ++d) {
    const auto& q = tet_quadrature(d);
    for (int a = 0; a <= d; ++a) {
      for (int b = 0; a + b <= d; ++b) {
        for (int c = 0; a + b + c <= d; ++c) {
          double s = 0;
          for (std::size_t k = 0; k < q.size(); ++k) {
            const auto& p = q.points[k];
            s += q.weights[k] * std::pow(p[1], a) * std::pow(p[2], b) * std::pow(p[3], c);
          }
          const double exact = monomial_tet(a, b, c);
          EXPECT_NEAR(s / exact, 1.0, 1e-13) << "degree " << d << " monomial " << a << b << c;
        }
      }
    }
  }
}

TEST(Quadrature, TriangleExactness) {
  for (int d = 1; d <= 8; ++d) {
    const auto& q = tri_quadrature(d);
    for (int a = 0; a <= d; ++a) {
      for (int b = 0; a + b <= d; ++b) {
        double s = 0;
        for (std::size_t k = 0; k < q.size(); ++k) {
          s += q.weights[k] * std::pow(q.points[k][1], a) * std::pow(q.points[k][2], b);
        }
        EXPECT_NEAR(s / monomial_tri(a, b), 1.0, 1e-13);
      }
    }
  }
}

TEST(FESpace, DofCounts) {
  auto m = std::make_shared<const Mesh>(make_reference_tet());
  EXPECT_EQ(FESpace(m, 1, 3).n_dofs(), 12u);
  EXPECT_EQ(FESpace(m, 2, 1).n_dofs(), 10u);
  auto p = pipe_mesh();
  EXPECT_EQ(FESpace(p, 1, 1).n_dofs(), p->n_vertices());
  EXPECT_EQ(FESpace(p, 2, 1).n_dofs(), p->n_vertices() + p->n_edges());
  EXPECT_EQ(FESpace(p, 2, 3).n_dofs(), 3 * (p->n_vertices() + p->n_edges()));
}

TEST(FESpace, TableThreeDimensionRelation) {
  // dim P2 = vertices + edges. The published coarse mesh has 21,495
  // vertices and 106,983 cells; its P2 dimension 158,335 implies 136,840
  // edges, consistent with the Euler characteristic of a ball
  // V - E + F - T = 1 with F = (4T + B)/2 for B boundary faces.
  const long V = 21495, T = 106983, P2 = 158335;
  const long E = P2 - V;
  const long F = 1 - V + E + T;
  const long B = 2 * F - 4 * T;
  EXPECT_EQ(E, 136840);
  EXPECT_GT(B, 0);
  EXPECT_EQ(B % 2, 0);
}

TEST(FEFunction, LinearReproduction) {
  auto m = pipe_mesh();
  auto s = std::make_shared<const FESpace>(m, 1, 1);
  auto f = interpolate(s, [](const Vec3& x) { return x[0]; });
  std::mt19937 rng(1);
  for (std::size_t c = 0; c < m->n_tets(); c += 7) {
    const auto l = random_bary(rng);
    const auto v = f.evaluate_scalar(c, l);
    EXPECT_NEAR(v.value, point_of(*m, c, l)[0], 1e-15);
    EXPECT_TRUE((v.gradient - Vec3(1, 0, 0)).norm() < 1e-10);
    EXPECT_EQ(v.hessian.norm(), 0.0);
  }
}

TEST(FEFunction, QuadraticReproduction) {
  auto m = pipe_mesh();
  auto s = std::make_shared<const FESpace>(m, 2, 1);
  auto sq = interpolate(s, [](const Vec3& x) { return x[0] * x[0]; });
  auto xy = interpolate(s, [](const Vec3& x) { return x[0] * x[1]; });
  std::mt19937 rng(2);
  for (std::size_t c = 0; c < m->n_tets(); c += 5) {
    const auto h = sq.evaluate_scalar(c, random_bary(rng)).hessian;
    EXPECT_NEAR(h(0, 0), 2.0, 1e-8);
    const std::array<double, 4> centroid{0.25, 0.25, 0.25, 0.25};
    const Vec3 x = point_of(*m, c, centroid);
    const auto g = xy.evaluate_scalar(c, centroid).gradient;
    EXPECT_NEAR(g[0], x[1], 1e-12);
    EXPECT_NEAR(g[1], x[0], 1e-12);
    EXPECT_NEAR(g[2], 0.0, 1e-12);
  }
}

TEST(FEFunction, OutOfRangeCellThrows) {
  auto m = pipe_mesh();
  auto s = std::make_shared<const FESpace>(m, 1, 1);
  FEFunction f(s);
  EXPECT_THROW(f.evaluate_scalar(m->n_tets(), {0.25, 0.25, 0.25, 0.25}), std::out_of_range);
}

TEST(FEFunction, ConformityAcrossFaces) {
  auto m = pipe_mesh();
  for (int order : {1, 2}) {
    auto s = std::make_shared<const FESpace>(m, order, 3);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    Eigen::VectorXd c(s->n_dofs());
    for (auto& v : c) v = U(rng);
    FEFunction f(s, c);
    for (std::size_t cell = 0; cell < m->n_tets(); cell += 3) {
      for (int i = 0; i < 4; ++i) {
        const int nb = m->neighbor(cell, i);
        if (nb < 0) continue;
        // Random point on the face opposite vertex i.
        auto l = random_bary(rng);
        l[i] = 0;
        const double sum = l[0] + l[1] + l[2] + l[3];
        for (auto& v : l) v /= sum;
        const Vec3 x = point_of(*m, cell, l);
        // Barycentric coordinates of x in the neighbor.
        const auto& t = m->tets()[nb];
        Mat3 J;
        for (int k = 0; k < 3; ++k) J.col(k) = m->vertices()[t[k + 1]] - m->vertices()[t[0]];
        const Vec3 xi = J.inverse() * (x - m->vertices()[t[0]]);
        const std::array<double, 4> ln{1 - xi.sum(), xi[0], xi[1], xi[2]};
        const Vec3 a = f.evaluate_vector(cell, l).value;
        const Vec3 b = f.evaluate_vector(nb, ln).value;
        EXPECT_LT((a - b).norm(), 1e-12);
      }
    }
  }
}

TEST(FEFunction, SecondDerivativesMatchFiniteDifferences) {
  // Smooth function interpolated on successively refined meshes: the P2
  // Hessian converges to the exact Hessian; the FD of the P2 gradient inside
  // a cell equals the (constant) P2 Hessian up to rounding.
  auto m = pipe_mesh();
  auto s = std::make_shared<const FESpace>(m, 2, 1);
  auto f = interpolate(s, [](const Vec3& x) { return std::sin(100 * x[0]) * std::cos(80 * x[2]); });
  std::mt19937 rng(4);
  for (std::size_t c = 0; c < m->n_tets(); c += 11) {
    auto l = random_bary(rng);
    const auto v = f.evaluate_scalar(c, l);
    const auto& t = m->tets()[c];
    Mat3 J;
    for (int k = 0; k < 3; ++k) J.col(k) = m->vertices()[t[k + 1]] - m->vertices()[t[0]];
    const Mat3 Jinv = J.inverse();
    const double h = 1e-3;
    for (int d = 0; d < 3; ++d) {
      const Vec3 dxi = Jinv.col(d) * h;  // physical step h e_d
      std::array<double, 4> lp = l, lm = l;
      for (int k = 0; k < 3; ++k) {
        lp[k + 1] += dxi[k];
        lm[k + 1] -= dxi[k];
      }
      lp[0] = 1 - lp[1] - lp[2] - lp[3];
      lm[0] = 1 - lm[1] - lm[2] - lm[3];
      const Vec3 fd = (f.evaluate_scalar(c, lp).gradient - f.evaluate_scalar(c, lm).gradient) / (2 * h);
      EXPECT_LT((fd - v.hessian.col(d)).norm(), 1e-6 * (1 + v.hessian.norm()));
    }
  }
}

TEST(InletProfile, ConstantReproduction) {
  auto m = pipe_mesh();
  FESpace s(m, 2, 3);
  InletProfile p;
  const Vec3 c(0.1, -0.2, 0.3);
  for (int i = 0; i < 12; ++i) {
    const double a = 2 * M_PI * i / 12;
    p.points.emplace_back(0.004 * std::cos(a), 0.004 * std::sin(a), 0.0);
    p.velocities.push_back(c);
  }
  const auto vals = interpolate_inlet_profile(p, s);
  EXPECT_FALSE(vals.empty());
  for (const auto& v : vals) EXPECT_LT((v.velocity - c).norm(), 1e-14);
}

TEST(InletProfile, LinearPrecision) {
  auto m = pipe_mesh();
  FESpace s(m, 2, 3);
  Mat3 A;
  A << 1, 2, 3, -1, 0.5, 2, 0.3, -0.7, 1.1;
  InletProfile p;
  // Samples covering the disk generously so every node is inside the hull.
  for (int i = -6; i <= 6; ++i) {
    for (int j = -6; j <= 6; ++j) {
      const Vec3 x(0.001 * i, 0.001 * j, 0.0);
      p.points.push_back(x);
      p.velocities.push_back(A * x);
    }
  }
  for (const auto& v : interpolate_inlet_profile(p, s)) {
    const Vec3 x = s.node_position(v.node);
    EXPECT_LT((v.velocity - A * x).norm(), 1e-12);
  }
}

TEST(InletProfile, TooFewSamples) {
  auto m = pipe_mesh();
  FESpace s(m, 1, 3);
  InletProfile p;
  p.points.push_back(Vec3::Zero());
  p.velocities.push_back(Vec3::UnitZ());
  EXPECT_THROW(interpolate_inlet_profile(p, s), std::invalid_argument);
}

TEST(InletProfile, EmptyInletPatch) {
  auto m = std::make_shared<const Mesh>(make_reference_tet());
  FESpace s(m, 1, 3);
  InletProfile p;
  for (int i = 0; i < 3; ++i) {
    p.points.push_back(Vec3::Unit(i));
    p.velocities.push_back(Vec3::Zero());
  }
  EXPECT_THROW(interpolate_inlet_profile(p, s), std::invalid_argument);
}

TEST(InletProfile, NearestFallbackOutsideHull) {
  auto m = pipe_mesh();
  FESpace s(m, 1, 3);
  InletProfile p;
  // Tiny triangle at the center: rim nodes take the nearest sample.
  p.points = {Vec3(1e-4, 0, 0), Vec3(-1e-4, 1e-4, 0), Vec3(-1e-4, -1e-4, 0)};
  p.velocities = {Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};
  for (const auto& v : interpolate_inlet_profile(p, s)) {
    const Vec3 x = s.node_position(v.node);
    if (x.head<2>().norm() > 0.003 && x[0] > 0.003) EXPECT_EQ(v.velocity, Vec3(1, 0, 0));
  }
}
