#include "hemo/fe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace hemo {

// ---------------------------------------------------------------------------
// Quadrature

void gauss_jacobi(int n, double alpha, double beta, std::vector<double>& nodes,
                  std::vector<double>& weights) {
  // Golub-Welsch on the symmetric Jacobi matrix of P^(alpha, beta).
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  const double ab = alpha + beta;
  for (int k = 0; k < n; ++k) {
    const double s = 2.0 * k + ab;
    if (k == 0) {
      T(0, 0) = (beta - alpha) / (ab + 2.0);
    } else {
      T(k, k) = (beta * beta - alpha * alpha) / (s * (s + 2.0));
    }
    if (k + 1 < n) {
      const double m = k + 1.0;
      const double sm = 2.0 * m + ab;
      const double b = std::sqrt(4.0 * m * (m + alpha) * (m + beta) * (m + ab) /
                                 (sm * sm * (sm + 1.0) * (sm - 1.0)));
      T(k, k + 1) = T(k + 1, k) = b;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  const double mu0 = std::pow(2.0, ab + 1.0) * std::tgamma(alpha + 1.0) *
                     std::tgamma(beta + 1.0) / std::tgamma(ab + 2.0);
  nodes.resize(n);
  weights.resize(n);
  for (int k = 0; k < n; ++k) {
    nodes[k] = es.eigenvalues()[k];
    const double v0 = es.eigenvectors()(0, k);
    weights[k] = mu0 * v0 * v0;
  }
}

namespace {

QuadratureRule collapsed_tet_rule(int degree) {
  const int n = std::max(1, (degree + 2) / 2);
  std::vector<double> xu, wu, xv, wv, xw, ww;
  gauss_jacobi(n, 2.0, 0.0, xu, wu);
  gauss_jacobi(n, 1.0, 0.0, xv, wv);
  gauss_jacobi(n, 0.0, 0.0, xw, ww);
  QuadratureRule q;
  q.degree = degree;
  for (int i = 0; i < n; ++i) {
    const double u = 0.5 * (xu[i] + 1.0);
    for (int j = 0; j < n; ++j) {
      const double v = 0.5 * (xv[j] + 1.0);
      for (int k = 0; k < n; ++k) {
        const double w = 0.5 * (xw[k] + 1.0);
        const double l1 = u;
        const double l2 = (1.0 - u) * v;
        const double l3 = (1.0 - u) * (1.0 - v) * w;
        q.points.push_back({1.0 - l1 - l2 - l3, l1, l2, l3});
        q.weights.push_back(wu[i] * wv[j] * ww[k] / 64.0);
      }
    }
  }
  return q;
}

QuadratureRule collapsed_tri_rule(int degree) {
  const int n = std::max(1, (degree + 2) / 2);
  std::vector<double> xu, wu, xv, wv;
  gauss_jacobi(n, 1.0, 0.0, xu, wu);
  gauss_jacobi(n, 0.0, 0.0, xv, wv);
  QuadratureRule q;
  q.degree = degree;
  for (int i = 0; i < n; ++i) {
    const double u = 0.5 * (xu[i] + 1.0);
    for (int j = 0; j < n; ++j) {
      const double v = 0.5 * (xv[j] + 1.0);
      const double l1 = u, l2 = (1.0 - u) * v;
      q.points.push_back({1.0 - l1 - l2, l1, l2, 0.0});
      q.weights.push_back(wu[i] * wv[j] / 8.0);
    }
  }
  return q;
}

QuadratureRule make_tet_rule(int degree) {
  if (degree <= 1) {
    return {1, {{0.25, 0.25, 0.25, 0.25}}, {1.0 / 6.0}};
  }
  if (degree == 2) {
    const double a = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
    const double b = (5.0 - std::sqrt(5.0)) / 20.0;
    QuadratureRule q;
    q.degree = 2;
    for (int i = 0; i < 4; ++i) {
      std::array<double, 4> p{b, b, b, b};
      p[i] = a;
      q.points.push_back(p);
      q.weights.push_back(1.0 / 24.0);
    }
    return q;
  }
  return collapsed_tet_rule(degree);
}

QuadratureRule make_tri_rule(int degree) {
  if (degree <= 1) return {1, {{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0}}, {0.5}};
  if (degree == 2) {
    QuadratureRule q;
    q.degree = 2;
    for (int i = 0; i < 3; ++i) {
      std::array<double, 4> p{1.0 / 6, 1.0 / 6, 1.0 / 6, 0.0};
      p[i] = 2.0 / 3;
      q.points.push_back(p);
      q.weights.push_back(1.0 / 6.0);
    }
    return q;
  }
  return collapsed_tri_rule(degree);
}

template <typename Make>
const QuadratureRule& cached_rule(std::map<int, QuadratureRule>& cache, std::mutex& mtx,
                                  int degree, Make make) {
  std::lock_guard lock(mtx);
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, make(degree)).first;
  return it->second;
}

}  // namespace

const QuadratureRule& tet_quadrature(int degree) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mtx;
  return cached_rule(cache, mtx, degree, make_tet_rule);
}

const QuadratureRule& tri_quadrature(int degree) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mtx;
  return cached_rule(cache, mtx, degree, make_tri_rule);
}

// ---------------------------------------------------------------------------
// Basis

namespace basis {

void values(int order, const std::array<double, 4>& l, std::span<double> out) {
  if (order == 1) {
    for (int i = 0; i < 4; ++i) out[i] = l[i];
    return;
  }
  for (int i = 0; i < 4; ++i) out[i] = l[i] * (2.0 * l[i] - 1.0);
  for (int e = 0; e < 6; ++e) {
    const auto& ed = Mesh::kLocalEdges[e];
    out[4 + e] = 4.0 * l[ed[0]] * l[ed[1]];
  }
}

void gradients(int order, const std::array<double, 4>& l,
               const std::array<Vec3, 4>& gl, std::span<Vec3> out) {
  if (order == 1) {
    for (int i = 0; i < 4; ++i) out[i] = gl[i];
    return;
  }
  for (int i = 0; i < 4; ++i) out[i] = (4.0 * l[i] - 1.0) * gl[i];
  for (int e = 0; e < 6; ++e) {
    const int a = Mesh::kLocalEdges[e][0], b = Mesh::kLocalEdges[e][1];
    out[4 + e] = 4.0 * (l[b] * gl[a] + l[a] * gl[b]);
  }
}

void hessians(int order, const std::array<Vec3, 4>& gl, std::span<Mat3> out) {
  if (order == 1) {
    for (int i = 0; i < 4; ++i) out[i].setZero();
    return;
  }
  for (int i = 0; i < 4; ++i) out[i] = 4.0 * gl[i] * gl[i].transpose();
  for (int e = 0; e < 6; ++e) {
    const int a = Mesh::kLocalEdges[e][0], b = Mesh::kLocalEdges[e][1];
    out[4 + e] = 4.0 * (gl[a] * gl[b].transpose() + gl[b] * gl[a].transpose());
  }
}

}  // namespace basis

std::array<Vec3, 4> barycentric_gradients(const Mesh& mesh, std::size_t cell) {
  const auto& t = mesh.tets()[cell];
  const auto& x = mesh.vertices();
  Mat3 J;
  for (int k = 0; k < 3; ++k) J.col(k) = x[t[k + 1]] - x[t[0]];
  const Mat3 Jinv = J.inverse();
  std::array<Vec3, 4> g;
  for (int k = 0; k < 3; ++k) g[k + 1] = Jinv.row(k).transpose();
  g[0] = -(g[1] + g[2] + g[3]);
  return g;
}

// ---------------------------------------------------------------------------
// Spaces and functions

FESpace::FESpace(std::shared_ptr<const Mesh> mesh, int order, int components)
    : mesh_(std::move(mesh)), order_(order), components_(components) {
  if (order != 1 && order != 2) throw std::invalid_argument("FESpace: order must be 1 or 2");
  if (components != 1 && components != 3) {
    throw std::invalid_argument("FESpace: components must be 1 or 3");
  }
  n_scalar_ = mesh_->n_vertices() + (order == 2 ? mesh_->n_edges() : 0);
}

std::array<int, 10> FESpace::cell_nodes(std::size_t cell) const {
  std::array<int, 10> nodes{};
  const auto& t = mesh_->tets()[cell];
  for (int i = 0; i < 4; ++i) nodes[i] = t[i];
  if (order_ == 2) {
    const int nv = static_cast<int>(mesh_->n_vertices());
    const auto& ce = mesh_->cell_edges(cell);
    for (int e = 0; e < 6; ++e) nodes[4 + e] = nv + ce[e];
  }
  return nodes;
}

Vec3 FESpace::node_position(std::size_t node) const {
  const std::size_t nv = mesh_->n_vertices();
  if (node < nv) return mesh_->vertices()[node];
  const auto& e = mesh_->edges()[node - nv];
  return 0.5 * (mesh_->vertices()[e[0]] + mesh_->vertices()[e[1]]);
}

std::vector<int> FESpace::face_nodes(std::size_t f) const {
  const auto& v = mesh_->boundary_faces()[f].v;
  std::vector<int> nodes{v[0], v[1], v[2]};
  if (order_ == 2) {
    const auto& edges = mesh_->edges();
    const int nv = static_cast<int>(mesh_->n_vertices());
    for (int k = 0; k < 3; ++k) {
      const int a = v[k], b = v[(k + 1) % 3];
      const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      const auto it = std::lower_bound(edges.begin(), edges.end(), key);
      nodes.push_back(nv + static_cast<int>(it - edges.begin()));
    }
  }
  return nodes;
}

FEFunction::FEFunction(std::shared_ptr<const FESpace> space, double time)
    : space_(std::move(space)), coeffs_(Eigen::VectorXd::Zero(space_->n_dofs())), time_(time) {}

FEFunction::FEFunction(std::shared_ptr<const FESpace> space, Eigen::VectorXd coefficients,
                       double time)
    : space_(std::move(space)), coeffs_(std::move(coefficients)), time_(time) {
  if (static_cast<std::size_t>(coeffs_.size()) != space_->n_dofs()) {
    throw std::invalid_argument("FEFunction: coefficient length does not match space");
  }
}

ScalarValue FEFunction::evaluate_scalar(std::size_t cell,
                                        const std::array<double, 4>& bary) const {
  if (cell >= space_->mesh().n_tets()) throw std::out_of_range("evaluate: cell index out of range");
  const int order = space_->order();
  const int nl = space_->n_local();
  const auto nodes = space_->cell_nodes(cell);
  const auto gl = barycentric_gradients(space_->mesh(), cell);
  std::array<double, 10> phi;
  std::array<Vec3, 10> dphi;
  std::array<Mat3, 10> hphi;
  basis::values(order, bary, phi);
  basis::gradients(order, bary, gl, dphi);
  basis::hessians(order, gl, hphi);
  ScalarValue r;
  for (int a = 0; a < nl; ++a) {
    const double c = coeffs_[space_->dof(0, nodes[a])];
    r.value += c * phi[a];
    r.gradient += c * dphi[a];
    r.hessian += c * hphi[a];
  }
  return r;
}

VectorValue FEFunction::evaluate_vector(std::size_t cell,
                                        const std::array<double, 4>& bary) const {
  if (cell >= space_->mesh().n_tets()) throw std::out_of_range("evaluate: cell index out of range");
  if (space_->components() != 3) throw std::invalid_argument("evaluate_vector on scalar space");
  const int order = space_->order();
  const int nl = space_->n_local();
  const auto nodes = space_->cell_nodes(cell);
  const auto gl = barycentric_gradients(space_->mesh(), cell);
  std::array<double, 10> phi;
  std::array<Vec3, 10> dphi;
  std::array<Mat3, 10> hphi;
  basis::values(order, bary, phi);
  basis::gradients(order, bary, gl, dphi);
  basis::hessians(order, gl, hphi);
  VectorValue r;
  for (int i = 0; i < 3; ++i) {
    for (int a = 0; a < nl; ++a) {
      const double c = coeffs_[space_->dof(i, nodes[a])];
      r.value[i] += c * phi[a];
      r.gradient.row(i) += c * dphi[a].transpose();
      r.hessian[i] += c * hphi[a];
    }
  }
  return r;
}

FEFunction interpolate(std::shared_ptr<const FESpace> space,
                       const std::function<double(const Vec3&)>& f, double time) {
  FEFunction u(space, time);
  for (std::size_t n = 0; n < space->n_scalar(); ++n) {
    const double v = f(space->node_position(n));
    for (int c = 0; c < space->components(); ++c) u.coefficients()[space->dof(c, n)] = v;
  }
  return u;
}

FEFunction interpolate_vector(std::shared_ptr<const FESpace> space,
                              const std::function<Vec3(const Vec3&)>& f, double time) {
  if (space->components() != 3) throw std::invalid_argument("interpolate_vector on scalar space");
  FEFunction u(space, time);
  for (std::size_t n = 0; n < space->n_scalar(); ++n) {
    const Vec3 v = f(space->node_position(n));
    for (int c = 0; c < 3; ++c) u.coefficients()[space->dof(c, n)] = v[c];
  }
  return u;
}

// ---------------------------------------------------------------------------
// Inlet profiles

InletProfile read_inlet_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open inlet profile " + path.string());
  InletProfile p;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double v[6];
    int k = 0;
    while (k < 6 && ss >> v[k]) ++k;
    if (k == 0 && ss.eof()) continue;
    std::string extra;
    if (k != 6 || (ss >> extra)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 'x y z vx vy vz'");
    }
    p.points.emplace_back(v[0], v[1], v[2]);
    p.velocities.emplace_back(v[3], v[4], v[5]);
  }
  return p;
}

PatchPlane patch_plane(const Mesh& mesh, const PatchLabel& label) {
  PatchPlane pp{Vec3::Zero(), Vec3::Zero(), 0.0, 0.0};
  std::vector<int> verts;
  for (std::size_t f = 0; f < mesh.boundary_faces().size(); ++f) {
    if (!(mesh.boundary_faces()[f].label == label)) continue;
    const double a = mesh.face_area(f);
    pp.area += a;
    pp.centroid += a * mesh.face_centroid(f);
    pp.normal += a * mesh.face_normal(f);
    for (int v : mesh.boundary_faces()[f].v) verts.push_back(v);
  }
  if (pp.area <= 0) throw std::invalid_argument("patch " + label.token() + " is empty");
  pp.centroid /= pp.area;
  pp.normal.normalize();
  for (int v : verts) {
    Vec3 d = mesh.vertices()[v] - pp.centroid;
    d -= d.dot(pp.normal) * pp.normal;
    pp.max_radius = std::max(pp.max_radius, d.norm());
  }
  return pp;
}

namespace {

using Vec2 = Eigen::Vector2d;

std::vector<int> inlet_nodes(const FESpace& space) {
  std::vector<int> nodes;
  const auto& faces = space.mesh().boundary_faces();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (!faces[f].label.is_inlet()) continue;
    for (int n : space.face_nodes(f)) nodes.push_back(n);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  if (nodes.empty()) throw std::invalid_argument("mesh has an empty inlet patch");
  return nodes;
}

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
}

// Bowyer-Watson triangulation; returns counter-clockwise triangles.
std::vector<std::array<int, 3>> delaunay(const std::vector<Vec2>& pts) {
  const int n = static_cast<int>(pts.size());
  Vec2 lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 mid = 0.5 * (lo + hi);
  const double span = std::max((hi - lo).maxCoeff(), 1e-300);
  std::vector<Vec2> P = pts;
  P.push_back(mid + Vec2(-40 * span, -30 * span));
  P.push_back(mid + Vec2(40 * span, -30 * span));
  P.push_back(mid + Vec2(0, 40 * span));

  struct Tri {
    std::array<int, 3> v;
    Vec2 center;
    double r2;
  };
  auto make = [&](int a, int b, int c) {
    if (orient2d(P[a], P[b], P[c]) < 0) std::swap(b, c);
    const Vec2 &A = P[a], &B = P[b], &C = P[c];
    const double d = 2.0 * (A.x() * (B.y() - C.y()) + B.x() * (C.y() - A.y()) +
                            C.x() * (A.y() - B.y()));
    const double a2 = A.squaredNorm(), b2 = B.squaredNorm(), c2 = C.squaredNorm();
    const Vec2 center((a2 * (B.y() - C.y()) + b2 * (C.y() - A.y()) + c2 * (A.y() - B.y())) / d,
                      (a2 * (C.x() - B.x()) + b2 * (A.x() - C.x()) + c2 * (B.x() - A.x())) / d);
    return Tri{{a, b, c}, center, (A - center).squaredNorm()};
  };

  std::vector<Tri> tris{make(n, n + 1, n + 2)};
  for (int i = 0; i < n; ++i) {
    const Vec2& p = P[i];
    std::vector<std::array<int, 2>> edges;
    std::vector<Tri> keep;
    keep.reserve(tris.size() + 4);
    for (const auto& t : tris) {
      if ((p - t.center).squaredNorm() < t.r2 * (1.0 + 1e-12)) {
        for (int k = 0; k < 3; ++k) edges.push_back({t.v[k], t.v[(k + 1) % 3]});
      } else {
        keep.push_back(t);
      }
    }
    // Hole boundary: edges not shared by two removed triangles.
    for (std::size_t a = 0; a < edges.size(); ++a) {
      bool shared = false;
      for (std::size_t b = 0; b < edges.size(); ++b) {
        if (a != b && edges[a][0] == edges[b][1] && edges[a][1] == edges[b][0]) {
          shared = true;
          break;
        }
      }
      if (!shared) keep.push_back(make(edges[a][0], edges[a][1], i));
    }
    tris = std::move(keep);
  }
  std::vector<std::array<int, 3>> out;
  for (const auto& t : tris) {
    if (t.v[0] < n && t.v[1] < n && t.v[2] < n) out.push_back(t.v);
  }
  return out;
}

}  // namespace

std::vector<InletNodeValue> interpolate_inlet_profile(const InletProfile& profile,
                                                      const FESpace& space) {
  if (profile.points.size() != profile.velocities.size()) {
    throw std::invalid_argument("inlet profile: point/velocity count mismatch");
  }
  if (profile.points.size() < 3) {
    throw std::invalid_argument("inlet profile needs at least 3 sample points");
  }
  const auto nodes = inlet_nodes(space);
  const PatchPlane plane = patch_plane(space.mesh(), PatchLabel::inlet());
  const Vec3 n = plane.normal;
  const Vec3 seed = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 t1 = n.cross(seed).normalized();
  const Vec3 t2 = n.cross(t1);
  auto project = [&](const Vec3& x) {
    const Vec3 d = x - plane.centroid;
    return Vec2(d.dot(t1), d.dot(t2));
  };

  std::vector<Vec2> pts;
  std::vector<Vec3> vel;
  pts.reserve(profile.points.size());
  {
    // Drop duplicate samples (same projected position).
    std::vector<std::pair<std::array<double, 2>, int>> keyed;
    for (std::size_t i = 0; i < profile.points.size(); ++i) {
      const Vec2 p = project(profile.points[i]);
      keyed.push_back({{p.x(), p.y()}, static_cast<int>(i)});
    }
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t i = 0; i < keyed.size(); ++i) {
      if (i > 0 && keyed[i].first == keyed[i - 1].first) continue;
      pts.emplace_back(keyed[i].first[0], keyed[i].first[1]);
      vel.push_back(profile.velocities[keyed[i].second]);
    }
  }
  Vec2 lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double span = (hi - lo).maxCoeff();
  auto tris = pts.size() >= 3 ? delaunay(pts) : std::vector<std::array<int, 3>>{};
  if (tris.empty() || !(span > 0)) {
    throw std::invalid_argument("inlet profile samples are collinear");
  }

  std::vector<InletNodeValue> out;
  out.reserve(nodes.size());
  for (int node : nodes) {
    const Vec2 q = project(space.node_position(node));
    bool found = false;
    Vec3 v = Vec3::Zero();
    for (const auto& t : tris) {
      const Vec2 &A = pts[t[0]], &B = pts[t[1]], &C = pts[t[2]];
      const double area = orient2d(A, B, C);
      if (!(area > 0)) continue;
      const double l0 = orient2d(q, B, C) / area;
      const double l1 = orient2d(A, q, C) / area;
      const double l2 = 1.0 - l0 - l1;
      const double tol = -1e-12;
      if (l0 >= tol && l1 >= tol && l2 >= tol) {
        v = l0 * vel[t[0]] + l1 * vel[t[1]] + l2 * vel[t[2]];
        found = true;
        break;
      }
    }
    if (!found) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = (pts[i] - q).squaredNorm();
        if (d < bd) {
          bd = d;
          best = i;
        }
      }
      v = vel[best];
    }
    out.push_back({node, v});
  }
  return out;
}

std::vector<InletNodeValue> inlet_values_from_function(
    const FESpace& space, const std::function<Vec3(const Vec3&)>& f) {
  std::vector<InletNodeValue> out;
  for (int node : inlet_nodes(space)) out.push_back({node, f(space.node_position(node))});
  return out;
}

std::vector<InletNodeValue> parabolic_inlet_values(const FESpace& space,
                                                   double peak_velocity) {
  const PatchPlane plane = patch_plane(space.mesh(), PatchLabel::inlet());
  const double R2 = plane.max_radius * plane.max_radius;
  return inlet_values_from_function(space, [&](const Vec3& x) {
    Vec3 d = x - plane.centroid;
    d -= d.dot(plane.normal) * plane.normal;
    const double s = std::max(0.0, 1.0 - d.squaredNorm() / R2);
    return Vec3(-peak_velocity * s * plane.normal);
  });
}

}  // namespace hemo
