#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hemo/mesh.hpp"

namespace hemo {

/// Quadrature on the reference tetrahedron (weights sum to 1/6) or the
/// reference triangle (weights sum to 1/2). Points are barycentric.
struct QuadratureRule {
  int degree = 0;
  std::vector<std::array<double, 4>> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Rule exact for polynomials of total degree <= degree on the tetrahedron.
const QuadratureRule& tet_quadrature(int degree);
/// Rule exact for polynomials of total degree <= degree on the triangle; the
/// fourth barycentric coordinate is unused.
const QuadratureRule& tri_quadrature(int degree);

/// Gauss-Jacobi nodes/weights on [-1, 1] for weight (1-x)^alpha (1+x)^beta.
void gauss_jacobi(int n, double alpha, double beta, std::vector<double>& nodes,
                  std::vector<double>& weights);

/// Lagrange basis on tetrahedra. Order 1 uses the vertices; order 2 adds
/// edge midpoints in Mesh::kLocalEdges order.
namespace basis {

constexpr int n_local(int order) { return order == 1 ? 4 : 10; }

void values(int order, const std::array<double, 4>& bary, std::span<double> out);
/// grad_lambda[i] is the (constant) gradient of barycentric coordinate i.
void gradients(int order, const std::array<double, 4>& bary,
               const std::array<Vec3, 4>& grad_lambda, std::span<Vec3> out);
/// Hessians are constant per cell (zero for order 1).
void hessians(int order, const std::array<Vec3, 4>& grad_lambda, std::span<Mat3> out);

}  // namespace basis

/// Gradients of the barycentric coordinates of a cell.
std::array<Vec3, 4> barycentric_gradients(const Mesh& mesh, std::size_t cell);

/// Continuous Lagrange space of order 1 or 2 with 1 or 3 components.
/// Vector DOFs are component-blocked: dof = component * n_scalar + node.
class FESpace {
 public:
  FESpace(std::shared_ptr<const Mesh> mesh, int order, int components);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int order() const { return order_; }
  int components() const { return components_; }
  std::size_t n_scalar() const { return n_scalar_; }
  std::size_t n_dofs() const { return n_scalar_ * components_; }
  int n_local() const { return basis::n_local(order_); }

  /// Scalar node indices of a cell (vertices, then edges for order 2).
  std::array<int, 10> cell_nodes(std::size_t cell) const;
  std::size_t dof(int component, std::size_t node) const {
    return component * n_scalar_ + node;
  }
  /// Physical position of a scalar node.
  Vec3 node_position(std::size_t node) const;

  /// Scalar nodes lying on boundary face f (3 or 6).
  std::vector<int> face_nodes(std::size_t f) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  int order_;
  int components_;
  std::size_t n_scalar_;
};

struct ScalarValue {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
  Mat3 hessian = Mat3::Zero();
};

struct VectorValue {
  Vec3 value = Vec3::Zero();
  Mat3 gradient = Mat3::Zero();            ///< gradient(i, j) = d u_i / d x_j
  std::array<Mat3, 3> hessian{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};

  Vec3 laplacian() const {
    return Vec3(hessian[0].trace(), hessian[1].trace(), hessian[2].trace());
  }
};

/// Coefficient vector over a space, stamped with a time.
class FEFunction {
 public:
  FEFunction() = default;
  explicit FEFunction(std::shared_ptr<const FESpace> space, double time = 0.0);
  FEFunction(std::shared_ptr<const FESpace> space, Eigen::VectorXd coefficients,
             double time = 0.0);

  const FESpace& space() const { return *space_; }
  const std::shared_ptr<const FESpace>& space_ptr() const { return space_; }
  Eigen::VectorXd& coefficients() { return coeffs_; }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  ScalarValue evaluate_scalar(std::size_t cell, const std::array<double, 4>& bary) const;
  VectorValue evaluate_vector(std::size_t cell, const std::array<double, 4>& bary) const;

 private:
  std::shared_ptr<const FESpace> space_;
  Eigen::VectorXd coeffs_;
  double time_ = 0.0;
};

/// Nodal interpolation of a scalar function.
FEFunction interpolate(std::shared_ptr<const FESpace> space,
                       const std::function<double(const Vec3&)>& f, double time = 0.0);
/// Nodal interpolation of a vector function (space must have 3 components).
FEFunction interpolate_vector(std::shared_ptr<const FESpace> space,
                              const std::function<Vec3(const Vec3&)>& f,
                              double time = 0.0);

/// Point-sampled velocity profile on the inlet plane.
struct InletProfile {
  std::vector<Vec3> points;
  std::vector<Vec3> velocities;
};

InletProfile read_inlet_profile(const std::filesystem::path& path);

/// Velocity assigned to a scalar node of the inlet patch.
struct InletNodeValue {
  int node;
  Vec3 velocity;
};

/// Linear interpolation of the profile (Delaunay triangulation of the samples
/// projected on the inlet plane) onto every node of the inlet patch. Nodes
/// outside the convex hull take the nearest sample.
std::vector<InletNodeValue> interpolate_inlet_profile(const InletProfile& profile,
                                                      const FESpace& space);

/// Inlet plane fit: area-weighted centroid and unit normal pointing out of
/// the domain.
struct PatchPlane {
  Vec3 centroid;
  Vec3 normal;
  double area;
  double max_radius;  ///< largest vertex distance from the centroid
};

PatchPlane patch_plane(const Mesh& mesh, const PatchLabel& label);

/// Evaluates an analytic velocity field at every node of the inlet patch.
std::vector<InletNodeValue> inlet_values_from_function(
    const FESpace& space, const std::function<Vec3(const Vec3&)>& f);

/// Parabolic profile peak * (1 - r^2/R^2) directed into the domain, with R
/// the largest inlet vertex distance from the inlet centroid.
std::vector<InletNodeValue> parabolic_inlet_values(const FESpace& space,
                                                   double peak_velocity);

}  // namespace hemo
