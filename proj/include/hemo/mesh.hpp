#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hemo {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Error raised while reading or validating a mesh.
class MeshError : public std::runtime_error {
 public:
  enum class Kind { Parse, Topology, Label, Degenerate };

  MeshError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Boundary patch tag: inlet, wall, or a numbered outlet (1-based).
struct PatchLabel {
  enum class Kind { Inlet, Wall, Outlet };

  Kind kind = Kind::Wall;
  int outlet = 0;

  static PatchLabel inlet() { return {Kind::Inlet, 0}; }
  static PatchLabel wall() { return {Kind::Wall, 0}; }
  static PatchLabel outlet_k(int k) { return {Kind::Outlet, k}; }

  bool is_inlet() const { return kind == Kind::Inlet; }
  bool is_wall() const { return kind == Kind::Wall; }
  bool is_outlet() const { return kind == Kind::Outlet; }

  /// Token used by the mesh file format: `inlet`, `wall`, `outlet:<k>`.
  std::string token() const;
  static PatchLabel parse(const std::string& token);

  friend bool operator==(const PatchLabel&, const PatchLabel&) = default;
};

struct BoundaryFace {
  std::array<int, 3> v;
  PatchLabel label;
};

/// Tetrahedral mesh with labeled boundary faces. Immutable once built.
///
/// Construction validates the input: tetrahedra are reoriented to positive
/// volume, zero-volume cells are rejected, every exposed tetrahedron face must
/// carry exactly one boundary label, and unreferenced vertices are refused.
class Mesh {
 public:
  Mesh() = default;

  static Mesh build(std::vector<Vec3> vertices,
                    std::vector<std::array<int, 4>> tets,
                    std::vector<BoundaryFace> faces);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 4>>& tets() const { return tets_; }
  const std::vector<BoundaryFace>& boundary_faces() const { return faces_; }

  std::size_t n_vertices() const { return vertices_.size(); }
  std::size_t n_tets() const { return tets_.size(); }
  std::size_t n_edges() const { return edges_.size(); }
  int n_outlets() const { return n_outlets_; }
  bool has_inlet() const { return has_inlet_; }

  /// Global edges as sorted vertex pairs.
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  /// Local edge order: (0,1) (0,2) (0,3) (1,2) (1,3) (2,3).
  const std::array<int, 6>& cell_edges(std::size_t cell) const {
    return cell_edges_[cell];
  }
  static constexpr std::array<std::array<int, 2>, 6> kLocalEdges{
      {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

  /// Cell adjacent to boundary face f.
  int face_cell(std::size_t f) const { return face_cell_[f]; }
  /// Neighbor across local face i (opposite vertex i), or -1 on the boundary.
  int neighbor(std::size_t cell, int i) const { return neighbors_[cell][i]; }

  double cell_volume(std::size_t cell) const;
  Vec3 cell_centroid(std::size_t cell) const;
  double face_area(std::size_t f) const;
  /// Unit normal of boundary face f pointing out of the domain.
  Vec3 face_normal(std::size_t f) const;
  Vec3 face_centroid(std::size_t f) const;

  /// Total boundary area of faces whose label matches.
  double patch_area(const PatchLabel& label) const;

  /// FNV-1a hash of the vertex/tet/face data; used to tag snapshots.
  std::uint64_t content_hash() const;

 private:
  void build_topology();

  std::vector<Vec3> vertices_;
  std::vector<std::array<int, 4>> tets_;
  std::vector<BoundaryFace> faces_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<int, 6>> cell_edges_;
  std::vector<std::array<int, 4>> neighbors_;
  std::vector<int> face_cell_;
  int n_outlets_ = 0;
  bool has_inlet_ = false;
};

Mesh read_mesh(std::istream& in);
Mesh load_mesh(const std::filesystem::path& path);
void write_mesh(std::ostream& out, const Mesh& mesh);
void save_mesh(const std::filesystem::path& path, const Mesh& mesh);

/// Edge-midpoint subdivision into 8 children per tetrahedron. The inner
/// octahedron is cut along its shortest diagonal.
Mesh uniform_refine(const Mesh& mesh);

/// Per-cell geometric data derived from the affine map
/// F(xi) = x0 + J xi from the reference tetrahedron.
struct ElementGeometry {
  Mat3 jacobian;
  Mat3 inverse_jacobian;  ///< gradient of F^{-1}
  Mat3 metric;            ///< G = J^{-T} J^{-1}
  Vec3 metric_sum;        ///< g_j = sum_i (J^{-1})_ij
  double volume = 0.0;
  double shortest_edge = 0.0;
  Vec3 widths;            ///< extent of the cell along each coordinate axis
};

ElementGeometry element_geometry(const Mesh& mesh, std::size_t cell);

struct MeshStats {
  std::size_t n_tets = 0;
  std::size_t n_vertices = 0;
  double y_max = 0.0;  ///< max boundary-layer height
  double y_bar = 0.0;  ///< area-weighted mean boundary-layer height
  double v_max = 0.0;
  double v_bar = 0.0;
};

MeshStats mesh_statistics(const Mesh& mesh);

/// Signed volume of the tetrahedron (a, b, c, d).
double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c,
                     const Vec3& d);

}  // namespace hemo
