#pragma once

#include <functional>
#include <vector>

#include "hemo/mesh.hpp"

namespace hemo {

/// Reference tetrahedron (0,0,0) (1,0,0) (0,1,0) (0,0,1), all faces wall.
Mesh make_reference_tet(double scale = 1.0);

/// Straight circular pipe along +z. The n_cross x n_cross square grid of the
/// cross-section is mapped onto the disk and every hexahedral cell is split
/// into 6 tetrahedra. Inlet at z = 0, outlet:1 at z = length.
struct PipeOptions {
  double radius = 0.005;
  double length = 0.05;
  int n_cross = 5;
  int n_axial = 20;
  /// Optional smooth constriction: the radius is multiplied by
  /// 1 - severity * (1 + cos(pi (z - center) / half_width)) / 2 inside the
  /// window |z - center| < half_width.
  double stenosis_severity = 0.0;
  double stenosis_center = 0.0;
  double stenosis_half_width = 0.0;
};

Mesh make_pipe(const PipeOptions& opt);

/// Axis-aligned cylindrical tube used by the voxel network generator.
struct Tube {
  int axis = 0;            ///< 0 = x, 1 = y, 2 = z
  Vec3 start = Vec3::Zero();
  double length = 0.0;     ///< tube spans start .. start + length * e_axis
  double radius = 0.0;
  /// Labels of the caps at start / end; Wall means closed/merged.
  PatchLabel start_cap = PatchLabel::wall();
  PatchLabel end_cap = PatchLabel::wall();
};

/// Union of tubes rasterized on a cubic lattice of spacing h; each lattice
/// cube whose center lies in a tube becomes 6 tetrahedra. Caps must sit on
/// lattice planes.
Mesh make_voxel_network(const std::vector<Tube>& tubes, double h);

/// Main tube along +x (inlet at x = 0, outlet:3 at the far end) with two side
/// branches along +y (outlet:1, outlet:2).
struct BifurcationOptions {
  double h = 0.001;
  double main_radius = 0.004;
  double main_length = 0.040;
  double branch_radius_1 = 0.0025;
  double branch_radius_2 = 0.0022;
  double branch_x_1 = 0.014;
  double branch_x_2 = 0.026;
  double branch_length = 0.012;  ///< measured from the main tube axis
};

Mesh make_bifurcation(const BifurcationOptions& opt);

/// Symmetric T-junction: inlet tube along +y feeding a horizontal tube whose
/// ends are outlet:1 (x = 0) and outlet:2 (x = length).
struct TeeOptions {
  double h = 0.001;
  double radius = 0.003;
  double length = 0.030;
  double stem_length = 0.012;
};

Mesh make_tee(const TeeOptions& opt);

/// Builds a mesh from vertices and tetrahedra, labeling every exposed face
/// with the supplied classifier.
Mesh label_exposed_faces(
    std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets,
    const std::function<PatchLabel(const std::array<int, 3>&)>& classify);

}  // namespace hemo
