#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hemo/fe.hpp"
#include "hemo/mesh.hpp"
#include "hemo/ns_solver.hpp"

namespace hemo {

/// Reference peak pressure difference of 20 mmHg in Pa.
inline constexpr double kSevereCoarctationPressure = 2666.4;

/// Barycentric coordinates of x with respect to a cell.
std::array<double, 4> barycentric_coordinates(const Mesh& mesh, std::size_t cell, const Vec3& x);

/// Planar cut through the mesh with a Cartesian quadrature grid.
struct CrossSection {
  Vec3 origin = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 tangent1 = Vec3::UnitX();
  Vec3 tangent2 = Vec3::UnitY();
  double resolution = 1e-3;
  /// Grid points with their containing cell and barycentric coordinates;
  /// every point carries the weight resolution^2.
  std::vector<Vec3> points;
  std::vector<std::size_t> point_cells;
  std::vector<std::array<double, 4>> point_bary;
  /// Cells cut by the plane in the connected piece containing the origin.
  std::vector<std::size_t> cells;
  double area = 0.0;       ///< area of the polygonal cut
  double perimeter = 0.0;  ///< length of the cut through the boundary
  Vec3 polygon_centroid = Vec3::Zero();
  Vec3 center = Vec3::Zero();  ///< centroid of the quadrature points

  double hydraulic_radius() const { return area / perimeter; }
  double grid_area() const { return static_cast<double>(points.size()) * resolution * resolution; }
  double weight() const { return resolution * resolution; }
};

/// Cuts the mesh with the plane through origin with the given normal and
/// keeps the connected piece containing the origin. The grid is anchored at
/// the origin. Throws std::invalid_argument for an empty intersection.
CrossSection build_cross_section(const Mesh& mesh, const Vec3& origin, const Vec3& normal,
                                 double resolution = 1e-3);

/// Mean of p over the section grid.
double mean_pressure(const FEFunction& p, const CrossSection& s);
double pressure_difference(const FEFunction& p, const CrossSection& s_to,
                           const CrossSection& s_from);

/// Cells whose centroids lie between two sections (signed distance to the
/// first plane >= 0 and to the second <= 0).
struct WedgeRegion {
  std::size_t first = 0, second = 1;
  std::vector<std::size_t> cells;
};

WedgeRegion build_wedge(const Mesh& mesh, const std::vector<CrossSection>& sections,
                        std::size_t first, std::size_t second);

double max_velocity(const FEFunction& u, const CrossSection& s);
/// Maximum over nodes and degree-4 quadrature points of the member cells.
double max_velocity(const FEFunction& u, const WedgeRegion& w);

/// Integrals of the tangential and normal speed over a section and the
/// normal-speed moment, from which SFD and NFD follow.
struct SectionFlow {
  double tangential = 0.0;  ///< int |u - (u.n) n|
  double normal = 0.0;      ///< int |u.n|
  Vec3 moment = Vec3::Zero();  ///< int |u.n| x
  bool defined = false;     ///< normal exceeds the flow threshold
  double sfd = 0.0;
  double nfd = 0.0;
};

/// Threshold for undefined SFD/NFD samples: 1e-12 * U * A with U = 1 m/s.
double flow_threshold(const CrossSection& s);
SectionFlow section_flow(const FEFunction& u, const CrossSection& s);
double sfd(const FEFunction& u, const CrossSection& s);
double nfd(const FEFunction& u, const CrossSection& s);

/// Ratio of time integrals of tangential and normal flow (trapezoidal).
double sfd_time_average(const std::vector<double>& times, const std::vector<SectionFlow>& series);
/// Mean NFD weighted by the normal flow (trapezoidal); undefined samples
/// contribute nothing.
double nfd_time_average(const std::vector<double>& times, const std::vector<SectionFlow>& series);

/// Wall faces with a forward direction.
struct WSSPatch {
  std::vector<std::size_t> faces;
  Vec3 forward = Vec3::UnitX();
};

/// Wall faces whose centroid lies within radius of center.
WSSPatch make_wss_patch(const Mesh& mesh, const Vec3& center, double radius, const Vec3& forward);

/// Wall shear stress exerted by the fluid on face f, -mu d/dn of the
/// tangential velocity with n the outward face normal, using the gradient
/// of the adjacent cell at the face centroid.
Vec3 wall_shear_stress(const FEFunction& u, std::size_t face, double mu);
std::vector<Vec3> wall_shear_stress(const FEFunction& u, const WSSPatch& patch, double mu);

/// Area-weighted patch averages of |tau|, tau.v and |tau - (tau.v) v|.
struct WSSAverages {
  double magnitude = 0.0;
  double forward = 0.0;
  double lateral = 0.0;
};

WSSAverages wss_averages(const Mesh& mesh, const WSSPatch& patch, const std::vector<Vec3>& tau);

/// Oscillatory shear index of one face over a sampled series (trapezoidal);
/// 0 when the series has no shear.
double osi(const std::vector<double>& times, const std::vector<Vec3>& tau);

/// 1/2 int |u|^2 dx.
double kinetic_energy(const FEFunction& u);
/// (1/|Omega|) int |u| dx.
double mean_velocity_magnitude(const FEFunction& u);

/// Definition of the quantities to record during or after a run.
struct QoIDefinition {
  std::vector<CrossSection> sections;
  /// Pairs of section indices bounding wedges.
  std::vector<std::array<std::size_t, 2>> wedges;
  std::optional<WSSPatch> patch;
};

/// Time series of all quantities.
class QoITimeSeries {
 public:
  QoITimeSeries(std::shared_ptr<const Mesh> mesh, QoIDefinition definition,
                PhysicalParams physics);

  /// Records the state; p is the kinematic pressure.
  void record(double time, const FEFunction& u, const FEFunction& p);

  const QoIDefinition& definition() const { return def_; }
  const std::vector<double>& times() const { return times_; }
  /// Mean section pressures in Pa, [sample][section].
  const std::vector<std::vector<double>>& pressures() const { return pressure_; }
  const std::vector<std::vector<SectionFlow>>& flows() const { return flow_; }
  const std::vector<std::vector<double>>& section_max_velocity() const { return vmax_s_; }
  const std::vector<std::vector<double>>& wedge_max_velocity() const { return vmax_w_; }
  const std::vector<WSSAverages>& wss() const { return wss_; }
  const std::vector<std::vector<Vec3>>& face_wss() const { return tau_; }
  const std::vector<double>& kinetic_energy() const { return energy_; }
  const std::vector<double>& mean_speed() const { return speed_; }

  struct Summary {
    double start = 0.0, end = 0.0;
    std::vector<double> pressure_difference;  ///< P_Si - P_S0 in Pa, time mean
    std::vector<double> peak_pressure_difference;  ///< max over samples of P_S0 - P_Si
    std::vector<double> sfd, nfd;
    std::vector<double> section_max_velocity, wedge_max_velocity;  ///< max over samples
    WSSAverages wss;   ///< time mean
    double osi = 0.0;  ///< area-weighted mean of per-face OSI
    double kinetic_energy = 0.0, mean_speed = 0.0;  ///< time mean
  };

  /// Time averages over [start, end] using the samples in that interval.
  Summary summarize(double start, double end) const;

  /// One CSV per quantity plus summary.txt.
  void write(const std::filesystem::path& dir, double avg_start, double avg_end) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  QoIDefinition def_;
  PhysicalParams physics_;
  std::vector<WedgeRegion> wedge_regions_;
  std::vector<double> times_;
  std::vector<std::vector<double>> pressure_;
  std::vector<std::vector<SectionFlow>> flow_;
  std::vector<std::vector<double>> vmax_s_, vmax_w_;
  std::vector<WSSAverages> wss_;
  std::vector<std::vector<Vec3>> tau_;
  std::vector<double> energy_, speed_;
};

}  // namespace hemo
