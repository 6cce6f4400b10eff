#include "hemo/qoi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>

#include "hemo/io_util.hpp"

namespace hemo {

namespace {

Vec3 unit(const Vec3& v, const char* what) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument(std::string(what) + " must be nonzero");
  return v / n;
}

// Points where the plane crosses the edges of a polygon or cell whose
// vertices have signed distances d; a vertex with d = 0 counts as positive.
template <std::size_t N>
std::vector<Vec3> crossings(const std::array<Vec3, N>& x, const std::array<double, N>& d) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      if ((d[i] >= 0.0) == (d[j] >= 0.0)) continue;
      const double s = d[i] / (d[i] - d[j]);
      pts.push_back(x[i] + s * (x[j] - x[i]));
    }
  }
  return pts;
}

struct Polygon {
  double area = 0.0;
  Vec3 centroid = Vec3::Zero();
};

// Convex polygon from unordered points in the plane spanned by t1, t2.
Polygon polygon(std::vector<Vec3> pts, const Vec3& t1, const Vec3& t2) {
  Polygon out;
  if (pts.size() < 3) return out;
  Vec3 mid = Vec3::Zero();
  for (const auto& p : pts) mid += p;
  mid /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Vec3& a, const Vec3& b) {
    return std::atan2((a - mid).dot(t2), (a - mid).dot(t1)) <
           std::atan2((b - mid).dot(t2), (b - mid).dot(t1));
  });
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec3 e1 = pts[i] - pts[0], e2 = pts[i + 1] - pts[0];
    const double a = 0.5 * std::abs(e1.cross(e2).dot(t1.cross(t2)));
    out.area += a;
    out.centroid += a * (pts[0] + pts[i] + pts[i + 1]) / 3.0;
  }
  if (out.area > 0.0) out.centroid /= out.area;
  return out;
}

bool inside(const std::array<double, 4>& l, double tol = 1e-10) {
  return std::all_of(l.begin(), l.end(), [&](double v) { return v >= -tol; });
}

std::array<double, 4> clamp_bary(std::array<double, 4> l) {
  double s = 0.0;
  for (double& v : l) {
    v = std::max(v, 0.0);
    s += v;
  }
  for (double& v : l) v /= s;
  return l;
}

// Trapezoidal integral of sampled values.
double trapezoid(const std::vector<double>& t, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) s += 0.5 * (t[i + 1] - t[i]) * (v[i] + v[i + 1]);
  return s;
}

void check_times(const std::vector<double>& t, std::size_t n) {
  if (t.size() != n) throw std::invalid_argument("time series lengths differ");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] < t[i - 1]) throw std::invalid_argument("time stamps must be nondecreasing");
  }
}

// Barycentric coordinates of the nodes of an element of the given order.
std::vector<std::array<double, 4>> node_barycentrics(int order) {
  std::vector<std::array<double, 4>> out;
  for (int i = 0; i < 4; ++i) {
    std::array<double, 4> l{0, 0, 0, 0};
    l[i] = 1.0;
    out.push_back(l);
  }
  if (order == 2) {
    for (int e = 0; e < 6; ++e) {
      std::array<double, 4> l{0, 0, 0, 0};
      l[Mesh::kLocalEdges[e][0]] = 0.5;
      l[Mesh::kLocalEdges[e][1]] = 0.5;
      out.push_back(l);
    }
  }
  return out;
}

}  // namespace

std::array<double, 4> barycentric_coordinates(const Mesh& mesh, std::size_t cell, const Vec3& x) {
  const auto gl = barycentric_gradients(mesh, cell);
  const Vec3 d = x - mesh.vertices()[mesh.tets()[cell][0]];
  std::array<double, 4> l;
  for (int i = 1; i < 4; ++i) l[i] = gl[i].dot(d);
  l[0] = 1.0 - l[1] - l[2] - l[3];
  return l;
}

CrossSection build_cross_section(const Mesh& mesh, const Vec3& origin, const Vec3& normal,
                                 double resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("section resolution must be positive");
  CrossSection s;
  s.origin = origin;
  s.normal = unit(normal, "section normal");
  s.resolution = resolution;
  const Vec3& n = s.normal;
  Eigen::Index axis = 0;
  n.cwiseAbs().minCoeff(&axis);
  const Vec3 a = Vec3::Unit(axis);
  s.tangent1 = (a - a.dot(n) * n).normalized();
  s.tangent2 = n.cross(s.tangent1);

  std::vector<double> dist(mesh.n_vertices());
  for (std::size_t v = 0; v < mesh.n_vertices(); ++v) dist[v] = (mesh.vertices()[v] - origin).dot(n);
  auto cut = [&](std::size_t c) {
    bool pos = false, neg = false;
    for (int v : mesh.tets()[c]) (dist[v] >= 0.0 ? pos : neg) = true;
    return pos && neg;
  };

  // Cut cell containing the origin, then its face-connected cut neighbours.
  std::optional<std::size_t> start;
  for (std::size_t c = 0; c < mesh.n_tets() && !start; ++c) {
    if (cut(c) && inside(barycentric_coordinates(mesh, c, origin))) start = c;
  }
  if (!start) throw std::invalid_argument("section origin does not lie on a cut of the mesh");
  std::vector<char> member(mesh.n_tets(), 0);
  std::queue<std::size_t> queue;
  queue.push(*start);
  member[*start] = 1;
  while (!queue.empty()) {
    const std::size_t c = queue.front();
    queue.pop();
    s.cells.push_back(c);
    for (int i = 0; i < 4; ++i) {
      const int nb = mesh.neighbor(c, i);
      if (nb < 0 || member[nb] || !cut(nb)) continue;
      member[nb] = 1;
      queue.push(static_cast<std::size_t>(nb));
    }
  }
  std::sort(s.cells.begin(), s.cells.end());

  std::map<std::pair<long, long>, std::size_t> seen;
  Vec3 weighted = Vec3::Zero();
  for (std::size_t c : s.cells) {
    std::array<Vec3, 4> x;
    std::array<double, 4> d;
    for (int i = 0; i < 4; ++i) {
      x[i] = mesh.vertices()[mesh.tets()[c][i]];
      d[i] = dist[mesh.tets()[c][i]];
    }
    const auto pts = crossings(x, d);
    const Polygon poly = polygon(pts, s.tangent1, s.tangent2);
    if (poly.area <= 0.0) continue;
    s.area += poly.area;
    weighted += poly.area * poly.centroid;
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const auto& p : pts) {
      const double pa = (p - origin).dot(s.tangent1), pb = (p - origin).dot(s.tangent2);
      amin = std::min(amin, pa);
      amax = std::max(amax, pa);
      bmin = std::min(bmin, pb);
      bmax = std::max(bmax, pb);
    }
    const double eps = 1e-9;
    for (long i = static_cast<long>(std::ceil(amin / resolution - eps));
         i <= static_cast<long>(std::floor(amax / resolution + eps)); ++i) {
      for (long j = static_cast<long>(std::ceil(bmin / resolution - eps));
           j <= static_cast<long>(std::floor(bmax / resolution + eps)); ++j) {
        if (seen.count({i, j})) continue;
        const Vec3 p = origin + (static_cast<double>(i) * resolution) * s.tangent1 +
                       (static_cast<double>(j) * resolution) * s.tangent2;
        const auto l = barycentric_coordinates(mesh, c, p);
        if (!inside(l)) continue;
        seen[{i, j}] = s.points.size();
        s.points.push_back(p);
        s.point_cells.push_back(c);
        s.point_bary.push_back(clamp_bary(l));
      }
    }
  }
  if (!(s.area > 0.0)) throw std::invalid_argument("section has an empty intersection");
  if (s.points.empty()) throw std::invalid_argument("section grid contains no points");
  s.polygon_centroid = weighted / s.area;
  s.center.setZero();
  for (const auto& p : s.points) s.center += p;
  s.center /= static_cast<double>(s.points.size());

  for (std::size_t f = 0; f < mesh.boundary_faces().size(); ++f) {
    if (!member[mesh.face_cell(f)]) continue;
    std::array<Vec3, 3> x;
    std::array<double, 3> d;
    for (int i = 0; i < 3; ++i) {
      x[i] = mesh.vertices()[mesh.boundary_faces()[f].v[i]];
      d[i] = dist[mesh.boundary_faces()[f].v[i]];
    }
    const auto pts = crossings(x, d);
    if (pts.size() == 2) s.perimeter += (pts[0] - pts[1]).norm();
  }
  if (!(s.perimeter > 0.0)) throw std::invalid_argument("section does not reach the boundary");
  return s;
}

double mean_pressure(const FEFunction& p, const CrossSection& s) {
  if (s.points.empty()) throw std::invalid_argument("empty section");
  double sum = 0.0;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    sum += p.evaluate_scalar(s.point_cells[i], s.point_bary[i]).value;
  }
  return sum / static_cast<double>(s.points.size());
}

double pressure_difference(const FEFunction& p, const CrossSection& s_to,
                           const CrossSection& s_from) {
  return mean_pressure(p, s_to) - mean_pressure(p, s_from);
}

WedgeRegion build_wedge(const Mesh& mesh, const std::vector<CrossSection>& sections,
                        std::size_t first, std::size_t second) {
  if (first >= sections.size() || second >= sections.size() || first == second) {
    throw std::invalid_argument("wedge refers to invalid sections");
  }
  WedgeRegion w{first, second, {}};
  const auto& a = sections[first];
  const auto& b = sections[second];
  for (std::size_t c = 0; c < mesh.n_tets(); ++c) {
    const Vec3 x = mesh.cell_centroid(c);
    if ((x - a.origin).dot(a.normal) >= 0.0 && (x - b.origin).dot(b.normal) <= 0.0) {
      w.cells.push_back(c);
    }
  }
  if (w.cells.empty()) throw std::invalid_argument("wedge contains no cells");
  return w;
}

double max_velocity(const FEFunction& u, const CrossSection& s) {
  double m = 0.0;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    m = std::max(m, u.evaluate_vector(s.point_cells[i], s.point_bary[i]).value.norm());
  }
  return m;
}

double max_velocity(const FEFunction& u, const WedgeRegion& w) {
  auto samples = node_barycentrics(u.space().order());
  const auto& rule = tet_quadrature(4);
  samples.insert(samples.end(), rule.points.begin(), rule.points.end());
  double m = 0.0;
  for (std::size_t c : w.cells) {
    for (const auto& l : samples) m = std::max(m, u.evaluate_vector(c, l).value.norm());
  }
  return m;
}

double flow_threshold(const CrossSection& s) { return 1e-12 * s.area; }

SectionFlow section_flow(const FEFunction& u, const CrossSection& s) {
  SectionFlow out;
  const double w = s.weight();
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const Vec3 v = u.evaluate_vector(s.point_cells[i], s.point_bary[i]).value;
    const double un = v.dot(s.normal);
    out.tangential += w * (v - un * s.normal).norm();
    out.normal += w * std::abs(un);
    out.moment += w * std::abs(un) * s.points[i];
  }
  out.defined = out.normal > flow_threshold(s);
  if (out.defined) {
    out.sfd = out.tangential / out.normal;
    out.nfd = (out.moment / out.normal - s.center).norm() / s.hydraulic_radius();
  }
  return out;
}

double sfd(const FEFunction& u, const CrossSection& s) {
  const auto f = section_flow(u, s);
  if (!f.defined) throw std::domain_error("SFD undefined: no flow through the section");
  return f.sfd;
}

double nfd(const FEFunction& u, const CrossSection& s) {
  const auto f = section_flow(u, s);
  if (!f.defined) throw std::domain_error("NFD undefined: no flow through the section");
  return f.nfd;
}

double sfd_time_average(const std::vector<double>& times, const std::vector<SectionFlow>& series) {
  check_times(times, series.size());
  std::vector<double> num(series.size()), den(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    num[i] = series[i].defined ? series[i].tangential : 0.0;
    den[i] = series[i].defined ? series[i].normal : 0.0;
  }
  const double d = trapezoid(times, den);
  if (!(d > 0.0)) throw std::domain_error("SFD time average undefined: no normal flow");
  return trapezoid(times, num) / d;
}

double nfd_time_average(const std::vector<double>& times, const std::vector<SectionFlow>& series) {
  check_times(times, series.size());
  std::vector<double> num(series.size()), den(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    den[i] = series[i].defined ? series[i].normal : 0.0;
    num[i] = den[i] * series[i].nfd;
  }
  const double d = trapezoid(times, den);
  if (!(d > 0.0)) throw std::domain_error("NFD time average undefined: no normal flow");
  return trapezoid(times, num) / d;
}

WSSPatch make_wss_patch(const Mesh& mesh, const Vec3& center, double radius, const Vec3& forward) {
  WSSPatch p;
  p.forward = unit(forward, "forward vector");
  for (std::size_t f = 0; f < mesh.boundary_faces().size(); ++f) {
    if (!mesh.boundary_faces()[f].label.is_wall()) continue;
    if ((mesh.face_centroid(f) - center).norm() <= radius) p.faces.push_back(f);
  }
  if (p.faces.empty()) throw std::invalid_argument("WSS patch contains no wall faces");
  return p;
}

Vec3 wall_shear_stress(const FEFunction& u, std::size_t face, double mu) {
  const Mesh& m = u.space().mesh();
  if (face >= m.boundary_faces().size()) throw std::out_of_range("invalid boundary face");
  const int cell = m.face_cell(face);
  if (cell < 0) throw std::invalid_argument("boundary face without adjacent cell");
  const Vec3 n = m.face_normal(face);
  const auto l = clamp_bary(barycentric_coordinates(m, cell, m.face_centroid(face)));
  const Vec3 dudn = u.evaluate_vector(cell, l).gradient * n;
  return -mu * (dudn - dudn.dot(n) * n);
}

std::vector<Vec3> wall_shear_stress(const FEFunction& u, const WSSPatch& patch, double mu) {
  std::vector<Vec3> out;
  out.reserve(patch.faces.size());
  for (std::size_t f : patch.faces) out.push_back(wall_shear_stress(u, f, mu));
  return out;
}

WSSAverages wss_averages(const Mesh& mesh, const WSSPatch& patch, const std::vector<Vec3>& tau) {
  if (tau.size() != patch.faces.size()) throw std::invalid_argument("WSS values do not match the patch");
  WSSAverages a;
  double area = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double w = mesh.face_area(patch.faces[i]);
    const double fwd = tau[i].dot(patch.forward);
    area += w;
    a.magnitude += w * tau[i].norm();
    a.forward += w * fwd;
    a.lateral += w * (tau[i] - fwd * patch.forward).norm();
  }
  a.magnitude /= area;
  a.forward /= area;
  a.lateral /= area;
  return a;
}

double osi(const std::vector<double>& times, const std::vector<Vec3>& tau) {
  check_times(times, tau.size());
  Vec3 mean = Vec3::Zero();
  double mag = 0.0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double h = 0.5 * (times[i + 1] - times[i]);
    mean += h * (tau[i] + tau[i + 1]);
    mag += h * (tau[i].norm() + tau[i + 1].norm());
  }
  if (!(mag > 0.0)) return 0.0;
  return std::clamp(0.5 * (1.0 - mean.norm() / mag), 0.0, 0.5);
}

namespace {

template <typename F>
double integrate_speed(const FEFunction& u, F&& f) {
  const Mesh& m = u.space().mesh();
  const auto& rule = tet_quadrature(std::max(4, 2 * u.space().order()));
  double sum = 0.0;
  for (std::size_t c = 0; c < m.n_tets(); ++c) {
    const double detj = 6.0 * m.cell_volume(c);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      sum += rule.weights[q] * detj * f(u.evaluate_vector(c, rule.points[q]).value);
    }
  }
  return sum;
}

}  // namespace

double kinetic_energy(const FEFunction& u) {
  return 0.5 * integrate_speed(u, [](const Vec3& v) { return v.squaredNorm(); });
}

double mean_velocity_magnitude(const FEFunction& u) {
  const Mesh& m = u.space().mesh();
  double vol = 0.0;
  for (std::size_t c = 0; c < m.n_tets(); ++c) vol += m.cell_volume(c);
  return integrate_speed(u, [](const Vec3& v) { return v.norm(); }) / vol;
}

QoITimeSeries::QoITimeSeries(std::shared_ptr<const Mesh> mesh, QoIDefinition definition,
                             PhysicalParams physics)
    : mesh_(std::move(mesh)), def_(std::move(definition)), physics_(physics) {
  for (const auto& [a, b] : def_.wedges) wedge_regions_.push_back(build_wedge(*mesh_, def_.sections, a, b));
}

void QoITimeSeries::record(double time, const FEFunction& u, const FEFunction& p) {
  if (!times_.empty() && time < times_.back()) throw std::invalid_argument("QoI samples must be recorded in time order");
  times_.push_back(time);
  std::vector<double> pr, vs, vw;
  std::vector<SectionFlow> fl;
  for (const auto& s : def_.sections) {
    pr.push_back(physics_.density * mean_pressure(p, s));
    fl.push_back(section_flow(u, s));
    vs.push_back(max_velocity(u, s));
  }
  for (const auto& w : wedge_regions_) vw.push_back(max_velocity(u, w));
  pressure_.push_back(std::move(pr));
  flow_.push_back(std::move(fl));
  vmax_s_.push_back(std::move(vs));
  vmax_w_.push_back(std::move(vw));
  if (def_.patch) {
    auto tau = wall_shear_stress(u, *def_.patch, physics_.viscosity);
    wss_.push_back(wss_averages(*mesh_, *def_.patch, tau));
    tau_.push_back(std::move(tau));
  }
  energy_.push_back(hemo::kinetic_energy(u));
  speed_.push_back(mean_velocity_magnitude(u));
}

QoITimeSeries::Summary QoITimeSeries::summarize(double start, double end) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (times_[i] >= start - 1e-12 && times_[i] <= end + 1e-12) idx.push_back(i);
  }
  if (idx.empty()) throw std::invalid_argument("no QoI samples in the averaging interval");
  Summary s;
  s.start = times_[idx.front()];
  s.end = times_[idx.back()];
  std::vector<double> t;
  for (std::size_t i : idx) t.push_back(times_[i]);
  auto mean = [&](auto&& value) {
    std::vector<double> v;
    for (std::size_t i : idx) v.push_back(value(i));
    if (idx.size() == 1) return v[0];
    return trapezoid(t, v) / (t.back() - t.front());
  };
  auto peak = [&](auto&& value) {
    double m = -1e300;
    for (std::size_t i : idx) m = std::max(m, value(i));
    return m;
  };
  const std::size_t ns = def_.sections.size();
  for (std::size_t k = 0; k < ns; ++k) {
    s.pressure_difference.push_back(mean([&](std::size_t i) { return pressure_[i][k] - pressure_[i][0]; }));
    s.peak_pressure_difference.push_back(peak([&](std::size_t i) { return pressure_[i][0] - pressure_[i][k]; }));
    s.section_max_velocity.push_back(peak([&](std::size_t i) { return vmax_s_[i][k]; }));
    std::vector<SectionFlow> f;
    for (std::size_t i : idx) f.push_back(flow_[i][k]);
    if (idx.size() == 1) {
      s.sfd.push_back(f[0].defined ? f[0].sfd : std::nan(""));
      s.nfd.push_back(f[0].defined ? f[0].nfd : std::nan(""));
    } else {
      double a = std::nan(""), b = std::nan("");
      try {
        a = sfd_time_average(t, f);
        b = nfd_time_average(t, f);
      } catch (const std::domain_error&) {
      }
      s.sfd.push_back(a);
      s.nfd.push_back(b);
    }
  }
  for (std::size_t k = 0; k < wedge_regions_.size(); ++k) {
    s.wedge_max_velocity.push_back(peak([&](std::size_t i) { return vmax_w_[i][k]; }));
  }
  if (def_.patch) {
    s.wss.magnitude = mean([&](std::size_t i) { return wss_[i].magnitude; });
    s.wss.forward = mean([&](std::size_t i) { return wss_[i].forward; });
    s.wss.lateral = mean([&](std::size_t i) { return wss_[i].lateral; });
    double area = 0.0;
    for (std::size_t j = 0; j < def_.patch->faces.size(); ++j) {
      std::vector<Vec3> tau;
      for (std::size_t i : idx) tau.push_back(tau_[i][j]);
      const double w = mesh_->face_area(def_.patch->faces[j]);
      s.osi += w * osi(t, tau);
      area += w;
    }
    s.osi /= area;
  }
  s.kinetic_energy = mean([&](std::size_t i) { return energy_[i]; });
  s.mean_speed = mean([&](std::size_t i) { return speed_[i]; });
  return s;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string num(double v) { return std::isfinite(v) ? format_double(v) : "nan"; }

}  // namespace

void QoITimeSeries::write(const std::filesystem::path& dir, double avg_start, double avg_end) const {
  std::filesystem::create_directories(dir);
  const std::size_t ns = def_.sections.size();
  auto section_table = [&](const std::string& name, auto&& value, std::size_t first = 0) {
    auto out = open_csv(dir / name);
    out << "time";
    for (std::size_t k = first; k < ns; ++k) out << ",S" << k;
    out << '\n';
    for (std::size_t i = 0; i < times_.size(); ++i) {
      out << num(times_[i]);
      for (std::size_t k = first; k < ns; ++k) out << ',' << num(value(i, k));
      out << '\n';
    }
  };
  section_table("pressure.csv", [&](std::size_t i, std::size_t k) { return pressure_[i][k]; });
  section_table("pressure_difference.csv",
                [&](std::size_t i, std::size_t k) { return pressure_[i][k] - pressure_[i][0]; }, 1);
  section_table("sfd.csv", [&](std::size_t i, std::size_t k) {
    return flow_[i][k].defined ? flow_[i][k].sfd : std::nan("");
  });
  section_table("nfd.csv", [&](std::size_t i, std::size_t k) {
    return flow_[i][k].defined ? flow_[i][k].nfd : std::nan("");
  });
  {
    auto out = open_csv(dir / "max_velocity.csv");
    out << "time";
    for (std::size_t k = 0; k < ns; ++k) out << ",S" << k;
    for (const auto& w : wedge_regions_) out << ",W" << w.first << '_' << w.second;
    out << '\n';
    for (std::size_t i = 0; i < times_.size(); ++i) {
      out << num(times_[i]);
      for (double v : vmax_s_[i]) out << ',' << num(v);
      for (double v : vmax_w_[i]) out << ',' << num(v);
      out << '\n';
    }
  }
  if (def_.patch) {
    auto out = open_csv(dir / "wss.csv");
    out << "time,magnitude,forward,lateral\n";
    for (std::size_t i = 0; i < times_.size(); ++i) {
      out << num(times_[i]) << ',' << num(wss_[i].magnitude) << ',' << num(wss_[i].forward) << ','
          << num(wss_[i].lateral) << '\n';
    }
  }
  {
    auto out = open_csv(dir / "energy.csv");
    out << "time,kinetic_energy,mean_speed\n";
    for (std::size_t i = 0; i < times_.size(); ++i) {
      out << num(times_[i]) << ',' << num(energy_[i]) << ',' << num(speed_[i]) << '\n';
    }
  }
  if (times_.empty()) return;
  const Summary s = summarize(avg_start, avg_end);
  auto out = open_csv(dir / "summary.txt");
  out << "interval " << num(s.start) << ' ' << num(s.end) << '\n';
  out << "reference_pressure_difference_pa " << num(kSevereCoarctationPressure) << '\n';
  for (std::size_t k = 0; k < ns; ++k) {
    const auto& sec = def_.sections[k];
    out << "section " << k << " area_m2 " << num(sec.area) << " perimeter_m " << num(sec.perimeter)
        << " hydraulic_radius_m " << num(sec.hydraulic_radius()) << " points " << sec.points.size()
        << " mean_pressure_difference_pa " << num(s.pressure_difference[k])
        << " peak_pressure_drop_pa " << num(s.peak_pressure_difference[k]) << " exceeds_reference "
        << (s.peak_pressure_difference[k] > kSevereCoarctationPressure ? 1 : 0) << " sfd "
        << num(s.sfd[k]) << " nfd " << num(s.nfd[k]) << " max_velocity " << num(s.section_max_velocity[k])
        << '\n';
  }
  for (std::size_t k = 0; k < wedge_regions_.size(); ++k) {
    out << "wedge " << wedge_regions_[k].first << ' ' << wedge_regions_[k].second << " max_velocity "
        << num(s.wedge_max_velocity[k]) << '\n';
  }
  if (def_.patch) {
    out << "wss magnitude " << num(s.wss.magnitude) << " forward " << num(s.wss.forward)
        << " lateral " << num(s.wss.lateral) << " osi " << num(s.osi) << '\n';
  }
  out << "kinetic_energy " << num(s.kinetic_energy) << " mean_speed " << num(s.mean_speed) << '\n';
}

}  // namespace hemo
