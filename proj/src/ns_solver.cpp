#include "hemo/ns_solver.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "hemo/io_util.hpp"

namespace hemo {

double reynolds_number(const PhysicalParams& p, double length, double velocity) {
  if (!(p.density > 0) || !(p.viscosity > 0) || !(length > 0) || !(velocity > 0)) {
    throw std::invalid_argument("reynolds_number: inputs must be positive");
  }
  return p.density * length * velocity / p.viscosity;
}

// ---------------------------------------------------------------------------
// Inflow amplitude

PulseProfile::PulseProfile(std::vector<double> times, std::vector<double> values,
                           double smooth_start)
    : times_(std::move(times)), values_(std::move(values)), t0_(smooth_start) {
  const std::size_t n = times_.size();
  if (n < 3 || values_.size() != n) {
    throw std::invalid_argument("waveform needs at least 3 samples of (t, value)");
  }
  if (times_[0] != 0.0) throw std::invalid_argument("waveform must start at t = 0");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw std::invalid_argument("waveform times must increase strictly");
    }
  }
  if (std::abs(values_.back() - values_.front()) > 1e-12 * (1 + std::abs(values_.front()))) {
    throw std::invalid_argument("waveform must be periodic (last value = first value)");
  }
  if (!(t0_ >= 0)) throw std::invalid_argument("smooth start time must be >= 0");
  values_.back() = values_.front();

  // Periodic cubic spline: second derivatives M_0 .. M_{m-1}, M_m = M_0.
  const std::size_t m = n - 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd rhs(m);
  auto h = [&](std::size_t i) { return times_[i + 1] - times_[i]; };
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t im = (i + m - 1) % m;
    const double hl = h(im), hr = h(i);
    A(i, im) += hl;
    A(i, i) += 2.0 * (hl + hr);
    A(i, (i + 1) % m) += hr;
    const double yl = values_[im], y = values_[i], yr = values_[i + 1];
    rhs[i] = 6.0 * ((yr - y) / hr - (y - yl) / hl);
  }
  const Eigen::VectorXd M = A.partialPivLu().solve(rhs);
  second_.assign(M.data(), M.data() + m);
  second_.push_back(second_.front());
}

double PulseProfile::waveform(double t) const {
  const double T = period();
  double s = std::fmod(t, T);
  if (s < 0) s += T;
  auto it = std::upper_bound(times_.begin(), times_.end(), s);
  std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - times_.begin() - 1, 0),
                                        times_.size() - 2);
  const double h = times_[i + 1] - times_[i];
  const double a = (times_[i + 1] - s) / h, b = (s - times_[i]) / h;
  return a * values_[i] + b * values_[i + 1] +
         ((a * a * a - a) * second_[i] + (b * b * b - b) * second_[i + 1]) * h * h / 6.0;
}

double PulseProfile::operator()(double t) const {
  if (t <= 0) return 0.0;
  const double start = t < t0_ ? 0.5 * (1.0 - std::cos(std::numbers::pi * t / t0_)) : 1.0;
  return start * waveform(t);
}

PulseProfile read_waveform(const std::filesystem::path& path, double smooth_start) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open waveform " + path.string());
  std::vector<double> t, v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double a, b;
    if (!(ss >> a)) continue;
    std::string extra;
    if (!(ss >> b) || (ss >> extra)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 't value'");
    }
    t.push_back(a);
    v.push_back(b);
  }
  return PulseProfile(std::move(t), std::move(v), smooth_start);
}

PulseProfile synthetic_waveform(double smooth_start, double period) {
  // Systolic peak near 0.15 T0, a smaller reflected wave near 0.4 T0, and a
  // low diastolic plateau, sampled at 100 points.
  const int n = 100;
  std::vector<double> t(n + 1), v(n + 1);
  auto shape = [](double s) {
    auto bump = [&](double c, double w) {
      double best = 0.0;
      for (int k = -1; k <= 1; ++k) {
        const double d = (s - c + k) / w;
        best += std::exp(-d * d);
      }
      return best;
    };
    return 0.1 + 0.9 * bump(0.15, 0.06) + 0.25 * bump(0.40, 0.05);
  };
  for (int i = 0; i <= n; ++i) {
    t[i] = period * i / n;
    v[i] = shape(static_cast<double>(i % n) / n);
  }
  return PulseProfile(std::move(t), std::move(v), smooth_start);
}

double estimation_ramp(double t, double t1) {
  if (t <= 0) return 0.0;
  if (t >= t1) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * t / t1));
}

std::string to_string(ElementPair pair) { return pair == ElementPair::P2P1 ? "P2/P1" : "P1/P1"; }

ElementPair parse_element_pair(const std::string& s) {
  if (s == "P2/P1" || s == "p2p1" || s == "P2P1") return ElementPair::P2P1;
  if (s == "P1/P1" || s == "p1p1" || s == "P1P1") return ElementPair::P1P1;
  throw std::invalid_argument("unknown element pair '" + s + "' (expected P2/P1 or P1/P1)");
}

void validate(const FlowConfig& c, const Mesh& mesh) {
  validate(c.model);
  if (!(c.physics.density > 0) || !(c.physics.viscosity > 0) ||
      !(c.physics.length_scale > 0) || !(c.physics.velocity_scale > 0)) {
    throw std::invalid_argument("physical parameters must be positive");
  }
  if (!(c.dt > 0)) throw std::invalid_argument("time step must be positive");
  if (!(c.backflow_beta >= 0)) throw std::invalid_argument("backflow beta must be >= 0");
  if (!(c.picard.tolerance > 0) || c.picard.max_iterations < 1) {
    throw std::invalid_argument("Picard tolerance must be > 0 with at least one iteration");
  }
  if (static_cast<int>(c.resistances.size()) != mesh.n_outlets()) {
    throw std::invalid_argument("expected " + std::to_string(mesh.n_outlets()) +
                                " outlet resistances, got " +
                                std::to_string(c.resistances.size()));
  }
  for (double r : c.resistances) {
    if (!(r > 0)) throw std::invalid_argument("outlet resistances must be > 0");
  }
  if (c.pair == ElementPair::P1P1) {
    const auto* rb = std::get_if<RBVMSConfig>(&c.model);
    if (!rb) {
      throw std::invalid_argument(
          "P1/P1 elements are not inf-sup stable and require the RB-VMS model");
    }
    if (!rb->fixed_tau && !std::holds_alternative<RBVMSConfig::EqualOrder>(rb->pair_mode)) {
      throw std::invalid_argument("RB-VMS on P1/P1 uses the equal-order parameters");
    }
  } else if (const auto* rb = std::get_if<RBVMSConfig>(&c.model)) {
    if (!rb->fixed_tau && !std::holds_alternative<RBVMSConfig::InfSup>(rb->pair_mode)) {
      throw std::invalid_argument("RB-VMS on P2/P1 uses the inf-sup parameters");
    }
  }
}

// ---------------------------------------------------------------------------
// Boundary integrals

namespace {

// Barycentric coordinates in the adjacent cell of a point on boundary face f
// given by triangle barycentrics (l0, l1, l2).
std::array<double, 4> face_to_cell(const Mesh& mesh, std::size_t f,
                                   const std::array<double, 4>& tri) {
  const auto& fv = mesh.boundary_faces()[f].v;
  const auto& t = mesh.tets()[mesh.face_cell(f)];
  std::array<double, 4> l{0, 0, 0, 0};
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 4; ++i) {
      if (t[i] == fv[k]) l[i] = tri[k];
    }
  }
  return l;
}

// int_face phi_a n over boundary faces with the given label, as a sparse
// vector over velocity dofs.
Eigen::SparseVector<double> boundary_functional(const FESpace& space, const PatchLabel& label) {
  const Mesh& mesh = space.mesh();
  const auto& rule = tri_quadrature(space.order());
  std::map<std::size_t, double> acc;
  std::array<double, 10> phi;
  for (std::size_t f = 0; f < mesh.boundary_faces().size(); ++f) {
    if (!(mesh.boundary_faces()[f].label == label)) continue;
    const Vec3 n = mesh.face_normal(f);
    const double area = mesh.face_area(f);
    const auto nodes = space.cell_nodes(mesh.face_cell(f));
    for (std::size_t q = 0; q < rule.size(); ++q) {
      basis::values(space.order(), face_to_cell(mesh, f, rule.points[q]), phi);
      const double w = 2.0 * area * rule.weights[q];
      for (int a = 0; a < space.n_local(); ++a) {
        if (phi[a] == 0.0) continue;
        for (int j = 0; j < 3; ++j) {
          if (n[j] == 0.0) continue;
          acc[space.dof(j, nodes[a])] += w * phi[a] * n[j];
        }
      }
    }
  }
  Eigen::SparseVector<double> c(static_cast<Eigen::Index>(space.n_dofs()));
  for (const auto& [i, v] : acc) {
    if (v != 0.0) c.insert(static_cast<Eigen::Index>(i)) = v;
  }
  return c;
}

double dot(const Eigen::SparseVector<double>& c, const Eigen::VectorXd& x) {
  double s = 0.0;
  for (Eigen::SparseVector<double>::InnerIterator it(c); it; ++it) s += it.value() * x[it.index()];
  return s;
}

}  // namespace

std::vector<double> compute_outflows(const FEFunction& u) {
  const FESpace& s = u.space();
  std::vector<double> q(s.mesh().n_outlets());
  for (int k = 1; k <= s.mesh().n_outlets(); ++k) {
    q[k - 1] = dot(boundary_functional(s, PatchLabel::outlet_k(k)), u.coefficients());
  }
  return q;
}

double compute_inflow(const FEFunction& u) {
  if (!u.space().mesh().has_inlet()) return 0.0;
  return -dot(boundary_functional(u.space(), PatchLabel::inlet()), u.coefficients());
}

double inlet_flow(std::shared_ptr<const FESpace> space, const std::vector<InletNodeValue>& values) {
  // Nodes shared with the wall keep the no-slip condition, as in the solver.
  const Mesh& m = space->mesh();
  std::vector<char> wall(space->n_scalar(), 0);
  for (std::size_t f = 0; f < m.boundary_faces().size(); ++f) {
    if (!m.boundary_faces()[f].label.is_wall()) continue;
    for (int n : space->face_nodes(f)) wall[n] = 1;
  }
  FEFunction u(space);
  for (const auto& v : values) {
    if (wall[v.node]) continue;
    for (int j = 0; j < 3; ++j) u.coefficients()[space->dof(j, v.node)] = v.velocity[j];
  }
  return compute_inflow(u);
}

std::vector<InletNodeValue> scale_inlet_to_flow(std::shared_ptr<const FESpace> space,
                                                std::vector<InletNodeValue> values, double q) {
  const double q0 = inlet_flow(space, values);
  if (!(std::abs(q0) > 0.0)) throw std::invalid_argument("inlet profile carries no flow");
  for (auto& v : values) v.velocity *= q / q0;
  return values;
}

// ---------------------------------------------------------------------------
// Solver setup

FlowSolver::FlowSolver(std::shared_ptr<const Mesh> mesh, FlowConfig config)
    : mesh_(std::move(mesh)), config_(std::move(config)) {
  validate(config_, *mesh_);
  const int vorder = config_.pair == ElementPair::P2P1 ? 2 : 1;
  vspace_ = std::make_shared<const FESpace>(mesh_, vorder, 3);
  pspace_ = std::make_shared<const FESpace>(mesh_, 1, 1);
  qdeg_ = config_.quadrature_degree > 0 ? config_.quadrature_degree
                                        : (vorder == 2 ? 4 : 2);
  u_ = FEFunction(vspace_);
  p_ = FEFunction(pspace_);
  build_boundary_data();
  build_pattern();
}

void FlowSolver::set_inlet(std::vector<InletNodeValue> values) {
  for (const auto& v : values) {
    if (v.node < 0 || static_cast<std::size_t>(v.node) >= vspace_->n_scalar()) {
      throw std::invalid_argument("inlet value refers to an invalid node");
    }
  }
  inlet_ = std::move(values);
}

void FlowSolver::set_inflow_amplitude(std::function<double(double)> a) { amplitude_ = std::move(a); }

void FlowSolver::set_resistances(std::vector<double> r) {
  FlowConfig c = config_;
  c.resistances = std::move(r);
  validate(c, *mesh_);
  config_.resistances = std::move(c.resistances);
}

void FlowSolver::set_body_force(PointFunction f) { body_force_ = std::move(f); }
void FlowSolver::set_boundary_velocity(PointFunction g) { boundary_velocity_ = std::move(g); }

void FlowSolver::set_state(FEFunction u, FEFunction p, double time, long step) {
  restore(std::move(u), std::move(p), {}, time, step);
}

void FlowSolver::restore(FEFunction u, FEFunction p, std::vector<FEFunction> history,
                         double time, long step) {
  auto check = [](const FEFunction& f, const FESpace& s, const char* what) {
    if (static_cast<std::size_t>(f.coefficients().size()) != s.n_dofs()) {
      throw std::invalid_argument(std::string("state ") + what + " does not match its space");
    }
  };
  check(u, *vspace_, "velocity");
  check(p, *pspace_, "pressure");
  if (history.size() > 2) throw std::invalid_argument("at most two history states");
  for (const auto& h : history) check(h, *vspace_, "history");
  u_ = FEFunction(vspace_, u.coefficients(), time);
  p_ = FEFunction(pspace_, p.coefficients(), time);
  history_.clear();
  for (const auto& h : history) history_.emplace_back(vspace_, h.coefficients(), h.time());
  time_ = time;
  step_ = step;
}

void FlowSolver::build_boundary_data() {
  const Mesh& m = *mesh_;
  node_kind_.assign(vspace_->n_scalar(), 0);
  for (std::size_t f = 0; f < m.boundary_faces().size(); ++f) {
    const auto& label = m.boundary_faces()[f].label;
    if (label.is_outlet()) continue;
    const char kind = label.is_wall() ? 2 : 1;
    for (int n : vspace_->face_nodes(f)) node_kind_[n] = std::max(node_kind_[n], kind);
  }
  dirichlet_nodes_.clear();
  for (std::size_t n = 0; n < node_kind_.size(); ++n) {
    if (node_kind_[n]) dirichlet_nodes_.push_back(static_cast<int>(n));
  }
  pin_pressure_ = m.n_outlets() == 0;
  outlet_c_.clear();
  outlet_faces_.assign(m.n_outlets(), {});
  for (int k = 1; k <= m.n_outlets(); ++k) {
    outlet_c_.push_back(boundary_functional(*vspace_, PatchLabel::outlet_k(k)));
  }
  for (std::size_t f = 0; f < m.boundary_faces().size(); ++f) {
    const auto& label = m.boundary_faces()[f].label;
    if (label.is_outlet()) outlet_faces_[label.outlet - 1].push_back(f);
  }
  if (m.has_inlet()) inlet_c_ = boundary_functional(*vspace_, PatchLabel::inlet());
}

void FlowSolver::build_pattern() {
  const Mesh& m = *mesh_;
  const std::size_t nu = vspace_->n_dofs();
  const std::size_t n = nu + pspace_->n_dofs();
  const int nl = vspace_->n_local();
  const bool pp_block = is_rbvms(config_.model);
  std::vector<std::vector<int>> cols(n);
  std::vector<int> vd, pd;
  for (std::size_t c = 0; c < m.n_tets(); ++c) {
    const auto vn = vspace_->cell_nodes(c);
    const auto pn = pspace_->cell_nodes(c);
    vd.clear();
    pd.clear();
    for (int i = 0; i < 3; ++i) {
      for (int a = 0; a < nl; ++a) vd.push_back(static_cast<int>(vspace_->dof(i, vn[a])));
    }
    for (int a = 0; a < 4; ++a) pd.push_back(static_cast<int>(nu + pn[a]));
    for (int j : vd) {
      cols[j].insert(cols[j].end(), vd.begin(), vd.end());
      cols[j].insert(cols[j].end(), pd.begin(), pd.end());
    }
    for (int j : pd) {
      cols[j].insert(cols[j].end(), vd.begin(), vd.end());
      if (pp_block) cols[j].insert(cols[j].end(), pd.begin(), pd.end());
    }
    if (cols[vd[0]].size() > 4096) {
      for (int j : vd) {
        std::sort(cols[j].begin(), cols[j].end());
        cols[j].erase(std::unique(cols[j].begin(), cols[j].end()), cols[j].end());
      }
    }
  }
  for (const auto& ck : outlet_c_) {
    for (Eigen::SparseVector<double>::InnerIterator jt(ck); jt; ++jt) {
      for (Eigen::SparseVector<double>::InnerIterator it(ck); it; ++it) {
        cols[jt.index()].push_back(static_cast<int>(it.index()));
      }
    }
  }
  if (pin_pressure_) cols[nu].push_back(static_cast<int>(nu));
  for (std::size_t j = 0; j < n; ++j) {
    auto& v = cols[j];
    v.push_back(static_cast<int>(j));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  Eigen::VectorXi sizes(n);
  for (std::size_t j = 0; j < n; ++j) sizes[j] = static_cast<int>(cols[j].size());
  pattern_ = SparseMatrix(n, n);
  pattern_.reserve(sizes);
  for (std::size_t j = 0; j < n; ++j) {
    for (int i : cols[j]) pattern_.insert(i, j) = 0.0;
    std::vector<int>().swap(cols[j]);
  }
  pattern_.makeCompressed();
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

class Scatter {
 public:
  explicit Scatter(SparseMatrix& a) : a_(a) {}
  double& at(int i, int j) {
    const int* outer = a_.outerIndexPtr();
    const int* inner = a_.innerIndexPtr();
    const int* lo = inner + outer[j];
    const int* hi = inner + outer[j + 1];
    const int* p = std::lower_bound(lo, hi, i);
    if (p == hi || *p != i) throw std::logic_error("assembly outside the sparsity pattern");
    return a_.valuePtr()[p - inner];
  }

 private:
  SparseMatrix& a_;
};

}  // namespace

SparseSystem FlowSolver::assemble(const StepContext& ctx, const FEFunction& u_conv,
                                  const FEFunction& p_conv) const {
  const Mesh& m = *mesh_;
  const FESpace& vs = *vspace_;
  const FESpace& ps = *pspace_;
  const std::size_t nu_dofs = vs.n_dofs();
  const std::size_t n = nu_dofs + ps.n_dofs();
  const int order = vs.order();
  const int nl = vs.n_local();
  const int nloc = 3 * nl + 4;
  const double nu = config_.physics.kinematic_viscosity();
  const TimeWeights& tw = ctx.weights;
  const double dt = ctx.dt;
  const double mass = tw.alpha0 / dt;
  const bool convection = config_.convection;
  const bool rbvms = is_rbvms(config_.model);
  const bool les = is_eddy_viscosity(config_.model);
  const RBVMSConfig* rb = std::get_if<RBVMSConfig>(&config_.model);
  for (int k = 0; k < 2; ++k) {
    if (tw.alpha0 != 0.0 && tw.history[k] != 0.0 && !ctx.history[k]) {
      throw std::invalid_argument("assemble: missing history state");
    }
  }

  SparseSystem sys;
  sys.matrix = pattern_;
  sys.rhs = Eigen::VectorXd::Zero(n);
  sys.n_velocity = nu_dofs;
  sys.n_pressure = ps.n_dofs();
  Scatter A(sys.matrix);
  const Eigen::VectorXd& uc = u_conv.coefficients();
  const Eigen::VectorXd& pc = p_conv.coefficients();

  const auto& rule = tet_quadrature(qdeg_);
  std::array<double, 10> phi;
  std::array<Vec3, 10> dphi;
  std::array<Mat3, 10> hphi;
  std::array<double, 10> lap;
  Eigen::MatrixXd K(nloc, nloc);
  Eigen::VectorXd F(nloc);
  std::array<int, 34> gdof;
  std::array<Vec3, 10> uloc, hloc;

  for (std::size_t c = 0; c < m.n_tets(); ++c) {
    const auto vn = vs.cell_nodes(c);
    const auto pn = ps.cell_nodes(c);
    for (int i = 0; i < 3; ++i) {
      for (int a = 0; a < nl; ++a) gdof[i * nl + a] = static_cast<int>(vs.dof(i, vn[a]));
    }
    for (int a = 0; a < 4; ++a) gdof[3 * nl + a] = static_cast<int>(nu_dofs + pn[a]);
    std::array<double, 4> ploc;
    for (int a = 0; a < 4; ++a) ploc[a] = pc[pn[a]];
    for (int a = 0; a < nl; ++a) {
      hloc[a].setZero();
      for (int i = 0; i < 3; ++i) uloc[a][i] = uc[gdof[i * nl + a]];
      if (tw.alpha0 != 0.0) {
        for (int k = 0; k < 2; ++k) {
          if (tw.history[k] == 0.0) continue;
          const auto& hc = ctx.history[k]->coefficients();
          for (int i = 0; i < 3; ++i) hloc[a][i] += tw.history[k] * hc[gdof[i * nl + a]];
        }
      }
    }
    const auto gl = barycentric_gradients(m, c);
    const double vol = m.cell_volume(c);
    const double detj = 6.0 * vol;
    ElementGeometry geom;
    if (les || rbvms) geom = element_geometry(m, c);
    basis::hessians(order, gl, hphi);
    for (int a = 0; a < nl; ++a) lap[a] = hphi[a].trace();
    Vec3 pgrad = Vec3::Zero();
    for (int a = 0; a < 4; ++a) pgrad += ploc[a] * gl[a];

    K.setZero();
    F.setZero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& l = rule.points[q];
      const double w = rule.weights[q] * detj;
      basis::values(order, l, phi);
      basis::gradients(order, l, gl, dphi);
      Vec3 ub = Vec3::Zero(), hv = Vec3::Zero(), ulap = Vec3::Zero();
      Mat3 ugrad = Mat3::Zero();
      for (int a = 0; a < nl; ++a) {
        ub += phi[a] * uloc[a];
        hv += phi[a] * hloc[a];
        ugrad += uloc[a] * dphi[a].transpose();
        ulap += lap[a] * uloc[a];
      }
      Vec3 f = Vec3::Zero();
      if (body_force_) {
        Vec3 x = Vec3::Zero();
        const auto& t = m.tets()[c];
        for (int i = 0; i < 4; ++i) x += l[i] * m.vertices()[t[i]];
        f = body_force_(x, ctx.time);
      }
      double nu_eff = nu;
      if (les) {
        GradientSample s;
        s.grad = ugrad;
        s.shortest_edge = geom.shortest_edge;
        s.widths = geom.widths;
        nu_eff += eddy_viscosity(config_.model, s);
      }
      std::array<double, 10> conv;
      for (int b = 0; b < nl; ++b) conv[b] = convection ? ub.dot(dphi[b]) : 0.0;

      // Galerkin terms.
      for (int a = 0; a < nl; ++a) {
        for (int b = 0; b < nl; ++b) {
          const double s =
              w * (mass * phi[a] * phi[b] + conv[b] * phi[a] + nu_eff * dphi[a].dot(dphi[b]));
          for (int i = 0; i < 3; ++i) {
            K(i * nl + a, i * nl + b) += s;
            for (int j = 0; j < 3; ++j) {
              K(i * nl + a, j * nl + b) += w * nu_eff * dphi[b][i] * dphi[a][j];
            }
          }
        }
        for (int cc = 0; cc < 4; ++cc) {
          for (int i = 0; i < 3; ++i) {
            const double s = w * l[cc] * dphi[a][i];
            K(i * nl + a, 3 * nl + cc) -= s;
            K(3 * nl + cc, i * nl + a) += s;
          }
        }
        const Vec3 load = hv / dt + f;
        for (int i = 0; i < 3; ++i) F[i * nl + a] += w * phi[a] * load[i];
      }

      if (rbvms) {
        const Tau tau = rbvms_tau(*rb, ub, geom, dt, nu);
        const double tm = tau.m, tc = tau.c;
        if (tm == 0.0 && tc == 0.0) continue;
        // Residual of the previous iterate (time term with this step's weights).
        Vec3 rhat = pgrad - nu * ulap - f;
        if (convection) rhat += ugrad * ub;
        if (tw.alpha0 != 0.0) rhat += (tw.alpha0 * ub - hv) / dt;
        std::array<double, 10> cb;
        for (int b = 0; b < nl; ++b) cb[b] = mass * phi[b] + conv[b] - nu * lap[b];
        const Vec3 lrhs = hv / dt + f;
        for (int a = 0; a < nl; ++a) {
          const double sa = conv[a];
          for (int b = 0; b < nl; ++b) {
            for (int i = 0; i < 3; ++i) {
              for (int j = 0; j < 3; ++j) {
                double v = tm * (ub[i] - tm * rhat[i]) * cb[b] * dphi[a][j] +
                           tc * dphi[b][j] * dphi[a][i];
                if (i == j) v += tm * sa * cb[b];
                K(i * nl + a, j * nl + b) += w * v;
              }
            }
          }
          for (int cc = 0; cc < 4; ++cc) {
            const Vec3& gp = gl[cc];
            const double gpa = gp.dot(dphi[a]);
            for (int i = 0; i < 3; ++i) {
              K(i * nl + a, 3 * nl + cc) += w * tm * (sa * gp[i] + (ub[i] - tm * rhat[i]) * gpa);
            }
          }
          for (int i = 0; i < 3; ++i) {
            F[i * nl + a] +=
                w * tm * (sa * lrhs[i] + (ub[i] - tm * rhat[i]) * lrhs.dot(dphi[a]));
          }
        }
        for (int cc = 0; cc < 4; ++cc) {
          const Vec3& gq = gl[cc];
          for (int b = 0; b < nl; ++b) {
            for (int j = 0; j < 3; ++j) K(3 * nl + cc, j * nl + b) += w * tm * cb[b] * gq[j];
          }
          for (int d = 0; d < 4; ++d) K(3 * nl + cc, 3 * nl + d) += w * tm * gl[d].dot(gq);
          F[3 * nl + cc] += w * tm * lrhs.dot(gq);
        }
      }
    }

    for (int jl = 0; jl < nloc; ++jl) {
      const bool pcol = jl >= 3 * nl;
      for (int il = 0; il < nloc; ++il) {
        if (pcol && il >= 3 * nl && !rbvms) continue;
        A.at(gdof[il], gdof[jl]) += K(il, jl);
      }
    }
    for (int il = 0; il < nloc; ++il) sys.rhs[gdof[il]] += F[il];
  }

  // Outlets: resistance R Q(u) (n, v) and directional backflow penalty.
  const double beta = config_.backflow_beta;
  const auto& frule = tri_quadrature(3 * order);
  for (int k = 0; k < m.n_outlets(); ++k) {
    const double r = config_.resistances[k] / config_.physics.density;
    const auto& ck = outlet_c_[k];
    for (Eigen::SparseVector<double>::InnerIterator jt(ck); jt; ++jt) {
      for (Eigen::SparseVector<double>::InnerIterator it(ck); it; ++it) {
        A.at(static_cast<int>(it.index()), static_cast<int>(jt.index())) +=
            r * it.value() * jt.value();
      }
    }
    if (beta == 0.0) continue;
    for (std::size_t f : outlet_faces_[k]) {
      const Vec3 nrm = m.face_normal(f);
      const double area = m.face_area(f);
      const std::size_t c = m.face_cell(f);
      const auto vn = vs.cell_nodes(c);
      for (std::size_t q = 0; q < frule.size(); ++q) {
        const auto l = face_to_cell(m, f, frule.points[q]);
        basis::values(order, l, phi);
        Vec3 ub = Vec3::Zero();
        for (int a = 0; a < nl; ++a) {
          for (int i = 0; i < 3; ++i) ub[i] += phi[a] * uc[vs.dof(i, vn[a])];
        }
        const double un = ub.dot(nrm);
        if (un >= 0.0) continue;
        const double s = 2.0 * area * frule.weights[q] * 0.5 * beta * (-un);
        for (int a = 0; a < nl; ++a) {
          if (phi[a] == 0.0) continue;
          for (int b = 0; b < nl; ++b) {
            if (phi[b] == 0.0) continue;
            for (int i = 0; i < 3; ++i) {
              A.at(static_cast<int>(vs.dof(i, vn[a])), static_cast<int>(vs.dof(i, vn[b]))) +=
                  s * phi[a] * phi[b];
            }
          }
        }
      }
    }
  }

  // Dirichlet data.
  std::vector<char> fixed(n, 0);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  const double amp = inflow_amplitude(ctx.time);
  for (int node : dirichlet_nodes_) {
    Vec3 v = Vec3::Zero();
    if (boundary_velocity_) v = boundary_velocity_(vs.node_position(node), ctx.time);
    for (int i = 0; i < 3; ++i) {
      fixed[vs.dof(i, node)] = 1;
      g[vs.dof(i, node)] = v[i];
    }
  }
  if (!boundary_velocity_) {
    for (const auto& iv : inlet_) {
      if (node_kind_[iv.node] != 1) continue;
      for (int i = 0; i < 3; ++i) g[vs.dof(i, iv.node)] = amp * iv.velocity[i];
    }
  }
  if (pin_pressure_) fixed[nu_dofs] = 1;

  SparseMatrix& M = sys.matrix;
  for (Eigen::Index j = 0; j < M.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(M, j); it; ++it) {
      const Eigen::Index i = it.row();
      if (fixed[j]) {
        if (!fixed[i]) sys.rhs[i] -= it.value() * g[j];
        it.valueRef() = (i == j) ? 1.0 : 0.0;
      } else if (fixed[i]) {
        it.valueRef() = 0.0;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (fixed[i]) sys.rhs[i] = g[i];
  }
  return sys;
}

// ---------------------------------------------------------------------------
// Nonlinear and time stepping

PicardReport FlowSolver::picard(const StepContext& ctx) {
  const std::size_t nu_dofs = vspace_->n_dofs();
  const std::size_t n = nu_dofs + pspace_->n_dofs();
  Eigen::VectorXd x(n);
  x << u_.coefficients(), p_.coefficients();
  FEFunction uc(vspace_, u_.coefficients(), ctx.time);
  FEFunction pc(pspace_, p_.coefficients(), ctx.time);
  PicardReport rep;
  for (int it = 0; it <= config_.picard.max_iterations; ++it) {
    const SparseSystem sys = assemble(ctx, uc, pc);
    rep.residual = (sys.matrix * x - sys.rhs).norm();
    if (!std::isfinite(rep.residual)) throw NumericalError("nonlinear residual is not finite");
    if (it > 0 && rep.residual <= config_.picard.tolerance) break;
    if (it == config_.picard.max_iterations) {
      throw NumericalError("Picard iteration did not converge: residual " +
                           format_double(rep.residual) + " after " +
                           std::to_string(it) + " iterations");
    }
    try {
      x = solve_linear(sys.matrix, sys.rhs, config_.linear).x;
    } catch (const LinearSolveError& e) {
      throw NumericalError(std::string("linear solver failed: ") + e.what());
    }
    ++rep.iterations;
    uc.coefficients() = x.head(nu_dofs);
    pc.coefficients() = x.tail(n - nu_dofs);
  }
  u_ = FEFunction(vspace_, x.head(nu_dofs), ctx.time);
  p_ = FEFunction(pspace_, x.tail(n - nu_dofs), ctx.time);
  return rep;
}

PicardReport FlowSolver::solve_steady() {
  StepContext ctx;
  ctx.weights = TimeWeights::steady();
  ctx.dt = config_.dt;
  ctx.time = time_;
  return picard(ctx);
}

PicardReport FlowSolver::step() {
  StepContext ctx;
  ctx.dt = config_.dt;
  ctx.time = time_ + config_.dt;
  FEFunction current = u_;
  if (history_.empty()) {
    ctx.weights = TimeWeights::euler();
    ctx.history = {&current, nullptr};
  } else {
    ctx.weights = TimeWeights::bdf2();
    ctx.history = {&current, &history_.back()};
  }
  const PicardReport rep = picard(ctx);
  history_.clear();
  history_.push_back(std::move(current));
  time_ = ctx.time;
  ++step_;
  return rep;
}

// ---------------------------------------------------------------------------
// Snapshots

Snapshot make_snapshot(const FlowSolver& s) {
  Snapshot snap;
  snap.mesh_hash = s.mesh().content_hash();
  snap.time = s.time();
  snap.step = s.step_index();
  snap.velocity_order = s.velocity_space()->order();
  snap.pressure_order = s.pressure_space()->order();
  snap.velocity = s.velocity().coefficients();
  snap.pressure = s.pressure().coefficients();
  for (int k = 0; k < s.history_size(); ++k) snap.history.push_back(s.history(k).coefficients());
  snap.resistances = s.resistances();
  return snap;
}

namespace {

void write_vector(std::ostream& out, const char* name, const Eigen::VectorXd& v) {
  out << name << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << '\n';
}

Eigen::VectorXd read_vector(std::istream& in, const std::string& name) {
  std::string tag;
  long count = -1;
  if (!(in >> tag >> count) || tag != name || count < 0) {
    throw std::runtime_error("snapshot: expected block '" + name + "'");
  }
  Eigen::VectorXd v(count);
  for (long i = 0; i < count; ++i) {
    std::string tok;
    if (!(in >> tok)) throw std::runtime_error("snapshot: truncated block '" + name + "'");
    v[i] = parse_double(tok);
  }
  return v;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const Snapshot& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write snapshot " + path.string());
  out << "hemo-snapshot 1\n";
  out << "mesh_hash " << std::hex << s.mesh_hash << std::dec << '\n';
  out << "time " << format_double(s.time) << '\n';
  out << "step " << s.step << '\n';
  out << "spaces " << s.velocity_order << ' ' << s.pressure_order << '\n';
  out << "resistances " << s.resistances.size();
  for (double r : s.resistances) out << ' ' << format_double(r);
  out << '\n';
  write_vector(out, "velocity", s.velocity);
  write_vector(out, "pressure", s.pressure);
  out << "history " << s.history.size() << '\n';
  for (const auto& h : s.history) write_vector(out, "state", h);
  if (!out) throw std::runtime_error("error while writing snapshot " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open snapshot " + path.string());
  Snapshot s;
  std::string tag, tok;
  int version = 0;
  if (!(in >> tag >> version) || tag != "hemo-snapshot" || version != 1) {
    throw std::runtime_error(path.string() + ": not a version 1 snapshot");
  }
  auto expect = [&](const char* name) {
    if (!(in >> tag) || tag != name) {
      throw std::runtime_error(path.string() + ": expected '" + name + "'");
    }
  };
  expect("mesh_hash");
  in >> std::hex >> s.mesh_hash >> std::dec;
  expect("time");
  in >> tok;
  s.time = parse_double(tok);
  expect("step");
  in >> s.step;
  expect("spaces");
  in >> s.velocity_order >> s.pressure_order;
  expect("resistances");
  std::size_t nr = 0;
  in >> nr;
  for (std::size_t k = 0; k < nr; ++k) {
    in >> tok;
    s.resistances.push_back(parse_double(tok));
  }
  if (!in) throw std::runtime_error(path.string() + ": malformed header");
  s.velocity = read_vector(in, "velocity");
  s.pressure = read_vector(in, "pressure");
  expect("history");
  std::size_t nh = 0;
  in >> nh;
  for (std::size_t k = 0; k < nh; ++k) s.history.push_back(read_vector(in, "state"));
  return s;
}

void restore_snapshot(FlowSolver& solver, const Snapshot& s) {
  if (s.mesh_hash != solver.mesh().content_hash()) {
    throw std::invalid_argument("snapshot was written for a different mesh");
  }
  if (s.velocity_order != solver.velocity_space()->order() ||
      s.pressure_order != solver.pressure_space()->order()) {
    throw std::invalid_argument("snapshot spaces do not match the solver");
  }
  std::vector<FEFunction> hist;
  for (const auto& h : s.history) {
    hist.emplace_back(solver.velocity_space(), h, s.time - solver.config().dt);
  }
  if (!s.resistances.empty()) solver.set_resistances(s.resistances);
  solver.restore(FEFunction(solver.velocity_space(), s.velocity, s.time),
                 FEFunction(solver.pressure_space(), s.pressure, s.time), std::move(hist),
                 s.time, s.step);
}

int run_transient(FlowSolver& solver, const TransientOptions& opt) {
  if (opt.output_every < 1) throw std::invalid_argument("output_every must be >= 1");
  const double dt = solver.config().dt;
  if (opt.call_at_start) {
    for (const auto& obs : opt.observers) obs(solver, PicardReport{});
  }
  int max_iter = 0;
  long count = 0;
  while (solver.time() < opt.end_time - 1e-9 * dt) {
    const PicardReport rep = solver.step();
    max_iter = std::max(max_iter, rep.iterations);
    ++count;
    if (opt.controller) opt.controller(solver);
    if (count % opt.output_every == 0) {
      for (const auto& obs : opt.observers) obs(solver, rep);
    }
    if (opt.checkpoint_path && opt.checkpoint_every > 0 && count % opt.checkpoint_every == 0) {
      write_snapshot(*opt.checkpoint_path, make_snapshot(solver));
    }
  }
  return max_iter;
}

}  // namespace hemo
