#include "hemo/turbulence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hemo {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_constant(double c, const char* what) {
  if (!std::isfinite(c) || c < 0) {
    throw std::invalid_argument(std::string(what) + " must be a finite value >= 0");
  }
}

}  // namespace

void validate(const TurbulenceModel& model) {
  std::visit(Overloaded{
                 [](const NoModel&) {},
                 [](const Smagorinsky& m) { require_constant(m.c, "C_Sma"); },
                 [](const Vreman& m) { require_constant(m.c, "C_Vre"); },
                 [](const Sigma& m) { require_constant(m.c, "C_sigma"); },
                 [](const RBVMSConfig& m) {
                   if (const auto* e = std::get_if<RBVMSConfig::EqualOrder>(&m.pair_mode)) {
                     if (!(e->c_i > 0)) throw std::invalid_argument("C_I must be > 0");
                   } else {
                     const auto& s = std::get<RBVMSConfig::InfSup>(m.pair_mode);
                     if (!(s.delta0 > 0)) throw std::invalid_argument("delta0 must be > 0");
                     require_constant(s.delta1, "delta1");
                   }
                 },
             },
             model);
}

std::string model_name(const TurbulenceModel& model) {
  return std::visit(Overloaded{
                        [](const NoModel&) { return std::string("none"); },
                        [](const Smagorinsky&) { return std::string("smagorinsky"); },
                        [](const Vreman&) { return std::string("vreman"); },
                        [](const Sigma&) { return std::string("sigma"); },
                        [](const RBVMSConfig&) { return std::string("rbvms"); },
                    },
                    model);
}

bool is_eddy_viscosity(const TurbulenceModel& model) {
  return std::holds_alternative<Smagorinsky>(model) || std::holds_alternative<Vreman>(model) ||
         std::holds_alternative<Sigma>(model);
}

bool is_rbvms(const TurbulenceModel& model) {
  return std::holds_alternative<RBVMSConfig>(model);
}

double smagorinsky_nu_t(const GradientSample& s, double c_sma) {
  const double delta = 2.0 * s.shortest_edge;
  return c_sma * delta * delta * s.strain_rate().norm();
}

double vreman_nu_t(const GradientSample& s, double c_vre) {
  const double gnorm = s.grad.norm();
  if (gnorm < 1e-12) return 0.0;
  const Vec3 d2 = s.widths.cwiseProduct(s.widths);
  // beta_ij = sum_k delta_k^2 (d_k u_i)(d_k u_j)
  const Mat3 beta = s.grad * d2.asDiagonal() * s.grad.transpose();
  const double b = beta(0, 0) * beta(1, 1) - beta(0, 1) * beta(0, 1) +
                   beta(0, 0) * beta(2, 2) - beta(0, 2) * beta(0, 2) +
                   beta(1, 1) * beta(2, 2) - beta(1, 2) * beta(1, 2);
  if (!(b > 0)) return 0.0;
  return c_vre * std::sqrt(b) / gnorm;
}

Vec3 singular_values_3x3(const Mat3& a) {
  const double largest = a.cwiseAbs().maxCoeff();
  if (!(largest > 0)) return Vec3::Zero();
  // Power-of-two normalization keeps the result exactly scale-equivariant.
  const double scale = std::ldexp(1.0, std::ilogb(largest));
  // One-sided Jacobi: orthogonalize the columns of A by plane rotations; the
  // column norms converge to the singular values.
  Mat3 u = a / scale;
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double alpha = u.col(p).squaredNorm();
        const double beta = u.col(q).squaredNorm();
        const double gamma = u.col(p).dot(u.col(q));
        if (gamma == 0.0) continue;
        off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        const Vec3 up = u.col(p);
        u.col(p) = c * up - s * u.col(q);
        u.col(q) = s * up + c * u.col(q);
      }
    }
    if (off < 1e-16) break;
  }
  Vec3 sv(u.col(0).norm(), u.col(1).norm(), u.col(2).norm());
  std::sort(sv.data(), sv.data() + 3, std::greater<>());
  return sv * scale;
}

double sigma_invariant(const Mat3& grad) {
  const Vec3 s = singular_values_3x3(grad);
  if (!(s[0] > 0)) return 0.0;
  const double d = s[2] * (s[0] - s[1]) * (s[1] - s[2]) / (s[0] * s[0]);
  return std::max(0.0, d);
}

double sigma_nu_t(const GradientSample& s, double c_sigma) {
  const double delta = 2.0 * s.shortest_edge;
  const double cd = c_sigma * delta;
  return cd * cd * sigma_invariant(s.grad);
}

double eddy_viscosity(const TurbulenceModel& model, const GradientSample& s) {
  return std::visit(Overloaded{
                        [](const NoModel&) { return 0.0; },
                        [&](const Smagorinsky& m) { return smagorinsky_nu_t(s, m.c); },
                        [&](const Vreman& m) { return vreman_nu_t(s, m.c); },
                        [&](const Sigma& m) { return sigma_nu_t(s, m.c); },
                        [](const RBVMSConfig&) { return 0.0; },
                    },
                    model);
}

Tau rbvms_tau(const RBVMSConfig& config, const Vec3& u, const ElementGeometry& geom,
              double dt, double nu) {
  if (config.fixed_tau) return {(*config.fixed_tau)[0], (*config.fixed_tau)[1]};
  if (!(dt > 0)) throw std::invalid_argument("rbvms_tau: dt must be > 0");
  if (nu < 0) throw std::invalid_argument("rbvms_tau: nu must be >= 0");
  if (const auto* e = std::get_if<RBVMSConfig::EqualOrder>(&config.pair_mode)) {
    const Mat3& G = geom.metric;
    const double s = 4.0 / (dt * dt) + u.dot(G * u) + e->c_i * nu * nu * G.squaredNorm();
    const double tau_m = 1.0 / std::sqrt(s);
    const double g2 = geom.metric_sum.squaredNorm();
    if (!(g2 > 0)) throw std::invalid_argument("rbvms_tau: degenerate cell geometry");
    return {tau_m, 1.0 / (tau_m * g2)};
  }
  const auto& p = std::get<RBVMSConfig::InfSup>(config.pair_mode);
  const double h = geom.shortest_edge;
  return {std::max(p.delta0 * h * h, 0.5 * dt), p.delta1};
}

Vec3 momentum_residual(const FEFunction& u, const FEFunction& p,
                       const std::array<const FEFunction*, 2>& previous,
                       const FEFunction& u_conv, double nu, double dt,
                       const TimeWeights& w, std::size_t cell,
                       const std::array<double, 4>& bary, const Vec3& force) {
  if (&u.space().mesh() != &p.space().mesh() || &u.space().mesh() != &u_conv.space().mesh()) {
    throw std::invalid_argument("momentum_residual: functions live on different meshes");
  }
  const VectorValue uv = u.evaluate_vector(cell, bary);
  const VectorValue cv = u_conv.evaluate_vector(cell, bary);
  const ScalarValue pv = p.evaluate_scalar(cell, bary);
  Vec3 r = uv.gradient * cv.value + pv.gradient - nu * uv.laplacian() - force;
  if (w.alpha0 != 0.0) {
    Vec3 h = Vec3::Zero();
    for (int k = 0; k < 2; ++k) {
      if (w.history[k] == 0.0) continue;
      if (!previous[k]) throw std::invalid_argument("momentum_residual: missing history state");
      h += w.history[k] * previous[k]->evaluate_vector(cell, bary).value;
    }
    r += (w.alpha0 * uv.value - h) / dt;
  }
  return r;
}

}  // namespace hemo
