#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>

#include "hemo/fe.hpp"
#include "hemo/mesh.hpp"

namespace hemo {

struct Smagorinsky {
  double c = 0.01;
};
struct Vreman {
  double c = 0.07;
};
struct Sigma {
  double c = 1.35;
};

/// Stabilization parameters for residual-based VMS.
struct RBVMSConfig {
  struct EqualOrder {
    double c_i = 1.0;
  };
  struct InfSup {
    double delta0 = 1.0;
    double delta1 = 0.25;
  };
  std::variant<EqualOrder, InfSup> pair_mode = EqualOrder{};
  /// Overrides (tau_m, tau_c) everywhere when set; used for testing.
  std::optional<std::array<double, 2>> fixed_tau;
};

struct NoModel {};

using TurbulenceModel = std::variant<NoModel, Smagorinsky, Vreman, Sigma, RBVMSConfig>;

/// Throws std::invalid_argument if a constant is negative or non-finite.
void validate(const TurbulenceModel& model);
std::string model_name(const TurbulenceModel& model);
bool is_eddy_viscosity(const TurbulenceModel& model);
bool is_rbvms(const TurbulenceModel& model);

/// Velocity gradient at a point together with the geometry of its cell.
struct GradientSample {
  Mat3 grad;  ///< grad(i, j) = d u_i / d x_j
  double shortest_edge = 0.0;
  Vec3 widths = Vec3::Zero();

  Mat3 strain_rate() const { return 0.5 * (grad + grad.transpose()); }
};

double smagorinsky_nu_t(const GradientSample& s, double c_sma);
double vreman_nu_t(const GradientSample& s, double c_vre);
/// sigma_3 (sigma_1 - sigma_2) (sigma_2 - sigma_3) / sigma_1^2, zero for A = 0.
double sigma_invariant(const Mat3& grad);
double sigma_nu_t(const GradientSample& s, double c_sigma);
/// Eddy viscosity of an LES model; zero for NoModel and RB-VMS.
double eddy_viscosity(const TurbulenceModel& model, const GradientSample& s);

/// Singular values sorted descending.
Vec3 singular_values_3x3(const Mat3& a);

struct Tau {
  double m = 0.0;
  double c = 0.0;
};

Tau rbvms_tau(const RBVMSConfig& config, const Vec3& u, const ElementGeometry& geom,
              double dt, double nu);

/// Weights of a backward difference formula: du/dt ~ (a0 u + sum_k a_k u_k)/dt
/// is written as (a0 u - history)/dt with history = sum of older states.
struct TimeWeights {
  double alpha0 = 0.0;            ///< 0 for steady problems
  std::array<double, 2> history{};  ///< coefficients of u^n and u^{n-1}

  static TimeWeights steady() { return {0.0, {0.0, 0.0}}; }
  static TimeWeights euler() { return {1.0, {1.0, 0.0}}; }
  static TimeWeights bdf2() { return {1.5, {2.0, -0.5}}; }
};

/// Linearized strong momentum residual at a point of a cell:
/// (alpha0 u - h)/dt + (u_conv . grad) u + grad p - nu lap u - f,
/// with h = history[0] u^n + history[1] u^{n-1}. Previous states may be
/// empty functions when the corresponding weight is zero.
Vec3 momentum_residual(const FEFunction& u, const FEFunction& p,
                       const std::array<const FEFunction*, 2>& previous,
                       const FEFunction& u_conv, double nu, double dt,
                       const TimeWeights& weights, std::size_t cell,
                       const std::array<double, 4>& bary, const Vec3& force = Vec3::Zero());

}  // namespace hemo
