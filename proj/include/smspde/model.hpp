#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>

#include "smspde/noise.hpp"

namespace smspde {

struct ControlBounds {
    double lo = 1e-3;
    double hi = 1e3;
    double project(double u) const { return u < lo ? lo : (u > hi ? hi : u); }
    bool contains(double u) const { return u >= lo && u <= hi; }
};

/// Scalar coefficient of the dynamics or running cost, with its partial
/// derivatives through the pointwise state y, the space-mean channel ybar,
/// and the control u. Arguments: (t, x, y, ybar, u).
struct CoefficientFn {
    using Fn = std::function<double(double, std::array<double, 2>, double, double, double)>;
    Fn value, dy, dybar, du;
};

/// Terminal cost g(x, y, ybar) and its slopes.
struct TerminalFn {
    using Fn = std::function<double(std::array<double, 2>, double, double)>;
    Fn value, dy, dybar;
};

enum class PresetKind { harvest_log, harvest_power, custom_linear };

/// Constants of the custom-linear preset:
/// b = b0 + by*y + bybar*ybar + bu*u, sigma/gamma_core analogous,
/// f = f0 + fy*y + fu*u + fuu*u^2, g = gy*y.
struct CustomCoeffs {
    double b0 = 0, by = 0, bybar = 0, bu = 0;
    double s0 = 0, sy = 0, sybar = 0, su = 0;
    double c0 = 0, cy = 0, cybar = 0, cu = 0;
    double f0 = 0, fy = 0, fu = 0, fuu = 0;
    double gy = 0;
};

/// Full coefficient set (b, sigma, gamma, f, g) of one control problem,
/// with the jump coefficient factored as gamma = gamma0(zeta) * gamma_core.
struct ModelSpec {
    std::string name;
    PresetKind kind = PresetKind::custom_linear;
    double alpha = 0.0, beta = 0.0, rho = 0.5;
    std::function<double(std::array<double, 2>)> mu;  // harvest-power terminal weight
    ControlBounds U;
    LevyModel levy;
    LevyMoments moments;  // cached levy_moments(levy)

    CoefficientFn b, sigma, gamma_core, f;
    TerminalFn g;
    bool positive_state = false;   // S = (0, inf)
    bool concave_asserted = false;

    bool state_admissible(double y) const { return !positive_state || y > 0.0; }
};

ModelSpec harvest_log(double alpha, double beta, LevyModel levy, ControlBounds U);
ModelSpec harvest_power(double alpha, double beta, double rho,
                        std::function<double(std::array<double, 2>)> mu,
                        LevyModel levy, ControlBounds U);
ModelSpec custom_linear(const CustomCoeffs& c, LevyModel levy, ControlBounds U);

/// Point values entering the Hamiltonian. The jump component r(zeta) is
/// carried as the coefficient c_r in r(zeta) = c_r * gamma0(zeta).
struct HamiltonianInputs {
    double y = 0.0, ybar = 0.0, u = 0.0;
    double p = 0.0, q = 0.0, c_r = 0.0;
};

double hamiltonian(const ModelSpec& spec, double t, std::array<double, 2> x,
                   const HamiltonianInputs& in);
double dH_du(const ModelSpec& spec, double t, std::array<double, 2> x,
             const HamiltonianInputs& in);
double dH_dy(const ModelSpec& spec, double t, std::array<double, 2> x,
             const HamiltonianInputs& in);
double dH_dybar(const ModelSpec& spec, double t, std::array<double, 2> x,
                const HamiltonianInputs& in);

struct TerminalSlope {
    double dg_dy = 0.0;
    double dg_dybar = 0.0;
};

TerminalSlope terminal_slope(const ModelSpec& spec, std::array<double, 2> x,
                             double y, double ybar);

struct ConcavityReport {
    double worst_violation = 0.0;  // max over probes of midpoint-concavity gap
    int samples = 0;
};

/// Random midpoint-concavity probes of (y, ybar, u) -> H and (y, ybar) -> g.
ConcavityReport check_concavity(const ModelSpec& spec, int sample_count, std::uint64_t seed);

}  // namespace smspde
