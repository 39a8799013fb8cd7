#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace smspde {

enum class MarkLaw { two_point, uniform };

/// Finite-activity Levy driver: compound Poisson with a named mark law
/// and a jump-size coefficient gamma0.
struct LevyModel {
    double intensity = 0.0;  // jumps per unit time
    MarkLaw law = MarkLaw::two_point;
    // two_point: marks {zeta1 w.p. prob1, zeta2 w.p. 1 - prob1}
    double zeta1 = 0.0, zeta2 = 0.0, prob1 = 1.0;
    // uniform: marks on [a, b]
    double a = 0.0, b = 1.0;
    std::function<double(double)> gamma0 = [](double z) { return z; };

    void validate() const;
    /// Expectation of phi(mark) under the mark law (exact for two-point,
    /// 64-point Gauss-Legendre for uniform).
    double mark_expectation(const std::function<double(double)>& phi) const;
};

struct LevyMoments {
    double m0 = 0.0;  // total mass of nu
    double m1 = 0.0;  // integral of gamma0 d nu
    double m2 = 0.0;  // integral of gamma0^2 d nu
};

LevyMoments levy_moments(const LevyModel& levy);

/// One Monte Carlo realization of the driving noise: Brownian increments
/// per time step and jump marks binned to time steps. All randomness is a
/// pure function of (master seed, path index).
struct PathBundle {
    int path = 0;
    std::uint64_t seed = 0;
    double dt = 0.0;
    std::vector<double> brownian;                 // M increments, N(0, dt)
    std::vector<std::vector<double>> jump_marks;  // per bin
};

std::vector<PathBundle> sample_paths(int steps, double T, const LevyModel& levy,
                                     int paths, std::uint64_t master_seed);

/// Compensated jump increment over bin m:
/// sum over marks of integrand(zeta) minus dt * intensity * E[integrand].
double compensated_increment(const PathBundle& bundle, int m, const LevyModel& levy,
                             const std::function<double(double)>& integrand);

/// Stateless per-path seed derivation (splitmix64 of master ^ index mix).
std::uint64_t derive_path_seed(std::uint64_t master_seed, int path);

}  // namespace smspde
