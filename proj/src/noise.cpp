#include "smspde/noise.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace smspde {

namespace {

// 64-point Gauss-Legendre nodes/weights on [-1, 1], generated once by
// Newton iteration on the Legendre polynomial.
struct GaussLegendre64 {
    double x[64];
    double w[64];
    GaussLegendre64() {
        const int n = 64;
        for (int i = 0; i < n / 2; ++i) {
            double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double p0, p1, dp;
            for (int it = 0; it < 100; ++it) {
                p0 = 1.0;
                p1 = xi;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
                const double dx = p1 / dp;
                xi -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            x[i] = -xi;
            x[n - 1 - i] = xi;
            w[i] = w[n - 1 - i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
        }
    }
};

const GaussLegendre64& gl64() {
    static const GaussLegendre64 g;
    return g;
}

}  // namespace

void LevyModel::validate() const {
    if (intensity < 0.0) throw std::invalid_argument("levy: intensity must be >= 0");
    if (law == MarkLaw::two_point) {
        if (prob1 < 0.0 || prob1 > 1.0)
            throw std::invalid_argument("levy: two-point probability outside [0,1]");
    } else if (law == MarkLaw::uniform) {
        if (!(b > a)) throw std::invalid_argument("levy: uniform mark interval degenerate");
    } else {
        throw std::invalid_argument("levy: unsupported mark law");
    }
}

double LevyModel::mark_expectation(const std::function<double(double)>& phi) const {
    if (law == MarkLaw::two_point)
        return prob1 * phi(zeta1) + (1.0 - prob1) * phi(zeta2);
    const auto& g = gl64();
    double s = 0.0;
    for (int i = 0; i < 64; ++i) {
        const double z = 0.5 * (a + b) + 0.5 * (b - a) * g.x[i];
        s += g.w[i] * phi(z);
    }
    return 0.5 * s;  // weights sum to 2
}

LevyMoments levy_moments(const LevyModel& levy) {
    levy.validate();
    LevyMoments m;
    if (levy.intensity == 0.0) return m;
    m.m0 = levy.intensity;
    m.m1 = levy.intensity * levy.mark_expectation(levy.gamma0);
    m.m2 = levy.intensity *
           levy.mark_expectation([&](double z) { const double v = levy.gamma0(z); return v * v; });
    return m;
}

std::uint64_t derive_path_seed(std::uint64_t master_seed, int path) {
    // splitmix64 applied twice to the master/index mix
    std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(path) + 1);
    for (int k = 0; k < 2; ++k) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z = z ^ (z >> 31);
    }
    return z;
}

std::vector<PathBundle> sample_paths(int steps, double T, const LevyModel& levy,
                                     int paths, std::uint64_t master_seed) {
    if (steps < 1) throw std::invalid_argument("sample_paths: steps must be >= 1");
    if (!(T > 0.0)) throw std::invalid_argument("sample_paths: horizon must be > 0");
    if (paths < 1) throw std::invalid_argument("sample_paths: path count must be >= 1");
    levy.validate();

    const double dt = T / steps;
    std::vector<PathBundle> out(static_cast<std::size_t>(paths));
#pragma omp parallel for schedule(static)
    for (int p = 0; p < paths; ++p) {
        PathBundle& b = out[static_cast<std::size_t>(p)];
        b.path = p;
        b.seed = derive_path_seed(master_seed, p);
        b.dt = dt;
        std::mt19937_64 rng(b.seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(dt));
        b.brownian.resize(static_cast<std::size_t>(steps));
        for (int m = 0; m < steps; ++m) b.brownian[static_cast<std::size_t>(m)] = gauss(rng);
        b.jump_marks.assign(static_cast<std::size_t>(steps), {});
        if (levy.intensity > 0.0) {
            std::poisson_distribution<int> pois(levy.intensity * T);
            std::uniform_real_distribution<double> utime(0.0, T);
            const int count = pois(rng);
            for (int k = 0; k < count; ++k) {
                const double t = utime(rng);
                int bin = static_cast<int>(t / dt);
                bin = std::min(bin, steps - 1);
                double mark;
                if (levy.law == MarkLaw::two_point) {
                    std::uniform_real_distribution<double> u01(0.0, 1.0);
                    mark = u01(rng) < levy.prob1 ? levy.zeta1 : levy.zeta2;
                } else {
                    std::uniform_real_distribution<double> umark(levy.a, levy.b);
                    mark = umark(rng);
                }
                b.jump_marks[static_cast<std::size_t>(bin)].push_back(mark);
            }
        }
    }
    return out;
}

double compensated_increment(const PathBundle& bundle, int m, const LevyModel& levy,
                             const std::function<double(double)>& integrand) {
    if (levy.intensity == 0.0) return 0.0;
    double s = 0.0;
    for (const double mark : bundle.jump_marks[static_cast<std::size_t>(m)]) s += integrand(mark);
    return s - bundle.dt * levy.intensity * levy.mark_expectation(integrand);
}

}  // namespace smspde
