// Timing comparison of the parallel kernels against the serial reference
// implementations. Not a test; run manually via the `bench` target.

#include <chrono>
#include <cstdio>
#include <random>

#include "smspde/forward.hpp"

using namespace smspde;
using clock_type = std::chrono::steady_clock;

namespace {

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock_type::now();
        fn();
        best = std::min(best, ms_since(t0));
    }
    return best;
}

void bench_space_mean() {
    std::printf("space mean, 2D grid, stencil vs brute-force reference\n");
    std::printf("%8s %8s %12s %12s %8s\n", "res", "theta/h", "kernel[ms]", "ref[ms]",
                "speedup");
    std::mt19937_64 rng(42);
    for (int res : {101, 201, 401}) {
        const Grid g = build_grid({{{0.0, 1.0}, {0.0, 1.0}}}, {res, res});
        const double theta = 10.5 * g.h(0);
        const BallKernel k = build_kernel(g, theta);
        Field f(g);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        for (int n = 0; n < g.num_nodes(); ++n) f[n] = d(rng);

        Field out = apply_G(f, k);  // warm up and keep the result alive
        const double par = time_best_of(5, [&] { out = apply_G(f, k); });
        const double ser = time_best_of(res > 200 ? 1 : 3, [&] { out = ref::apply_G(f, k); });
        std::printf("%8d %8.1f %12.3f %12.3f %7.1fx\n", res, theta / g.h(0), par, ser,
                    ser / par);
    }
}

void bench_forward() {
    std::printf("\nforward ensemble, 1D, paths in parallel\n");
    std::printf("%8s %8s %8s %12s\n", "res", "steps", "paths", "solve[ms]");
    for (int paths : {8, 64, 256}) {
        const Grid g = build_grid(0.0, 1.0, 201);
        const BallKernel k = build_kernel(g, 0.1);
        const EllipticOperator op = laplacian_operator(g, 0.5);
        CustomCoeffs c;
        c.by = 0.2;
        c.bybar = 0.1;
        c.s0 = 0.05;
        c.sy = 0.1;
        const ModelSpec spec = custom_linear(c, LevyModel{}, ControlBounds{});
        const int M = 200;
        const ControlField u = ControlField::constant_control(g, M, 1.0, 1.0);
        const Field xi(g, 1.0);
        const BoundaryData eta = [](double, std::array<double, 2>) { return 1.0; };
        auto bundles = sample_paths(M, 1.0, spec.levy, paths, 7);

        const double t = time_best_of(3, [&] {
            auto ens = solve_forward(g, op, k, spec, u, xi, eta, bundles, M, 1.0,
                                     {.store_trajectories = false});
            (void)ens;
        });
        std::printf("%8d %8d %8d %12.1f\n", 201, M, paths, t);
    }
}

}  // namespace

int main() {
    bench_space_mean();
    bench_forward();
    return 0;
}
