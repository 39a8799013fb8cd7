#pragma once

#include <cmath>
#include <random>

#include "smspde/grid.hpp"

namespace test_helpers {

inline smspde::Field random_field(const smspde::Grid& g, std::mt19937_64& rng,
                                  double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    smspde::Field f(g);
    for (int n = 0; n < g.num_nodes(); ++n) f[n] = d(rng);
    return f;
}

inline smspde::Field interior_random_field(const smspde::Grid& g, std::mt19937_64& rng,
                                           double lo = -1.0, double hi = 1.0) {
    smspde::Field f = random_field(g, rng, lo, hi);
    for (int n = 0; n < g.num_nodes(); ++n)
        if (!g.is_interior(n)) f[n] = 0.0;
    return f;
}

inline double max_abs_diff(const smspde::Field& a, const smspde::Field& b) {
    double d = 0.0;
    for (int n = 0; n < a.size(); ++n) d = std::max(d, std::abs(a[n] - b[n]));
    return d;
}

}  // namespace test_helpers
