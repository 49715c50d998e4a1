#include "subrosa/random_fields.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace subrosa {

ScalarField random_smooth_scalar(const GridPtr& grid, std::mt19937_64& rng, int max_mode,
                                 double amplitude, bool zero_mean) {
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    struct Mode {
        std::array<int, 3> k;
        double a, phi;
    };
    std::vector<Mode> modes;
    const int n = grid->dim();
    std::array<int, 3> k{0, 0, 0};
    auto emit = [&](const std::array<int, 3>& kk) {
        bool all_zero = true;
        for (int a = 0; a < n; ++a) all_zero = all_zero && kk[static_cast<std::size_t>(a)] == 0;
        if (all_zero) return;  // the mean is handled separately
        modes.push_back({kk, coeff(rng), phase(rng)});
    };
    if (n == 2) {
        for (k[0] = 0; k[0] <= max_mode; ++k[0])
            for (k[1] = -max_mode; k[1] <= max_mode; ++k[1]) emit(k);
    } else {
        for (k[0] = 0; k[0] <= max_mode; ++k[0])
            for (k[1] = -max_mode; k[1] <= max_mode; ++k[1])
                for (k[2] = -max_mode; k[2] <= max_mode; ++k[2]) emit(k);
    }
    ScalarField f(grid);
    double norm = 0.0;
    for (const auto& m : modes) norm += m.a * m.a;
    const double scale = amplitude / std::sqrt(std::max(norm, 1e-30));
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto p = grid->node(i);
        double v = 0.0;
        for (const auto& m : modes) {
            double arg = m.phi;
            for (int a = 0; a < n; ++a)
                arg += 2.0 * std::numbers::pi * m.k[static_cast<std::size_t>(a)] *
                       p[static_cast<std::size_t>(a)] / grid->period(a);
            v += scale * m.a * std::cos(arg);
        }
        f[i] = v;
    }
    if (zero_mean) {
        // Each mode has exact zero grid mean below Nyquist, but remove the
        // round-off residue so solvability preconditions hold sharply.
        double s = 0.0;
        for (const double v : f.values()) s += v;
        const double mean = s / static_cast<double>(f.size());
        for (auto& v : f.values()) v -= mean;
    }
    return f;
}

VectorField random_horizontal_field(const Frame& frame, std::mt19937_64& rng, int max_mode,
                                    double amplitude) {
    const GridPtr& grid = frame.grid();
    VectorField out(grid);
    for (int i = 0; i < frame.rank(); ++i) {
        ScalarField c = random_smooth_scalar(grid, rng, max_mode, amplitude);
        for (int a = 0; a < grid->dim(); ++a) {
            auto oa = out.component(a);
            const auto xa = frame.field(i).component(a);
            for (std::size_t node = 0; node < grid->size(); ++node)
                oa[node] += c[node] * xa[node];
        }
    }
    return out;
}

VectorField random_vector_field(const GridPtr& grid, std::mt19937_64& rng, int max_mode,
                                double amplitude) {
    VectorField out(grid);
    for (int a = 0; a < grid->dim(); ++a) {
        ScalarField c = random_smooth_scalar(grid, rng, max_mode, amplitude);
        std::copy(c.values().begin(), c.values().end(), out.component(a).begin());
    }
    return out;
}

}  // namespace subrosa
