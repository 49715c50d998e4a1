#pragma once

#include <cstdint>
#include <random>

#include "subrosa/frame.hpp"
#include "subrosa/grid.hpp"

namespace subrosa {

/// Random smooth scalar: a few low Fourier modes with seeded coefficients.
/// Smoothness keeps stencil truncation far below solver tolerances.
ScalarField random_smooth_scalar(const GridPtr& grid, std::mt19937_64& rng, int max_mode = 2,
                                 double amplitude = 1.0, bool zero_mean = false);

/// Random horizontal field: random smooth coefficients against the frame.
VectorField random_horizontal_field(const Frame& frame, std::mt19937_64& rng, int max_mode = 2,
                                    double amplitude = 1.0);

/// Random general vector field with smooth components.
VectorField random_vector_field(const GridPtr& grid, std::mt19937_64& rng, int max_mode = 2,
                                double amplitude = 1.0);

}  // namespace subrosa
