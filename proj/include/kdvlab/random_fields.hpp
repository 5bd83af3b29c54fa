#pragma once

// Seeded band-limited random test fields with compact support away from the
// periodic seam. Used by the energy/duality checks and the CLI's seeded
// experiments; deterministic for a fixed seed.

#include <random>

#include "kdvlab/grid.hpp"

namespace kdvlab {

/// C-infinity step: 0 at s <= 0, 1 at s >= 1.
inline double smoothStep(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    double a = std::exp(-1.0 / s);
    double b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

/// Plateau window: 1 on |x| <= plateau*L, 0 beyond cutoff*L.
inline double plateauWindow(double x, double L, double plateau = 0.5, double cutoff = 0.75) {
    double ax = std::abs(x);
    return smoothStep((cutoff * L - ax) / ((cutoff - plateau) * L));
}

/// Random smooth complex field: Fourier synthesis over |mode| <= bandFraction * n/2
/// with 1/<k>^2 amplitudes, windowed to vanish near the boundary.
inline Field randomSmoothField(const SpatialGrid& grid, std::uint64_t seed, double bandFraction = 0.1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double L = grid.halfLength;
    const auto K = static_cast<long>(bandFraction * static_cast<double>(grid.pointCount) / 2.0);

    struct Mode { double k; Complex amp; };
    std::vector<Mode> modes;
    for (long m = -K; m <= K; ++m) {
        double k = M_PI * static_cast<double>(m) / L;
        double scale = 1.0 / std::pow(1.0 + std::abs(static_cast<double>(m)), 2.0);
        modes.push_back({k, scale * Complex(gauss(rng), gauss(rng))});
    }

    Field u(grid);
    double maxAbs = 0.0;
    for (std::size_t i = 0; i < grid.pointCount; ++i) {
        double x = grid.point(i);
        Complex acc(0.0, 0.0);
        for (const auto& mode : modes)
            acc += mode.amp * Complex(std::cos(mode.k * x), std::sin(mode.k * x));
        u.values[i] = acc * plateauWindow(x, L);
        maxAbs = std::max(maxAbs, std::abs(u.values[i]));
    }
    if (maxAbs > 0.0)
        for (auto& v : u.values) v /= maxAbs;
    return u;
}

}  // namespace kdvlab
