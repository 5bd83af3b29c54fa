#pragma once

// Uniform periodic grid, finite-difference derivatives, quadrature and the
// Sobolev/weighted norms used by every other module.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdvlab {

using Complex = std::complex<double>;

/// Thrown when a documented precondition is violated (maps to CLI exit 2).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation goes numerically bad (maps to CLI exit 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Japanese bracket <x> = sqrt(1 + x^2).
inline double jbracket(double x) { return std::sqrt(1.0 + x * x); }

/// Uniform grid on [-L, L) with periodic wrap. n is even so that x = 0 is
/// always a grid point (index n/2); integrals anchored at 0 need no
/// interpolation.
struct SpatialGrid {
    double halfLength = 0.0;  // L
    std::size_t pointCount = 0;
    double spacing = 0.0;     // h = 2L/n

    SpatialGrid() = default;
    SpatialGrid(double L, std::size_t n) : halfLength(L), pointCount(n), spacing(2.0 * L / static_cast<double>(n)) {
        if (!(L > 0.0)) throw ValidationError("SpatialGrid: halfLength must be positive");
        if (n < 16 || n % 2 != 0) throw ValidationError("SpatialGrid: pointCount must be even and >= 16");
    }

    double point(std::size_t i) const { return -halfLength + static_cast<double>(i) * spacing; }
    std::size_t zeroIndex() const { return pointCount / 2; }

    std::vector<double> points() const {
        std::vector<double> xs(pointCount);
        for (std::size_t i = 0; i < pointCount; ++i) xs[i] = point(i);
        return xs;
    }

    bool operator==(const SpatialGrid& o) const {
        return halfLength == o.halfLength && pointCount == o.pointCount;
    }
    bool operator!=(const SpatialGrid& o) const { return !(*this == o); }
};

/// Complex samples of one unknown at a fixed time.
struct Field {
    SpatialGrid grid;
    std::vector<Complex> values;
    double time = 0.0;

    Field() = default;
    Field(const SpatialGrid& g, double t = 0.0) : grid(g), values(g.pointCount, Complex(0.0, 0.0)), time(t) {}
    Field(const SpatialGrid& g, std::vector<Complex> v, double t = 0.0) : grid(g), values(std::move(v)), time(t) {
        if (values.size() != grid.pointCount)
            throw ValidationError("Field: values length must equal grid.pointCount");
    }

    std::size_t size() const { return values.size(); }
    Complex& operator[](std::size_t i) { return values[i]; }
    const Complex& operator[](std::size_t i) const { return values[i]; }

    bool allFinite() const {
        for (const auto& v : values)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }
};

namespace detail {

// Kahan-compensated sum. The energy-identity checks divide near-cancelling
// pairings by tiny floors, so the quadrature sums should not lose digits.
class CompensatedSum {
public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }
private:
    double s_ = 0.0, c_ = 0.0;
};

inline bool isPowerOfTwo(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey, forward transform
// F_k = sum_j a_j e^{-2 pi i j k / n}.
inline void fftPow2(std::vector<Complex>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const Complex wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            Complex w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                Complex u = a[i + j];
                Complex v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline std::vector<Complex> dftNaive(const std::vector<Complex>& a) {
    const std::size_t n = a.size();
    std::vector<Complex> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        CompensatedSum re, im;
        for (std::size_t j = 0; j < n; ++j) {
            double ang = -2.0 * M_PI * static_cast<double>((j * k) % n) / static_cast<double>(n);
            Complex w(std::cos(ang), std::sin(ang));
            Complex term = a[j] * w;
            re.add(term.real());
            im.add(term.imag());
        }
        out[k] = Complex(re.value(), im.value());
    }
    return out;
}

}  // namespace detail

/// Forward DFT of the raw sample vector (radix-2 fast path, O(n^2) otherwise).
inline std::vector<Complex> dft(std::vector<Complex> a) {
    if (detail::isPowerOfTwo(a.size())) {
        detail::fftPow2(a);
        return a;
    }
    return detail::dftNaive(a);
}

/// Inverse DFT, a_j = (1/n) sum_k F_k e^{+2 pi i j k / n}.
inline std::vector<Complex> idft(std::vector<Complex> F) {
    const std::size_t n = F.size();
    for (auto& v : F) v = std::conj(v);
    F = dft(std::move(F));
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : F) v = std::conj(v) * inv;
    return F;
}

/// Integer Fourier index of DFT bin k, mapped to the symmetric range
/// [-n/2, n/2). The physical frequency of bin k is pi*mode/L.
inline long fourierMode(std::size_t k, std::size_t n) {
    long m = static_cast<long>(k);
    if (m >= static_cast<long>(n / 2)) m -= static_cast<long>(n);
    return m;
}

/// 4th-order centered periodic finite difference of order 1, 2 or 3.
/// Stencils: 5-point for the first and second derivative, 7-point for the
/// third (the solver's bandwidth comes from this one).
inline Field derivative(const Field& field, int order) {
    static const double c1[] = {1.0, -8.0, 0.0, 8.0, -1.0};          // /(12h)
    static const double c2[] = {-1.0, 16.0, -30.0, 16.0, -1.0};      // /(12h^2)
    static const double c3[] = {1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0};  // /(8h^3)

    const std::size_t n = field.size();
    const double h = field.grid.spacing;
    Field out(field.grid, field.time);

    const double* coef = nullptr;
    int half = 0;
    double scale = 0.0;
    switch (order) {
        case 1: coef = c1; half = 2; scale = 1.0 / (12.0 * h); break;
        case 2: coef = c2; half = 2; scale = 1.0 / (12.0 * h * h); break;
        case 3: coef = c3; half = 3; scale = 1.0 / (8.0 * h * h * h); break;
        default: throw ValidationError("derivative: order must be 1, 2 or 3");
    }
    for (std::size_t i = 0; i < n; ++i) {
        Complex acc(0.0, 0.0);
        for (int o = -half; o <= half; ++o) {
            double c = coef[o + half];
            if (c == 0.0) continue;
            std::size_t j = (i + n + static_cast<std::size_t>(o + static_cast<int>(n))) % n;
            acc += c * field.values[j];
        }
        out.values[i] = acc * scale;
    }
    return out;
}

/// L^2_x pairing (f, g) = h * sum f_i conj(g_i).
inline Complex innerProduct(const Field& f, const Field& g) {
    if (f.grid != g.grid) throw ValidationError("innerProduct: mismatched grids");
    detail::CompensatedSum re, im;
    for (std::size_t i = 0; i < f.size(); ++i) {
        Complex term = f.values[i] * std::conj(g.values[i]);
        re.add(term.real());
        im.add(term.imag());
    }
    return f.grid.spacing * Complex(re.value(), im.value());
}

/// Same pairing with both factors in absolute value; the natural magnitude
/// against which the cancellation in Re(Lv, v) is measured.
inline double absPairing(const Field& f, const Field& g) {
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < f.size(); ++i) s.add(std::abs(f.values[i]) * std::abs(g.values[i]));
    return f.grid.spacing * s.value();
}

/// Discrete L^2 norm (h * sum |u_i|^2)^(1/2); trapezoid quadrature on the
/// periodic grid.
inline double l2Norm(const Field& field) {
    detail::CompensatedSum s;
    for (const auto& v : field.values) s.add(std::norm(v));
    return std::sqrt(field.grid.spacing * s.value());
}

/// Fourier coefficients c_k with u(x) = sum c_k e^{i pi k x / L}, k the
/// symmetric mode index of each bin. Parseval: ||u||^2 = 2L sum |c_k|^2.
inline std::vector<Complex> fourierCoefficients(const Field& field) {
    const std::size_t n = field.size();
    std::vector<Complex> F = dft(field.values);
    for (std::size_t k = 0; k < n; ++k) {
        long m = fourierMode(k, n);
        double sign = (m % 2 == 0) ? 1.0 : -1.0;  // grid starts at -L, not 0
        F[k] *= sign / static_cast<double>(n);
    }
    return F;
}

/// Sobolev norm ||<xi>^s u^||_{L^2} with xi_k = pi k / L on the discrete
/// frequency lattice; equals l2Norm at s = 0.
inline double hsNorm(const Field& field, double s) {
    const std::size_t n = field.size();
    const double L = field.grid.halfLength;
    std::vector<Complex> c = fourierCoefficients(field);
    detail::CompensatedSum acc;
    for (std::size_t k = 0; k < n; ++k) {
        double xi = M_PI * static_cast<double>(fourierMode(k, n)) / L;
        double weight = std::pow(1.0 + xi * xi, s);
        acc.add(weight * std::norm(c[k]));
    }
    return std::sqrt(2.0 * L * acc.value());
}

/// Fraction of the spectral mass at |mode| >= cutoffFraction * (n/2).
/// Used by the resolution monitor in the energy checks.
inline double highModeMassFraction(const Field& field, double cutoffFraction) {
    const std::size_t n = field.size();
    std::vector<Complex> c = fourierCoefficients(field);
    double total = 0.0, high = 0.0;
    const double cut = cutoffFraction * static_cast<double>(n / 2);
    for (std::size_t k = 0; k < n; ++k) {
        double m = std::abs(static_cast<double>(fourierMode(k, n)));
        double mass = std::norm(c[k]);
        total += mass;
        if (m >= cut) high += mass;
    }
    return total > 0.0 ? high / total : 0.0;
}

/// Single-time local-smoothing integrand ||<x>^{-delta} dx u||_{L^2};
/// the time integration is the caller's (solver) job.
inline double weightedSmoothingSeminorm(const Field& field, double delta) {
    if (!(delta > 0.5)) throw ValidationError("weighted_smoothing_seminorm: delta must exceed 1/2");
    Field du = derivative(field, 1);
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < du.size(); ++i) {
        double w = std::pow(jbracket(field.grid.point(i)), -2.0 * delta);
        s.add(w * std::norm(du.values[i]));
    }
    return std::sqrt(field.grid.spacing * s.value());
}

/// Trapezoidal antiderivative F of the samples with F(0) = 0 exactly
/// (x = 0 is on-grid by construction).
inline std::vector<double> cumulativeIntegral(const std::vector<double>& samples, const SpatialGrid& grid) {
    if (samples.size() != grid.pointCount)
        throw ValidationError("cumulative_integral: sample count must match grid");
    const std::size_t n = samples.size();
    const double h = grid.spacing;
    std::vector<double> F(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i)
        F[i + 1] = F[i] + 0.5 * h * (samples[i] + samples[i + 1]);
    const double anchor = F[grid.zeroIndex()];
    for (auto& v : F) v -= anchor;
    return F;
}

}  // namespace kdvlab
