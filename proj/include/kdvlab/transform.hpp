#pragma once

// Reduction to constant dispersion: straightening map y(x,t), its inverse,
// field transport between the two grids, the reduced coefficients, and the
// adjoint / time-reversal / reflection symmetries.

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "kdvlab/coefficients.hpp"
#include "kdvlab/grid.hpp"

namespace kdvlab {

namespace interp {

// Cubic Hermite transport of a periodic complex field: values on the grid,
// slopes from the 4th-order first-derivative stencil.
class PeriodicHermite {
public:
    PeriodicHermite(const Field& u) : grid_(u.grid), vals_(u.values) {
        Field d = derivative(u, 1);
        slopes_ = d.values;
    }

    Complex operator()(double x) const {
        const double L = grid_.halfLength;
        const double h = grid_.spacing;
        const auto n = static_cast<long>(grid_.pointCount);
        double xi = x;
        while (xi < -L) xi += 2 * L;
        while (xi >= L) xi -= 2 * L;
        double r = (xi + L) / h;
        long i = static_cast<long>(std::floor(r));
        if (i < 0) i = 0;
        if (i >= n) i = n - 1;
        long j = (i + 1) % n;
        double s = r - static_cast<double>(i);
        double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
        double h10 = s * (1 - s) * (1 - s);
        double h01 = s * s * (3 - 2 * s);
        double h11 = s * s * (s - 1);
        return h00 * vals_[static_cast<std::size_t>(i)] + h01 * vals_[static_cast<std::size_t>(j)] +
               h * (h10 * slopes_[static_cast<std::size_t>(i)] + h11 * slopes_[static_cast<std::size_t>(j)]);
    }

private:
    SpatialGrid grid_;
    std::vector<Complex> vals_;
    std::vector<Complex> slopes_;
};

// Fritsch-Carlson monotone piecewise cubic for a strictly increasing table
// on a uniform x-grid; used for y(x) and for the inverse table x(y).
class MonotoneCubic {
public:
    MonotoneCubic(std::vector<double> xs, std::vector<double> ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
        const std::size_t n = xs_.size();
        std::vector<double> d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
        m_.resize(n);
        m_[0] = d[0];
        m_[n - 1] = d[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = 0.5 * (d[i - 1] + d[i]);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) { m_[i] = m_[i + 1] = 0.0; continue; }
            double a = m_[i] / d[i], b = m_[i + 1] / d[i];
            double s = a * a + b * b;
            if (s > 9.0) {
                double tau = 3.0 / std::sqrt(s);
                m_[i] = tau * a * d[i];
                m_[i + 1] = tau * b * d[i];
            }
        }
    }

    double operator()(double x) const {
        const std::size_t n = xs_.size();
        if (x <= xs_.front()) return ys_.front() + m_.front() * (x - xs_.front());
        if (x >= xs_.back()) return ys_.back() + m_.back() * (x - xs_.back());
        std::size_t lo = 0, hi = n - 1;
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            if (xs_[mid] <= x) lo = mid; else hi = mid;
        }
        double hseg = xs_[lo + 1] - xs_[lo];
        double s = (x - xs_[lo]) / hseg;
        double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
        double h10 = s * (1 - s) * (1 - s);
        double h01 = s * s * (3 - 2 * s);
        double h11 = s * s * (s - 1);
        return h00 * ys_[lo] + h01 * ys_[lo + 1] + hseg * (h10 * m_[lo] + h11 * m_[lo + 1]);
    }

    double front() const { return ys_.front(); }
    double back() const { return ys_.back(); }

private:
    std::vector<double> xs_, ys_, m_;
};

}  // namespace interp

/// Tabulated straightening map at one time: y(x) on the x-grid, the inverse
/// x(y) on a uniform y-grid, and the Jacobian dy/dx = a3^{-1/3}.
struct VariableChange {
    double t = 0.0;
    SpatialGrid xGrid;
    std::vector<double> yOfX;
    SpatialGrid yGrid;
    std::vector<double> xOfY;
    std::vector<double> dydx;          // at x-grid nodes
    std::vector<double> dydxAtYNodes;  // a3^{-1/3}(x(y_j))
    double compositionError = 0.0;     // max |y(x(y_j)) - y_j| over in-range nodes
};

/// y(x,t) = int_0^x a3^{-1/3}; requires a3 > 0 (apply space_reflection
/// first when the declared dispersion sign is negative). The inverse is a
/// monotone-cubic first guess polished by bisection to residual <= 1e-10.
inline VariableChange straighteningMap(const CoefficientSet& coeffs, double t, const SpatialGrid& grid) {
    checkNondegeneracy(coeffs, Window{-grid.halfLength, grid.halfLength, t, t});
    if (coeffs.a3(t, 0.0) < 0.0)
        throw ValidationError("straightening_map: a3 < 0; normalize with space_reflection first");

    VariableChange vc;
    vc.t = t;
    vc.xGrid = grid;
    const std::size_t n = grid.pointCount;
    std::vector<double> samples(n);
    vc.dydx.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        vc.dydx[i] = std::pow(coeffs.a3(t, grid.point(i)), -1.0 / 3.0);
        samples[i] = vc.dydx[i];
    }
    vc.yOfX = cumulativeIntegral(samples, grid);
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(vc.yOfX[i + 1] > vc.yOfX[i]))
            throw NumericalError("straightening_map: tabulated y(x) is not strictly increasing");

    const double yLo = vc.yOfX.front();
    const double yHi = vc.yOfX.back();
    double Ly = std::max(std::abs(yLo), std::abs(yHi));
    vc.yGrid = SpatialGrid(Ly, n);

    interp::MonotoneCubic Y(grid.points(), vc.yOfX);
    auto invert = [&](double target) {
        double lo = grid.point(0), hi = grid.point(n - 1);
        if (target <= yLo) return lo;
        if (target >= yHi) return hi;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            double r = Y(mid) - target;
            if (std::abs(r) <= 1e-10 || hi - lo < 1e-15 * grid.halfLength) return mid;
            if (r < 0.0) lo = mid; else hi = mid;
        }
        return 0.5 * (lo + hi);
    };

    vc.xOfY.resize(n);
    vc.dydxAtYNodes.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        double yj = vc.yGrid.point(j);
        double xj = invert(yj);
        vc.xOfY[j] = xj;
        vc.dydxAtYNodes[j] = std::pow(coeffs.a3(t, xj), -1.0 / 3.0);
        if (yj > yLo && yj < yHi)
            vc.compositionError = std::max(vc.compositionError, std::abs(Y(xj) - yj));
    }
    if (vc.compositionError > 1e-9)
        throw NumericalError("straightening_map: inverse composition error above tolerance");
    return vc;
}

/// v(y) = a3^{-1/3}(x(y)) u(x(y)) on the y-grid.
inline Field pushforward(const Field& u, const VariableChange& vc) {
    if (u.grid != vc.xGrid) throw ValidationError("pushforward: field not on the map's x-grid");
    interp::PeriodicHermite interpU(u);
    Field v(vc.yGrid, u.time);
    for (std::size_t j = 0; j < vc.yGrid.pointCount; ++j)
        v.values[j] = vc.dydxAtYNodes[j] * interpU(vc.xOfY[j]);
    return v;
}

/// u(x) = a3^{1/3}(x) v(y(x)) back on the x-grid; inverse of pushforward.
inline Field pullback(const Field& v, const VariableChange& vc) {
    if (v.grid != vc.yGrid) throw ValidationError("pullback: field not on the map's y-grid");
    interp::PeriodicHermite interpV(v);
    Field u(vc.xGrid, v.time);
    for (std::size_t i = 0; i < vc.xGrid.pointCount; ++i)
        u.values[i] = interpV(vc.yOfX[i]) / vc.dydx[i];
    return u;
}

/// Constant-dispersion coefficients (c3 = 1) obtained by pushing L through
/// the straightening map with u = a3^{1/3} v(y):
///   c2 = a2 a3^{-2/3},
///   c1 = 2 p p'' - p'^2 + a2 p' q^2 + a1 q + y_t,
///   c0 = p_t q + p^2 p''' + a2 p'' q + a1 p' q + a0,
/// where p = a3^{1/3}, q = 1/p, all evaluated at x(y); p', p'', p''' come
/// from the analytic a3 derivatives. Derivative evaluators of the reduced
/// set are finite-difference fallbacks (nothing downstream needs them in
/// closed form); validated through the solver-equivalence check.
inline CoefficientSet reducedCoefficients(const CoefficientSet& coeffs, double t, const VariableChange& vc) {
    auto base = coeffs;
    // x(y) lookup: monotone table xOfY on the uniform y-grid
    auto xTable = std::make_shared<interp::MonotoneCubic>(vc.yGrid.points(), vc.xOfY);

    std::shared_ptr<std::vector<double>> ytTable;
    SpatialGrid xg = vc.xGrid;
    if (coeffs.timeDependent) {
        std::vector<double> s(xg.pointCount);
        for (std::size_t i = 0; i < xg.pointCount; ++i) {
            double x = xg.point(i);
            s[i] = -(1.0 / 3.0) * std::pow(coeffs.a3(t, x), -4.0 / 3.0) * coeffs.dtA3(t, x);
        }
        ytTable = std::make_shared<std::vector<double>>(cumulativeIntegral(s, xg));
    }

    struct PDerivs {
        double p, q, dp, d2p, d3p;
    };
    auto pders = [base](double t_, double x) {
        double a3 = base.a3(t_, x);
        double da = base.dxA3(t_, x), d2a = base.dx2A3(t_, x), d3a = base.dx3A3(t_, x);
        PDerivs r;
        r.p = std::cbrt(a3);
        r.q = 1.0 / r.p;
        double am23 = std::pow(a3, -2.0 / 3.0);
        double am53 = std::pow(a3, -5.0 / 3.0);
        double am83 = std::pow(a3, -8.0 / 3.0);
        r.dp = (1.0 / 3.0) * am23 * da;
        r.d2p = -(2.0 / 9.0) * am53 * da * da + (1.0 / 3.0) * am23 * d2a;
        r.d3p = (10.0 / 27.0) * am83 * da * da * da - (2.0 / 3.0) * am53 * da * d2a + (1.0 / 3.0) * am23 * d3a;
        return r;
    };

    auto c2eval = [base, xTable](double t_, double y) {
        double x = (*xTable)(y);
        return base.a2(t_, x) * std::pow(base.a3(t_, x), -2.0 / 3.0);
    };
    auto c1eval = [base, xTable, pders, ytTable, xg](double t_, double y) {
        double x = (*xTable)(y);
        auto d = pders(t_, x);
        double yt = 0.0;
        if (ytTable) {
            double r = (x + xg.halfLength) / xg.spacing;
            long i = std::lround(r);
            i = std::max<long>(0, std::min<long>(i, static_cast<long>(xg.pointCount) - 1));
            yt = (*ytTable)[static_cast<std::size_t>(i)];
        }
        return 2.0 * d.p * d.d2p - d.dp * d.dp + base.a2(t_, x) * d.dp * d.q * d.q + base.a1(t_, x) * d.q + yt;
    };
    auto c0eval = [base, xTable, pders](double t_, double y) {
        double x = (*xTable)(y);
        auto d = pders(t_, x);
        double pt = (1.0 / 3.0) * std::pow(base.a3(t_, x), -2.0 / 3.0) * base.dtA3(t_, x);
        return pt * d.q + d.p * d.p * d.d3p + base.a2(t_, x) * d.d2p * d.q + base.a1(t_, x) * d.dp * d.q +
               base.a0(t_, x);
    };

    CoefficientSet out = withFiniteDifferenceDerivatives(constantEvaluator(1.0), c2eval, c1eval, c0eval,
                                                         coeffs.timeDependent, "reduced:" + coeffs.label);
    out.dispersionSign = +1;
    return out;
}

/// L* = -a3 dx^3 + (a2 - 3 dx a3) dx^2 + (a1 + 2 dx a2 - 3 dx^2 a3) dx
///      + (a0 - dx a1 + dx^2 a2 - dx^3 a3).
inline CoefficientSet adjoint(const CoefficientSet& coeffs) {
    auto b = coeffs;
    CoefficientSet out = coeffs;
    out.label = coeffs.label + "*";
    out.dispersionSign = -coeffs.dispersionSign;

    out.a3 = [b](double t, double x) { return -b.a3(t, x); };
    out.dxA3 = [b](double t, double x) { return -b.dxA3(t, x); };
    out.dx2A3 = [b](double t, double x) { return -b.dx2A3(t, x); };
    out.dx3A3 = [b](double t, double x) { return -b.dx3A3(t, x); };
    out.a2 = [b](double t, double x) { return b.a2(t, x) - 3.0 * b.dxA3(t, x); };
    out.dxA2 = [b](double t, double x) { return b.dxA2(t, x) - 3.0 * b.dx2A3(t, x); };
    out.dx2A2 = [b](double t, double x) { return b.dx2A2(t, x) - 3.0 * b.dx3A3(t, x); };
    out.a1 = [b](double t, double x) { return b.a1(t, x) + 2.0 * b.dxA2(t, x) - 3.0 * b.dx2A3(t, x); };
    out.dxA1 = [b](double t, double x) { return b.dxA1(t, x) + 2.0 * b.dx2A2(t, x) - 3.0 * b.dx3A3(t, x); };
    out.a0 = [b](double t, double x) {
        return b.a0(t, x) - b.dxA1(t, x) + b.dx2A2(t, x) - b.dx3A3(t, x);
    };
    if (coeffs.timeDependent) {
        out.dtA3 = [b](double t, double x) { return -b.dtA3(t, x); };
        const double hx = 1e-4;
        out.dtA2 = [b, hx](double t, double x) {
            double d = (b.dtA3(t, x - 2 * hx) - 8.0 * b.dtA3(t, x - hx) + 8.0 * b.dtA3(t, x + hx) -
                        b.dtA3(t, x + 2 * hx)) / (12.0 * hx);
            return b.dtA2(t, x) - 3.0 * d;
        };
    }
    return out;
}

/// t -> T - t composed with the sign flip of every coefficient; applying it
/// twice with the same T is the identity on samples.
inline CoefficientSet timeReversal(const CoefficientSet& coeffs, double T) {
    auto b = coeffs;
    CoefficientSet out = coeffs;
    out.label = coeffs.label + "(T-t)";
    out.dispersionSign = -coeffs.dispersionSign;
    auto flip = [T](const Evaluator& f) {
        return [f, T](double t, double x) { return -f(T - t, x); };
    };
    out.a3 = flip(b.a3); out.a2 = flip(b.a2); out.a1 = flip(b.a1); out.a0 = flip(b.a0);
    out.dxA3 = flip(b.dxA3); out.dx2A3 = flip(b.dx2A3); out.dx3A3 = flip(b.dx3A3);
    out.dxA2 = flip(b.dxA2); out.dx2A2 = flip(b.dx2A2);
    out.dxA1 = flip(b.dxA1);
    // chain rule restores the sign on the t-derivatives
    out.dtA3 = [b, T](double t, double x) { return b.dtA3(T - t, x); };
    out.dtA2 = [b, T](double t, double x) { return b.dtA2(T - t, x); };
    return out;
}

/// x -> -x: flips the sign of the odd-order coefficients and reflects every
/// argument; normalizes a negative dispersion coefficient to positive.
inline CoefficientSet spaceReflection(const CoefficientSet& coeffs) {
    auto b = coeffs;
    CoefficientSet out = coeffs;
    out.label = coeffs.label + "(-x)";
    out.dispersionSign = -coeffs.dispersionSign;
    out.a3 = [b](double t, double x) { return -b.a3(t, -x); };
    out.dxA3 = [b](double t, double x) { return b.dxA3(t, -x); };
    out.dx2A3 = [b](double t, double x) { return -b.dx2A3(t, -x); };
    out.dx3A3 = [b](double t, double x) { return b.dx3A3(t, -x); };
    out.a2 = [b](double t, double x) { return b.a2(t, -x); };
    out.dxA2 = [b](double t, double x) { return -b.dxA2(t, -x); };
    out.dx2A2 = [b](double t, double x) { return b.dx2A2(t, -x); };
    out.a1 = [b](double t, double x) { return -b.a1(t, -x); };
    out.dxA1 = [b](double t, double x) { return b.dxA1(t, -x); };
    out.a0 = [b](double t, double x) { return b.a0(t, -x); };
    out.dtA3 = [b](double t, double x) { return -b.dtA3(t, -x); };
    out.dtA2 = [b](double t, double x) { return b.dtA2(t, -x); };
    return out;
}

}  // namespace kdvlab
