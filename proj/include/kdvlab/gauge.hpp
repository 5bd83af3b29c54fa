#pragma once

// Gauge construction phi in closed form, its defining first-order ODE as a
// verification target, the change of unknown v = phi^{-1} u, the gauged
// operator's coefficients, and the H^s commutator corrections.

#include <cmath>
#include <vector>

#include "kdvlab/coefficients.hpp"
#include "kdvlab/grid.hpp"

namespace kdvlab {

/// Samples of the gauge phi and its x-derivatives at one time. phi > 0,
/// phi(0) = 1 exactly; derivative tables are assembled from the analytic
/// log-derivative, never by differencing phi.
struct GaugeProfile {
    SpatialGrid grid;
    double t = 0.0;
    std::vector<double> phi, dphi, d2phi, d3phi;
    std::vector<double> dtphi;              // zero when coefficients are autonomous
    std::vector<double> psi1, psi2, psi3;   // log-derivatives (dx^j log phi)
    double delta = 0.75;
    int cdelta = 0;
    double minPhi = 0.0, maxPhi = 0.0;
};

namespace detail {

// <x>^{-2 delta} and its first two x-derivatives
struct BracketWeight {
    double w, dw, d2w;
};
inline BracketWeight bracketWeight(double x, double delta) {
    const double b2 = 1.0 + x * x;
    const double w = std::pow(b2, -delta);
    const double dw = -2.0 * delta * x * std::pow(b2, -delta - 1.0);
    const double d2w = -2.0 * delta * std::pow(b2, -delta - 1.0)
                     + 4.0 * delta * (delta + 1.0) * x * x * std::pow(b2, -delta - 2.0);
    return {w, dw, d2w};
}

}  // namespace detail

/// Solve the gauge ODE in closed form:
///   phi = sqrt(a3(x)/a3(0)) * exp(-int_0^x a2/(3 a3)) * exp(-int_0^x c_delta/(6 a3 <y>^{2 delta})).
/// The square-root factor is evaluated directly; only the two exponents use
/// the trapezoidal antiderivative, so phi(0) = 1 exactly.
inline GaugeProfile buildGauge(const CoefficientSet& coeffs, double t, const SpatialGrid& grid,
                               double delta = 0.75, int cdelta = 0) {
    if (!(delta > 0.5)) throw ValidationError("build_gauge: delta must exceed 1/2");
    if (cdelta != 0 && cdelta != 1) throw ValidationError("build_gauge: c_delta must be 0 or 1");
    checkNondegeneracy(coeffs, Window{-grid.halfLength, grid.halfLength, t, t});

    const std::size_t n = grid.pointCount;
    GaugeProfile g;
    g.grid = grid;
    g.t = t;
    g.delta = delta;
    g.cdelta = cdelta;
    g.phi.resize(n); g.dphi.resize(n); g.d2phi.resize(n); g.d3phi.resize(n);
    g.dtphi.assign(n, 0.0);
    g.psi1.resize(n); g.psi2.resize(n); g.psi3.resize(n);

    const double a30 = coeffs.a3(t, 0.0);
    const double cd = static_cast<double>(cdelta);

    std::vector<double> s1(n), s2(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = grid.point(i);
        double a3 = coeffs.a3(t, x);
        s1[i] = coeffs.a2(t, x) / (3.0 * a3);
        s2[i] = cd / (6.0 * a3 * std::pow(jbracket(x), 2.0 * delta));
    }
    std::vector<double> I1 = cumulativeIntegral(s1, grid);
    std::vector<double> I2 = cumulativeIntegral(s2, grid);

    g.minPhi = std::numeric_limits<double>::infinity();
    g.maxPhi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = grid.point(i);
        double a3 = coeffs.a3(t, x);
        double da3 = coeffs.dxA3(t, x);
        double d2a3 = coeffs.dx2A3(t, x);
        double d3a3 = coeffs.dx3A3(t, x);
        double a2 = coeffs.a2(t, x);
        double da2 = coeffs.dxA2(t, x);
        double d2a2 = coeffs.dx2A2(t, x);
        auto bw = detail::bracketWeight(x, delta);

        double phi = std::sqrt(a3 / a30) * std::exp(-I1[i]) * std::exp(-I2[i]);

        // dx^j log phi from the three factors
        double p1 = 0.5 * da3 / a3 - a2 / (3.0 * a3) - cd * bw.w / (6.0 * a3);
        double N = 3.0 * da3 - 2.0 * a2 - cd * bw.w;
        double dN = 3.0 * d2a3 - 2.0 * da2 - cd * bw.dw;
        double d2N = 3.0 * d3a3 - 2.0 * d2a2 - cd * bw.d2w;
        double p2 = dN / (6.0 * a3) - N * da3 / (6.0 * a3 * a3);
        double p3 = d2N / (6.0 * a3) - (2.0 * dN * da3 + N * d2a3) / (6.0 * a3 * a3)
                  + 2.0 * N * da3 * da3 / (6.0 * a3 * a3 * a3);

        g.phi[i] = phi;
        g.psi1[i] = p1;
        g.psi2[i] = p2;
        g.psi3[i] = p3;
        g.dphi[i] = p1 * phi;
        g.d2phi[i] = (p2 + p1 * p1) * phi;
        g.d3phi[i] = (p3 + 3.0 * p1 * p2 + p1 * p1 * p1) * phi;
        g.minPhi = std::min(g.minPhi, phi);
        g.maxPhi = std::max(g.maxPhi, phi);
    }

    if (coeffs.timeDependent) {
        std::vector<double> q1(n), q2(n);
        const double dta30 = coeffs.dtA3(t, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double x = grid.point(i);
            double a3 = coeffs.a3(t, x);
            double a2 = coeffs.a2(t, x);
            double dta3 = coeffs.dtA3(t, x);
            double dta2 = coeffs.dtA2(t, x);
            q1[i] = (dta2 * a3 - a2 * dta3) / (3.0 * a3 * a3);
            q2[i] = -cd * dta3 / (6.0 * a3 * a3 * std::pow(jbracket(x), 2.0 * delta));
        }
        std::vector<double> J1 = cumulativeIntegral(q1, grid);
        std::vector<double> J2 = cumulativeIntegral(q2, grid);
        for (std::size_t i = 0; i < n; ++i) {
            double x = grid.point(i);
            double dtpsi = 0.5 * (coeffs.dtA3(t, x) / coeffs.a3(t, x) - dta30 / a30) - J1[i] - J2[i];
            g.dtphi[i] = dtpsi * g.phi[i];
        }
    }
    return g;
}

/// Max-norm residual of the gauge ODE
///   6 a3 dx phi - (3 dx a3 - c_delta <x>^{-2 delta} - 2 a2) phi,
/// normalized by max |phi| (|a2| + |dx a3| + 1). Near roundoff for
/// build_gauge output; order 0.1/normalization for a corrupted node.
inline double gaugeOdeResidual(const GaugeProfile& g, const CoefficientSet& coeffs) {
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < g.grid.pointCount; ++i) {
        double x = g.grid.point(i);
        double a3 = coeffs.a3(g.t, x);
        double a2 = coeffs.a2(g.t, x);
        double da3 = coeffs.dxA3(g.t, x);
        double w = std::pow(jbracket(x), -2.0 * g.delta);
        double r = 6.0 * a3 * g.dphi[i] - (3.0 * da3 - static_cast<double>(g.cdelta) * w - 2.0 * a2) * g.phi[i];
        worst = std::max(worst, std::abs(r));
        scale = std::max(scale, std::abs(g.phi[i]) * (std::abs(a2) + std::abs(da3) + 1.0));
    }
    return worst / scale;
}

enum class GaugeDirection { forward, inverse };

/// forward: v = u / phi; inverse: u = phi * v. Exact algebraic inverse pair.
inline Field applyGauge(const Field& u, const GaugeProfile& g, GaugeDirection direction) {
    if (u.grid != g.grid) throw ValidationError("apply_gauge: mismatched grids");
    Field out(u.grid, u.time);
    if (direction == GaugeDirection::forward) {
        for (std::size_t i = 0; i < u.size(); ++i) out.values[i] = u.values[i] / g.phi[i];
    } else {
        for (std::size_t i = 0; i < u.size(); ++i) out.values[i] = u.values[i] * g.phi[i];
    }
    return out;
}

/// Coefficient corrections that close the H^s energy estimate:
///   a2 <- a2 + s dx a3,  a1 <- a1 + s dx a2 + s(s-1)/2 dx^2 a3,
/// with a3, a0 untouched and all derivative evaluators shifted
/// consistently. The order-zero operator remainder is not represented.
inline CoefficientSet hsCorrectedCoefficients(const CoefficientSet& coeffs, double s) {
    CoefficientSet out = coeffs;
    out.label = coeffs.label + "+hs";
    const double c = 0.5 * s * (s - 1.0);
    auto base = coeffs;  // capture by value: evaluators stay valid

    out.a2 = [base, s](double t, double x) { return base.a2(t, x) + s * base.dxA3(t, x); };
    out.dxA2 = [base, s](double t, double x) { return base.dxA2(t, x) + s * base.dx2A3(t, x); };
    out.dx2A2 = [base, s](double t, double x) { return base.dx2A2(t, x) + s * base.dx3A3(t, x); };

    out.a1 = [base, s, c](double t, double x) { return base.a1(t, x) + s * base.dxA2(t, x) + c * base.dx2A3(t, x); };
    out.dxA1 = [base, s, c](double t, double x) { return base.dxA1(t, x) + s * base.dx2A2(t, x) + c * base.dx3A3(t, x); };

    if (coeffs.timeDependent) {
        // dt(dx a3) has no dedicated evaluator; difference dtA3 in x
        const double hx = 1e-4;
        out.dtA2 = [base, s, hx](double t, double x) {
            double d = (base.dtA3(t, x - 2 * hx) - 8.0 * base.dtA3(t, x - hx) + 8.0 * base.dtA3(t, x + hx) -
                        base.dtA3(t, x + 2 * hx)) / (12.0 * hx);
            return base.dtA2(t, x) + s * d;
        };
    }
    return out;
}

/// Coefficients of the gauged operator
///   L_phi = a3 dx^3 + (a2 + 3 a3 phi'/phi) dx^2
///         + (a1 + (2 a2 phi' + 3 a3 phi'')/phi) dx
///         + (a0 + (dt phi + a1 phi' + a2 phi'' + a3 phi''')/phi),
/// expressed through the profile's analytic log-derivatives and bound to
/// the profile's grid (off-grid evaluation snaps to the nearest node).
inline CoefficientSet gaugedCoefficients(const CoefficientSet& coeffs, const GaugeProfile& g) {
    const SpatialGrid grid = g.grid;
    auto idx = [grid](double x) {
        double r = (x + grid.halfLength) / grid.spacing;
        long i = std::lround(r);
        if (i < 0) i = 0;
        if (i >= static_cast<long>(grid.pointCount)) i = static_cast<long>(grid.pointCount) - 1;
        return static_cast<std::size_t>(i);
    };
    auto base = coeffs;
    auto p1 = g.psi1, p2 = g.psi2, p3 = g.psi3;
    std::vector<double> dtpsi(grid.pointCount);
    for (std::size_t i = 0; i < grid.pointCount; ++i) dtpsi[i] = g.dtphi[i] / g.phi[i];

    CoefficientSet out = coeffs;
    out.label = coeffs.label + "+gauge";
    out.a2 = [base, p1, idx](double t, double x) {
        std::size_t i = idx(x);
        return base.a2(t, x) + 3.0 * base.a3(t, x) * p1[i];
    };
    out.dxA2 = [base, p1, p2, idx](double t, double x) {
        std::size_t i = idx(x);
        return base.dxA2(t, x) + 3.0 * (base.dxA3(t, x) * p1[i] + base.a3(t, x) * p2[i]);
    };
    out.dx2A2 = [base, p1, p2, p3, idx](double t, double x) {
        std::size_t i = idx(x);
        return base.dx2A2(t, x) + 3.0 * (base.dx2A3(t, x) * p1[i] + 2.0 * base.dxA3(t, x) * p2[i] +
                                         base.a3(t, x) * p3[i]);
    };
    out.a1 = [base, p1, p2, idx](double t, double x) {
        std::size_t i = idx(x);
        double ddphi = p2[i] + p1[i] * p1[i];  // phi''/phi
        return base.a1(t, x) + 2.0 * base.a2(t, x) * p1[i] + 3.0 * base.a3(t, x) * ddphi;
    };
    out.dxA1 = [base, p1, p2, p3, idx](double t, double x) {
        std::size_t i = idx(x);
        double q = p1[i], q2 = p2[i], q3 = p3[i];
        // dx(phi'/phi) = psi2, phi''/phi = psi2 + psi1^2, dx(phi''/phi) = psi3 + 2 psi1 psi2
        double ddphi = q2 + q * q;
        double termA = 2.0 * (base.dxA2(t, x) * q + base.a2(t, x) * q2);
        double termB = 3.0 * (base.dxA3(t, x) * ddphi + base.a3(t, x) * (q3 + 2.0 * q * q2));
        return base.dxA1(t, x) + termA + termB;
    };
    out.a0 = [base, p1, p2, p3, dtpsi, idx](double t, double x) {
        std::size_t i = idx(x);
        double q = p1[i];
        double ddphi = p2[i] + q * q;
        double dddphi = p3[i] + 3.0 * q * p2[i] + q * q * q;
        return base.a0(t, x) + dtpsi[i] + base.a1(t, x) * q + base.a2(t, x) * ddphi + base.a3(t, x) * dddphi;
    };
    return out;
}

}  // namespace kdvlab
