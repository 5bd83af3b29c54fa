#pragma once

// Coefficient sets a_3..a_0 with their derivative evaluators, plus the
// structural diagnostics: non-degeneracy of the dispersion, the Mizohata
// integral of a_2/|a_3|, and the witness-finding classifier.

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kdvlab/grid.hpp"

namespace kdvlab {

using Evaluator = std::function<double(double t, double x)>;

inline Evaluator zeroEvaluator() {
    return [](double, double) { return 0.0; };
}
inline Evaluator constantEvaluator(double c) {
    return [c](double, double) { return c; };
}

/// Coefficients of L = a3 dx^3 + a2 dx^2 + a1 dx + a0 together with the
/// x- and t-derivatives the gauge/energy identities consume. Evaluators
/// must be pure; sets are immutable after construction and shareable.
struct CoefficientSet {
    Evaluator a3 = constantEvaluator(1.0);
    Evaluator a2 = zeroEvaluator();
    Evaluator a1 = zeroEvaluator();
    Evaluator a0 = zeroEvaluator();

    Evaluator dxA3 = zeroEvaluator();
    Evaluator dx2A3 = zeroEvaluator();
    Evaluator dx3A3 = zeroEvaluator();
    Evaluator dxA2 = zeroEvaluator();
    Evaluator dx2A2 = zeroEvaluator();
    Evaluator dxA1 = zeroEvaluator();
    Evaluator dtA3 = zeroEvaluator();
    Evaluator dtA2 = zeroEvaluator();

    int dispersionSign = +1;      // declared sign of a3
    bool timeDependent = false;   // lets the solver reuse factorizations
    std::string label = "custom";

    double supNorm(const SpatialGrid& grid, double t) const {
        double m = 0.0;
        for (std::size_t i = 0; i < grid.pointCount; ++i) {
            double x = grid.point(i);
            m = std::max({m, std::abs(a3(t, x)), std::abs(a2(t, x)), std::abs(a1(t, x)), std::abs(a0(t, x))});
        }
        return m;
    }
};

/// Rectangular sampling window in (x, t).
struct Window {
    double xMin = -1.0, xMax = 1.0;
    double tMin = 0.0, tMax = 0.0;
};

/// Sampled non-degeneracy constants of (A1): lambda <= |a3| <= Lambda.
struct NondegeneracyBounds {
    double lambda = 0.0;
    double Lambda = 0.0;
    Window window;
};

struct MizohataWitness {
    double x0 = 0.0;          // right endpoint
    double travel = 0.0;      // N, so the increment is M(x0) - M(x0 - N)
    double value = 1.0;       // exp(increment / 3)
};

/// Finite-window report on the weak-diffusion condition. The trend is a
/// heuristic on finite data; the witness is exactly what the ill-posedness
/// experiment consumes.
struct MizohataReport {
    double t = 0.0;
    std::vector<double> windowHalfWidths;
    std::vector<double> supAbsPerWindow;
    double supAbs = 0.0;
    enum class Trend { bounded, growing } trend = Trend::bounded;
    std::optional<MizohataWitness> witness;
    // M tabulated on the largest window
    SpatialGrid tableGrid;
    std::vector<double> table;
};

/// Sample |a3| over the window and confirm constant sign.
/// sampleDensity is in points per unit length (>= 8).
inline NondegeneracyBounds checkNondegeneracy(const CoefficientSet& coeffs, const Window& window,
                                              double sampleDensity = 32.0, double floor = 1e-8) {
    if (!(sampleDensity >= 8.0))
        throw ValidationError("check_nondegeneracy: sampleDensity must be >= 8 per unit length");
    if (!(window.xMax > window.xMin))
        throw ValidationError("check_nondegeneracy: empty window");

    const std::size_t nx = std::max<std::size_t>(2, static_cast<std::size_t>((window.xMax - window.xMin) * sampleDensity) + 1);
    const std::size_t nt = coeffs.timeDependent ? 9 : 1;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    int sign = 0;
    for (std::size_t it = 0; it < nt; ++it) {
        double t = nt == 1 ? window.tMin
                           : window.tMin + (window.tMax - window.tMin) * static_cast<double>(it) / static_cast<double>(nt - 1);
        for (std::size_t ix = 0; ix < nx; ++ix) {
            double x = window.xMin + (window.xMax - window.xMin) * static_cast<double>(ix) / static_cast<double>(nx - 1);
            double v = coeffs.a3(t, x);
            int s = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
            if (sign == 0) sign = s;
            if (s == 0 || s != sign)
                throw NumericalError("degenerate dispersion: a3 changes sign on the window");
            lo = std::min(lo, std::abs(v));
            hi = std::max(hi, std::abs(v));
        }
    }
    if (lo < floor)
        throw NumericalError("degenerate dispersion: sampled min |a3| below floor");
    return NondegeneracyBounds{lo, hi, window};
}

/// M(x, t) = int_0^x a2/|a3| dy tabulated on the grid; M(0, t) = 0.
inline std::vector<double> mizohataIntegral(const CoefficientSet& coeffs, double t, const SpatialGrid& grid) {
    checkNondegeneracy(coeffs, Window{-grid.halfLength, grid.halfLength, t, t});
    std::vector<double> samples(grid.pointCount);
    for (std::size_t i = 0; i < grid.pointCount; ++i) {
        double x = grid.point(i);
        samples[i] = coeffs.a2(t, x) / std::abs(coeffs.a3(t, x));
    }
    return cumulativeIntegral(samples, grid);
}

namespace detail {

inline std::size_t evenGridCount(double halfWidth, double densityPerUnit) {
    auto n = static_cast<std::size_t>(2.0 * halfWidth * densityPerUnit);
    n = std::max<std::size_t>(n, 256);
    if (n % 2 != 0) ++n;
    return n;
}

// Best increment M(x_i) - M(x_j), j < i, via a running prefix minimum.
inline MizohataWitness bestIncrement(const std::vector<double>& M, const SpatialGrid& grid) {
    MizohataWitness w;
    double bestInc = -std::numeric_limits<double>::infinity();
    double runMin = M[0];
    std::size_t runMinIdx = 0;
    for (std::size_t i = 1; i < M.size(); ++i) {
        if (M[i] - runMin > bestInc) {
            bestInc = M[i] - runMin;
            w.x0 = grid.point(i);
            w.travel = grid.point(i) - grid.point(runMinIdx);
        }
        if (M[i] < runMin) { runMin = M[i]; runMinIdx = i; }
    }
    w.value = std::exp(bestInc / 3.0);
    return w;
}

}  // namespace detail

/// Evaluate sup|M| on a nested family of windows and classify the trend.
/// Growing means the sup exceeds the threshold on the largest window and
/// did not already saturate on the smallest; in that case the witness
/// maximizing M(x0) - M(x0 - N) is attached.
inline MizohataReport classifyCondition(const CoefficientSet& coeffs, double t,
                                        const std::vector<double>& windowHalfWidths,
                                        double threshold = 10.0, double sampleDensity = 16.0) {
    if (windowHalfWidths.size() < 2)
        throw ValidationError("classify_condition: need at least two nested windows");
    MizohataReport rep;
    rep.t = t;
    rep.windowHalfWidths = windowHalfWidths;
    for (double W : windowHalfWidths) {
        SpatialGrid g(W, detail::evenGridCount(W, sampleDensity));
        std::vector<double> M = mizohataIntegral(coeffs, t, g);
        double sup = 0.0;
        for (double v : M) sup = std::max(sup, std::abs(v));
        rep.supAbsPerWindow.push_back(sup);
        if (W == windowHalfWidths.back()) {
            rep.tableGrid = g;
            rep.table = M;
        }
    }
    rep.supAbs = rep.supAbsPerWindow.back();
    const bool growing = rep.supAbs > threshold && rep.supAbs > rep.supAbsPerWindow.front();
    rep.trend = growing ? MizohataReport::Trend::growing : MizohataReport::Trend::bounded;
    if (growing) rep.witness = detail::bestIncrement(rep.table, rep.tableGrid);
    return rep;
}

struct DerivativeCheckEntry {
    std::string name;
    double maxMismatch = 0.0;
};

struct DerivativeCheckReport {
    std::vector<DerivativeCheckEntry> entries;
    double worst = 0.0;
    bool pass = true;
};

/// Compare every supplied derivative evaluator against centered finite
/// differences of its parent. Guards user-supplied analytic derivatives
/// before the gauge and energy identities consume them.
inline DerivativeCheckReport validateDerivatives(const CoefficientSet& coeffs, const Window& window,
                                                 double tolerance = 1e-4, bool throwOnFail = true) {
    DerivativeCheckReport rep;
    const double span = window.xMax - window.xMin;
    const double hx = std::max(1e-5, span * 1e-6);
    const std::size_t samples = 257;

    auto fdX = [hx](const Evaluator& f, double t, double x) {
        return (f(t, x - 2 * hx) - 8.0 * f(t, x - hx) + 8.0 * f(t, x + hx) - f(t, x + 2 * hx)) / (12.0 * hx);
    };
    auto fdT = [](const Evaluator& f, double t, double x) {
        const double ht = 1e-5;
        return (f(t - 2 * ht, x) - 8.0 * f(t - ht, x) + 8.0 * f(t + ht, x) - f(t + 2 * ht, x)) / (12.0 * ht);
    };

    auto check = [&](const std::string& name, const Evaluator& parent, const Evaluator& deriv, bool inTime) {
        double scale = 1.0, worst = 0.0;
        for (std::size_t i = 0; i < samples; ++i) {
            double x = window.xMin + span * static_cast<double>(i) / static_cast<double>(samples - 1);
            double t = window.tMin;
            double ref = inTime ? fdT(parent, t, x) : fdX(parent, t, x);
            scale = std::max(scale, std::abs(ref));
            worst = std::max(worst, std::abs(ref - deriv(t, x)));
        }
        rep.entries.push_back({name, worst / scale});
        rep.worst = std::max(rep.worst, worst / scale);
    };

    check("dx a3", coeffs.a3, coeffs.dxA3, false);
    check("dx2 a3", coeffs.dxA3, coeffs.dx2A3, false);
    check("dx3 a3", coeffs.dx2A3, coeffs.dx3A3, false);
    check("dx a2", coeffs.a2, coeffs.dxA2, false);
    check("dx2 a2", coeffs.dxA2, coeffs.dx2A2, false);
    check("dx a1", coeffs.a1, coeffs.dxA1, false);
    if (coeffs.timeDependent) {
        check("dt a3", coeffs.a3, coeffs.dtA3, true);
        check("dt a2", coeffs.a2, coeffs.dtA2, true);
    }
    rep.pass = rep.worst <= tolerance;
    if (!rep.pass && throwOnFail) {
        std::string bad;
        for (const auto& e : rep.entries)
            if (e.maxMismatch > tolerance) bad += (bad.empty() ? "" : ", ") + e.name;
        throw NumericalError("inconsistent derivative evaluators: " + bad);
    }
    return rep;
}

/// Wrap value evaluators with finite-difference derivatives. The fallback
/// passes validate_derivatives by construction; analytic derivatives are
/// still preferred wherever the closed forms are known.
inline CoefficientSet withFiniteDifferenceDerivatives(Evaluator a3, Evaluator a2, Evaluator a1, Evaluator a0,
                                                      bool timeDependent = false, const std::string& label = "fd") {
    const double hx = 1e-4;
    auto d1 = [hx](Evaluator f) {
        return [f, hx](double t, double x) {
            return (f(t, x - 2 * hx) - 8.0 * f(t, x - hx) + 8.0 * f(t, x + hx) - f(t, x + 2 * hx)) / (12.0 * hx);
        };
    };
    CoefficientSet c;
    c.a3 = a3; c.a2 = a2; c.a1 = a1; c.a0 = a0;
    c.dxA3 = d1(a3);
    c.dx2A3 = d1(c.dxA3);
    c.dx3A3 = d1(c.dx2A3);
    c.dxA2 = d1(a2);
    c.dx2A2 = d1(c.dxA2);
    c.dxA1 = d1(a1);
    if (timeDependent) {
        auto dt = [](Evaluator f) {
            const double ht = 1e-5;
            return [f, ht](double t, double x) {
                return (f(t - 2 * ht, x) - 8.0 * f(t - ht, x) + 8.0 * f(t + ht, x) - f(t + 2 * ht, x)) / (12.0 * ht);
            };
        };
        c.dtA3 = dt(a3);
        c.dtA2 = dt(a2);
    }
    c.timeDependent = timeDependent;
    c.dispersionSign = a3(0.0, 0.0) >= 0.0 ? +1 : -1;
    c.label = label;
    return c;
}

}  // namespace kdvlab
