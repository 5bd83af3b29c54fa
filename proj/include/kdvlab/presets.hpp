#pragma once

// Named coefficient presets (constant, trigonometric, rational in <x>),
// each with analytic derivative evaluators and a note on which structural
// assumption it is designed to exhibit.

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kdvlab/coefficients.hpp"

namespace kdvlab {

struct PresetInfo {
    std::string name;
    std::string description;                       // which assumptions it exhibits
    std::map<std::string, double> defaults;        // parameter name -> default
};

using PresetParams = std::map<std::string, double>;

namespace detail {

inline double param(const PresetParams& p, const PresetInfo& info, const std::string& key) {
    auto it = p.find(key);
    if (it != p.end()) return it->second;
    return info.defaults.at(key);
}

}  // namespace detail

inline const std::vector<PresetInfo>& presetCatalog() {
    static const std::vector<PresetInfo> catalog = {
        {"airy", "a3 = c3, a2 = a1 = a0 = 0; satisfies (A1)+(A3) with M = 0", {{"c3", 1.0}}},
        {"anti-diffusion-constant", "a3 = 1, a2 = amp; violates (A3): M(x) = amp*x diverges, (A3N) witness family",
         {{"amp", 1.0}}},
        {"cosine-diffusion", "a3 = 1, a2 = amp*cos(freq*x); satisfies (A3): |M| <= amp/freq", {{"amp", 1.0}, {"freq", 1.0}}},
        {"variable-dispersion", "a3 = base + amp*sin(freq*x), a2 = diff; (A1) with lambda = base-amp",
         {{"base", 2.0}, {"amp", 1.0}, {"freq", 1.0}, {"diff", 0.0}}},
        {"rational-diffusion", "a3 = 1, a2 = amp*<x>^-2; satisfies (A3): M -> amp*atan", {{"amp", 1.0}}},
        {"log-divergent", "a3 = 1, a2 = amp*x/(1+x^2); violates (A3) slowly: M = (amp/2)*log(1+x^2)",
         {{"amp", 3.0}}},
        {"mixed", "a3 = 2+sin x, a2 = 0.5 cos x, a1 = 0.3 x<x>^-2, a0 = 0.2; general (A1)-(A3) smoke preset", {}},
    };
    return catalog;
}

inline const PresetInfo& presetInfo(const std::string& name) {
    for (const auto& p : presetCatalog())
        if (p.name == name) return p;
    throw ValidationError("unknown preset: " + name);
}

inline CoefficientSet makePreset(const std::string& name, const PresetParams& params = {}) {
    const PresetInfo& info = presetInfo(name);
    for (const auto& [k, v] : params) {
        (void)v;
        if (info.defaults.find(k) == info.defaults.end())
            throw ValidationError("preset '" + name + "' has no parameter '" + k + "'");
    }
    CoefficientSet c;
    c.label = name;
    c.timeDependent = false;

    if (name == "airy") {
        double c3 = detail::param(params, info, "c3");
        if (c3 == 0.0) throw ValidationError("airy: c3 must be nonzero");
        c.a3 = constantEvaluator(c3);
        c.dispersionSign = c3 > 0 ? +1 : -1;
    } else if (name == "anti-diffusion-constant") {
        double amp = detail::param(params, info, "amp");
        c.a2 = constantEvaluator(amp);
    } else if (name == "cosine-diffusion") {
        double amp = detail::param(params, info, "amp");
        double freq = detail::param(params, info, "freq");
        c.a2 = [amp, freq](double, double x) { return amp * std::cos(freq * x); };
        c.dxA2 = [amp, freq](double, double x) { return -amp * freq * std::sin(freq * x); };
        c.dx2A2 = [amp, freq](double, double x) { return -amp * freq * freq * std::cos(freq * x); };
    } else if (name == "variable-dispersion") {
        double base = detail::param(params, info, "base");
        double amp = detail::param(params, info, "amp");
        double freq = detail::param(params, info, "freq");
        double diff = detail::param(params, info, "diff");
        if (!(base - std::abs(amp) > 0.0))
            throw ValidationError("variable-dispersion: need base > |amp| for (A1)");
        c.a3 = [base, amp, freq](double, double x) { return base + amp * std::sin(freq * x); };
        c.dxA3 = [amp, freq](double, double x) { return amp * freq * std::cos(freq * x); };
        c.dx2A3 = [amp, freq](double, double x) { return -amp * freq * freq * std::sin(freq * x); };
        c.dx3A3 = [amp, freq](double, double x) { return -amp * freq * freq * freq * std::cos(freq * x); };
        c.a2 = constantEvaluator(diff);
    } else if (name == "rational-diffusion") {
        double amp = detail::param(params, info, "amp");
        c.a2 = [amp](double, double x) { return amp / (1.0 + x * x); };
        c.dxA2 = [amp](double, double x) {
            double d = 1.0 + x * x;
            return -2.0 * amp * x / (d * d);
        };
        c.dx2A2 = [amp](double, double x) {
            double d = 1.0 + x * x;
            return amp * (6.0 * x * x - 2.0) / (d * d * d);
        };
    } else if (name == "log-divergent") {
        double amp = detail::param(params, info, "amp");
        c.a2 = [amp](double, double x) { return amp * x / (1.0 + x * x); };
        c.dxA2 = [amp](double, double x) {
            double d = 1.0 + x * x;
            return amp * (1.0 - x * x) / (d * d);
        };
        c.dx2A2 = [amp](double, double x) {
            double d = 1.0 + x * x;
            return amp * 2.0 * x * (x * x - 3.0) / (d * d * d);
        };
    } else if (name == "mixed") {
        c.a3 = [](double, double x) { return 2.0 + std::sin(x); };
        c.dxA3 = [](double, double x) { return std::cos(x); };
        c.dx2A3 = [](double, double x) { return -std::sin(x); };
        c.dx3A3 = [](double, double x) { return -std::cos(x); };
        c.a2 = [](double, double x) { return 0.5 * std::cos(x); };
        c.dxA2 = [](double, double x) { return -0.5 * std::sin(x); };
        c.dx2A2 = [](double, double x) { return -0.5 * std::cos(x); };
        c.a1 = [](double, double x) { return 0.3 * x / (1.0 + x * x); };
        c.dxA1 = [](double, double x) {
            double d = 1.0 + x * x;
            return 0.3 * (1.0 - x * x) / (d * d);
        };
        c.a0 = constantEvaluator(0.2);
    }
    return c;
}

inline std::string listPresets() {
    std::ostringstream os;
    for (const auto& p : presetCatalog()) {
        os << p.name << "\n    " << p.description << "\n";
        if (!p.defaults.empty()) {
            os << "    parameters:";
            for (const auto& [k, v] : p.defaults) os << " " << k << "=" << v;
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace kdvlab
