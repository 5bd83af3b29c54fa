#pragma once

// Configured experiment runner behind the CLI: builds presets, grids and
// initial data from an ExperimentConfig, executes one experiment kind and
// writes machine-readable artifacts (report.json, norms.csv, snapshots).
//
// Exit code contract: 0 success, 2 validation error, 3 numerical abort,
// 4 experiment verdict failed. Reports are byte-deterministic for a fixed
// config and seed (no timestamps, no parallel reductions).

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kdvlab/config.hpp"
#include "kdvlab/coefficients.hpp"
#include "kdvlab/energy.hpp"
#include "kdvlab/gauge.hpp"
#include "kdvlab/grid.hpp"
#include "kdvlab/presets.hpp"
#include "kdvlab/random_fields.hpp"
#include "kdvlab/solver.hpp"
#include "kdvlab/transform.hpp"
#include "kdvlab/wavepacket.hpp"

namespace kdvlab {

using Json = nlohmann::ordered_json;

struct ExperimentOutcome {
    int exitCode = 0;
    Json report;
    std::string summary;
};

namespace runner {

inline CoefficientSet coefficientsFromConfig(const ExperimentConfig& cfg) {
    std::string preset = cfg.requireString("preset");
    PresetParams params;
    const std::string prefix = "preset.";
    for (const auto& [k, v] : cfg.raw()) {
        (void)v;
        if (k.rfind(prefix, 0) == 0) params[k.substr(prefix.size())] = cfg.requireDouble(k);
    }
    return makePreset(preset, params);
}

inline SpatialGrid gridFromConfig(const ExperimentConfig& cfg) {
    double L = cfg.requireDouble("grid.L");
    long n = cfg.getInt("grid.n", 2048);
    if (n < 16) throw ValidationError("config: grid.n must be >= 16");
    return SpatialGrid(L, static_cast<std::size_t>(n));
}

inline SolveConfig solveConfigFromConfig(const ExperimentConfig& cfg) {
    SolveConfig sc;
    sc.dt = cfg.getDouble("solve.dt", 1e-3);
    sc.horizon = cfg.getDouble("solve.T", 1.0);
    sc.recordEvery = static_cast<std::size_t>(cfg.getInt("solve.record_every", 10));
    sc.boundaryMargin = cfg.getDouble("solve.boundary_margin", 0.1);
    sc.smoothingDelta = cfg.getDouble("solve.delta", 0.75);
    sc.sobolevOrders = cfg.getDoubleList("solve.s", {1.0});
    sc.boundaryAbortThreshold = cfg.getDouble("solve.boundary_abort_threshold", 1e-4);
    sc.highModeFilter = cfg.getBool("solve.filter", false);
    sc.filterCutoff = cfg.getDouble("solve.filter_cutoff", 1.5);
    sc.validate();
    return sc;
}

inline Field initialDataFromConfig(const ExperimentConfig& cfg, const CoefficientSet& coeffs,
                                   const SpatialGrid& grid) {
    std::string kind = cfg.getString("data.kind", "bump");
    if (kind == "bump") {
        return bump(cfg.getDouble("data.eta", 1.0), cfg.getDouble("data.x0", 0.0), grid);
    }
    if (kind == "packet") {
        PacketSpec spec;
        spec.x0 = cfg.getDouble("packet.x0", 0.0);
        spec.xi = cfg.getDouble("packet.xi", 16.0);
        spec.travelDistance = cfg.getDouble("packet.N", 6.0);
        spec.eta = cfg.has("packet.eta")
                       ? cfg.requireDouble("packet.eta")
                       : packetEta(coeffs, spec.x0, spec.travelDistance, spec.xi,
                                   cfg.getDouble("packet.eta_tolerance", 0.1));
        return buildPacket(spec, coeffs, 0.0, grid, cfg.getDouble("solve.boundary_margin", 0.1));
    }
    if (kind == "random") {
        return randomSmoothField(grid, static_cast<std::uint64_t>(cfg.getInt("seed", 42)),
                                 cfg.getDouble("data.band_fraction", 0.1));
    }
    throw ValidationError("config: unknown data.kind '" + kind + "'");
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void writeNormsCsv(const Trajectory& traj, const std::vector<double>& sOrders, const std::string& path) {
    std::ofstream out(path);
    out << "t,l2";
    for (double s : sOrders) out << ",hs_" << s;
    out << ",smoothing,boundaryMass\n";
    for (const auto& r : traj.normHistory) {
        out << fmt(r.t) << "," << fmt(r.l2);
        for (double h : r.hs) out << "," << fmt(h);
        out << "," << fmt(r.smoothing) << "," << fmt(r.boundaryMass) << "\n";
    }
}

inline void writeSnapshots(const Trajectory& traj, const std::string& binPath, const std::string& jsonPath) {
    std::ofstream bin(binPath, std::ios::binary);
    Json side;
    if (!traj.snapshots.empty()) {
        side["L"] = traj.snapshots.front().grid.halfLength;
        side["n"] = traj.snapshots.front().grid.pointCount;
    }
    side["layout"] = "complex128-interleaved";
    Json times = Json::array();
    for (const auto& f : traj.snapshots) {
        times.push_back(f.time);
        for (const auto& v : f.values) {
            double re = v.real(), im = v.imag();
            bin.write(reinterpret_cast<const char*>(&re), sizeof(double));
            bin.write(reinterpret_cast<const char*>(&im), sizeof(double));
        }
    }
    side["times"] = times;
    std::ofstream js(jsonPath);
    js << side.dump(2) << "\n";
}

inline Json trajectorySummary(const Trajectory& traj) {
    Json j;
    j["initialNorm"] = traj.initialNorm;
    j["finalNorm"] = traj.normHistory.back().l2;
    j["growthRatio"] = traj.growthRatio;
    j["smoothingAccumulator"] = traj.smoothingAccumulator;
    j["boundaryContaminated"] = traj.boundaryContaminated;
    j["aborted"] = traj.aborted;
    if (traj.aborted) j["abortReason"] = traj.abortReason;
    return j;
}

// ---- experiment kinds ------------------------------------------------

inline ExperimentOutcome runSolve(const ExperimentConfig& cfg, const CoefficientSet& coeffs,
                                  const SpatialGrid& grid, const std::string& outDir) {
    SolveConfig sc = solveConfigFromConfig(cfg);
    Field u0 = initialDataFromConfig(cfg, coeffs, grid);
    Trajectory traj = solveIvp(u0, coeffs, sc);

    ExperimentOutcome out;
    out.report["results"] = trajectorySummary(traj);
    if (!traj.forced && !traj.aborted) {
        GrowthEstimate est = estimateGrowthConstant(traj);
        out.report["results"]["K"] = est.K;
        out.report["results"]["Cfit"] = est.Cfit;
    }
    writeNormsCsv(traj, sc.sobolevOrders, outDir + "/norms.csv");
    if (cfg.getBool("snapshots", false))
        writeSnapshots(traj, outDir + "/snapshots.bin", outDir + "/snapshots.json");
    out.exitCode = traj.aborted ? 3 : 0;
    out.summary = "solve: growthRatio = " + fmt(traj.growthRatio) + (traj.aborted ? " [ABORTED]" : "");
    out.report["verdict"] = !traj.aborted;
    return out;
}

inline ExperimentOutcome runEnergyCheck(const ExperimentConfig& cfg, const CoefficientSet& coeffs,
                                        const SpatialGrid& grid, const std::string& outDir) {
    (void)outDir;
    double tol = cfg.getDouble("energy.tolerance", 1e-4);
    auto seed = static_cast<std::uint64_t>(cfg.getInt("seed", 42));
    long count = cfg.getInt("energy.random_fields", 3);

    std::vector<Field> fields;
    fields.push_back(bump(cfg.getDouble("data.eta", 1.0), cfg.getDouble("data.x0", 0.0), grid));
    for (long i = 0; i < count; ++i) fields.push_back(randomSmoothField(grid, seed + static_cast<std::uint64_t>(i)));

    ExperimentOutcome out;
    Json cases = Json::array();
    double worst = 0.0;
    for (const auto& f : fields) {
        EnergyReport rep = energyIdentityCheck(f, coeffs, 0.0);
        Json c;
        c["lhs"] = rep.lhs;
        c["rhsGradTerm"] = rep.rhsGradTerm;
        c["rhsZeroTerm"] = rep.rhsZeroTerm;
        c["mismatch"] = rep.mismatch;
        cases.push_back(c);
        worst = std::max(worst, rep.mismatch);
    }
    out.report["results"]["cases"] = cases;
    out.report["results"]["maxMismatch"] = worst;
    bool pass = worst < tol;
    out.report["verdict"] = pass;
    out.exitCode = pass ? 0 : 4;
    out.summary = "energy-check: max mismatch = " + fmt(worst) + (pass ? "" : " [FAILED INVARIANT energy mismatch < " + fmt(tol) + "]");
    return out;
}

inline ExperimentOutcome runGaugeCheck(const ExperimentConfig& cfg, const CoefficientSet& coeffs,
                                       const SpatialGrid& grid, const std::string& outDir) {
    (void)outDir;
    double delta = cfg.getDouble("gauge.delta", 0.75);
    int cdelta = static_cast<int>(cfg.getInt("gauge.cdelta", 1));
    double tol = cfg.getDouble("gauge.tolerance", 1e-8);

    GaugeProfile g = buildGauge(coeffs, 0.0, grid, delta, cdelta);
    double residual = gaugeOdeResidual(g, coeffs);

    Field probe = bump(1.0, 0.0, grid);
    DissipationReport rep = gaugedDissipationRate(probe, coeffs, g, 0.0);
    double bracketDev = 0.0;
    for (std::size_t i = 0; i < grid.pointCount; ++i) {
        double target = -static_cast<double>(cdelta) * std::pow(jbracket(grid.point(i)), -2.0 * delta);
        bracketDev = std::max(bracketDev, std::abs(rep.bracket[i] - target));
    }
    Field back = applyGauge(applyGauge(probe, g, GaugeDirection::forward), g, GaugeDirection::inverse);
    double roundtrip = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i)
        roundtrip = std::max(roundtrip, std::abs(back.values[i] - probe.values[i]));

    ExperimentOutcome out;
    out.report["results"]["odeResidual"] = residual;
    out.report["results"]["bracketDeviation"] = bracketDev;
    out.report["results"]["gaugeRoundtrip"] = roundtrip;
    out.report["results"]["minPhi"] = g.minPhi;
    out.report["results"]["maxPhi"] = g.maxPhi;
    out.report["results"]["bZeroSup"] = rep.bZeroSup;
    bool pass = residual < tol && bracketDev < tol;
    out.report["verdict"] = pass;
    out.exitCode = pass ? 0 : 4;
    out.summary = "gauge-check: residual = " + fmt(residual) + ", bracket dev = " + fmt(bracketDev) +
                  (pass ? "" : " [FAILED INVARIANT gauge residual/bracket < " + fmt(tol) + "]");
    return out;
}

inline ExperimentOutcome runClassify(const ExperimentConfig& cfg, const CoefficientSet& coeffs,
                                     const SpatialGrid& grid, const std::string& outDir) {
    (void)grid; (void)outDir;
    std::vector<double> windows = cfg.getDoubleList("classify.windows", {10.0, 40.0});
    double threshold = cfg.getDouble("classify.threshold", 10.0);
    MizohataReport rep = classifyCondition(coeffs, cfg.getDouble("classify.t", 0.0), windows, threshold);

    ExperimentOutcome out;
    out.report["results"]["supAbs"] = rep.supAbs;
    out.report["results"]["supPerWindow"] = rep.supAbsPerWindow;
    out.report["results"]["trend"] = rep.trend == MizohataReport::Trend::growing ? "growing" : "bounded";
    out.report["results"]["note"] = "finite-window heuristic; growth beyond the sampled windows is not decidable";
    if (rep.witness) {
        out.report["results"]["witness"]["x0"] = rep.witness->x0;
        out.report["results"]["witness"]["N"] = rep.witness->travel;
        out.report["results"]["witness"]["value"] = rep.witness->value;
    }
    out.report["verdict"] = true;
    out.exitCode = 0;
    out.summary = std::string("classify: trend = ") +
                  (rep.trend == MizohataReport::Trend::growing ? "growing" : "bounded") +
                  ", sup|M| = " + fmt(rep.supAbs);
    return out;
}

inline ExperimentOutcome runReduceAndCompare(const ExperimentConfig& cfg, CoefficientSet coeffs,
                                             const SpatialGrid& grid, const std::string& outDir) {
    if (coeffs.a3(0.0, 0.0) < 0.0) coeffs = spaceReflection(coeffs);
    SolveConfig sc = solveConfigFromConfig(cfg);
    double tol = cfg.getDouble("reduce.tolerance", 1e-3);

    Field u0 = initialDataFromConfig(cfg, coeffs, grid);
    Trajectory trajX = solveIvp(u0, coeffs, sc);
    if (trajX.aborted) {
        ExperimentOutcome out;
        out.report["results"] = trajectorySummary(trajX);
        out.report["verdict"] = false;
        out.exitCode = 3;
        out.summary = "reduce-and-compare: x-route aborted";
        return out;
    }
    const Field& uT = trajX.snapshots.back();

    VariableChange vc0 = straighteningMap(coeffs, 0.0, grid);
    VariableChange vcT = straighteningMap(coeffs, sc.horizon, grid);
    Field vA = pushforward(uT, vcT);

    Field v0 = pushforward(u0, vc0);
    CoefficientSet reduced = reducedCoefficients(coeffs, 0.0, vc0);
    Trajectory trajY = solveIvp(v0, reduced, sc);
    if (trajY.aborted) {
        ExperimentOutcome out;
        out.report["results"]["abortReason"] = trajY.abortReason;
        out.report["verdict"] = false;
        out.exitCode = 3;
        out.summary = "reduce-and-compare: y-route aborted";
        return out;
    }
    const Field& vB = trajY.snapshots.back();

    double num = 0.0;
    {
        Field diff(vA.grid);
        for (std::size_t i = 0; i < diff.size(); ++i) diff.values[i] = vA.values[i] - vB.values[i];
        num = l2Norm(diff);
    }
    double relDiff = num / std::max(l2Norm(vA), 1e-300);

    double roundtrip = 0.0;
    {
        interp::MonotoneCubic xTab(vc0.yGrid.points(), vc0.xOfY);
        for (std::size_t i = 0; i < grid.pointCount; ++i) {
            double yv = vc0.yOfX[i];
            if (yv <= vc0.yGrid.point(0) || yv >= vc0.yGrid.point(grid.pointCount - 1)) continue;
            roundtrip = std::max(roundtrip, std::abs(xTab(yv) - grid.point(i)));
        }
    }

    // norm comparability ||u||^2 = int a3 |v|^2 dy within [lambda, Lambda]
    NondegeneracyBounds nd = checkNondegeneracy(coeffs, Window{-grid.halfLength, grid.halfLength, 0.0, 0.0});
    double uNormSq = std::pow(l2Norm(u0), 2.0);
    double vNormSq = std::pow(l2Norm(v0), 2.0);
    bool comparabilityOk = uNormSq >= nd.lambda * vNormSq * (1.0 - 1e-6) &&
                           uNormSq <= nd.Lambda * vNormSq * (1.0 + 1e-6);

    ExperimentOutcome out;
    out.report["results"]["relativeDifference"] = relDiff;
    out.report["results"]["straighteningRoundtrip"] = roundtrip;
    out.report["results"]["comparabilityOk"] = comparabilityOk;
    out.report["results"]["lambda"] = nd.lambda;
    out.report["results"]["Lambda"] = nd.Lambda;
    bool pass = relDiff <= tol && comparabilityOk;
    out.report["verdict"] = pass;
    out.exitCode = pass ? 0 : 4;
    out.summary = "reduce-and-compare: relative difference = " + fmt(relDiff) +
                  (pass ? "" : " [FAILED INVARIANT reduction equivalence <= " + fmt(tol) + "]");
    (void)outDir;
    return out;
}

inline ExperimentOutcome runIllposedness(const ExperimentConfig& cfg, const CoefficientSet& coeffs,
                                         const SpatialGrid& grid, const std::string& outDir) {
    int n = static_cast<int>(cfg.getInt("illposedness.n", 2));
    double searchHalfWidth = cfg.getDouble("illposedness.search_half_width", grid.halfLength);
    IllposednessDefaults defaults;
    defaults.dt = cfg.getDouble("solve.dt", 1e-3);
    defaults.xiInitial = cfg.getDouble("illposedness.xi", 16.0);
    defaults.etaTolerance = cfg.getDouble("packet.eta_tolerance", 0.1);
    defaults.boundaryMargin = cfg.getDouble("solve.boundary_margin", 0.1);

    IllposednessReport rep = illposednessExperiment(coeffs, n, searchHalfWidth, grid, defaults);

    ExperimentOutcome out;
    Json& r = out.report["results"];
    r["n"] = rep.n;
    r["witnessFound"] = rep.witnessFound;
    if (rep.witnessFound) {
        r["witness"]["x0"] = rep.witnessX0;
        r["witness"]["N"] = rep.witnessN;
        r["witness"]["predictedFactor"] = rep.predictedFactor;
        r["xi"] = rep.xi;
        r["eta"] = rep.eta;
        r["tn"] = rep.tn;
        r["observedInitialNorm"] = rep.observedInitialNorm;
        r["observedFinalNorm"] = rep.observedFinalNorm;
        r["predictedGrowth"] = rep.predictedGrowth;
        r["ratioLHS"] = rep.ratioLHS;
        r["ratioRHSBound"] = rep.ratioRHSBound;
        r["residualIntegral"] = rep.residualIntegral;
        r["gosLHS"] = rep.gosLHS;
        r["gosRHS"] = rep.gosRHS;
        r["gosSatisfied"] = rep.gosSatisfied;
        r["growthLawTimeDrift"] = rep.growthLawTimeDrift;
    }
    if (!rep.message.empty()) r["message"] = rep.message;
    r["valid"] = rep.valid;
    out.report["verdict"] = rep.verdict || !rep.witnessFound;

    if (!rep.valid) {
        out.exitCode = 3;
        out.summary = "illposedness: invalid (" + rep.message + ")";
    } else if (!rep.witnessFound) {
        out.exitCode = 0;
        out.summary = "illposedness: no witness found (condition looks bounded)";
    } else if (!rep.verdict) {
        out.exitCode = 4;
        out.summary = "illposedness: ratio " + fmt(rep.ratioLHS) + " [FAILED INVARIANT ratio >= min(n, predicted/2)]";
    } else {
        out.exitCode = 0;
        out.summary = "illposedness: ratio = " + fmt(rep.ratioLHS) + " vs predicted " + fmt(rep.predictedGrowth);
    }
    (void)outDir;
    return out;
}

}  // namespace runner

/// Run the experiment described by the config, writing artifacts to
/// outputDir. Exceptions are mapped onto the exit-code contract.
inline ExperimentOutcome runExperiment(const ExperimentConfig& cfg, const std::string& outputDir) {
    std::filesystem::create_directories(outputDir);
    ExperimentOutcome out;
    try {
        std::string kind = cfg.requireString("experiment");
        CoefficientSet coeffs = runner::coefficientsFromConfig(cfg);
        SpatialGrid grid = runner::gridFromConfig(cfg);

        if (kind == "solve") out = runner::runSolve(cfg, coeffs, grid, outputDir);
        else if (kind == "energy-check") out = runner::runEnergyCheck(cfg, coeffs, grid, outputDir);
        else if (kind == "gauge-check") out = runner::runGaugeCheck(cfg, coeffs, grid, outputDir);
        else if (kind == "classify") out = runner::runClassify(cfg, coeffs, grid, outputDir);
        else if (kind == "reduce-and-compare") out = runner::runReduceAndCompare(cfg, coeffs, grid, outputDir);
        else if (kind == "illposedness") out = runner::runIllposedness(cfg, coeffs, grid, outputDir);
        else throw ValidationError("config: unknown experiment kind '" + kind + "'");

        out.report["kind"] = kind;
    } catch (const ValidationError& e) {
        out.exitCode = 2;
        out.report["error"] = e.what();
        out.summary = std::string("validation error: ") + e.what();
    } catch (const NumericalError& e) {
        out.exitCode = 3;
        out.report["error"] = e.what();
        out.summary = std::string("numerical abort: ") + e.what();
    }

    Json cfgJson;
    for (const auto& [k, v] : cfg.raw()) cfgJson[k] = v;
    out.report["config"] = cfgJson;

    std::ofstream rep(outputDir + "/report.json");
    rep << out.report.dump(2) << "\n";
    return out;
}

}  // namespace kdvlab
