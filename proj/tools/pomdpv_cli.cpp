#include "pomdpv/bench.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace pomdpv;

namespace {

struct RunArgs {
    std::string model;
    std::string mode = "refine";
    std::optional<std::uint64_t> resolution;
    std::string heuristic = "h0";
    std::optional<std::uint64_t> etaInit;
    std::optional<double> fRes, rhoZ, fZ, fStep, rhoGap, fGap, rhoSigma;
    std::optional<std::string> triangulation;
    double time = 60.0;
    std::optional<std::size_t> maxIters;
    double gap = 1e-4;
    bool exact = false;
    bool floatMode = false;
    bool strict = false;
    std::optional<std::string> threshold;
    std::string csv, log, exportAbstraction;
};

struct GenArgs {
    std::string family = "grid-avoid";
    GenParams params;
    std::uint64_t seed = 1;
    std::string out;
};

std::ofstream openOut(std::string const& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    return out;
}

int doRun(RunArgs const& a) {
    RunConfig c;
    c.mode = parseRunMode(a.mode);
    c.resolution = a.resolution;
    c.heuristic = heuristicPreset(a.heuristic);
    auto& h = c.heuristic;
    if (a.etaInit) h.etaInit = *a.etaInit;
    if (a.fRes) h.fRes = *a.fRes;
    if (a.rhoZ) h.rhoZ = *a.rhoZ;
    if (a.fZ) h.fZ = *a.fZ;
    if (a.fStep) h.fStep = *a.fStep;
    if (a.rhoGap) h.rhoGap = *a.rhoGap;
    if (a.fGap) h.fGap = *a.fGap;
    if (a.rhoSigma) h.rhoSigma = *a.rhoSigma;
    if (a.triangulation) {
        h.scheme = *a.triangulation == "dynamic" ? Scheme::Dynamic : Scheme::Static;
    }
    c.timeLimit = a.time;
    c.maxIterations = a.maxIters;
    c.gapTarget = a.gap;
    c.arithmetic = a.exact ? Arithmetic::Exact : Arithmetic::Float;
    c.threshold = a.threshold;
    c.cutoffStyle = a.strict ? CutoffStyle::Strict : CutoffStyle::Partial;

    auto out = run(c, a.model);
    auto const& r = out.record;
    std::cout << "model       " << r.model << '\n'
              << "mode        " << r.mode << " (" << r.heuristic << ", " << r.arithmetic << ")\n"
              << "lower       " << r.lower << '\n'
              << "upper       " << r.upper << '\n'
              << "iterations  " << r.iterations << '\n'
              << "states      " << r.states << '\n'
              << "seconds     " << r.seconds << '\n'
              << "status      " << r.status << '\n';
    if (!r.threshold.empty()) {
        std::cout << "threshold   " << *c.threshold << ' ' << r.threshold << '\n';
    }
    if (!a.csv.empty()) {
        bool fresh = !std::filesystem::exists(a.csv) || std::filesystem::file_size(a.csv) == 0;
        auto f = openOut(a.csv, std::ios::app);
        if (fresh) {
            f << csvHeader() << '\n';
        }
        writeCsvRow(f, r);
    }
    if (!a.log.empty()) {
        auto f = openOut(a.log);
        writeIterationLog(f, out.log);
    }
    if (!a.exportAbstraction.empty()) {
        if (out.abstraction.empty()) {
            std::cerr << "note: belief-explore mode builds no abstraction; nothing exported\n";
        } else {
            auto f = openOut(a.exportAbstraction);
            f << out.abstraction;
        }
    }
    return exitCodeFor(r);
}

int doGenerate(GenArgs const& g) {
    auto text = generateBenchmark(parseFamily(g.family), g.params, g.seed);
    if (g.out.empty()) {
        std::cout << text;
    } else {
        auto f = openOut(g.out);
        f << text;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sound bounds for POMDP reachability and total-reward objectives"};
    app.require_subcommand(1);

    RunArgs r;
    auto* runCmd = app.add_subcommand("run", "Bound the value of a model file");
    runCmd->add_option("model", r.model, "Model file")->required();
    runCmd->add_option("--mode", r.mode, "single-shot, refine or belief-explore")
        ->check(CLI::IsMember({"single-shot", "refine", "belief-explore"}));
    runCmd->add_option("--resolution", r.resolution, "Fixed resolution for single-shot mode");
    runCmd->add_option("--heuristic", r.heuristic, "Preset h0..h5")->check(CLI::IsMember(heuristicPresetNames()));
    runCmd->add_option("--eta-init", r.etaInit, "Initial resolution");
    runCmd->add_option("--f-res", r.fRes, "Resolution growth factor");
    runCmd->add_option("--rho-z", r.rhoZ, "Observation refinement threshold");
    runCmd->add_option("--f-z", r.fZ, "Observation threshold factor");
    runCmd->add_option("--f-step", r.fStep, "Step budget factor");
    runCmd->add_option("--rho-gap", r.rhoGap, "Gap threshold for exploration");
    runCmd->add_option("--f-gap", r.fGap, "Gap threshold factor");
    runCmd->add_option("--rho-sigma", r.rhoSigma, "Tolerance for near-optimal actions");
    runCmd->add_option("--triangulation", r.triangulation, "static or dynamic")
        ->check(CLI::IsMember({"static", "dynamic"}));
    runCmd->add_option("--time", r.time, "Time budget in seconds");
    runCmd->add_option("--max-iters", r.maxIters, "Iteration cap");
    runCmd->add_option("--gap", r.gap, "Relative gap target");
    auto* exactFlag = runCmd->add_flag("--exact", r.exact, "Rational arithmetic");
    runCmd->add_flag("--float", r.floatMode, "Floating-point arithmetic with sound brackets (default)")
        ->excludes(exactFlag);
    runCmd->add_flag("--strict-cutoffs", r.strict, "Route the whole row of a cut-off belief through its bound");
    runCmd->add_option("--threshold", r.threshold, "Query such as '<=0.7' or '>=0.65'");
    runCmd->add_option("--csv", r.csv, "Append a result row");
    runCmd->add_option("--log", r.log, "Write the per-iteration log");
    runCmd->add_option("--export-abstraction", r.exportAbstraction, "Write the final abstraction MDP");

    GenArgs g;
    auto* genCmd = app.add_subcommand("generate", "Write a benchmark model");
    genCmd->add_option("--family", g.family, "grid-avoid, maze-like, refuel-lite or rocks-lite")
        ->check(CLI::IsMember({"grid-avoid", "maze-like", "refuel-lite", "rocks-lite"}));
    genCmd->add_option("--width", g.params.width, "Grid width or line length");
    genCmd->add_option("--height", g.params.height, "Grid height");
    genCmd->add_option("--capacity", g.params.capacity, "Tank size (refuel-lite)");
    genCmd->add_option("--rocks", g.params.rocks, "Rock count (rocks-lite)");
    genCmd->add_option("--noise", g.params.noise, "Slip or sensor noise, e.g. 1/10");
    genCmd->add_option("--seed", g.seed, "Random seed");
    genCmd->add_option("-o,--out", g.out, "Output file (stdout if omitted)");

    auto* presetsCmd = app.add_subcommand("presets", "List heuristic presets");

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        if (runCmd->parsed()) {
            return doRun(r);
        }
        if (genCmd->parsed()) {
            return doGenerate(g);
        }
        if (presetsCmd->parsed()) {
            std::cout << "name eta_init f_res rho_z f_z f_step rho_gap f_gap rho_sigma\n";
            for (auto const& name : heuristicPresetNames()) {
                auto h = heuristicPreset(name);
                std::cout << name << ' ' << h.etaInit << ' ' << h.fRes << ' ' << h.rhoZ << ' ' << h.fZ << ' '
                          << h.fStep << ' ' << h.rhoGap << ' ' << h.fGap << ' ' << h.rhoSigma << '\n';
            }
        }
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
