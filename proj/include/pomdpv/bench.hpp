#pragma once

#include "pomdpv/abstraction.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pomdpv {

enum class RunMode { SingleShot, Refine, BeliefExplore };

std::string_view toString(RunMode m);
RunMode parseRunMode(std::string_view text);

struct RunConfig {
    RunMode mode = RunMode::Refine;
    // single-shot resolution
    std::optional<std::uint64_t> resolution;
    HeuristicConfig heuristic;
    double timeLimit = 60.0;
    std::optional<std::size_t> maxIterations;
    double gapTarget = 1e-4;
    Arithmetic arithmetic = Arithmetic::Float;
    // "<=0.7" or ">=0.65"; overrides the model's threshold
    std::optional<std::string> threshold;
    CutoffStyle cutoffStyle = CutoffStyle::Partial;
    double precision = 1e-6;
    std::size_t maxStates = 2000000;

    // Throws std::invalid_argument.
    void validate() const;
};

struct RunRecord {
    std::string model;
    std::string mode;
    std::string heuristic;
    std::string arithmetic;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t iterations = 0;
    std::size_t states = 0;
    double seconds = 0.0;
    std::string status;
    // "holds", "refuted" or "open"; empty without a threshold
    std::string threshold;

    bool operator==(RunRecord const&) const = default;
};

struct RunOutput {
    RunRecord record;
    std::vector<IterationRecord> log;
    // writeAbstraction text of the final abstraction (refine and single-shot)
    std::string abstraction;
};

Threshold<Rational> parseThreshold(std::string_view text);

RunOutput runProblem(RunConfig const& config, Problem<Rational> const& problem, std::string const& name);
// Throws std::runtime_error when the file cannot be read, ParseError/ModelError on bad input.
RunOutput run(RunConfig const& config, std::string const& modelPath);

// 0 normally, 2 when the bounds prove the threshold query.
int exitCodeFor(RunRecord const& record);

std::string const& csvHeader();
void writeCsvRow(std::ostream& out, RunRecord const& record);
void writeCsv(std::ostream& out, std::vector<RunRecord> const& records);
// Throws std::runtime_error on schema mismatch.
std::vector<RunRecord> parseCsv(std::istream& in);

void writeIterationLog(std::ostream& out, std::vector<IterationRecord> const& log);

enum class Family { GridAvoid, MazeLike, RefuelLite, RocksLite };

std::string_view toString(Family f);
Family parseFamily(std::string_view text);

struct GenParams {
    std::size_t width = 3;
    std::size_t height = 3;
    // refuel-lite tank size, rocks-lite rock count
    std::size_t capacity = 3;
    std::size_t rocks = 2;
    // slip / sensor noise as an exact decimal or fraction
    std::string noise = "1/10";
};

Problem<Rational> generateProblem(Family family, GenParams const& params, std::uint64_t seed);
std::string generateBenchmark(Family family, GenParams const& params, std::uint64_t seed);

}  // namespace pomdpv
