#pragma once

#include "pomdpv/belief.hpp"
#include "pomdpv/mdp_check.hpp"
#include "pomdpv/triangulation.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pomdpv {

struct HeuristicConfig {
    std::string name = "h0";
    std::uint64_t etaInit = 3;
    double fRes = 2.0;
    double rhoZ = 0.1;
    double fZ = 0.1;
    double fStep = 4.0;
    double rhoGap = 0.1;
    double fGap = 0.25;
    double rhoSigma = 0.001;
    Scheme scheme = Scheme::Static;
};

// h0..h5; throws std::invalid_argument for unknown names.
HeuristicConfig heuristicPreset(std::string_view name);
std::vector<std::string> const& heuristicPresetNames();

// Sum of b(s) times the fully observable value of s: an upper bound on V(b) for
// maximisation, a lower bound for minimisation.
template<typename ValueType>
Extended<ValueType> eq1Bound(Belief<ValueType> const& b, StateValues<ValueType> const& values, Direction direction);

// Randomised memoryless observation-based policy: per observation, (action, weight) pairs.
template<typename ValueType>
struct ObservationPolicy {
    std::string name;
    std::vector<std::vector<std::pair<ActionId, ValueType>>> choice;

    bool operator==(ObservationPolicy const& other) const { return choice == other.choice; }
};

// Values of one policy per POMDP state, on the side that is guaranteed achievable
// (lower for max, upper for min).
template<typename ValueType>
struct PolicyValues {
    ObservationPolicy<ValueType> policy;
    std::vector<ValueType> value;
    std::vector<bool> infinite;
};

template<typename ValueType>
PolicyValues<ValueType> evaluateObservationPolicy(Problem<ValueType> const& problem,
                                                  ObservationPolicy<ValueType> const& policy, double precision = 1e-6);

template<typename ValueType>
struct LowerBoundPolicies {
    Direction direction = Direction::Max;
    std::vector<PolicyValues<ValueType>> candidates;
    std::size_t best = 0;

    // Best candidate value from belief b: sum of b(s) v(s), maximised (or minimised) over candidates.
    Extended<ValueType> at(Belief<ValueType> const& b) const;
    Extended<ValueType> initial(Pomdp<ValueType> const& pomdp) const;
};

// Candidates: uniform and weighted mixes of MDP rho-optimal actions, the majority
// choice, uniform over all actions, and "always alpha" for every action.
// mdpResult must come from check() on toSparse(problem).
template<typename ValueType>
LowerBoundPolicies<ValueType> guessLowerBoundPolicies(Problem<ValueType> const& problem,
                                                      ValueResult<ValueType> const& mdpResult, double rhoSigma,
                                                      double precision = 1e-6);

template<typename ValueType>
using NeighbourhoodFn = std::function<TriangulationResult<ValueType>(Belief<ValueType> const&)>;

// Hand-picked foundation: the first subset (by size, then index order) of same-observation
// points that holds b with positive weights and whose hull contains no other point.
// Throws ModelError when no such subset exists.
template<typename ValueType>
NeighbourhoodFn<ValueType> fixedFoundation(std::vector<Belief<ValueType>> points);

enum class StateStatus { Explored, CutOff, Target, Avoid, Sink };

template<typename ValueType>
struct AbstractionMdp {
    SparseMdp<ValueType> mdp;
    // Per state; sinks carry an empty belief.
    std::vector<Belief<ValueType>> beliefs;
    std::vector<StateStatus> status;
    StateId targetSink = 0;
    StateId zeroSink = 0;
    StateId infinitySink = 0;

    std::optional<StateId> find(Belief<ValueType> const& b) const;
    // Successor distribution of (state, action), or empty if the action has no row.
    std::vector<Entry<ValueType>> row(StateId s, ActionId a) const;
};

// One line per transition (`from action to prob`), then one `belief` line per state.
template<typename ValueType>
void writeAbstraction(std::ostream& out, AbstractionMdp<ValueType> const& abstraction,
                      std::vector<std::string> const& actionNames);

// Relative gap (U - L) / U; 1 when only U is infinite, 0 when U <= 0.
template<typename ValueType>
double relativeGap(Extended<ValueType> const& lower, Extended<ValueType> const& upper);

struct GateInputs {
    double gap = 1.0;
    std::size_t counter = 0;
    double rhoStep = 0.0;  // +inf allowed
    double rhoGap = 0.1;
    bool optReachable = true;
};

bool exploreGate(GateInputs const& in);
// resolutionChanged: a successor observation's resolution moved since (b, alpha) was wired.
bool rewireGate(GateInputs const& in, bool actionOptimal, bool resolutionChanged);

enum class CutoffPolicy { Never, Gap, Step, Combined };
enum class CutoffStyle { Partial, Strict };

struct DiscretizeOptions {
    CutoffPolicy cutoff = CutoffPolicy::Never;
    CutoffStyle style = CutoffStyle::Partial;
    double rhoGap = 0.1;
    double rhoStep = 0.0;  // 0 means unlimited
    std::size_t maxStates = 1000000;
    double precision = 1e-6;
};

// One breadth-first build of the discretised belief MDP with Eq.(1) and policy bounds
// seeding the cut-off decisions.
template<typename ValueType>
AbstractionMdp<ValueType> buildDiscretized(Problem<ValueType> const& problem,
                                           NeighbourhoodFn<ValueType> const& neighbourhood,
                                           DiscretizeOptions const& options = {});

enum class RunStatus { GapMet, ThresholdDecided, Timeout, IterationLimit, Exact };
std::string_view toString(RunStatus s);

struct IterationRecord {
    std::size_t iteration = 0;
    std::size_t states = 0;
    std::size_t explored = 0;
    std::size_t rewired = 0;
    std::size_t cutoffs = 0;
    // this iteration's bounds and the best-so-far envelope; +inf encodes infinity
    double lower = 0.0;
    double upper = 0.0;
    double bestLower = 0.0;
    double bestUpper = 0.0;
    std::vector<std::pair<ObsId, std::uint64_t>> refined;
    double seconds = 0.0;
};

template<typename ValueType>
struct BoundsLedger {
    enum class Source { None, Eq1, Policy, Exploration, Abstraction };
    // Indexed by belief id of `beliefs`.
    BeliefStore<ValueType> beliefs;
    std::vector<Extended<ValueType>> lower;
    std::vector<Extended<ValueType>> upper;
    std::vector<Source> lowerSource;
    std::vector<Source> upperSource;
    std::vector<std::size_t> lowerIteration;
    std::vector<std::size_t> upperIteration;
    // Best-so-far interval at the initial belief.
    Extended<ValueType> globalLower;
    Extended<ValueType> globalUpper;
};

template<typename ValueType>
struct RefinementOptions {
    HeuristicConfig heuristic;
    std::optional<double> timeLimit;  // seconds
    std::optional<std::size_t> maxIterations;
    double precision = 1e-6;
    double gapTarget = 1e-4;
    CutoffPolicy cutoff = CutoffPolicy::Combined;
    CutoffStyle style = CutoffStyle::Partial;
    bool extendFoundation = true;
    bool exploreLowerBounds = true;
    std::size_t maxStates = 2000000;
    // Replaces the Freudenthal foundation (no extension then).
    NeighbourhoodFn<ValueType> neighbourhood;
    // Called after every iteration.
    std::function<void(IterationRecord const&)> onIteration;
};

template<typename ValueType>
struct RefinementResult {
    Extended<ValueType> lower;
    Extended<ValueType> upper;
    RunStatus status = RunStatus::IterationLimit;
    // Set when the specification carries a threshold and the bounds decide it.
    std::optional<bool> thresholdHolds;
    std::size_t iterations = 0;
    std::vector<IterationRecord> log;
    // Exact per-iteration (lower, upper), parallel to log.
    std::vector<std::pair<Extended<ValueType>, Extended<ValueType>>> iterationBounds;
    AbstractionMdp<ValueType> abstraction;
    BoundsLedger<ValueType> ledger;
    Foundation foundation;
    double seconds = 0.0;
};

// The problem is prepared internally (target and avoid states made absorbing and observable).
template<typename ValueType>
RefinementResult<ValueType> refinementLoop(Problem<ValueType> const& problem,
                                           RefinementOptions<ValueType> const& options = {});

// Threshold decision from bounds: true if proven, false if refuted, nullopt if open.
template<typename ValueType>
std::optional<bool> decideThreshold(Threshold<ValueType> const& threshold, Extended<ValueType> const& lower,
                                    Extended<ValueType> const& upper);

}  // namespace pomdpv
