#pragma once

#include "pomdpv/mdp_check.hpp"
#include "pomdpv/model.hpp"

#include <chrono>
#include <functional>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

namespace pomdpv {

template<typename ValueType>
struct Belief {
    ObsId obs = 0;
    std::vector<StateId> support;
    std::vector<ValueType> probs;

    std::size_t size() const { return support.size(); }
    bool isDirac() const { return support.size() == 1; }
    ValueType prob(StateId s) const;

    bool operator==(Belief const& other) const = default;
};

using BeliefId = std::uint32_t;
constexpr BeliefId kNoBelief = static_cast<BeliefId>(-1);

template<typename ValueType>
Belief<ValueType> diracBelief(Pomdp<ValueType> const& pomdp, StateId s);

template<typename ValueType>
Belief<ValueType> initialBelief(Pomdp<ValueType> const& pomdp);

// Builds a belief from (state, probability) pairs; validates and sorts.
template<typename ValueType>
Belief<ValueType> makeBelief(Pomdp<ValueType> const& pomdp, std::vector<Entry<ValueType>> entries);

// True if every support state is in the mask.
template<typename ValueType>
bool inside(Belief<ValueType> const& b, std::vector<bool> const& mask);

// Canonical interning. Exact mode compares components exactly; float mode keys
// on components rounded to 1e-9.
template<typename ValueType>
class BeliefStore {
public:
    // Returns the id and whether the belief was new.
    std::pair<BeliefId, bool> intern(Belief<ValueType> const& b);
    std::optional<BeliefId> find(Belief<ValueType> const& b) const;
    Belief<ValueType> const& get(BeliefId id) const { return beliefs_[id]; }
    std::size_t size() const { return beliefs_.size(); }
    std::size_t countFor(ObsId z) const { return z < perObs_.size() ? perObs_[z] : 0; }

private:
    struct Key {
        ObsId obs;
        std::vector<StateId> support;
        std::vector<ValueType> exact;
        std::vector<std::int64_t> rounded;
        bool operator==(Key const& other) const = default;
    };
    struct KeyHash {
        std::size_t operator()(Key const& k) const;
    };
    static Key keyOf(Belief<ValueType> const& b);

    std::vector<Belief<ValueType>> beliefs_;
    std::unordered_map<Key, BeliefId, KeyHash> index_;
    std::vector<std::size_t> perObs_;
};

template<typename ValueType>
ValueType obsProbability(Pomdp<ValueType> const& pomdp, Belief<ValueType> const& b, ActionId action, ObsId z);

// Throws std::domain_error if the observation has probability zero.
template<typename ValueType>
Belief<ValueType> nextBelief(Pomdp<ValueType> const& pomdp, Belief<ValueType> const& b, ActionId action, ObsId z);

template<typename ValueType>
struct BeliefSuccessor {
    Belief<ValueType> belief;
    ValueType prob;
};

// One entry per observation with positive probability, in ascending observation order.
template<typename ValueType>
std::vector<BeliefSuccessor<ValueType>> beliefSuccessors(Pomdp<ValueType> const& pomdp, Belief<ValueType> const& b,
                                                         ActionId action);

// Same, interned into the store.
template<typename ValueType>
std::vector<std::pair<BeliefId, ValueType>> beliefSuccessors(Pomdp<ValueType> const& pomdp,
                                                             Belief<ValueType> const& b, ActionId action,
                                                             BeliefStore<ValueType>& store);

// Expected immediate reward of an action in a belief.
template<typename ValueType>
ValueType beliefReward(Specification<ValueType> const& spec, Belief<ValueType> const& b, ActionId action);

struct ExplorationBudget {
    unsigned step = 1;
    // 2^{step-1} * |S| * largest observation class
    template<typename ValueType>
    std::size_t maxStates(Pomdp<ValueType> const& pomdp) const {
        return (std::size_t(1) << (step - 1)) * pomdp.numStates() * pomdp.maxClassSize();
    }
};

// A value that may be +infinity (expected rewards).
template<typename ValueType>
struct Extended {
    ValueType value{0};
    bool infinite = false;
};

enum class CutoffMode { ToSink, ToTarget, MdpBound, PolicyBound };

template<typename ValueType>
using BeliefBound = std::function<Extended<ValueType>(Belief<ValueType> const&)>;

// Explicit fragment of the belief MDP. States 0..k-1 are beliefs in BFS order;
// the three sinks follow.
template<typename ValueType>
struct BeliefExploration {
    SparseMdp<ValueType> mdp;
    BeliefStore<ValueType> store;
    std::vector<BeliefId> beliefOf;
    std::vector<BeliefId> frontier;
    bool complete = false;
    std::size_t expanded = 0;
    StateId targetSink = 0;
    StateId zeroSink = 0;
    StateId infinitySink = 0;
};

struct ExploreOptions {
    std::size_t maxBeliefs = 1;
    CutoffMode cutoff = CutoffMode::ToSink;
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

// The problem is expected to be prepared (target and avoid states absorbing and
// observable). For MdpBound and PolicyBound, `bound` values frontier beliefs.
template<typename ValueType>
BeliefExploration<ValueType> exploreBeliefMdp(Problem<ValueType> const& problem, ExploreOptions const& options,
                                              BeliefBound<ValueType> const& bound = {});

template<typename ValueType>
ValueResult<ValueType> checkExploration(BeliefExploration<ValueType> const& exploration,
                                        Specification<ValueType> const& spec, double precision = 1e-6);

enum class FiniteVerdict { Finite, Unknown };

// Sufficient: every cycle of the underlying graph runs through states alone in
// their observation class, or is a self-loop of an absorbing state.
template<typename ValueType>
FiniteVerdict finiteBeliefCheck(Pomdp<ValueType> const& pomdp);

// One line per transition: `from action to prob`.
template<typename ValueType>
void writeGraph(std::ostream& out, SparseMdp<ValueType> const& mdp, std::vector<std::string> const& actionNames);

}  // namespace pomdpv
