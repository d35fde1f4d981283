#pragma once

#include "pomdpv/model.hpp"

#include <cstddef>
#include <vector>

namespace pomdpv {

// Row-grouped sparse MDP. Row r of state s lies in [groupStart[s], groupStart[s+1]).
template<typename ValueType>
struct SparseMdp {
    std::vector<std::size_t> groupStart{0};
    std::vector<std::size_t> rowStart{0};
    std::vector<StateId> columns;
    std::vector<ValueType> values;
    std::vector<ActionId> rowAction;
    // One entry per row, or empty when the model has no rewards.
    std::vector<ValueType> rowReward;
    StateId initial = 0;
    std::vector<bool> target;
    std::vector<bool> avoid;

    std::size_t numStates() const { return groupStart.size() - 1; }
    std::size_t numRows() const { return rowStart.size() - 1; }
    std::size_t numEntries() const { return columns.size(); }
    bool hasRewards() const { return !rowReward.empty(); }
    ValueType reward(std::size_t row) const { return rowReward.empty() ? ValueType(0) : rowReward[row]; }
};

template<typename ValueType>
class SparseMdpBuilder {
public:
    explicit SparseMdpBuilder(bool withRewards = false) : withRewards_(withRewards) {}

    StateId newState();
    // Entries may be unsorted and contain duplicates.
    void addRow(ActionId action, std::vector<Entry<ValueType>> entries, ValueType reward = ValueType(0));
    std::size_t currentStates() const { return mdp_.groupStart.size() - 1; }
    SparseMdp<ValueType> build(StateId initial, std::vector<bool> target, std::vector<bool> avoid = {});

private:
    bool withRewards_;
    SparseMdp<ValueType> mdp_;
};

// The underlying MDP of a POMDP with the specification's labels and rewards.
template<typename ValueType>
SparseMdp<ValueType> toSparse(Pomdp<ValueType> const& pomdp, Specification<ValueType> const& spec);

enum class CheckKind { Reachability, TotalReward };

inline CheckKind checkKindOf(ObjectiveKind k) {
    return k == ObjectiveKind::TotalReward ? CheckKind::TotalReward : CheckKind::Reachability;
}

enum class PrecisionScope { Initial, AllStates };

struct CheckOptions {
    double precision = 1e-6;
    PrecisionScope scope = PrecisionScope::Initial;
    std::size_t maxSweeps = 2000000;
};

template<typename ValueType>
struct ValueResult {
    std::vector<ValueType> lower;
    std::vector<ValueType> upper;
    // Expected reward diverges; lower/upper hold 0 there.
    std::vector<bool> infinite;
    std::size_t iterations = 0;
    double gap = 0.0;
    bool converged = true;
};

// Sound bounds on the optimal value per state. Float mode runs interval value
// iteration; exact mode runs policy iteration with exact linear solves.
template<typename ValueType>
ValueResult<ValueType> check(SparseMdp<ValueType> const& mdp, CheckKind kind, Direction direction,
                             CheckOptions const& options = {});

// Per state, the global row indices whose bound-side action value is within rho of the state value.
template<typename ValueType>
std::vector<std::vector<std::size_t>> epsilonOptimalActions(SparseMdp<ValueType> const& mdp,
                                                            ValueResult<ValueType> const& result, Direction direction,
                                                            double rho);

// Forward closure from the initial state along the given rows. States with an
// empty row set contribute no successors.
template<typename ValueType>
std::vector<bool> reachableUnder(SparseMdp<ValueType> const& mdp, std::vector<std::vector<std::size_t>> const& rows);

template<typename ValueType>
ValueResult<ValueType> evaluateMarkovChain(SparseMdp<ValueType> const& chain, CheckKind kind,
                                           double precision = 1e-6);

namespace graph {

// Max-probability zero states: no path to target avoiding avoid states.
template<typename ValueType>
std::vector<bool> prob0E(SparseMdp<ValueType> const& mdp);

// Min-probability zero states: some policy never reaches target.
template<typename ValueType>
std::vector<bool> prob0A(SparseMdp<ValueType> const& mdp);

// States reaching target almost surely under every policy.
template<typename ValueType>
std::vector<bool> prob1A(SparseMdp<ValueType> const& mdp);

// States reaching target almost surely under some policy.
template<typename ValueType>
std::vector<bool> prob1E(SparseMdp<ValueType> const& mdp);

struct EndComponent {
    std::vector<StateId> states;
};

// Maximal end components among `states`, using only rows accepted by `rowAllowed`
// whose successors stay inside the component.
template<typename ValueType, typename RowFilter>
std::vector<EndComponent> maximalEndComponents(SparseMdp<ValueType> const& mdp, std::vector<bool> const& states,
                                               RowFilter rowAllowed);

}  // namespace graph

}  // namespace pomdpv

#include "pomdpv/detail/mec.hpp"
