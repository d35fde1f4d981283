#pragma once

#include "pomdpv/numeric.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pomdpv {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using ObsId = std::uint32_t;

template<typename ValueType>
struct Entry {
    StateId state;
    ValueType prob;

    bool operator==(Entry const& other) const = default;
};

// Sorted by state, no zero entries.
template<typename ValueType>
using Distribution = std::vector<Entry<ValueType>>;

template<typename ValueType>
struct ActionRow {
    ActionId action;
    Distribution<ValueType> dist;

    bool operator==(ActionRow const& other) const = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, std::size_t column, std::string const& message);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template<typename ValueType>
class Mdp {
public:
    Mdp() = default;
    Mdp(std::size_t numStates, std::vector<std::string> actionNames, StateId initial);

    std::size_t numStates() const { return rows_.size(); }
    std::size_t numActions() const { return actionNames_.size(); }
    StateId initialState() const { return initial_; }
    void setInitialState(StateId s) { initial_ = s; }

    std::string const& actionName(ActionId a) const { return actionNames_.at(a); }
    std::vector<std::string> const& actionNames() const { return actionNames_; }
    std::optional<ActionId> actionByName(std::string_view name) const;

    // Rows of a state ordered by action id.
    std::vector<ActionRow<ValueType>> const& rows(StateId s) const { return rows_[s]; }
    Distribution<ValueType> const* row(StateId s, ActionId a) const;
    bool enabled(StateId s, ActionId a) const { return row(s, a) != nullptr; }

    // Replaces or inserts; the distribution is sorted and merged.
    void setRow(StateId s, ActionId a, Distribution<ValueType> dist);
    void clearRows(StateId s) { rows_[s].clear(); }

    // Throws ModelError on a violated invariant.
    void validate() const;

    bool operator==(Mdp const& other) const = default;

private:
    std::vector<std::string> actionNames_;
    std::vector<std::vector<ActionRow<ValueType>>> rows_;
    StateId initial_ = 0;
};

template<typename ValueType>
class Pomdp {
public:
    Pomdp() = default;
    Pomdp(Mdp<ValueType> mdp, std::vector<ObsId> obsOf, std::size_t numObservations);

    Mdp<ValueType> const& mdp() const { return mdp_; }
    std::size_t numStates() const { return mdp_.numStates(); }
    std::size_t numActions() const { return mdp_.numActions(); }
    std::size_t numObservations() const { return classes_.size(); }
    StateId initialState() const { return mdp_.initialState(); }

    ObsId observation(StateId s) const { return obsOf_[s]; }
    std::vector<ObsId> const& observations() const { return obsOf_; }
    std::vector<StateId> const& obsClass(ObsId z) const { return classes_[z]; }
    std::size_t maxClassSize() const;
    // Empty for observations without states.
    std::vector<ActionId> const& enabledActions(ObsId z) const { return enabled_[z]; }

    bool operator==(Pomdp const& other) const = default;

private:
    Mdp<ValueType> mdp_;
    std::vector<ObsId> obsOf_;
    std::vector<std::vector<StateId>> classes_;
    std::vector<std::vector<ActionId>> enabled_;
};

enum class ObjectiveKind { ReachProbability, ReachAvoidProbability, TotalReward };
enum class Direction { Max, Min };
enum class Comparison { LessEqual, GreaterEqual };

template<typename ValueType>
struct Threshold {
    Comparison comparison;
    ValueType value;

    bool operator==(Threshold const& other) const = default;
};

template<typename ValueType>
struct Specification {
    ObjectiveKind kind = ObjectiveKind::ReachProbability;
    Direction direction = Direction::Max;
    // Sorted; Bad states for probabilities, goal states for rewards.
    std::vector<StateId> target;
    std::vector<StateId> avoid;
    // rewards[s][a]; empty unless kind is TotalReward.
    std::vector<std::vector<ValueType>> rewards;
    std::optional<Threshold<ValueType>> threshold;

    bool isReward() const { return kind == ObjectiveKind::TotalReward; }
    ValueType reward(StateId s, ActionId a) const {
        return rewards.empty() ? ValueType(0) : rewards[s][a];
    }
    std::vector<bool> targetMask(std::size_t numStates) const;
    std::vector<bool> avoidMask(std::size_t numStates) const;

    bool operator==(Specification const& other) const = default;
};

template<typename ValueType>
struct Problem {
    Pomdp<ValueType> pomdp;
    Specification<ValueType> spec;

    bool operator==(Problem const& other) const = default;
};

// Throws ModelError.
template<typename ValueType>
void validateSpecification(Pomdp<ValueType> const& pomdp, Specification<ValueType> const& spec);

// Throws ParseError (syntax) or ModelError (semantics).
Problem<Rational> parseModelExact(std::string_view text);

template<typename ValueType>
Problem<ValueType> parseModel(std::string_view text);

template<typename ValueType>
Problem<ValueType> parseModelFile(std::string const& path);

template<typename ValueType>
std::string writeModel(Problem<ValueType> const& problem);

template<typename To, typename From>
Problem<To> convertProblem(Problem<From> const& problem);

// States s0..s6, smile (7), frown (8); actions a, b; Bad = {frown}.
Problem<Rational> makeRunningExample();

namespace running {
constexpr StateId s0 = 0, s1 = 1, s2 = 2, s3 = 3, s4 = 4, s5 = 5, s6 = 6, smile = 7, frown = 8;
constexpr ActionId a = 0, b = 1;
}  // namespace running

// Target and avoid states become absorbing and observationally distinguishable
// from the rest. Leaves models untouched when they already are.
template<typename ValueType>
Problem<ValueType> prepareProblem(Problem<ValueType> const& problem);

// Per-state optimal values of the fully observable model.
template<typename ValueType>
struct StateValues {
    std::vector<ValueType> lower;
    std::vector<ValueType> upper;
    std::vector<bool> infinite;

    // The side that over-approximates for max and under-approximates for min.
    std::vector<ValueType> const& optimistic(Direction d) const { return d == Direction::Max ? upper : lower; }
    std::vector<ValueType> const& pessimistic(Direction d) const { return d == Direction::Max ? lower : upper; }
};

template<typename ValueType>
StateValues<ValueType> underlyingMdpValues(Problem<ValueType> const& problem, double precision = 1e-6);

}  // namespace pomdpv
