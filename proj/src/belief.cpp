#include "pomdpv/belief.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

namespace pomdpv {

template<typename ValueType>
ValueType Belief<ValueType>::prob(StateId s) const {
    auto it = std::lower_bound(support.begin(), support.end(), s);
    if (it == support.end() || *it != s) {
        return ValueType(0);
    }
    return probs[static_cast<std::size_t>(it - support.begin())];
}

template<typename ValueType>
Belief<ValueType> diracBelief(Pomdp<ValueType> const& pomdp, StateId s) {
    return Belief<ValueType>{pomdp.observation(s), {s}, {ValueType(1)}};
}

template<typename ValueType>
Belief<ValueType> initialBelief(Pomdp<ValueType> const& pomdp) {
    return diracBelief(pomdp, pomdp.initialState());
}

template<typename ValueType>
Belief<ValueType> makeBelief(Pomdp<ValueType> const& pomdp, std::vector<Entry<ValueType>> entries) {
    if constexpr (NumTraits<ValueType>::exact) {
        for (auto& e : entries) {
            e.prob.canonicalize();
        }
    }
    std::sort(entries.begin(), entries.end(), [](auto const& x, auto const& y) { return x.state < y.state; });
    Belief<ValueType> b;
    ValueType sum = 0;
    for (auto const& e : entries) {
        if (isZero(e.prob)) {
            continue;
        }
        if (e.state >= pomdp.numStates() || e.prob < 0) {
            throw std::invalid_argument("invalid belief entry");
        }
        if (!b.support.empty() && b.support.back() == e.state) {
            throw std::invalid_argument("duplicate belief entry");
        }
        if (!b.support.empty() && pomdp.observation(e.state) != b.obs) {
            throw std::invalid_argument("belief support spans several observations");
        }
        b.obs = pomdp.observation(e.state);
        b.support.push_back(e.state);
        b.probs.push_back(e.prob);
        sum += e.prob;
    }
    if (b.support.empty() || !isOne(sum)) {
        throw std::invalid_argument("belief does not sum to one");
    }
    return b;
}

template<typename ValueType>
bool inside(Belief<ValueType> const& b, std::vector<bool> const& mask) {
    for (StateId s : b.support) {
        if (!mask[s]) {
            return false;
        }
    }
    return true;
}

template<typename ValueType>
typename BeliefStore<ValueType>::Key BeliefStore<ValueType>::keyOf(Belief<ValueType> const& b) {
    Key k{b.obs, b.support, {}, {}};
    if constexpr (NumTraits<ValueType>::exact) {
        k.exact = b.probs;
    } else {
        k.rounded.reserve(b.probs.size());
        for (double p : b.probs) {
            k.rounded.push_back(static_cast<std::int64_t>(std::llround(p * 1e9)));
        }
    }
    return k;
}

template<typename ValueType>
std::size_t BeliefStore<ValueType>::KeyHash::operator()(Key const& k) const {
    std::size_t h = k.obs;
    for (StateId s : k.support) {
        hashCombine(h, s);
    }
    for (auto const& v : k.exact) {
        hashCombine(h, hashValue(v));
    }
    for (auto v : k.rounded) {
        hashCombine(h, std::hash<std::int64_t>{}(v));
    }
    return h;
}

template<typename ValueType>
std::pair<BeliefId, bool> BeliefStore<ValueType>::intern(Belief<ValueType> const& b) {
    auto [it, fresh] = index_.try_emplace(keyOf(b), static_cast<BeliefId>(beliefs_.size()));
    if (fresh) {
        beliefs_.push_back(b);
        if (perObs_.size() <= b.obs) {
            perObs_.resize(b.obs + 1, 0);
        }
        ++perObs_[b.obs];
    }
    return {it->second, fresh};
}

template<typename ValueType>
std::optional<BeliefId> BeliefStore<ValueType>::find(Belief<ValueType> const& b) const {
    auto it = index_.find(keyOf(b));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

template<typename ValueType>
ValueType obsProbability(Pomdp<ValueType> const& pomdp, Belief<ValueType> const& b, ActionId action, ObsId z) {
    ValueType total = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        auto const* row = pomdp.mdp().row(b.support[i], action);
        if (row == nullptr) {
            throw std::invalid_argument("action not enabled in belief");
        }
        for (auto const& e : *row) {
            if (pomdp.observation(e.state) == z) {
                total += b.probs[i] * e.prob;
            }
        }
    }
    return total;
}

namespace {

// Unnormalised successor mass grouped by observation, ascending.
template<typename ValueType>
std::vector<std::pair<ObsId, std::vector<Entry<ValueType>>>> successorMass(Pomdp<ValueType> const& pomdp,
                                                                          Belief<ValueType> const& b,
                                                                          ActionId action) {
    std::vector<std::pair<std::pair<ObsId, StateId>, ValueType>> flat;
    for (std::size_t i = 0; i < b.size(); ++i) {
        auto const* row = pomdp.mdp().row(b.support[i], action);
        if (row == nullptr) {
            throw std::invalid_argument("action not enabled in belief");
        }
        for (auto const& e : *row) {
            flat.push_back({{pomdp.observation(e.state), e.state}, b.probs[i] * e.prob});
        }
    }
    std::sort(flat.begin(), flat.end(), [](auto const& x, auto const& y) { return x.first < y.first; });
    std::vector<std::pair<ObsId, std::vector<Entry<ValueType>>>> groups;
    for (auto& [key, mass] : flat) {
        if (groups.empty() || groups.back().first != key.first) {
            groups.push_back({key.first, {}});
        }
        auto& entries = groups.back().second;
        if (!entries.empty() && entries.back().state == key.second) {
            entries.back().prob += mass;
        } else {
            entries.push_back({key.second, std::move(mass)});
        }
    }
    return groups;
}

template<typename ValueType>
Belief<ValueType> normalise(ObsId z, std::vector<Entry<ValueType>> const& entries, ValueType const& total) {
    Belief<ValueType> b;
    b.obs = z;
    for (auto const& e : entries) {
        if (isZero(e.prob)) {
            continue;
        }
        b.support.push_back(e.state);
        b.probs.push_back(e.prob / total);
    }
    return b;
}

}  // namespace

template<typename ValueType>
Belief<ValueType> nextBelief(Pomdp<ValueType> const& pomdp, Belief<ValueType> const& b, ActionId action, ObsId z) {
    for (auto const& [obs, entries] : successorMass(pomdp, b, action)) {
        if (obs != z) {
            continue;
        }
        ValueType total = 0;
        for (auto const& e : entries) {
            total += e.prob;
        }
        if (isZero(total)) {
            break;
        }
        return normalise(z, entries, total);
    }
    throw std::domain_error("observation has probability zero");
}

template<typename ValueType>
std::vector<BeliefSuccessor<ValueType>> beliefSuccessors(Pomdp<ValueType> const& pomdp, Belief<ValueType> const& b,
                                                         ActionId action) {
    std::vector<BeliefSuccessor<ValueType>> out;
    ValueType kept = 0;
    for (auto const& [z, entries] : successorMass(pomdp, b, action)) {
        ValueType total = 0;
        for (auto const& e : entries) {
            total += e.prob;
        }
        if (isZero(total)) {
            continue;
        }
        if constexpr (!NumTraits<ValueType>::exact) {
            if (total < NumTraits<double>::pruneThreshold) {
                continue;
            }
        }
        out.push_back({normalise(z, entries, total), total});
        kept += total;
    }
    if constexpr (!NumTraits<ValueType>::exact) {
        for (auto& s : out) {
            s.prob /= kept;
        }
    }
    return out;
}

template<typename ValueType>
std::vector<std::pair<BeliefId, ValueType>> beliefSuccessors(Pomdp<ValueType> const& pomdp,
                                                             Belief<ValueType> const& b, ActionId action,
                                                             BeliefStore<ValueType>& store) {
    std::vector<std::pair<BeliefId, ValueType>> out;
    for (auto& s : beliefSuccessors(pomdp, b, action)) {
        out.emplace_back(store.intern(s.belief).first, std::move(s.prob));
    }
    return out;
}

template<typename ValueType>
ValueType beliefReward(Specification<ValueType> const& spec, Belief<ValueType> const& b, ActionId action) {
    if (!spec.isReward()) {
        return ValueType(0);
    }
    ValueType r = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        r += b.probs[i] * spec.reward(b.support[i], action);
    }
    return r;
}

namespace {

template<typename ValueType>
struct PendingRow {
    ActionId action;
    std::vector<Entry<ValueType>> entries;
    ValueType reward{0};
};

// Row routing a bound value to the sinks.
template<typename ValueType>
PendingRow<ValueType> boundRow(ActionId action, Extended<ValueType> const& bound, bool reward, StateId targetSink,
                               StateId zeroSink, StateId infinitySink) {
    PendingRow<ValueType> row{action, {}, ValueType(0)};
    if (reward) {
        if (bound.infinite) {
            row.entries.push_back({infinitySink, ValueType(1)});
        } else {
            row.entries.push_back({targetSink, ValueType(1)});
            row.reward = bound.value;
        }
        return row;
    }
    ValueType u = bound.infinite ? ValueType(1) : bound.value;
    if (u > 1) {
        u = 1;
    }
    if (u < 0) {
        u = 0;
    }
    if (!isZero(u)) {
        row.entries.push_back({targetSink, u});
    }
    if (u < 1) {
        row.entries.push_back({zeroSink, ValueType(1) - u});
    }
    return row;
}

}  // namespace

template<typename ValueType>
BeliefExploration<ValueType> exploreBeliefMdp(Problem<ValueType> const& problem, ExploreOptions const& options,
                                              BeliefBound<ValueType> const& bound) {
    auto const& pomdp = problem.pomdp;
    auto const& spec = problem.spec;
    bool reward = spec.isReward();
    auto targetMask = spec.targetMask(pomdp.numStates());
    auto avoidMask = spec.avoidMask(pomdp.numStates());
    if ((options.cutoff == CutoffMode::MdpBound || options.cutoff == CutoffMode::PolicyBound) && !bound) {
        throw std::invalid_argument("cut-off mode needs a bound function");
    }

    BeliefExploration<ValueType> ex;
    std::vector<StateId> stateOfBelief;
    auto stateFor = [&](BeliefId id) -> StateId {
        if (stateOfBelief.size() <= id) {
            stateOfBelief.resize(id + 1, static_cast<StateId>(-1));
        }
        if (stateOfBelief[id] == static_cast<StateId>(-1)) {
            stateOfBelief[id] = static_cast<StateId>(ex.beliefOf.size());
            ex.beliefOf.push_back(id);
        }
        return stateOfBelief[id];
    };

    std::vector<std::vector<PendingRow<ValueType>>> rows;
    std::vector<bool> isTarget, isAvoid;
    // sink ids are patched once the belief count is known
    constexpr StateId kTargetSink = static_cast<StateId>(-2), kZeroSink = static_cast<StateId>(-3),
                      kInfSink = static_cast<StateId>(-4);

    std::deque<BeliefId> queue;
    BeliefId init = ex.store.intern(initialBelief(pomdp)).first;
    stateFor(init);
    queue.push_back(init);

    while (!queue.empty()) {
        BeliefId id = queue.front();
        queue.pop_front();
        StateId state = stateOfBelief[id];
        Belief<ValueType> const b = ex.store.get(id);
        if (rows.size() <= state) {
            rows.resize(state + 1);
            isTarget.resize(state + 1, false);
            isAvoid.resize(state + 1, false);
        }
        auto const& actions = pomdp.enabledActions(b.obs);
        if (inside(b, targetMask) || inside(b, avoidMask)) {
            isTarget[state] = inside(b, targetMask);
            isAvoid[state] = !isTarget[state];
            rows[state].push_back({actions.front(), {{state, ValueType(1)}}, ValueType(0)});
            continue;
        }
        bool cut = options.deadline && std::chrono::steady_clock::now() > *options.deadline;
        std::vector<std::vector<BeliefSuccessor<ValueType>>> succ;
        if (!cut) {
            std::vector<Belief<ValueType>> fresh;
            for (ActionId a : actions) {
                succ.push_back(beliefSuccessors(pomdp, b, a));
                for (auto const& s : succ.back()) {
                    if (!ex.store.find(s.belief) && std::find(fresh.begin(), fresh.end(), s.belief) == fresh.end()) {
                        fresh.push_back(s.belief);
                    }
                }
            }
            cut = ex.beliefOf.size() + fresh.size() > options.maxBeliefs;
        }
        if (cut) {
            ex.frontier.push_back(id);
            Extended<ValueType> value;
            switch (options.cutoff) {
                case CutoffMode::ToSink: value = {ValueType(0), false}; break;
                case CutoffMode::ToTarget: value = {ValueType(1), reward}; break;
                case CutoffMode::MdpBound:
                case CutoffMode::PolicyBound: value = bound(b); break;
            }
            rows[state].push_back(boundRow(actions.front(), value, reward, kTargetSink, kZeroSink, kInfSink));
            continue;
        }
        ++ex.expanded;
        for (std::size_t k = 0; k < actions.size(); ++k) {
            PendingRow<ValueType> row{actions[k], {}, beliefReward(spec, b, actions[k])};
            for (auto& s : succ[k]) {
                auto [sid, isNew] = ex.store.intern(s.belief);
                bool known = sid < stateOfBelief.size() && stateOfBelief[sid] != static_cast<StateId>(-1);
                StateId t = stateFor(sid);
                if (isNew || !known) {
                    queue.push_back(sid);
                }
                row.entries.push_back({t, s.prob});
            }
            rows[state].push_back(std::move(row));
        }
    }

    std::size_t k = ex.beliefOf.size();
    ex.targetSink = static_cast<StateId>(k);
    ex.zeroSink = static_cast<StateId>(k + 1);
    ex.infinitySink = static_cast<StateId>(k + 2);
    SparseMdpBuilder<ValueType> builder(reward);
    rows.resize(k);
    for (std::size_t s = 0; s < k; ++s) {
        builder.newState();
        for (auto& row : rows[s]) {
            for (auto& e : row.entries) {
                if (e.state == kTargetSink) {
                    e.state = ex.targetSink;
                } else if (e.state == kZeroSink) {
                    e.state = ex.zeroSink;
                } else if (e.state == kInfSink) {
                    e.state = ex.infinitySink;
                }
            }
            builder.addRow(row.action, std::move(row.entries), row.reward);
        }
    }
    for (StateId sink : {ex.targetSink, ex.zeroSink, ex.infinitySink}) {
        builder.newState();
        builder.addRow(0, {{sink, ValueType(1)}}, ValueType(0));
    }
    std::vector<bool> target(k + 3, false), avoid(k + 3, false);
    for (std::size_t s = 0; s < k; ++s) {
        target[s] = s < isTarget.size() && isTarget[s];
        avoid[s] = s < isAvoid.size() && isAvoid[s];
    }
    target[ex.targetSink] = true;
    ex.mdp = builder.build(0, std::move(target), std::move(avoid));
    ex.complete = ex.frontier.empty();
    return ex;
}

template<typename ValueType>
ValueResult<ValueType> checkExploration(BeliefExploration<ValueType> const& exploration,
                                        Specification<ValueType> const& spec, double precision) {
    CheckOptions options;
    options.precision = precision;
    return check(exploration.mdp, checkKindOf(spec.kind), spec.direction, options);
}

template<typename ValueType>
FiniteVerdict finiteBeliefCheck(Pomdp<ValueType> const& pomdp) {
    Specification<ValueType> spec;
    spec.target = {0};
    auto sparse = toSparse(pomdp, spec);
    std::vector<bool> active(sparse.numStates(), true), allowed(sparse.numRows(), true);
    std::vector<std::size_t> component;
    std::size_t count = graph::detail::sccs(sparse, active, allowed, component);
    std::vector<std::size_t> sizes(count, 0);
    for (auto c : component) {
        ++sizes[c];
    }
    for (StateId s = 0; s < pomdp.numStates(); ++s) {
        bool singleton = pomdp.obsClass(pomdp.observation(s)).size() == 1;
        if (singleton) {
            continue;
        }
        if (sizes[component[s]] > 1) {
            return FiniteVerdict::Unknown;
        }
        bool selfLoop = false, absorbing = true;
        for (auto const& r : pomdp.mdp().rows(s)) {
            for (auto const& e : r.dist) {
                selfLoop = selfLoop || e.state == s;
            }
            absorbing = absorbing && r.dist.size() == 1 && r.dist.front().state == s;
        }
        if (selfLoop && !absorbing) {
            return FiniteVerdict::Unknown;
        }
    }
    return FiniteVerdict::Finite;
}

template<typename ValueType>
void writeGraph(std::ostream& out, SparseMdp<ValueType> const& mdp, std::vector<std::string> const& actionNames) {
    for (StateId s = 0; s < mdp.numStates(); ++s) {
        for (std::size_t r = mdp.groupStart[s]; r < mdp.groupStart[s + 1]; ++r) {
            ActionId a = mdp.rowAction[r];
            std::string name = a < actionNames.size() ? actionNames[a] : std::to_string(a);
            for (std::size_t e = mdp.rowStart[r]; e < mdp.rowStart[r + 1]; ++e) {
                out << s << ' ' << name << ' ' << mdp.columns[e] << ' ' << toString(mdp.values[e]) << '\n';
            }
        }
    }
}

#define POMDPV_INSTANTIATE(V)                                                                                    \
    template struct Belief<V>;                                                                                   \
    template class BeliefStore<V>;                                                                               \
    template Belief<V> diracBelief(Pomdp<V> const&, StateId);                                                    \
    template Belief<V> initialBelief(Pomdp<V> const&);                                                           \
    template Belief<V> makeBelief(Pomdp<V> const&, std::vector<Entry<V>>);                                       \
    template bool inside(Belief<V> const&, std::vector<bool> const&);                                            \
    template V obsProbability(Pomdp<V> const&, Belief<V> const&, ActionId, ObsId);                               \
    template Belief<V> nextBelief(Pomdp<V> const&, Belief<V> const&, ActionId, ObsId);                           \
    template std::vector<BeliefSuccessor<V>> beliefSuccessors(Pomdp<V> const&, Belief<V> const&, ActionId);      \
    template std::vector<std::pair<BeliefId, V>> beliefSuccessors(Pomdp<V> const&, Belief<V> const&, ActionId, \
                                                                  BeliefStore<V>&);                              \
    template V beliefReward(Specification<V> const&, Belief<V> const&, ActionId);                                \
    template BeliefExploration<V> exploreBeliefMdp(Problem<V> const&, ExploreOptions const&,                     \
                                                   BeliefBound<V> const&);                                       \
    template ValueResult<V> checkExploration(BeliefExploration<V> const&, Specification<V> const&, double);      \
    template FiniteVerdict finiteBeliefCheck(Pomdp<V> const&);                                                   \
    template void writeGraph(std::ostream&, SparseMdp<V> const&, std::vector<std::string> const&);

POMDPV_INSTANTIATE(double)
POMDPV_INSTANTIATE(Rational)

#undef POMDPV_INSTANTIATE

}  // namespace pomdpv
