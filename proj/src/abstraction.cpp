#include "pomdpv/abstraction.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace pomdpv {

namespace {

using Clock = std::chrono::steady_clock;

template<typename V>
bool less(Extended<V> const& a, Extended<V> const& b) {
    if (a.infinite) {
        return false;
    }
    return b.infinite || a.value < b.value;
}

template<typename V>
Extended<V> minOf(Extended<V> const& a, Extended<V> const& b) {
    return less(b, a) ? b : a;
}

template<typename V>
Extended<V> maxOf(Extended<V> const& a, Extended<V> const& b) {
    return less(a, b) ? b : a;
}

template<typename V>
bool same(Extended<V> const& a, Extended<V> const& b) {
    return a.infinite == b.infinite && (a.infinite || a.value == b.value);
}

template<typename V>
double asDouble(Extended<V> const& e) {
    return e.infinite ? kInfinity : toDouble(e.value);
}

template<typename V>
Extended<V> sideOf(ValueResult<V> const& r, StateId s, bool upperSide) {
    if (r.infinite[s]) {
        return {V(0), true};
    }
    return {upperSide ? r.upper[s] : r.lower[s], false};
}

template<typename V>
struct PendingRow {
    ActionId action;
    std::vector<Entry<V>> entries;
    V reward{0};
};

struct Sinks {
    StateId target;
    StateId zero;
    StateId infinity;
};

// Routes `mass` of a row to the sinks so that it contributes mass * value.
template<typename V>
void routeToSinks(PendingRow<V>& row, V const& mass, Extended<V> const& value, bool reward, Sinks const& sinks) {
    if (reward) {
        if (value.infinite) {
            row.entries.push_back({sinks.infinity, mass});
        } else {
            row.entries.push_back({sinks.target, mass});
            row.reward += mass * value.value;
        }
        return;
    }
    V u = value.infinite ? V(1) : value.value;
    u = std::clamp(u, V(0), V(1));
    if (!isZero(u)) {
        row.entries.push_back({sinks.target, mass * u});
    }
    if (u < 1) {
        row.entries.push_back({sinks.zero, mass * (V(1) - u)});
    }
}

template<typename V>
V uniformWeight(std::size_t k) {
    return V(1) / V(static_cast<long>(k));
}

bool isEnabled(std::vector<ActionId> const& actions, ActionId a) {
    return std::find(actions.begin(), actions.end(), a) != actions.end();
}

}  // namespace

HeuristicConfig heuristicPreset(std::string_view name) {
    HeuristicConfig h;
    h.name = std::string(name);
    if (name == "h0") {
        return h;
    }
    if (name == "h1") {
        h.fRes = 1.4142135624;
    } else if (name == "h2") {
        h.fZ = 0.05;
    } else if (name == "h3") {
        h.fStep = 2.0;
    } else if (name == "h4") {
        h.fGap = 0.5;
    } else if (name == "h5") {
        h.rhoSigma = 0.5;
    } else {
        throw std::invalid_argument("unknown heuristic preset '" + std::string(name) + "'");
    }
    return h;
}

std::vector<std::string> const& heuristicPresetNames() {
    static std::vector<std::string> const names{"h0", "h1", "h2", "h3", "h4", "h5"};
    return names;
}

template<typename ValueType>
Extended<ValueType> eq1Bound(Belief<ValueType> const& b, StateValues<ValueType> const& values, Direction direction) {
    auto const& side = values.optimistic(direction);
    Extended<ValueType> out{ValueType(0), false};
    for (std::size_t i = 0; i < b.size(); ++i) {
        StateId s = b.support[i];
        if (values.infinite[s]) {
            return {ValueType(0), true};
        }
        out.value += b.probs[i] * side[s];
    }
    return out;
}

template<typename ValueType>
PolicyValues<ValueType> evaluateObservationPolicy(Problem<ValueType> const& problem,
                                                  ObservationPolicy<ValueType> const& policy, double precision) {
    auto const& pomdp = problem.pomdp;
    auto const& spec = problem.spec;
    std::size_t n = pomdp.numStates();
    SparseMdpBuilder<ValueType> builder(spec.isReward());
    for (StateId s = 0; s < n; ++s) {
        builder.newState();
        std::vector<Entry<ValueType>> entries;
        ValueType reward(0);
        for (auto const& [a, w] : policy.choice.at(pomdp.observation(s))) {
            auto const* row = pomdp.mdp().row(s, a);
            if (row == nullptr) {
                throw std::invalid_argument("policy picks a disabled action");
            }
            for (auto const& e : *row) {
                entries.push_back({e.state, w * e.prob});
            }
            reward += w * spec.reward(s, a);
        }
        builder.addRow(0, std::move(entries), reward);
    }
    auto chain = builder.build(pomdp.initialState(), spec.targetMask(n), spec.avoidMask(n));
    auto res = evaluateMarkovChain(chain, checkKindOf(spec.kind), precision);
    PolicyValues<ValueType> out;
    out.policy = policy;
    out.value = spec.direction == Direction::Max ? std::move(res.lower) : std::move(res.upper);
    out.infinite = std::move(res.infinite);
    return out;
}

template<typename ValueType>
Extended<ValueType> LowerBoundPolicies<ValueType>::at(Belief<ValueType> const& b) const {
    std::optional<Extended<ValueType>> best;
    for (auto const& c : candidates) {
        Extended<ValueType> v{ValueType(0), false};
        for (std::size_t i = 0; i < b.size() && !v.infinite; ++i) {
            if (c.infinite[b.support[i]]) {
                v = {ValueType(0), true};
            } else {
                v.value += b.probs[i] * c.value[b.support[i]];
            }
        }
        if (!best) {
            best = v;
        } else {
            best = direction == Direction::Max ? maxOf(*best, v) : minOf(*best, v);
        }
    }
    if (!best) {
        // no candidate: the trivial bound
        return direction == Direction::Max ? Extended<ValueType>{ValueType(0), false}
                                           : Extended<ValueType>{ValueType(0), true};
    }
    return *best;
}

template<typename ValueType>
Extended<ValueType> LowerBoundPolicies<ValueType>::initial(Pomdp<ValueType> const& pomdp) const {
    return at(initialBelief(pomdp));
}

template<typename ValueType>
LowerBoundPolicies<ValueType> guessLowerBoundPolicies(Problem<ValueType> const& problem,
                                                      ValueResult<ValueType> const& mdpResult, double rhoSigma,
                                                      double precision) {
    auto const& pomdp = problem.pomdp;
    Direction dir = problem.spec.direction;
    auto sparse = toSparse(pomdp, problem.spec);
    auto rows = epsilonOptimalActions(sparse, mdpResult, dir, rhoSigma);
    std::size_t numObs = pomdp.numObservations();
    std::vector<std::vector<std::size_t>> count(numObs, std::vector<std::size_t>(pomdp.numActions(), 0));
    for (StateId s = 0; s < pomdp.numStates(); ++s) {
        for (std::size_t r : rows[s]) {
            ++count[pomdp.observation(s)][sparse.rowAction[r]];
        }
    }
    auto majority = [&](ObsId z) {
        auto const& acts = pomdp.enabledActions(z);
        ActionId best = acts.front();
        for (ActionId a : acts) {
            if (count[z][a] > count[z][best]) {
                best = a;
            }
        }
        return best;
    };

    using Policy = ObservationPolicy<ValueType>;
    std::vector<Policy> policies;
    auto make = [&](std::string name, auto perObs) {
        Policy p{std::move(name), std::vector<std::vector<std::pair<ActionId, ValueType>>>(numObs)};
        for (ObsId z = 0; z < numObs; ++z) {
            if (!pomdp.enabledActions(z).empty()) {
                p.choice[z] = perObs(z);
            }
        }
        if (std::find(policies.begin(), policies.end(), p) == policies.end()) {
            policies.push_back(std::move(p));
        }
    };
    make("uniform-optimal", [&](ObsId z) {
        std::vector<ActionId> acts;
        for (ActionId a : pomdp.enabledActions(z)) {
            if (count[z][a] > 0) {
                acts.push_back(a);
            }
        }
        if (acts.empty()) {
            acts = pomdp.enabledActions(z);
        }
        std::vector<std::pair<ActionId, ValueType>> out;
        for (ActionId a : acts) {
            out.push_back({a, uniformWeight<ValueType>(acts.size())});
        }
        return out;
    });
    make("weighted-optimal", [&](ObsId z) {
        std::size_t total = 0;
        for (ActionId a : pomdp.enabledActions(z)) {
            total += count[z][a];
        }
        std::vector<std::pair<ActionId, ValueType>> out;
        for (ActionId a : pomdp.enabledActions(z)) {
            if (total == 0) {
                out.push_back({a, uniformWeight<ValueType>(pomdp.enabledActions(z).size())});
            } else if (count[z][a] > 0) {
                out.push_back({a, ValueType(static_cast<long>(count[z][a])) / ValueType(static_cast<long>(total))});
            }
        }
        return out;
    });
    make("majority", [&](ObsId z) {
        return std::vector<std::pair<ActionId, ValueType>>{{majority(z), ValueType(1)}};
    });
    make("uniform", [&](ObsId z) {
        std::vector<std::pair<ActionId, ValueType>> out;
        for (ActionId a : pomdp.enabledActions(z)) {
            out.push_back({a, uniformWeight<ValueType>(pomdp.enabledActions(z).size())});
        }
        return out;
    });
    for (ActionId a = 0; a < pomdp.numActions(); ++a) {
        make("always-" + pomdp.mdp().actionName(a), [&](ObsId z) {
            ActionId pick = isEnabled(pomdp.enabledActions(z), a) ? a : majority(z);
            return std::vector<std::pair<ActionId, ValueType>>{{pick, ValueType(1)}};
        });
    }

    LowerBoundPolicies<ValueType> out;
    out.direction = dir;
    StateId init = pomdp.initialState();
    for (auto const& p : policies) {
        out.candidates.push_back(evaluateObservationPolicy(problem, p, precision));
        auto const& c = out.candidates.back();
        auto const& b = out.candidates[out.best];
        Extended<ValueType> cv{c.value[init], c.infinite[init]}, bv{b.value[init], b.infinite[init]};
        if (dir == Direction::Max ? less(bv, cv) : less(cv, bv)) {
            out.best = out.candidates.size() - 1;
        }
    }
    return out;
}

template<typename ValueType>
NeighbourhoodFn<ValueType> fixedFoundation(std::vector<Belief<ValueType>> points) {
    auto shared = std::make_shared<std::vector<Belief<ValueType>> const>(std::move(points));
    return [shared](Belief<ValueType> const& b) {
        auto const& pts = *shared;
        std::vector<std::size_t> cand;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            auto const& p = pts[i];
            bool within = p.obs == b.obs && std::all_of(p.support.begin(), p.support.end(), [&](StateId s) {
                              return std::binary_search(b.support.begin(), b.support.end(), s);
                          });
            if (within) {
                cand.push_back(i);
            }
        }
        std::size_t maxSize = std::min(cand.size(), b.size());
        for (std::size_t k = 1; k <= maxSize; ++k) {
            // lexicographic k-subsets of cand
            std::vector<std::size_t> idx(k);
            for (std::size_t i = 0; i < k; ++i) {
                idx[i] = i;
            }
            while (true) {
                std::vector<Belief<ValueType>> subset;
                for (std::size_t i : idx) {
                    subset.push_back(pts[cand[i]]);
                }
                auto w = vertexWeightsSolve(b, subset);
                bool ok = w && std::all_of(w->begin(), w->end(), [](ValueType const& x) { return x > 0; });
                for (std::size_t j = 0; ok && j < cand.size(); ++j) {
                    if (std::find(idx.begin(), idx.end(), j) == idx.end() && vertexWeightsSolve(pts[cand[j]], subset)) {
                        ok = false;
                    }
                }
                if (ok) {
                    return TriangulationResult<ValueType>{std::move(subset), std::move(*w)};
                }
                std::size_t i = k;
                while (i > 0 && idx[i - 1] == cand.size() - k + i - 1) {
                    --i;
                }
                if (i == 0) {
                    break;
                }
                ++idx[i - 1];
                for (std::size_t j = i; j < k; ++j) {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        throw ModelError("foundation cannot represent a belief of observation " + std::to_string(b.obs));
    };
}

template<typename ValueType>
std::optional<StateId> AbstractionMdp<ValueType>::find(Belief<ValueType> const& b) const {
    for (std::size_t s = 0; s < beliefs.size(); ++s) {
        if (status[s] != StateStatus::Sink && beliefs[s] == b) {
            return static_cast<StateId>(s);
        }
    }
    return std::nullopt;
}

template<typename ValueType>
std::vector<Entry<ValueType>> AbstractionMdp<ValueType>::row(StateId s, ActionId a) const {
    for (std::size_t r = mdp.groupStart[s]; r < mdp.groupStart[s + 1]; ++r) {
        if (mdp.rowAction[r] == a) {
            std::vector<Entry<ValueType>> out;
            for (std::size_t k = mdp.rowStart[r]; k < mdp.rowStart[r + 1]; ++k) {
                out.push_back({mdp.columns[k], mdp.values[k]});
            }
            return out;
        }
    }
    return {};
}

template<typename ValueType>
void writeAbstraction(std::ostream& out, AbstractionMdp<ValueType> const& abstraction,
                      std::vector<std::string> const& actionNames) {
    writeGraph(out, abstraction.mdp, actionNames);
    static char const* const names[] = {"explored", "cutoff", "target", "avoid", "sink"};
    for (std::size_t s = 0; s < abstraction.beliefs.size(); ++s) {
        auto const& b = abstraction.beliefs[s];
        out << "belief " << s << ' ' << names[static_cast<int>(abstraction.status[s])];
        if (abstraction.status[s] != StateStatus::Sink) {
            out << " obs " << b.obs;
            for (std::size_t i = 0; i < b.size(); ++i) {
                out << ' ' << b.support[i] << ':' << toString(b.probs[i]);
            }
        }
        out << '\n';
    }
}

template<typename ValueType>
double relativeGap(Extended<ValueType> const& lower, Extended<ValueType> const& upper) {
    if (upper.infinite) {
        return lower.infinite ? 0.0 : 1.0;
    }
    if (lower.infinite) {
        return 0.0;
    }
    double u = toDouble(upper.value);
    double l = toDouble(lower.value);
    if (l >= u || u <= 0.0) {
        return 0.0;
    }
    return (u - l) / u;
}

bool exploreGate(GateInputs const& in) {
    return in.gap > in.rhoGap && static_cast<double>(in.counter) < in.rhoStep && in.optReachable;
}

bool rewireGate(GateInputs const& in, bool actionOptimal, bool resolutionChanged) {
    return exploreGate(in) && actionOptimal && resolutionChanged;
}

std::string_view toString(RunStatus s) {
    switch (s) {
        case RunStatus::GapMet: return "gap-met";
        case RunStatus::ThresholdDecided: return "threshold-decided";
        case RunStatus::Timeout: return "timeout";
        case RunStatus::IterationLimit: return "iteration-limit";
        case RunStatus::Exact: return "exact";
    }
    return "unknown";
}

template<typename ValueType>
std::optional<bool> decideThreshold(Threshold<ValueType> const& threshold, Extended<ValueType> const& lower,
                                    Extended<ValueType> const& upper) {
    Extended<ValueType> lambda{threshold.value, false};
    if (threshold.comparison == Comparison::LessEqual) {
        if (!less(lambda, upper)) {
            return true;
        }
        if (less(lambda, lower)) {
            return false;
        }
    } else {
        if (!less(lower, lambda)) {
            return true;
        }
        if (less(upper, lambda)) {
            return false;
        }
    }
    return std::nullopt;
}

namespace {

template<typename V>
struct Successor {
    ObsId obs = 0;
    V prob{0};
    BeliefId real = kNoBelief;
    bool onGrid = false;
    std::vector<BeliefId> vertices;
    std::vector<V> weights;
    std::uint64_t eta = 0;
    double score = 1.0;
};

template<typename V>
struct StoredRow {
    ActionId action = 0;
    V reward{0};
    std::vector<Successor<V>> succ;
};

template<typename V>
struct Node {
    bool explored = false;
    bool wired = false;
    std::vector<StoredRow<V>> rows;
    // information from the previous abstraction
    bool inPrevious = false;
    bool optReachable = true;
    std::vector<ActionId> optimalActions;
};

struct GateSettings {
    CutoffPolicy policy = CutoffPolicy::Never;
    CutoffStyle style = CutoffStyle::Partial;
    double rhoGap = 0.1;
    double rhoStep = kInfinity;
    std::size_t maxStates = 1000000;
};

struct BuildStats {
    std::size_t explored = 0;
    std::size_t rewired = 0;
    std::size_t cutoffs = 0;
};

template<typename V>
class Refiner {
public:
    using Source = typename BoundsLedger<V>::Source;

    Refiner(Problem<V> problem, double precision, double rhoSigma, NeighbourhoodFn<V> provider,
            std::optional<Foundation> foundation)
        : problem_(std::move(problem)),
          pomdp_(problem_.pomdp),
          dir_(problem_.spec.direction),
          reward_(problem_.spec.isReward()),
          precision_(precision),
          provider_(std::move(provider)),
          foundation_(std::move(foundation)) {
        targetMask_ = problem_.spec.targetMask(pomdp_.numStates());
        avoidMask_ = problem_.spec.avoidMask(pomdp_.numStates());
        mdpValues_ = underlyingMdpValues(problem_, precision_);
        auto sparse = toSparse(pomdp_, problem_.spec);
        CheckOptions opts;
        opts.precision = precision_;
        opts.scope = PrecisionScope::AllStates;
        auto mdpResult = check(sparse, checkKindOf(problem_.spec.kind), dir_, opts);
        policies_ = guessLowerBoundPolicies(problem_, mdpResult, rhoSigma, precision_);
        init_ = intern(initialBelief(pomdp_));
        ledger_.globalLower = ledger_.lower[init_];
        ledger_.globalUpper = ledger_.upper[init_];
    }

    Problem<V> const& problem() const { return problem_; }
    BoundsLedger<V>& ledger() { return ledger_; }
    Foundation foundation() const { return foundation_.value_or(Foundation{}); }
    BeliefId initId() const { return init_; }
    LowerBoundPolicies<V> const& policies() const { return policies_; }

    Extended<V> optimistic(BeliefId id) const { return dir_ == Direction::Max ? ledger_.upper[id] : ledger_.lower[id]; }
    Extended<V> pessimistic(BeliefId id) const {
        return dir_ == Direction::Max ? ledger_.lower[id] : ledger_.upper[id];
    }

    void tightenOptimistic(BeliefId id, Extended<V> const& v, Source src, std::size_t iter) {
        if (dir_ == Direction::Max) {
            if (less(v, ledger_.upper[id])) {
                ledger_.upper[id] = v;
                ledger_.upperSource[id] = src;
                ledger_.upperIteration[id] = iter;
            }
        } else if (less(ledger_.lower[id], v)) {
            ledger_.lower[id] = v;
            ledger_.lowerSource[id] = src;
            ledger_.lowerIteration[id] = iter;
        }
    }

    void tightenPessimistic(BeliefId id, Extended<V> const& v, Source src, std::size_t iter) {
        if (dir_ == Direction::Max) {
            if (less(ledger_.lower[id], v)) {
                ledger_.lower[id] = v;
                ledger_.lowerSource[id] = src;
                ledger_.lowerIteration[id] = iter;
            }
        } else if (less(v, ledger_.upper[id])) {
            ledger_.upper[id] = v;
            ledger_.upperSource[id] = src;
            ledger_.upperIteration[id] = iter;
        }
    }

    double gap(BeliefId id) const { return relativeGap(ledger_.lower[id], ledger_.upper[id]); }

    BeliefId intern(Belief<V> const& b) {
        auto [id, isNew] = ledger_.beliefs.intern(b);
        if (isNew) {
            auto const& stored = ledger_.beliefs.get(id);
            auto opt = eq1Bound(stored, mdpValues_, dir_);
            auto pess = policies_.at(stored);
            bool maxDir = dir_ == Direction::Max;
            ledger_.lower.push_back(maxDir ? pess : opt);
            ledger_.upper.push_back(maxDir ? opt : pess);
            ledger_.lowerSource.push_back(maxDir ? Source::Policy : Source::Eq1);
            ledger_.upperSource.push_back(maxDir ? Source::Eq1 : Source::Policy);
            ledger_.lowerIteration.push_back(0);
            ledger_.upperIteration.push_back(0);
            nodes_.emplace_back();
        }
        return id;
    }

    bool terminal(Belief<V> const& b) const { return inside(b, targetMask_) || inside(b, avoidMask_); }

    std::uint64_t etaOf(ObsId z) const { return foundation_ ? foundation_->resolution[z] : 0; }

    // Triangulates real belief `id` against the current foundation.
    void placeSuccessor(Successor<V>& s) {
        std::uint64_t eta = etaOf(s.obs);
        if (!s.vertices.empty() && s.eta == eta) {
            return;
        }
        s.eta = eta;
        Belief<V> const real = ledger_.beliefs.get(s.real);
        TriangulationResult<V> tri;
        if (terminal(real)) {
            tri.vertices = {real};
            tri.weights = {V(1)};
        } else if (provider_) {
            tri = provider_(real);
        } else {
            tri = triangulate(real, *foundation_);
        }
        s.score = terminal(real) ? 1.0 : scoreBelief(real, tri);
        s.vertices.clear();
        for (auto const& v : tri.vertices) {
            s.vertices.push_back(intern(v));
        }
        s.weights = std::move(tri.weights);
        s.onGrid = s.vertices.size() == 1 && s.vertices[0] == s.real;
    }

    void wire(BeliefId id) {
        if (nodes_[id].wired) {
            return;
        }
        Belief<V> const b = ledger_.beliefs.get(id);
        std::vector<StoredRow<V>> rows;
        for (ActionId a : pomdp_.enabledActions(b.obs)) {
            StoredRow<V> row{a, beliefReward(problem_.spec, b, a), {}};
            for (auto& s : beliefSuccessors(pomdp_, b, a)) {
                Successor<V> succ;
                succ.obs = s.belief.obs;
                succ.prob = s.prob;
                succ.real = intern(s.belief);
                row.succ.push_back(std::move(succ));
            }
            rows.push_back(std::move(row));
        }
        nodes_[id].rows = std::move(rows);
        nodes_[id].wired = true;
    }

    bool stale(StoredRow<V> const& row) const {
        return std::any_of(row.succ.begin(), row.succ.end(),
                           [&](Successor<V> const& s) { return s.vertices.empty() || s.eta != etaOf(s.obs); });
    }

    // Node rows may be moved by interning; always index through nodes_.
    void placeRow(BeliefId id, std::size_t r) {
        for (std::size_t k = 0; k < nodes_[id].rows[r].succ.size(); ++k) {
            Successor<V> s = nodes_[id].rows[r].succ[k];
            placeSuccessor(s);
            nodes_[id].rows[r].succ[k] = std::move(s);
        }
    }

    struct Built {
        AbstractionMdp<V> abstraction;
        std::vector<BeliefId> order;
        BuildStats stats;
    };

    Built build(GateSettings const& gates, std::optional<Clock::time_point> deadline) {
        Built out;
        Sinks sinks{};
        constexpr StateId kTarget = static_cast<StateId>(-2), kZero = static_cast<StateId>(-3),
                          kInf = static_cast<StateId>(-4);
        Sinks const placeholder{kTarget, kZero, kInf};
        std::unordered_map<BeliefId, StateId> stateOf;
        std::deque<BeliefId> queue;
        auto& order = out.order;
        auto add = [&](BeliefId v) {
            auto [it, isNew] = stateOf.try_emplace(v, static_cast<StateId>(order.size()));
            if (isNew) {
                order.push_back(v);
                queue.push_back(v);
            }
            return it->second;
        };
        add(init_);
        std::vector<std::vector<PendingRow<V>>> rows;
        std::vector<StateStatus> status;
        std::size_t counter = 0;
        auto gateInputs = [&](BeliefId id) {
            GateInputs in;
            in.gap = gap(id);
            in.counter = counter;
            in.rhoGap = gates.rhoGap;
            in.rhoStep = gates.rhoStep;
            in.optReachable = !nodes_[id].inPrevious || nodes_[id].optReachable;
            switch (gates.policy) {
                case CutoffPolicy::Never:
                    in.gap = 1.0;
                    in.rhoGap = -1.0;
                    in.rhoStep = kInfinity;
                    in.optReachable = true;
                    break;
                case CutoffPolicy::Gap:
                    in.rhoStep = kInfinity;
                    in.optReachable = true;
                    break;
                case CutoffPolicy::Step:
                    in.rhoGap = -1.0;
                    in.optReachable = true;
                    break;
                case CutoffPolicy::Combined: break;
            }
            return in;
        };

        while (!queue.empty()) {
            BeliefId id = queue.front();
            queue.pop_front();
            StateId st = stateOf.at(id);
            rows.resize(order.size());
            status.resize(order.size(), StateStatus::Explored);
            Belief<V> const b = ledger_.beliefs.get(id);
            if (terminal(b)) {
                status[st] = inside(b, targetMask_) ? StateStatus::Target : StateStatus::Avoid;
                rows[st].push_back({pomdp_.enabledActions(b.obs).front(), {{st, V(1)}}, V(0)});
                continue;
            }
            bool late = deadline && Clock::now() > *deadline;
            bool full = order.size() >= gates.maxStates;
            bool wasExplored = nodes_[id].explored;
            bool explore = !late && (wasExplored || (!full && exploreGate(gateInputs(id))));
            if (explore) {
                wire(id);
                if (!wasExplored) {
                    for (std::size_t r = 0; r < nodes_[id].rows.size(); ++r) {
                        placeRow(id, r);
                    }
                    nodes_[id].explored = true;
                    ++out.stats.explored;
                    ++counter;
                } else {
                    bool any = false;
                    for (std::size_t r = 0; r < nodes_[id].rows.size(); ++r) {
                        auto const opt = nodes_[id].optimalActions;
                        bool optimal = !nodes_[id].inPrevious ||
                                       std::find(opt.begin(), opt.end(), nodes_[id].rows[r].action) != opt.end();
                        if (stale(nodes_[id].rows[r]) && rewireGate(gateInputs(id), optimal, true)) {
                            placeRow(id, r);
                            any = true;
                        }
                    }
                    if (any) {
                        ++out.stats.rewired;
                        ++counter;
                    }
                }
                for (auto const& row : nodes_[id].rows) {
                    PendingRow<V> pending{row.action, {}, row.reward};
                    for (auto const& s : row.succ) {
                        for (std::size_t k = 0; k < s.vertices.size(); ++k) {
                            pending.entries.push_back({add(s.vertices[k]), s.prob * s.weights[k]});
                        }
                    }
                    rows[st].push_back(std::move(pending));
                }
                continue;
            }

            ++out.stats.cutoffs;
            status[st] = StateStatus::CutOff;
            if (gates.style == CutoffStyle::Strict || late) {
                PendingRow<V> pending{pomdp_.enabledActions(b.obs).front(), {}, V(0)};
                routeToSinks(pending, V(1), optimistic(id), reward_, placeholder);
                rows[st].push_back(std::move(pending));
                continue;
            }
            // partial: keep edges to beliefs already in the abstraction
            wire(id);
            for (std::size_t r = 0; r < nodes_[id].rows.size(); ++r) {
                placeRow(id, r);
                auto const& row = nodes_[id].rows[r];
                PendingRow<V> pending{row.action, {}, row.reward};
                for (auto const& s : row.succ) {
                    for (std::size_t k = 0; k < s.vertices.size(); ++k) {
                        V mass = s.prob * s.weights[k];
                        auto it = stateOf.find(s.vertices[k]);
                        if (it != stateOf.end()) {
                            pending.entries.push_back({it->second, mass});
                        } else {
                            routeToSinks(pending, mass, optimistic(s.vertices[k]), reward_, placeholder);
                        }
                    }
                }
                rows[st].push_back(std::move(pending));
            }
        }

        std::size_t k = order.size();
        rows.resize(k);
        status.resize(k, StateStatus::Explored);
        sinks = {static_cast<StateId>(k), static_cast<StateId>(k + 1), static_cast<StateId>(k + 2)};
        auto& abs = out.abstraction;
        abs.targetSink = sinks.target;
        abs.zeroSink = sinks.zero;
        abs.infinitySink = sinks.infinity;
        SparseMdpBuilder<V> builder(reward_);
        std::vector<bool> target(k + 3, false), avoid(k + 3, false);
        for (std::size_t s = 0; s < k; ++s) {
            builder.newState();
            for (auto& row : rows[s]) {
                for (auto& e : row.entries) {
                    e.state = e.state == kTarget ? sinks.target
                            : e.state == kZero   ? sinks.zero
                            : e.state == kInf    ? sinks.infinity
                                                 : e.state;
                }
                builder.addRow(row.action, std::move(row.entries), row.reward);
            }
            target[s] = status[s] == StateStatus::Target;
            avoid[s] = status[s] == StateStatus::Avoid;
            abs.beliefs.push_back(ledger_.beliefs.get(order[s]));
        }
        for (StateId sink : {sinks.target, sinks.zero, sinks.infinity}) {
            builder.newState();
            builder.addRow(0, {{sink, V(1)}}, V(0));
            abs.beliefs.emplace_back();
        }
        target[sinks.target] = true;
        abs.mdp = builder.build(0, std::move(target), std::move(avoid));
        abs.status = std::move(status);
        abs.status.insert(abs.status.end(), 3, StateStatus::Sink);
        return out;
    }

    ValueResult<V> checkMdp(SparseMdp<V> const& mdp) const {
        CheckOptions opts;
        opts.precision = precision_;
        opts.scope = PrecisionScope::Initial;
        return check(mdp, checkKindOf(problem_.spec.kind), dir_, opts);
    }

    bool optimisticIsUpper() const { return dir_ == Direction::Max; }

    // Real belief transitions only; off-grid successors and cut-off beliefs end in
    // their achievable values.
    SparseMdp<V> underApproximation(Built const& built) {
        auto const& abs = built.abstraction;
        std::size_t k = built.order.size();
        Sinks sinks{abs.targetSink, abs.zeroSink, abs.infinitySink};
        std::unordered_map<BeliefId, StateId> stateOf;
        for (std::size_t s = 0; s < k; ++s) {
            stateOf.emplace(built.order[s], static_cast<StateId>(s));
        }
        SparseMdpBuilder<V> builder(reward_);
        for (std::size_t s = 0; s < k; ++s) {
            builder.newState();
            BeliefId id = built.order[s];
            auto st = abs.status[s];
            if (st == StateStatus::Target || st == StateStatus::Avoid) {
                builder.addRow(abs.mdp.rowAction[abs.mdp.groupStart[s]], {{static_cast<StateId>(s), V(1)}}, V(0));
            } else if (st == StateStatus::CutOff) {
                PendingRow<V> row{abs.mdp.rowAction[abs.mdp.groupStart[s]], {}, V(0)};
                routeToSinks(row, V(1), pessimistic(id), reward_, sinks);
                builder.addRow(row.action, std::move(row.entries), row.reward);
            } else {
                for (auto const& r : nodes_[id].rows) {
                    PendingRow<V> row{r.action, {}, r.reward};
                    for (auto const& succ : r.succ) {
                        auto it = stateOf.find(succ.real);
                        if (succ.onGrid && it != stateOf.end()) {
                            row.entries.push_back({it->second, succ.prob});
                        } else {
                            routeToSinks(row, succ.prob, pessimistic(succ.real), reward_, sinks);
                        }
                    }
                    builder.addRow(row.action, std::move(row.entries), row.reward);
                }
            }
        }
        for (StateId sink : {sinks.target, sinks.zero, sinks.infinity}) {
            builder.newState();
            builder.addRow(0, {{sink, V(1)}}, V(0));
        }
        return builder.build(0, abs.mdp.target, abs.mdp.avoid);
    }

    // Records epsilon-optimal actions and reachability; returns per-observation scores.
    std::vector<std::vector<double>> recordOptimality(Built const& built, ValueResult<V> const& result,
                                                      double rhoSigma) {
        auto const& mdp = built.abstraction.mdp;
        auto rows = epsilonOptimalActions(mdp, result, dir_, rhoSigma);
        auto reach = reachableUnder(mdp, rows);
        for (auto& n : nodes_) {
            n.inPrevious = false;
        }
        std::vector<std::vector<double>> scores(pomdp_.numObservations());
        for (std::size_t s = 0; s < built.order.size(); ++s) {
            auto& node = nodes_[built.order[s]];
            node.inPrevious = true;
            node.optReachable = reach[s];
            node.optimalActions.clear();
            for (std::size_t r : rows[s]) {
                node.optimalActions.push_back(mdp.rowAction[r]);
            }
            if (!reach[s] || built.abstraction.status[s] != StateStatus::Explored) {
                continue;
            }
            for (auto const& row : node.rows) {
                if (std::find(node.optimalActions.begin(), node.optimalActions.end(), row.action) ==
                    node.optimalActions.end()) {
                    continue;
                }
                for (auto const& succ : row.succ) {
                    scores[succ.obs].push_back(succ.score);
                }
            }
        }
        return scores;
    }

    // True if another build with a smaller rho_gap could differ.
    bool refinable(Built const& built) const {
        for (std::size_t s = 0; s < built.order.size(); ++s) {
            BeliefId id = built.order[s];
            auto const& node = nodes_[id];
            if (!node.optReachable) {
                continue;
            }
            auto st = built.abstraction.status[s];
            if (st == StateStatus::CutOff && gap(id) > 0.0) {
                return true;
            }
            if (st == StateStatus::Explored) {
                for (auto const& row : node.rows) {
                    bool optimal = std::find(node.optimalActions.begin(), node.optimalActions.end(), row.action) !=
                                   node.optimalActions.end();
                    if (optimal && stale(row)) {
                        return true;
                    }
                }
            }
        }
        return false;
    }

    void setFoundation(Foundation f) { foundation_ = std::move(f); }
    bool hasFoundation() const { return foundation_.has_value(); }
    Pomdp<V> const& pomdp() const { return pomdp_; }
    Direction direction() const { return dir_; }
    bool rewardObjective() const { return reward_; }

private:
    Problem<V> problem_;
    Pomdp<V> const& pomdp_;
    Direction dir_;
    bool reward_;
    double precision_;
    NeighbourhoodFn<V> provider_;
    std::optional<Foundation> foundation_;
    std::vector<bool> targetMask_;
    std::vector<bool> avoidMask_;
    StateValues<V> mdpValues_;
    LowerBoundPolicies<V> policies_;
    BoundsLedger<V> ledger_;
    std::vector<Node<V>> nodes_;
    BeliefId init_ = 0;
};

GateSettings settingsFor(DiscretizeOptions const& o) {
    GateSettings g;
    g.policy = o.cutoff;
    g.style = o.style;
    g.rhoGap = o.rhoGap;
    g.rhoStep = o.rhoStep > 0.0 ? o.rhoStep : kInfinity;
    g.maxStates = o.maxStates;
    return g;
}

}  // namespace

template<typename ValueType>
AbstractionMdp<ValueType> buildDiscretized(Problem<ValueType> const& problem,
                                           NeighbourhoodFn<ValueType> const& neighbourhood,
                                           DiscretizeOptions const& options) {
    if (!neighbourhood) {
        throw std::invalid_argument("buildDiscretized needs a neighbourhood function");
    }
    Refiner<ValueType> refiner(prepareProblem(problem), options.precision, 0.001, neighbourhood, std::nullopt);
    return std::move(refiner.build(settingsFor(options), std::nullopt).abstraction);
}

template<typename ValueType>
RefinementResult<ValueType> refinementLoop(Problem<ValueType> const& problem,
                                           RefinementOptions<ValueType> const& options) {
    using Source = typename BoundsLedger<ValueType>::Source;
    auto const start = Clock::now();
    std::optional<Clock::time_point> deadline;
    if (options.timeLimit) {
        deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*options.timeLimit));
    }
    auto const& h = options.heuristic;
    Problem<ValueType> prepared = prepareProblem(problem);
    std::optional<Foundation> foundation;
    if (!options.neighbourhood) {
        foundation = makeFoundation(prepared.pomdp.numObservations(), h.etaInit, h.fRes, h.scheme);
    }
    Refiner<ValueType> refiner(prepared, options.precision, h.rhoSigma, options.neighbourhood, foundation);
    auto const& pomdp = refiner.pomdp();
    Direction dir = refiner.direction();
    bool maxDir = dir == Direction::Max;
    BeliefId init = refiner.initId();

    RefinementResult<ValueType> result;
    auto& ledger = refiner.ledger();
    GateSettings gates;
    gates.policy = options.cutoff;
    gates.style = options.style;
    gates.rhoGap = h.rhoGap;
    gates.rhoStep = kInfinity;
    gates.maxStates = options.maxStates;
    double rhoZ = h.rhoZ;
    bool explorationComplete = false;
    // set once a run fails to improve the initial belief; budgets grow exponentially
    bool explorationStalled = false;

    for (std::size_t iter = 1;; ++iter) {
        auto const iterStart = Clock::now();
        auto built = refiner.build(gates, deadline);
        auto res = refiner.checkMdp(built.abstraction.mdp);
        // optimistic side of the abstraction
        for (std::size_t s = 0; s < built.order.size(); ++s) {
            refiner.tightenOptimistic(built.order[s], sideOf(res, static_cast<StateId>(s), maxDir),
                                      Source::Abstraction, iter);
        }
        Extended<ValueType> iterOpt = sideOf(res, 0, maxDir);

        // pessimistic side: under-approximation of the abstraction
        auto under = refiner.checkMdp(refiner.underApproximation(built));
        for (std::size_t s = 0; s < built.order.size(); ++s) {
            refiner.tightenPessimistic(built.order[s], sideOf(under, static_cast<StateId>(s), !maxDir),
                                       Source::Abstraction, iter);
        }
        Extended<ValueType> iterPess = sideOf(under, 0, !maxDir);

        // un-discretised exploration with policy values at the frontier
        bool late = deadline && Clock::now() > *deadline;
        if (options.exploreLowerBounds && !explorationComplete && !explorationStalled && !late) {
            unsigned step = static_cast<unsigned>(std::min<std::size_t>(iter, 40));
            std::size_t budget = std::min(ExplorationBudget{step}.maxStates(pomdp), options.maxStates);
            BeliefBound<ValueType> bound = [&](Belief<ValueType> const& b) {
                auto id = ledger.beliefs.find(b);
                return id ? refiner.pessimistic(*id) : refiner.policies().at(b);
            };
            auto ex = exploreBeliefMdp(refiner.problem(), {budget, CutoffMode::PolicyBound, deadline}, bound);
            auto exRes = refiner.checkMdp(ex.mdp);
            explorationComplete = ex.complete;
            auto before = refiner.pessimistic(init);
            for (std::size_t s = 0; s < ex.beliefOf.size(); ++s) {
                auto id = ledger.beliefs.find(ex.store.get(ex.beliefOf[s]));
                if (!id) {
                    continue;
                }
                refiner.tightenPessimistic(*id, sideOf(exRes, static_cast<StateId>(s), !maxDir), Source::Exploration,
                                           iter);
                if (ex.complete) {
                    // the whole reachable belief MDP: both sides are exact
                    refiner.tightenOptimistic(*id, sideOf(exRes, static_cast<StateId>(s), maxDir),
                                              Source::Exploration, iter);
                }
            }
            auto exPess = sideOf(exRes, 0, !maxDir);
            {
                auto gain = [&](Extended<ValueType> const& worse, Extended<ValueType> const& better) {
                    if (!less(worse, better)) {
                        return 0.0;
                    }
                    return worse.infinite || better.infinite ? kInfinity
                                                             : toDouble(ValueType(better.value - worse.value));
                };
                double improved = maxDir ? gain(before, exPess) : gain(exPess, before);
                explorationStalled = !ex.complete && improved <= options.precision;
            }
            iterPess = maxDir ? maxOf(iterPess, exPess) : minOf(iterPess, exPess);
            if (ex.complete) {
                auto exOpt = sideOf(exRes, 0, maxDir);
                iterOpt = maxDir ? minOf(iterOpt, exOpt) : maxOf(iterOpt, exOpt);
            }
        }
        auto policyPess = refiner.policies().initial(pomdp);
        iterPess = maxDir ? maxOf(iterPess, policyPess) : minOf(iterPess, policyPess);

        Extended<ValueType> iterLower = maxDir ? iterPess : iterOpt;
        Extended<ValueType> iterUpper = maxDir ? iterOpt : iterPess;
        refiner.tightenPessimistic(init, iterPess, Source::Abstraction, iter);
        refiner.tightenOptimistic(init, iterOpt, Source::Abstraction, iter);
        ledger.globalLower = maxOf(ledger.globalLower, iterLower);
        ledger.globalUpper = minOf(ledger.globalUpper, iterUpper);
        ledger.globalLower = maxOf(ledger.globalLower, ledger.lower[init]);
        ledger.globalUpper = minOf(ledger.globalUpper, ledger.upper[init]);

        // observation scores and foundation growth
        auto scores = refiner.recordOptimality(built, res, h.rhoSigma);
        IterationRecord rec;
        bool obsRefinable = false;
        if (refiner.hasFoundation() && options.extendFoundation) {
            Foundation f = refiner.foundation();
            std::vector<double> perObs(pomdp.numObservations(), 1.0);
            for (ObsId z = 0; z < perObs.size(); ++z) {
                perObs[z] = scoreObservation(z, scores[z], f);
                obsRefinable = obsRefinable || perObs[z] < 1.0 - 1e-12;
            }
            auto ext = extendFoundation(f, perObs, rhoZ, h.fZ);
            rhoZ = ext.nextRhoZ;
            for (ObsId z : ext.extended) {
                rec.refined.push_back({z, ext.foundation.resolution[z]});
            }
            refiner.setFoundation(std::move(ext.foundation));
        }

        rec.iteration = iter;
        rec.states = built.abstraction.mdp.numStates();
        rec.explored = built.stats.explored;
        rec.rewired = built.stats.rewired;
        rec.cutoffs = built.stats.cutoffs;
        rec.lower = asDouble(iterLower);
        rec.upper = asDouble(iterUpper);
        rec.bestLower = asDouble(ledger.globalLower);
        rec.bestUpper = asDouble(ledger.globalUpper);
        rec.seconds = std::chrono::duration<double>(Clock::now() - iterStart).count();
        result.log.push_back(rec);
        result.iterationBounds.push_back({iterLower, iterUpper});
        if (options.onIteration) {
            options.onIteration(rec);
        }
        result.iterations = iter;
        bool structural = refiner.refinable(built);
        result.abstraction = std::move(built.abstraction);

        // next iteration's schedule
        gates.rhoGap *= h.fGap;
        gates.rhoStep = h.fStep * static_cast<double>(built.order.size());

        auto const& threshold = refiner.problem().spec.threshold;
        if (threshold) {
            result.thresholdHolds = decideThreshold(*threshold, ledger.globalLower, ledger.globalUpper);
        }
        bool fixpoint = !obsRefinable && !structural &&
                        (explorationComplete || explorationStalled || !options.exploreLowerBounds) && rec.explored == 0 &&
                        rec.rewired == 0;
        if (result.thresholdHolds) {
            result.status = RunStatus::ThresholdDecided;
            break;
        }
        if (same(ledger.globalLower, ledger.globalUpper)) {
            result.status = RunStatus::Exact;
            break;
        }
        if (relativeGap(ledger.globalLower, ledger.globalUpper) <= options.gapTarget) {
            result.status = RunStatus::GapMet;
            break;
        }
        if (fixpoint) {
            result.status = RunStatus::Exact;
            break;
        }
        if (deadline && Clock::now() > *deadline) {
            result.status = RunStatus::Timeout;
            break;
        }
        if (options.maxIterations && iter >= *options.maxIterations) {
            result.status = RunStatus::IterationLimit;
            break;
        }
    }
    result.lower = ledger.globalLower;
    result.upper = ledger.globalUpper;
    result.foundation = refiner.foundation();
    result.ledger = std::move(ledger);
    result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

#define POMDPV_INSTANTIATE(V)                                                                                      \
    template Extended<V> eq1Bound(Belief<V> const&, StateValues<V> const&, Direction);                             \
    template PolicyValues<V> evaluateObservationPolicy(Problem<V> const&, ObservationPolicy<V> const&, double);    \
    template struct LowerBoundPolicies<V>;                                                                         \
    template LowerBoundPolicies<V> guessLowerBoundPolicies(Problem<V> const&, ValueResult<V> const&, double,       \
                                                           double);                                                \
    template NeighbourhoodFn<V> fixedFoundation(std::vector<Belief<V>>);                                           \
    template struct AbstractionMdp<V>;                                                                             \
    template void writeAbstraction(std::ostream&, AbstractionMdp<V> const&, std::vector<std::string> const&);      \
    template double relativeGap(Extended<V> const&, Extended<V> const&);                                           \
    template AbstractionMdp<V> buildDiscretized(Problem<V> const&, NeighbourhoodFn<V> const&,                      \
                                                DiscretizeOptions const&);                                         \
    template RefinementResult<V> refinementLoop(Problem<V> const&, RefinementOptions<V> const&);                   \
    template std::optional<bool> decideThreshold(Threshold<V> const&, Extended<V> const&, Extended<V> const&);

POMDPV_INSTANTIATE(double)
POMDPV_INSTANTIATE(Rational)

#undef POMDPV_INSTANTIATE

}  // namespace pomdpv
