#include <doctest.h>

#include "oracles.hpp"
#include "pomdpv/mdp_check.hpp"

#include <algorithm>
#include <numeric>

using namespace pomdpv;
using Q = Rational;

namespace {

// Fully observable random problem; state n-1 is the goal, state n-2 optionally a trap.
Problem<Q> randomMdp(std::mt19937_64& rng, std::size_t n, std::size_t numActions, ObjectiveKind kind,
                     Direction dir) {
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng() % (hi - lo + 1)); };
    std::vector<std::string> names;
    for (std::size_t a = 0; a < numActions; ++a) {
        names.push_back("a" + std::to_string(a));
    }
    Mdp<Q> mdp(n, names, 0);
    StateId goal = static_cast<StateId>(n - 1);
    StateId trap = static_cast<StateId>(n - 2);
    bool withTrap = kind == ObjectiveKind::ReachAvoidProbability;
    for (StateId s = 0; s < n; ++s) {
        if (s == goal || (withTrap && s == trap)) {
            mdp.setRow(s, 0, {{s, Q(1)}});
            continue;
        }
        bool any = false;
        for (ActionId a = 0; a < numActions; ++a) {
            if (any && rng() % 4 == 0) {
                continue;
            }
            any = true;
            std::size_t k = pick(1, 3);
            std::vector<Entry<Q>> dist;
            std::vector<long> w;
            long total = 0;
            for (std::size_t i = 0; i < k; ++i) {
                dist.push_back({static_cast<StateId>(pick(0, n - 1)), Q(0)});
                w.push_back(static_cast<long>(pick(1, 5)));
                total += w.back();
            }
            for (std::size_t i = 0; i < k; ++i) {
                dist[i].prob = oracle::frac(w[i], total);
            }
            mdp.setRow(s, a, dist);
        }
    }
    std::vector<ObsId> obs(n);
    std::iota(obs.begin(), obs.end(), 0);
    Pomdp<Q> pomdp(std::move(mdp), obs, n);
    Specification<Q> spec;
    spec.kind = kind;
    spec.direction = dir;
    spec.target = {goal};
    if (withTrap) {
        spec.avoid = {trap};
    }
    if (kind == ObjectiveKind::TotalReward) {
        spec.rewards.assign(n, std::vector<Q>(numActions, Q(0)));
        for (StateId s = 0; s + 1 < n; ++s) {
            for (ActionId a = 0; a < numActions; ++a) {
                spec.rewards[s][a] = oracle::frac(static_cast<long>(pick(0, 4)), 2);
            }
        }
    }
    return {std::move(pomdp), std::move(spec)};
}

SparseMdp<Q> chainFromRows(Problem<Q> const& p, std::vector<ActionId> const& choice) {
    SparseMdpBuilder<Q> b(p.spec.isReward());
    auto const& mdp = p.pomdp.mdp();
    for (StateId s = 0; s < mdp.numStates(); ++s) {
        b.newState();
        b.addRow(choice[s], *mdp.row(s, choice[s]), p.spec.reward(s, choice[s]));
    }
    return b.build(mdp.initialState(), p.spec.targetMask(mdp.numStates()), p.spec.avoidMask(mdp.numStates()));
}

}  // namespace

TEST_CASE("trivial reachability") {
    SparseMdpBuilder<Q> b;
    for (int i = 0; i < 3; ++i) {
        b.newState();
        b.addRow(0, {{static_cast<StateId>(i == 0 ? 1 : i), Q(1)}});
    }
    auto m = b.build(0, {false, true, false});
    for (auto dir : {Direction::Max, Direction::Min}) {
        auto r = check(m, CheckKind::Reachability, dir);
        CHECK(r.lower[1] == 1);
        CHECK(r.upper[2] == 0);
        CHECK(r.lower[0] == 1);
    }

    // state 0 -> 1/3 target, 2/3 sink
    SparseMdpBuilder<double> d;
    d.newState();
    d.addRow(0, {{1, 1.0 / 3}, {2, 2.0 / 3}});
    d.newState();
    d.addRow(0, {{1, 1.0}});
    d.newState();
    d.addRow(0, {{2, 1.0}});
    auto md = d.build(0, {false, true, false});
    auto r = check(md, CheckKind::Reachability, Direction::Max);
    CHECK(r.lower[0] <= 1.0 / 3 + 1e-15);
    CHECK(r.upper[0] >= 1.0 / 3 - 1e-15);
    CHECK(r.upper[0] - r.lower[0] <= 1e-6);
}

TEST_CASE("random MDPs against exhaustive policy enumeration") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        std::size_t n = 2 + rng() % 7;
        std::size_t acts = n > 6 ? 2 : 1 + rng() % 3;
        auto kind = static_cast<ObjectiveKind>(rng() % 3);
        auto dir = rng() % 2 ? Direction::Max : Direction::Min;
        auto p = randomMdp(rng, n, acts, kind, dir);
        auto truth = oracle::mdpOptimum(p);
        auto sparse = toSparse(p.pomdp, p.spec);
        auto exact = check(sparse, checkKindOf(kind), dir, {1e-6, PrecisionScope::AllStates});
        auto pd = convertProblem<double>(p);
        auto approx = check(toSparse(pd.pomdp, pd.spec), checkKindOf(kind), dir, {1e-6, PrecisionScope::AllStates});
        for (StateId s = 0; s < n; ++s) {
            if (!truth[s]) {
                REQUIRE(exact.infinite[s]);
                REQUIRE(approx.infinite[s]);
                continue;
            }
            REQUIRE_FALSE(exact.infinite[s]);
            REQUIRE(exact.lower[s] == *truth[s]);
            REQUIRE(exact.upper[s] == *truth[s]);
            REQUIRE_FALSE(approx.infinite[s]);
            double t = toDouble(*truth[s]);
            double slack = 1e-9 * std::max(1.0, t);
            REQUIRE(approx.lower[s] <= t + slack);
            REQUIRE(approx.upper[s] >= t - slack);
            REQUIRE(approx.upper[s] - approx.lower[s] <= 1e-6 * std::max(approx.upper[s], 1e-300) + 1e-12);
        }
        ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("all-a policy on the running example") {
    auto p = makeRunningExample();
    std::vector<ActionId> choice(9, running::a);
    auto chain = chainFromRows(p, choice);
    auto r = evaluateMarkovChain(chain, CheckKind::Reachability);
    CHECK(r.lower[running::s0] == Q(37, 64));
    CHECK(r.upper[running::s0] == Q(37, 64));

    auto pd = convertProblem<double>(p);
    SparseMdpBuilder<double> b;
    for (StateId s = 0; s < 9; ++s) {
        b.newState();
        b.addRow(0, *pd.pomdp.mdp().row(s, 0));
    }
    auto rd = evaluateMarkovChain(b.build(0, pd.spec.targetMask(9)), CheckKind::Reachability);
    CHECK(rd.lower[0] <= 37.0 / 64 + 1e-15);
    CHECK(rd.upper[0] >= 37.0 / 64 - 1e-15);
}

TEST_CASE("chain evaluation basics") {
    SparseMdpBuilder<Q> b;
    b.newState();
    b.addRow(0, {{1, Q(1)}});
    b.newState();
    b.addRow(0, {{1, Q(1)}});
    auto r = evaluateMarkovChain(b.build(0, {false, true}), CheckKind::Reachability);
    CHECK(r.lower[0] == 1);

    // a uniform mix of two identical rows equals either row
    auto p = makeRunningExample();
    SparseMdpBuilder<Q> m;
    for (StateId s = 0; s < 9; ++s) {
        m.newState();
        std::vector<Entry<Q>> row;
        for (auto const& e : *p.pomdp.mdp().row(s, running::a)) {
            row.push_back({e.state, e.prob / 2});
            row.push_back({e.state, e.prob / 2});
        }
        m.addRow(0, row);
    }
    CHECK(evaluateMarkovChain(m.build(0, p.spec.targetMask(9)), CheckKind::Reachability).lower[0] == Q(37, 64));
}

TEST_CASE("observation-based chains never exceed the MDP optimum") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 30; ++i) {
        auto p = oracle::randomPomdp(rng, 6, 3, 4, false);
        auto opt = check(toSparse(p.pomdp, p.spec), CheckKind::Reachability, Direction::Max,
                         {1e-6, PrecisionScope::AllStates});
        std::vector<ActionId> choice(p.pomdp.numStates());
        for (StateId s = 0; s < p.pomdp.numStates(); ++s) {
            auto const& en = p.pomdp.enabledActions(p.pomdp.observation(s));
            choice[s] = en[static_cast<std::size_t>(p.pomdp.observation(s)) % en.size()];
        }
        auto v = evaluateMarkovChain(chainFromRows(p, choice), CheckKind::Reachability);
        for (StateId s = 0; s < p.pomdp.numStates(); ++s) {
            CHECK(v.upper[s] <= opt.upper[s]);
        }
    }
}

TEST_CASE("epsilon-optimal actions and reachability") {
    auto p = makeRunningExample();
    auto sparse = toSparse(p.pomdp, p.spec);
    auto r = check(sparse, CheckKind::Reachability, Direction::Max, {1e-6, PrecisionScope::AllStates});
    auto all = epsilonOptimalActions(sparse, r, Direction::Max, 1.0);
    for (StateId s = 0; s < sparse.numStates(); ++s) {
        CHECK(all[s].size() == sparse.groupStart[s + 1] - sparse.groupStart[s]);
    }
    auto tight = epsilonOptimalActions(sparse, r, Direction::Max, 1e-3);
    // s4: b reaches frown surely, a only with 1/4
    REQUIRE(tight[running::s4].size() == 1);
    CHECK(sparse.rowAction[tight[running::s4][0]] == running::b);
    // s3: a gives 3/5, b gives 0
    REQUIRE(tight[running::s3].size() == 1);
    CHECK(sparse.rowAction[tight[running::s3][0]] == running::a);

    auto reach = reachableUnder(sparse, all);
    CHECK(std::count(reach.begin(), reach.end(), true) == 9);
    std::vector<std::vector<std::size_t>> none(sparse.numStates());
    auto only = reachableUnder(sparse, none);
    CHECK(only[0]);
    CHECK(std::count(only.begin(), only.end(), true) == 1);
}

TEST_CASE("float precision on random chains") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 100; ++i) {
        auto p = randomMdp(rng, 2 + rng() % 7, 1, ObjectiveKind::ReachProbability, Direction::Max);
        auto truth = oracle::mdpOptimum(p);
        auto pd = convertProblem<double>(p);
        auto r = evaluateMarkovChain(toSparse(pd.pomdp, pd.spec), CheckKind::Reachability, 1e-6);
        double t = toDouble(*truth[0]);
        CHECK(r.lower[0] <= t + 1e-12);
        CHECK(r.upper[0] >= t - 1e-12);
        if (r.upper[0] > 0) {
            CHECK((r.upper[0] - r.lower[0]) / r.upper[0] <= 1e-6);
        }
    }
}

TEST_CASE("graph precomputations") {
    auto p = makeRunningExample();
    auto sparse = toSparse(p.pomdp, p.spec);
    auto zeroE = graph::prob0E(sparse);
    CHECK(zeroE[running::smile]);
    CHECK_FALSE(zeroE[running::s0]);
    auto oneE = graph::prob1E(sparse);
    CHECK(oneE[running::s4]);
    CHECK(oneE[running::s2]);
    CHECK_FALSE(oneE[running::s1]);
    auto oneA = graph::prob1A(sparse);
    CHECK(oneA[running::frown]);
    CHECK_FALSE(oneA[running::s4]);
    auto zeroA = graph::prob0A(sparse);
    CHECK(zeroA[running::s3]);  // b goes to smile
    CHECK(zeroA[running::s0]);  // b forever inside {s0,s5,s6}

    std::vector<bool> states(sparse.numStates(), true);
    auto mecs = graph::maximalEndComponents(sparse, states, [](std::size_t) { return true; });
    // {s0,s5,s6} under b, and the two absorbing sinks
    CHECK(mecs.size() == 3);
}
