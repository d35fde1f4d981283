#include "pomdpv/mdp_check.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace pomdpv {

template<typename ValueType>
StateId SparseMdpBuilder<ValueType>::newState() {
    StateId id = static_cast<StateId>(mdp_.groupStart.size() - 1);
    mdp_.groupStart.push_back(mdp_.groupStart.back());
    return id;
}

template<typename ValueType>
void SparseMdpBuilder<ValueType>::addRow(ActionId action, std::vector<Entry<ValueType>> entries, ValueType reward) {
    if (mdp_.groupStart.size() < 2) {
        throw std::logic_error("addRow before newState");
    }
    std::sort(entries.begin(), entries.end(), [](auto const& x, auto const& y) { return x.state < y.state; });
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (isZero(entries[i].prob)) {
            continue;
        }
        if (mdp_.rowStart.back() < mdp_.columns.size() && mdp_.columns.back() == entries[i].state) {
            mdp_.values.back() += entries[i].prob;
        } else {
            mdp_.columns.push_back(entries[i].state);
            mdp_.values.push_back(entries[i].prob);
        }
    }
    mdp_.rowStart.push_back(mdp_.columns.size());
    mdp_.rowAction.push_back(action);
    if (withRewards_) {
        mdp_.rowReward.push_back(reward);
    }
    mdp_.groupStart.back() = mdp_.rowStart.size() - 1;
}

template<typename ValueType>
SparseMdp<ValueType> SparseMdpBuilder<ValueType>::build(StateId initial, std::vector<bool> target,
                                                        std::vector<bool> avoid) {
    std::size_t n = mdp_.groupStart.size() - 1;
    for (auto c : mdp_.columns) {
        if (c >= n) {
            throw std::logic_error("sparse MDP column out of range");
        }
    }
    target.resize(n, false);
    avoid.resize(n, false);
    mdp_.initial = initial;
    mdp_.target = std::move(target);
    mdp_.avoid = std::move(avoid);
    SparseMdp<ValueType> out = std::move(mdp_);
    mdp_ = SparseMdp<ValueType>();
    return out;
}

template<typename ValueType>
SparseMdp<ValueType> toSparse(Pomdp<ValueType> const& pomdp, Specification<ValueType> const& spec) {
    SparseMdpBuilder<ValueType> builder(spec.isReward());
    for (StateId s = 0; s < pomdp.numStates(); ++s) {
        builder.newState();
        for (auto const& r : pomdp.mdp().rows(s)) {
            builder.addRow(r.action, r.dist, spec.reward(s, r.action));
        }
    }
    return builder.build(pomdp.initialState(), spec.targetMask(pomdp.numStates()), spec.avoidMask(pomdp.numStates()));
}

namespace graph {

namespace {

template<typename ValueType>
std::vector<std::vector<StateId>> predecessors(SparseMdp<ValueType> const& mdp) {
    std::vector<std::vector<StateId>> pred(mdp.numStates());
    for (StateId s = 0; s < mdp.numStates(); ++s) {
        for (std::size_t r = mdp.groupStart[s]; r < mdp.groupStart[s + 1]; ++r) {
            for (std::size_t e = mdp.rowStart[r]; e < mdp.rowStart[r + 1]; ++e) {
                auto& p = pred[mdp.columns[e]];
                if (p.empty() || p.back() != s) {
                    p.push_back(s);
                }
            }
        }
    }
    return pred;
}

// Backward closure from `seed` through states accepted by `pass`.
std::vector<bool> backward(std::vector<std::vector<StateId>> const& pred, std::vector<bool> seed,
                           std::vector<bool> const& pass) {
    std::deque<StateId> queue;
    for (StateId s = 0; s < seed.size(); ++s) {
        if (seed[s]) {
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        StateId s = queue.front();
        queue.pop_front();
        for (StateId p : pred[s]) {
            if (!seed[p] && pass[p]) {
                seed[p] = true;
                queue.push_back(p);
            }
        }
    }
    return seed;
}

// Least fixpoint: target ∪ {s ∉ blocked | all rows / some row have a successor in the set}.
template<typename ValueType>
std::vector<bool> positiveAttractor(SparseMdp<ValueType> const& mdp, std::vector<bool> const& blocked, bool forAll) {
    std::size_t n = mdp.numStates();
    std::vector<bool> in = mdp.target;
    bool changed = true;
    while (changed) {
        changed = false;
        for (StateId s = 0; s < n; ++s) {
            if (in[s] || blocked[s]) {
                continue;
            }
            bool all = true, some = false;
            for (std::size_t r = mdp.groupStart[s]; r < mdp.groupStart[s + 1]; ++r) {
                bool hit = false;
                for (std::size_t e = mdp.rowStart[r]; e < mdp.rowStart[r + 1]; ++e) {
                    if (in[mdp.columns[e]]) {
                        hit = true;
                        break;
                    }
                }
                all = all && hit;
                some = some || hit;
            }
            if (mdp.groupStart[s] == mdp.groupStart[s + 1]) {
                all = false;
            }
            if (forAll ? all : some) {
                in[s] = true;
                changed = true;
            }
        }
    }
    return in;
}

}  // namespace

template<typename ValueType>
std::vector<bool> prob0E(SparseMdp<ValueType> const& mdp) {
    std::vector<bool> pass(mdp.numStates());
    for (StateId s = 0; s < mdp.numStates(); ++s) {
        pass[s] = !mdp.avoid[s];
    }
    auto reach = backward(predecessors(mdp), mdp.target, pass);
    for (std::size_t s = 0; s < reach.size(); ++s) {
        reach[s] = !reach[s];
    }
    return reach;
}

template<typename ValueType>
std::vector<bool> prob0A(SparseMdp<ValueType> const& mdp) {
    auto positive = positiveAttractor(mdp, mdp.avoid, true);
    for (std::size_t s = 0; s < positive.size(); ++s) {
        positive[s] = !positive[s];
    }
    return positive;
}

template<typename ValueType>
std::vector<bool> prob1A(SparseMdp<ValueType> const& mdp) {
    auto zero = prob0A(mdp);
    std::vector<bool> pass(mdp.numStates());
    for (StateId s = 0; s < mdp.numStates(); ++s) {
        pass[s] = !mdp.target[s];
    }
    auto bad = backward(predecessors(mdp), zero, pass);
    for (std::size_t s = 0; s < bad.size(); ++s) {
        bad[s] = !bad[s];
    }
    return bad;
}

template<typename ValueType>
std::vector<bool> prob1E(SparseMdp<ValueType> const& mdp) {
    std::size_t n = mdp.numStates();
    std::vector<bool> x(n, true);
    for (StateId s = 0; s < n; ++s) {
        if (mdp.avoid[s]) {
            x[s] = false;
        }
    }
    while (true) {
        std::vector<bool> y = mdp.target;
        bool grew = true;
        while (grew) {
            grew = false;
            for (StateId s = 0; s < n; ++s) {
                if (y[s] || !x[s]) {
                    continue;
                }
                for (std::size_t r = mdp.groupStart[s]; r < mdp.groupStart[s + 1]; ++r) {
                    bool stays = true, progress = false;
                    for (std::size_t e = mdp.rowStart[r]; e < mdp.rowStart[r + 1]; ++e) {
                        StateId t = mdp.columns[e];
                        stays = stays && x[t];
                        progress = progress || y[t];
                    }
                    if (stays && progress) {
                        y[s] = true;
                        grew = true;
                        break;
                    }
                }
            }
        }
        if (y == x) {
            return x;
        }
        x = std::move(y);
    }
}

}  // namespace graph

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

enum class Fixed : unsigned char { No, One, Zero, Infinite };

template<typename ValueType>
struct NodeRow {
    std::size_t original;
    ValueType constant;  // reward plus mass into states fixed at one
    std::vector<std::pair<std::size_t, ValueType>> entries;
};

// States with undetermined values, mapped to nodes; maximal end components
// that cannot influence the optimum are merged into single nodes.
template<typename ValueType>
struct Reduced {
    std::vector<Fixed> fixed;
    std::vector<std::size_t> nodeOf;
    std::vector<std::vector<NodeRow<ValueType>>> rows;
    std::size_t numNodes() const { return rows.size(); }
};

template<typename ValueType>
Reduced<ValueType> reduce(SparseMdp<ValueType> const& mdp, CheckKind kind, Direction direction) {
    std::size_t n = mdp.numStates();
    Reduced<ValueType> red;
    red.fixed.assign(n, Fixed::No);
    red.nodeOf.assign(n, kNone);
    std::vector<bool> rowOk(mdp.numRows(), true);
    bool collapse = false;
    bool zeroRewardOnly = false;

    if (kind == CheckKind::Reachability) {
        auto zero = direction == Direction::Max ? graph::prob0E(mdp) : graph::prob0A(mdp);
        for (StateId s = 0; s < n; ++s) {
            if (mdp.target[s]) {
                red.fixed[s] = Fixed::One;
            } else if (mdp.avoid[s] || zero[s]) {
                red.fixed[s] = Fixed::Zero;
            }
        }
        collapse = direction == Direction::Max;
    } else {
        auto finite = direction == Direction::Max ? graph::prob1A(mdp) : graph::prob1E(mdp);
        for (StateId s = 0; s < n; ++s) {
            if (mdp.target[s]) {
                red.fixed[s] = Fixed::Zero;
            } else if (!finite[s]) {
                red.fixed[s] = Fixed::Infinite;
            }
        }
        if (direction == Direction::Min) {
            for (StateId s = 0; s < n; ++s) {
                for (std::size_t r = mdp.groupStart[s]; r < mdp.groupStart[s + 1]; ++r) {
                    for (std::size_t e = mdp.rowStart[r]; e < mdp.rowStart[r + 1]; ++e) {
                        if (red.fixed[mdp.columns[e]] == Fixed::Infinite) {
                            rowOk[r] = false;
                        }
                    }
                }
            }
            collapse = true;
            zeroRewardOnly = true;
        }
    }

    std::vector<bool> maybe(n);
    for (StateId s = 0; s < n; ++s) {
        maybe[s] = red.fixed[s] == Fixed::No;
    }
    std::vector<std::vector<StateId>> groups;
    std::vector<bool> grouped(n, false);
    if (collapse) {
        auto mecs = graph::maximalEndComponents(mdp, maybe, [&](std::size_t r) {
            return rowOk[r] && (!zeroRewardOnly || isZero(mdp.reward(r)));
        });
        for (auto& mec : mecs) {
            for (StateId s : mec.states) {
                grouped[s] = true;
            }
            groups.push_back(std::move(mec.states));
        }
    }
    for (StateId s = 0; s < n; ++s) {
        if (maybe[s] && !grouped[s]) {
            groups.push_back({s});
        }
    }
    std::sort(groups.begin(), groups.end(), [](auto const& x, auto const& y) { return x.front() < y.front(); });
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (StateId s : groups[g]) {
            red.nodeOf[s] = g;
        }
    }
    red.rows.resize(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        // end components, including single states with self-loops
        bool merged = grouped[groups[g].front()];
        for (StateId s : groups[g]) {
            for (std::size_t r = mdp.groupStart[s]; r < mdp.groupStart[s + 1]; ++r) {
                if (!rowOk[r]) {
                    continue;
                }
                NodeRow<ValueType> row{r, mdp.reward(r), {}};
                bool leaves = false;
                for (std::size_t e = mdp.rowStart[r]; e < mdp.rowStart[r + 1]; ++e) {
                    StateId t = mdp.columns[e];
                    if (red.nodeOf[t] != g) {
                        leaves = true;
                    }
                    switch (red.fixed[t]) {
                        case Fixed::One: row.constant += mdp.values[e]; break;
                        case Fixed::Zero: break;
                        case Fixed::Infinite: throw std::logic_error("row into infinite state kept");
                        case Fixed::No: row.entries.emplace_back(red.nodeOf[t], mdp.values[e]); break;
                    }
                }
                // rows staying inside a collapsed component never help
                if (merged && !leaves) {
                    continue;
                }
                std::sort(row.entries.begin(), row.entries.end(),
                          [](auto const& x, auto const& y) { return x.first < y.first; });
                std::vector<std::pair<std::size_t, ValueType>> combined;
                for (auto& en : row.entries) {
                    if (!combined.empty() && combined.back().first == en.first) {
                        combined.back().second += en.second;
                    } else {
                        combined.push_back(std::move(en));
                    }
                }
                row.entries = std::move(combined);
                red.rows[g].push_back(std::move(row));
            }
        }
        if (red.rows[g].empty()) {
            throw std::logic_error("undetermined state without usable rows");
        }
    }
    return red;
}

template<typename ValueType>
ValueType rowValue(NodeRow<ValueType> const& row, std::vector<ValueType> const& x) {
    ValueType v = row.constant;
    for (auto const& [t, p] : row.entries) {
        v += p * x[t];
    }
    return v;
}

bool better(Direction d, double a, double b) {
    return d == Direction::Max ? a > b : a < b;
}

bool betterExact(Direction d, Rational const& a, Rational const& b) {
    return d == Direction::Max ? a > b : a < b;
}

// Order nodes by backward distance from determined states so Gauss-Seidel sweeps propagate quickly.
template<typename ValueType>
std::vector<std::size_t> sweepOrder(Reduced<ValueType> const& red) {
    std::size_t m = red.numNodes();
    std::vector<std::vector<std::size_t>> pred(m);
    std::vector<bool> seen(m, false);
    std::deque<std::size_t> queue;
    for (std::size_t g = 0; g < m; ++g) {
        for (auto const& row : red.rows[g]) {
            bool exits = row.entries.empty();
            for (auto const& [t, p] : row.entries) {
                pred[t].push_back(g);
                (void)p;
            }
            double outside = 1.0;
            for (auto const& [t, p] : row.entries) {
                outside -= toDouble(p);
            }
            exits = exits || outside > 0;
            if (exits && !seen[g]) {
                seen[g] = true;
                queue.push_back(g);
            }
        }
    }
    std::vector<std::size_t> order;
    while (!queue.empty()) {
        std::size_t g = queue.front();
        queue.pop_front();
        order.push_back(g);
        for (std::size_t p : pred[g]) {
            if (!seen[p]) {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    for (std::size_t g = 0; g < m; ++g) {
        if (!seen[g]) {
            order.push_back(g);
        }
    }
    return order;
}

double relGap(double lo, double up) {
    if (up <= 0) {
        return 0.0;
    }
    return std::max(0.0, (up - lo) / up);
}

// Applies one Jacobi step to u and reports whether the result never exceeds u.
bool isSuperSolution(Reduced<double> const& red, Direction direction, std::vector<double> const& u) {
    for (std::size_t g = 0; g < red.numNodes(); ++g) {
        double best = direction == Direction::Max ? -kInfinity : kInfinity;
        for (auto const& row : red.rows[g]) {
            double v = rowValue(row, u);
            if (better(direction, v, best)) {
                best = v;
            }
        }
        if (best > u[g]) {
            return false;
        }
    }
    return true;
}

void sweep(Reduced<double> const& red, Direction direction, std::vector<std::size_t> const& order,
           std::vector<double>& x) {
    for (std::size_t g : order) {
        double best = direction == Direction::Max ? -kInfinity : kInfinity;
        for (auto const& row : red.rows[g]) {
            double v = rowValue(row, x);
            if (better(direction, v, best)) {
                best = v;
            }
        }
        x[g] = best;
    }
}

std::vector<double> rewardCeiling(Reduced<double> const& red, Direction direction,
                                  std::vector<std::size_t> const& order, std::vector<double>& lower,
                                  std::size_t& sweeps) {
    std::size_t m = red.numNodes();
    double delta = 1e-6;
    for (int attempt = 0; attempt < 60; ++attempt) {
        for (int k = 0; k < 64 * (attempt + 1); ++k) {
            sweep(red, direction, order, lower);
            ++sweeps;
        }
        std::vector<double> u(m);
        for (std::size_t g = 0; g < m; ++g) {
            u[g] = lower[g] * (1 + delta) + delta;
        }
        for (int k = 0; k < 4; ++k) {
            if (isSuperSolution(red, direction, u)) {
                return u;
            }
            std::vector<double> next = u;
            sweep(red, direction, order, next);
            for (std::size_t g = 0; g < m; ++g) {
                u[g] = std::max(next[g], lower[g]) * (1 + delta) + delta;
            }
        }
        delta *= 2;
    }
    throw std::runtime_error("no finite reward ceiling found");
}

ValueResult<double> solveFloat(SparseMdp<double> const& mdp, CheckKind kind, Direction direction,
                               CheckOptions const& options) {
    auto red = reduce(mdp, kind, direction);
    std::size_t m = red.numNodes();
    auto order = sweepOrder(red);
    std::vector<double> lo(m, 0.0), up(m, 1.0);
    std::size_t sweeps = 0;
    if (kind == CheckKind::TotalReward && m > 0) {
        up = rewardCeiling(red, direction, order, lo, sweeps);
    }
    std::size_t initNode = red.nodeOf[mdp.initial];
    bool converged = false;
    double gap = 0.0;
    while (true) {
        gap = 0.0;
        if (options.scope == PrecisionScope::Initial) {
            if (initNode != kNone) {
                gap = relGap(lo[initNode], up[initNode]);
            }
        } else {
            for (std::size_t g = 0; g < m; ++g) {
                gap = std::max(gap, relGap(lo[g], up[g]));
            }
        }
        if (gap <= options.precision) {
            converged = true;
            break;
        }
        if (sweeps >= options.maxSweeps) {
            break;
        }
        sweep(red, direction, order, lo);
        sweep(red, direction, order, up);
        for (std::size_t g = 0; g < m; ++g) {
            if (up[g] < lo[g]) {
                up[g] = lo[g];
            }
        }
        ++sweeps;
    }
    ValueResult<double> result;
    std::size_t n = mdp.numStates();
    result.lower.assign(n, 0.0);
    result.upper.assign(n, 0.0);
    result.infinite.assign(n, false);
    for (StateId s = 0; s < n; ++s) {
        switch (red.fixed[s]) {
            case Fixed::One: result.lower[s] = result.upper[s] = 1.0; break;
            case Fixed::Zero: break;
            case Fixed::Infinite: result.infinite[s] = true; break;
            case Fixed::No:
                result.lower[s] = lo[red.nodeOf[s]];
                result.upper[s] = up[red.nodeOf[s]];
                break;
        }
    }
    result.iterations = sweeps;
    result.gap = gap;
    result.converged = converged;
    return result;
}

// Dense Gauss-Jordan on one block: (I - P) x = b.
std::vector<Rational> solveDenseBlock(std::vector<std::vector<Rational>> a) {
    std::size_t m = a.size();
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        while (pivot < m && a[pivot][col] == 0) {
            ++pivot;
        }
        if (pivot == m) {
            throw std::runtime_error("singular policy evaluation system");
        }
        std::swap(a[pivot], a[col]);
        Rational inv = 1 / a[col][col];
        for (std::size_t k = col; k <= m; ++k) {
            if (a[col][k] != 0) {
                a[col][k] *= inv;
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            if (i == col || a[i][col] == 0) {
                continue;
            }
            Rational f = a[i][col];
            for (std::size_t k = col; k <= m; ++k) {
                if (a[col][k] != 0) {
                    a[i][k] -= f * a[col][k];
                }
            }
        }
    }
    std::vector<Rational> x(m);
    for (std::size_t i = 0; i < m; ++i) {
        x[i] = a[i][m];
    }
    return x;
}

// Solves (I - P) x = b exactly; P given as sparse rows over m unknowns.
// Strongly connected components are solved one at a time, successors first.
std::vector<Rational> solveExact(std::vector<std::vector<std::pair<std::size_t, Rational>>> const& p,
                                 std::vector<Rational> const& b) {
    std::size_t m = b.size();
    // iterative Tarjan; components come out in reverse topological order
    std::vector<std::size_t> index(m, kNone), low(m, 0), comp(m, kNone);
    std::vector<bool> onStack(m, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> comps;
    std::size_t counter = 0;
    std::vector<std::pair<std::size_t, std::size_t>> work;
    for (std::size_t root = 0; root < m; ++root) {
        if (index[root] != kNone) {
            continue;
        }
        work.push_back({root, 0});
        while (!work.empty()) {
            auto& [v, next] = work.back();
            if (next == 0 && index[v] == kNone) {
                index[v] = low[v] = counter++;
                stack.push_back(v);
                onStack[v] = true;
            }
            if (next < p[v].size()) {
                std::size_t w = p[v][next++].first;
                if (index[w] == kNone) {
                    work.push_back({w, 0});
                } else if (onStack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            std::size_t done = v;
            work.pop_back();
            if (!work.empty()) {
                low[work.back().first] = std::min(low[work.back().first], low[done]);
            }
            if (low[done] == index[done]) {
                comps.emplace_back();
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    onStack[w] = false;
                    comp[w] = comps.size() - 1;
                    comps.back().push_back(w);
                } while (w != done);
            }
        }
    }
    std::vector<Rational> x(m);
    std::vector<std::size_t> local(m, kNone);
    for (std::size_t c = 0; c < comps.size(); ++c) {
        auto const& members = comps[c];
        if (members.size() == 1) {
            std::size_t v = members[0];
            Rational self = 0, rhs = b[v];
            for (auto const& [j, q] : p[v]) {
                if (j == v) {
                    self += q;
                } else {
                    rhs += q * x[j];
                }
            }
            if (self == 1) {
                throw std::runtime_error("singular policy evaluation system");
            }
            x[v] = self == 0 ? rhs : rhs / (1 - self);
            continue;
        }
        std::size_t k = members.size();
        for (std::size_t i = 0; i < k; ++i) {
            local[members[i]] = i;
        }
        std::vector<std::vector<Rational>> a(k, std::vector<Rational>(k + 1));
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t v = members[i];
            a[i][i] = 1;
            a[i][k] = b[v];
            for (auto const& [j, q] : p[v]) {
                if (comp[j] == c) {
                    a[i][local[j]] -= q;
                } else {
                    a[i][k] += q * x[j];
                }
            }
        }
        auto y = solveDenseBlock(std::move(a));
        for (std::size_t i = 0; i < k; ++i) {
            x[members[i]] = y[i];
        }
    }
    return x;
}

// A policy reaching the determined states almost surely (used to start policy
// iteration for min rewards, where improper policies exist).
std::vector<std::size_t> properPolicy(Reduced<Rational> const& red) {
    std::size_t m = red.numNodes();
    std::vector<std::size_t> choice(m, kNone);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t g = 0; g < m; ++g) {
            if (choice[g] != kNone) {
                continue;
            }
            for (std::size_t k = 0; k < red.rows[g].size(); ++k) {
                auto const& row = red.rows[g][k];
                Rational inside = 0;
                bool progress = false;
                for (auto const& [t, p] : row.entries) {
                    inside += p;
                    progress = progress || (t != g && choice[t] != kNone);
                }
                if (inside < 1 || progress) {
                    choice[g] = k;
                    changed = true;
                    break;
                }
            }
        }
    }
    for (auto& c : choice) {
        if (c == kNone) {
            throw std::logic_error("no proper policy on finite states");
        }
    }
    return choice;
}

ValueResult<Rational> solveExactPolicyIteration(SparseMdp<Rational> const& mdp, CheckKind kind, Direction direction) {
    auto red = reduce(mdp, kind, direction);
    std::size_t m = red.numNodes();
    std::vector<std::size_t> choice(m, 0);
    if (kind == CheckKind::TotalReward && direction == Direction::Min) {
        choice = properPolicy(red);
    }
    std::vector<Rational> x;
    std::size_t iterations = 0;
    while (true) {
        ++iterations;
        std::vector<std::vector<std::pair<std::size_t, Rational>>> p(m);
        std::vector<Rational> b(m);
        for (std::size_t g = 0; g < m; ++g) {
            auto const& row = red.rows[g][choice[g]];
            p[g] = row.entries;
            b[g] = row.constant;
        }
        x = solveExact(p, b);
        bool changed = false;
        for (std::size_t g = 0; g < m; ++g) {
            for (std::size_t k = 0; k < red.rows[g].size(); ++k) {
                if (k == choice[g]) {
                    continue;
                }
                if (betterExact(direction, rowValue(red.rows[g][k], x), x[g])) {
                    Rational current = rowValue(red.rows[g][choice[g]], x);
                    if (betterExact(direction, rowValue(red.rows[g][k], x), current)) {
                        choice[g] = k;
                        changed = true;
                    }
                }
            }
        }
        if (!changed) {
            break;
        }
    }
    ValueResult<Rational> result;
    std::size_t n = mdp.numStates();
    result.lower.assign(n, Rational(0));
    result.upper.assign(n, Rational(0));
    result.infinite.assign(n, false);
    for (StateId s = 0; s < n; ++s) {
        switch (red.fixed[s]) {
            case Fixed::One: result.lower[s] = result.upper[s] = 1; break;
            case Fixed::Zero: break;
            case Fixed::Infinite: result.infinite[s] = true; break;
            case Fixed::No: result.lower[s] = result.upper[s] = x[red.nodeOf[s]]; break;
        }
    }
    result.iterations = iterations;
    result.gap = 0.0;
    result.converged = true;
    return result;
}

}  // namespace

template<>
ValueResult<double> check(SparseMdp<double> const& mdp, CheckKind kind, Direction direction,
                          CheckOptions const& options) {
    return solveFloat(mdp, kind, direction, options);
}

template<>
ValueResult<Rational> check(SparseMdp<Rational> const& mdp, CheckKind kind, Direction direction,
                            CheckOptions const&) {
    return solveExactPolicyIteration(mdp, kind, direction);
}

template<typename ValueType>
std::vector<std::vector<std::size_t>> epsilonOptimalActions(SparseMdp<ValueType> const& mdp,
                                                            ValueResult<ValueType> const& result, Direction direction,
                                                            double rho) {
    ValueType slack = fromRational<ValueType>(toRational(rho));
    std::vector<std::vector<std::size_t>> sets(mdp.numStates());
    for (StateId s = 0; s < mdp.numStates(); ++s) {
        for (std::size_t r = mdp.groupStart[s]; r < mdp.groupStart[s + 1]; ++r) {
            bool keep;
            bool rowInfinite = false;
            for (std::size_t e = mdp.rowStart[r]; e < mdp.rowStart[r + 1]; ++e) {
                rowInfinite = rowInfinite || result.infinite[mdp.columns[e]];
            }
            if (result.infinite[s]) {
                keep = true;
            } else if (rowInfinite) {
                keep = direction == Direction::Max;
            } else {
                auto const& side = direction == Direction::Max ? result.upper : result.lower;
                ValueType q = mdp.target[s] ? side[s] : mdp.reward(r);
                if (!mdp.target[s]) {
                    for (std::size_t e = mdp.rowStart[r]; e < mdp.rowStart[r + 1]; ++e) {
                        q += mdp.values[e] * side[mdp.columns[e]];
                    }
                }
                keep = direction == Direction::Max ? q + slack >= result.lower[s] : q - slack <= result.upper[s];
            }
            if (keep) {
                sets[s].push_back(r);
            }
        }
    }
    return sets;
}

template<typename ValueType>
std::vector<bool> reachableUnder(SparseMdp<ValueType> const& mdp, std::vector<std::vector<std::size_t>> const& rows) {
    std::vector<bool> seen(mdp.numStates(), false);
    if (mdp.numStates() == 0) {
        return seen;
    }
    std::deque<StateId> queue{mdp.initial};
    seen[mdp.initial] = true;
    while (!queue.empty()) {
        StateId s = queue.front();
        queue.pop_front();
        if (s >= rows.size()) {
            continue;
        }
        for (std::size_t r : rows[s]) {
            for (std::size_t e = mdp.rowStart[r]; e < mdp.rowStart[r + 1]; ++e) {
                StateId t = mdp.columns[e];
                if (!seen[t]) {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    return seen;
}

template<typename ValueType>
ValueResult<ValueType> evaluateMarkovChain(SparseMdp<ValueType> const& chain, CheckKind kind, double precision) {
    CheckOptions options;
    options.precision = precision;
    options.scope = PrecisionScope::AllStates;
    return check(chain, kind, Direction::Max, options);
}

template<typename ValueType>
StateValues<ValueType> underlyingMdpValues(Problem<ValueType> const& problem, double precision) {
    auto sparse = toSparse(problem.pomdp, problem.spec);
    CheckOptions options;
    options.precision = precision;
    options.scope = PrecisionScope::AllStates;
    auto result = check(sparse, checkKindOf(problem.spec.kind), problem.spec.direction, options);
    return {std::move(result.lower), std::move(result.upper), std::move(result.infinite)};
}

template class SparseMdpBuilder<double>;
template class SparseMdpBuilder<Rational>;
template SparseMdp<double> toSparse(Pomdp<double> const&, Specification<double> const&);
template SparseMdp<Rational> toSparse(Pomdp<Rational> const&, Specification<Rational> const&);
template std::vector<std::vector<std::size_t>> epsilonOptimalActions(SparseMdp<double> const&,
                                                                     ValueResult<double> const&, Direction, double);
template std::vector<std::vector<std::size_t>> epsilonOptimalActions(SparseMdp<Rational> const&,
                                                                     ValueResult<Rational> const&, Direction, double);
template std::vector<bool> reachableUnder(SparseMdp<double> const&, std::vector<std::vector<std::size_t>> const&);
template std::vector<bool> reachableUnder(SparseMdp<Rational> const&, std::vector<std::vector<std::size_t>> const&);
template ValueResult<double> evaluateMarkovChain(SparseMdp<double> const&, CheckKind, double);
template ValueResult<Rational> evaluateMarkovChain(SparseMdp<Rational> const&, CheckKind, double);
template StateValues<double> underlyingMdpValues(Problem<double> const&, double);
template StateValues<Rational> underlyingMdpValues(Problem<Rational> const&, double);

namespace graph {
template std::vector<bool> prob0E(SparseMdp<double> const&);
template std::vector<bool> prob0E(SparseMdp<Rational> const&);
template std::vector<bool> prob0A(SparseMdp<double> const&);
template std::vector<bool> prob0A(SparseMdp<Rational> const&);
template std::vector<bool> prob1A(SparseMdp<double> const&);
template std::vector<bool> prob1A(SparseMdp<Rational> const&);
template std::vector<bool> prob1E(SparseMdp<double> const&);
template std::vector<bool> prob1E(SparseMdp<Rational> const&);
}  // namespace graph

}  // namespace pomdpv
