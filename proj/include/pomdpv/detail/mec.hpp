#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace pomdpv::graph {

namespace detail {

constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);

// Iterative Tarjan over the states in `active`, following rows with allowed[r].
// Returns the SCC index per state (kUnvisited for inactive states) and the SCC count.
template<typename ValueType>
std::size_t sccs(SparseMdp<ValueType> const& mdp, std::vector<bool> const& active, std::vector<bool> const& allowed,
                 std::vector<std::size_t>& component) {
    std::size_t n = mdp.numStates();
    component.assign(n, kUnvisited);
    std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
    std::vector<bool> onStack(n, false);
    std::vector<StateId> stack;
    struct Frame {
        StateId state;
        std::size_t row;
        std::size_t entry;
    };
    std::vector<Frame> callStack;
    std::size_t counter = 0, numComponents = 0;

    auto enter = [&](StateId s) {
        index[s] = low[s] = counter++;
        stack.push_back(s);
        onStack[s] = true;
        callStack.push_back({s, mdp.groupStart[s], kUnvisited});
    };

    for (StateId root = 0; root < n; ++root) {
        if (!active[root] || index[root] != kUnvisited) {
            continue;
        }
        enter(root);
        while (!callStack.empty()) {
            Frame& f = callStack.back();
            StateId s = f.state;
            bool descended = false;
            while (f.row < mdp.groupStart[s + 1]) {
                if (!allowed[f.row]) {
                    ++f.row;
                    f.entry = kUnvisited;
                    continue;
                }
                if (f.entry == kUnvisited) {
                    f.entry = mdp.rowStart[f.row];
                }
                if (f.entry >= mdp.rowStart[f.row + 1]) {
                    ++f.row;
                    f.entry = kUnvisited;
                    continue;
                }
                StateId t = mdp.columns[f.entry++];
                if (!active[t]) {
                    continue;
                }
                if (index[t] == kUnvisited) {
                    enter(t);
                    descended = true;
                    break;
                }
                if (onStack[t]) {
                    low[s] = std::min(low[s], index[t]);
                }
            }
            if (descended) {
                continue;
            }
            if (low[s] == index[s]) {
                StateId t;
                do {
                    t = stack.back();
                    stack.pop_back();
                    onStack[t] = false;
                    component[t] = numComponents;
                } while (t != s);
                ++numComponents;
            }
            callStack.pop_back();
            if (!callStack.empty()) {
                StateId parent = callStack.back().state;
                low[parent] = std::min(low[parent], low[s]);
            }
        }
    }
    return numComponents;
}

}  // namespace detail

template<typename ValueType, typename RowFilter>
std::vector<EndComponent> maximalEndComponents(SparseMdp<ValueType> const& mdp, std::vector<bool> const& states,
                                               RowFilter rowAllowed) {
    std::size_t n = mdp.numStates();
    std::vector<bool> active = states;
    std::vector<bool> allowed(mdp.numRows(), false);
    for (StateId s = 0; s < n; ++s) {
        if (!active[s]) {
            continue;
        }
        for (std::size_t r = mdp.groupStart[s]; r < mdp.groupStart[s + 1]; ++r) {
            allowed[r] = rowAllowed(r);
        }
    }
    std::vector<std::size_t> component;
    while (true) {
        detail::sccs(mdp, active, allowed, component);
        bool changed = false;
        for (StateId s = 0; s < n; ++s) {
            if (!active[s]) {
                continue;
            }
            bool any = false;
            for (std::size_t r = mdp.groupStart[s]; r < mdp.groupStart[s + 1]; ++r) {
                if (!allowed[r]) {
                    continue;
                }
                for (std::size_t e = mdp.rowStart[r]; e < mdp.rowStart[r + 1]; ++e) {
                    StateId t = mdp.columns[e];
                    if (!active[t] || component[t] != component[s]) {
                        allowed[r] = false;
                        changed = true;
                        break;
                    }
                }
                any = any || allowed[r];
            }
            if (!any) {
                active[s] = false;
                changed = true;
            }
        }
        if (!changed) {
            break;
        }
    }
    std::vector<EndComponent> result;
    std::vector<std::size_t> slot(n, detail::kUnvisited);
    for (StateId s = 0; s < n; ++s) {
        if (!active[s]) {
            continue;
        }
        std::size_t c = component[s];
        if (slot[c] == detail::kUnvisited) {
            slot[c] = result.size();
            result.push_back({});
        }
        result[slot[c]].states.push_back(s);
    }
    return result;
}

}  // namespace pomdpv::graph
