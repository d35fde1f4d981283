#include "pomdpv/triangulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pomdpv {

namespace {

constexpr double kSnap = 1e-9;
constexpr double kTinyWeight = 1e-12;

// Cumulative coordinates eta * sum_{j >= i} b_j.
template<typename ValueType>
std::vector<ValueType> cumulative(Belief<ValueType> const& b, std::uint64_t eta) {
    std::size_t n = b.size();
    std::vector<ValueType> x(n);
    ValueType tail = 0;
    for (std::size_t i = n; i-- > 0;) {
        tail += b.probs[i];
        x[i] = tail * ValueType(static_cast<unsigned long>(eta));
    }
    x[0] = ValueType(static_cast<unsigned long>(eta));
    if constexpr (!NumTraits<ValueType>::exact) {
        for (auto& v : x) {
            double r = std::round(v);
            if (std::fabs(v - r) < kSnap) {
                v = r;
            }
        }
    }
    return x;
}

template<typename ValueType>
Belief<ValueType> fromCumulative(Belief<ValueType> const& b, std::vector<ValueType> const& u, std::uint64_t eta) {
    Belief<ValueType> v;
    v.obs = b.obs;
    ValueType scale = ValueType(static_cast<unsigned long>(eta));
    for (std::size_t i = 0; i < u.size(); ++i) {
        ValueType next = i + 1 < u.size() ? u[i + 1] : ValueType(0);
        ValueType diff = u[i] - next;
        if (!isZero(diff)) {
            v.support.push_back(b.support[i]);
            v.probs.push_back(diff / scale);
        }
    }
    return v;
}

}  // namespace

template<typename ValueType>
bool onGrid(Belief<ValueType> const& b, std::uint64_t eta) {
    for (auto const& x : cumulative(b, eta)) {
        if (x != floorValue(x)) {
            return false;
        }
    }
    return true;
}

template<typename ValueType>
TriangulationResult<ValueType> freudenthalNeighbourhood(Belief<ValueType> const& b, std::uint64_t eta) {
    if (eta == 0) {
        throw std::invalid_argument("resolution must be positive");
    }
    std::size_t n = b.size();
    auto x = cumulative(b, eta);
    std::vector<ValueType> v(n), d(n);
    bool grid = true;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = floorValue(x[i]);
        d[i] = x[i] - v[i];
        grid = grid && isZero(d[i]);
    }
    if (grid) {
        return {{b}, {ValueType(1)}};
    }
    std::vector<std::size_t> order(n - 1);
    std::iota(order.begin(), order.end(), 1);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return d[p] > d[q]; });

    std::vector<ValueType> weights(n);
    weights[0] = ValueType(1) - d[order[0]];
    for (std::size_t k = 1; k + 1 < n; ++k) {
        weights[k] = d[order[k - 1]] - d[order[k]];
    }
    weights[n - 1] = d[order[n - 2]];

    TriangulationResult<ValueType> result;
    std::vector<ValueType> u = v;
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) {
            u[order[k - 1]] += 1;
        }
        bool keep;
        if constexpr (NumTraits<ValueType>::exact) {
            keep = weights[k] > 0;
        } else {
            keep = weights[k] > kTinyWeight;
        }
        if (keep) {
            result.vertices.push_back(fromCumulative(b, u, eta));
            result.weights.push_back(weights[k]);
        }
    }
    if constexpr (!NumTraits<ValueType>::exact) {
        double total = 0;
        for (double w : result.weights) {
            total += w;
        }
        for (double& w : result.weights) {
            w /= total;
        }
    }
    return result;
}

template<typename ValueType>
std::optional<std::vector<ValueType>> vertexWeightsSolve(Belief<ValueType> const& b,
                                                         std::vector<Belief<ValueType>> const& neighbourhood) {
    std::size_t m = neighbourhood.size();
    if (m == 0) {
        return std::nullopt;
    }
    std::vector<StateId> states = b.support;
    for (auto const& v : neighbourhood) {
        if (v.obs != b.obs) {
            throw std::invalid_argument("neighbourhood belief with another observation");
        }
        states.insert(states.end(), v.support.begin(), v.support.end());
    }
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());

    auto isNull = [](ValueType const& x) {
        if constexpr (NumTraits<ValueType>::exact) {
            return x == 0;
        } else {
            return std::fabs(x) < 1e-12;
        }
    };

    // rows: one per state plus the normalisation row; columns: weights then rhs
    std::size_t rowsCount = states.size() + 1;
    std::vector<std::vector<ValueType>> a(rowsCount, std::vector<ValueType>(m + 1, ValueType(0)));
    for (std::size_t r = 0; r < states.size(); ++r) {
        for (std::size_t k = 0; k < m; ++k) {
            a[r][k] = neighbourhood[k].prob(states[r]);
        }
        a[r][m] = b.prob(states[r]);
    }
    for (std::size_t k = 0; k <= m; ++k) {
        a[states.size()][k] = ValueType(1);
    }

    std::vector<std::size_t> pivotCol;
    std::size_t row = 0;
    for (std::size_t col = 0; col < m && row < rowsCount; ++col) {
        std::size_t best = row;
        for (std::size_t r = row; r < rowsCount; ++r) {
            if (absValue(a[r][col]) > absValue(a[best][col])) {
                best = r;
            }
        }
        if (isNull(a[best][col])) {
            continue;
        }
        std::swap(a[best], a[row]);
        ValueType inv = ValueType(1) / a[row][col];
        for (std::size_t k = col; k <= m; ++k) {
            a[row][k] *= inv;
        }
        for (std::size_t r = 0; r < rowsCount; ++r) {
            if (r == row || isNull(a[r][col])) {
                continue;
            }
            ValueType f = a[r][col];
            for (std::size_t k = col; k <= m; ++k) {
                a[r][k] -= f * a[row][k];
            }
        }
        pivotCol.push_back(col);
        ++row;
    }
    for (std::size_t r = row; r < rowsCount; ++r) {
        if (!isNull(a[r][m])) {
            return std::nullopt;
        }
    }
    // free variables stay at zero
    std::vector<ValueType> w(m, ValueType(0));
    for (std::size_t r = 0; r < pivotCol.size(); ++r) {
        w[pivotCol[r]] = a[r][m];
    }
    for (auto& x : w) {
        if (x < 0) {
            if (isNull(x)) {
                x = 0;
            } else {
                return std::nullopt;
            }
        }
    }
    return w;
}

template<typename ValueType>
TriangulationResult<ValueType> dynamicNeighbourhood(Belief<ValueType> const& b, std::uint64_t eta,
                                                    std::uint64_t* chosen) {
    if (eta == 0) {
        throw std::invalid_argument("resolution must be positive");
    }
    std::uint64_t best = 1;
    std::size_t bestSize = static_cast<std::size_t>(-1);
    TriangulationResult<ValueType> bestResult;
    for (std::uint64_t e = 1; e <= eta; ++e) {
        auto tri = freudenthalNeighbourhood(b, e);
        if (tri.size() <= bestSize) {
            bestSize = tri.size();
            best = e;
            bestResult = std::move(tri);
        }
    }
    if (chosen != nullptr) {
        *chosen = best;
    }
    return bestResult;
}

template<typename ValueType>
double scoreBelief(Belief<ValueType> const& b, TriangulationResult<ValueType> const& tri) {
    std::size_t n = b.size();
    if (n <= 1) {
        return 1.0;
    }
    double best = 0.0;
    for (auto const& w : tri.weights) {
        double s = (static_cast<double>(n) * toDouble(w) - 1.0) / static_cast<double>(n - 1);
        best = std::max(best, s);
    }
    return std::clamp(best, 0.0, 1.0);
}

std::uint64_t Foundation::maxResolution() const {
    std::uint64_t m = 1;
    for (auto r : resolution) {
        m = std::max(m, r);
    }
    return m;
}

Foundation makeFoundation(std::size_t numObservations, std::uint64_t etaInit, double growth, Scheme scheme) {
    if (etaInit == 0 || !(growth > 1.0)) {
        throw std::invalid_argument("foundation needs eta >= 1 and growth > 1");
    }
    Foundation f;
    f.resolution.assign(numObservations, etaInit);
    f.scheme = scheme;
    f.etaInit = etaInit;
    f.growth = growth;
    return f;
}

template<typename ValueType>
TriangulationResult<ValueType> triangulate(Belief<ValueType> const& b, Foundation const& f) {
    std::uint64_t eta = f.resolution.at(b.obs);
    if (f.scheme == Scheme::Dynamic) {
        return dynamicNeighbourhood(b, eta);
    }
    return freudenthalNeighbourhood(b, eta);
}

double scoreObservation(ObsId z, std::vector<double> const& beliefScores, Foundation const& f) {
    if (beliefScores.empty()) {
        return 1.0;
    }
    double m = *std::min_element(beliefScores.begin(), beliefScores.end());
    return m * static_cast<double>(f.resolution.at(z)) / static_cast<double>(f.maxResolution());
}

FoundationExtension extendFoundation(Foundation const& f, std::vector<double> const& scores, double rhoZ, double fZ) {
    FoundationExtension ext{f, {}, rhoZ + fZ * (1.0 - rhoZ)};
    for (ObsId z = 0; z < f.resolution.size(); ++z) {
        double score = z < scores.size() ? scores[z] : 1.0;
        if (score <= rhoZ) {
            auto old = f.resolution[z];
            auto grown = static_cast<std::uint64_t>(std::ceil(static_cast<double>(old) * f.growth));
            ext.foundation.resolution[z] = std::max(grown, old + 1);
            ext.extended.push_back(z);
        }
    }
    return ext;
}

#define POMDPV_INSTANTIATE(V)                                                                                \
    template bool onGrid(Belief<V> const&, std::uint64_t);                                                   \
    template TriangulationResult<V> freudenthalNeighbourhood(Belief<V> const&, std::uint64_t);               \
    template std::optional<std::vector<V>> vertexWeightsSolve(Belief<V> const&, std::vector<Belief<V>> const&); \
    template TriangulationResult<V> dynamicNeighbourhood(Belief<V> const&, std::uint64_t, std::uint64_t*);   \
    template double scoreBelief(Belief<V> const&, TriangulationResult<V> const&);                            \
    template TriangulationResult<V> triangulate(Belief<V> const&, Foundation const&);

POMDPV_INSTANTIATE(double)
POMDPV_INSTANTIATE(Rational)

#undef POMDPV_INSTANTIATE

}  // namespace pomdpv
