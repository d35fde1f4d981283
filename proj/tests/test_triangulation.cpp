#include <doctest.h>

#include "oracles.hpp"
#include "pomdpv/triangulation.hpp"

#include <cmath>

using namespace pomdpv;
using Q = Rational;
namespace r = running;

namespace {

Belief<Q> raw(std::vector<StateId> support, std::vector<Q> probs) { return {0, std::move(support), std::move(probs)}; }

Belief<Q> randomBelief(std::mt19937_64& rng, std::size_t n) {
    std::vector<long> w(n);
    long total = 0;
    for (auto& x : w) {
        x = 1 + static_cast<long>(rng() % 97);
        total += x;
    }
    Belief<Q> b;
    for (std::size_t i = 0; i < n; ++i) {
        b.support.push_back(static_cast<StateId>(i));
        b.probs.push_back(oracle::frac(w[i], total));
    }
    return b;
}

bool onGridByDefinition(Belief<Q> const& v, std::uint64_t eta) {
    for (auto const& p : v.probs) {
        Q scaled = p * Q(static_cast<long>(eta));
        if (scaled.get_den() != 1) {
            return false;
        }
    }
    return true;
}

void checkReconstruction(Belief<Q> const& b, TriangulationResult<Q> const& tri, std::uint64_t eta) {
    Q total = 0;
    std::map<StateId, Q> sum;
    for (std::size_t k = 0; k < tri.size(); ++k) {
        REQUIRE(tri.weights[k] > 0);
        total += tri.weights[k];
        REQUIRE(onGridByDefinition(tri.vertices[k], eta));
        Q mass = 0;
        for (std::size_t i = 0; i < tri.vertices[k].size(); ++i) {
            sum[tri.vertices[k].support[i]] += tri.weights[k] * tri.vertices[k].probs[i];
            mass += tri.vertices[k].probs[i];
        }
        REQUIRE(mass == 1);
    }
    REQUIRE(total == 1);
    for (std::size_t i = 0; i < b.size(); ++i) {
        REQUIRE(sum[b.support[i]] == b.probs[i]);
    }
    std::size_t nonzero = 0;
    for (auto const& [s, p] : sum) {
        nonzero += p != 0;
    }
    REQUIRE(nonzero == b.size());
    REQUIRE(tri.size() <= b.size());
}

}  // namespace

TEST_CASE("two-state neighbourhood") {
    auto b = raw({r::s3, r::s4}, {Q(2, 3), Q(1, 3)});
    auto tri = freudenthalNeighbourhood(b, 2);
    REQUIRE(tri.size() == 2);
    CHECK(tri.vertices[0] == raw({r::s3}, {Q(1)}));
    CHECK(tri.weights[0] == Q(1, 3));
    CHECK(tri.vertices[1] == raw({r::s3, r::s4}, {Q(1, 2), Q(1, 2)}));
    CHECK(tri.weights[1] == Q(2, 3));
    // independent linear solve: 2/3 = w1 + w2/2, w1 + w2 = 1
    auto w = vertexWeightsSolve(b, tri.vertices);
    REQUIRE(w);
    CHECK(*w == tri.weights);
    CHECK(scoreBelief(b, tri) == doctest::Approx(1.0 / 3));
}

TEST_CASE("grid points map to themselves") {
    auto b = raw({0, 1, 2}, {Q(1, 4), Q(1, 2), Q(1, 4)});
    CHECK(onGrid(b, 4));
    CHECK_FALSE(onGrid(b, 3));
    auto tri = freudenthalNeighbourhood(b, 4);
    REQUIRE(tri.size() == 1);
    CHECK(tri.vertices[0] == b);
    CHECK(tri.weights[0] == 1);
    CHECK(scoreBelief(b, tri) == 1.0);
}

TEST_CASE("three-state belief against the generic solver") {
    auto b5 = raw({r::s0, r::s5, r::s6}, {Q(1, 2), Q(1, 6), Q(1, 3)});
    for (std::uint64_t eta = 1; eta <= 8; ++eta) {
        auto tri = freudenthalNeighbourhood(b5, eta);
        checkReconstruction(b5, tri, eta);
        auto w = vertexWeightsSolve(b5, tri.vertices);
        REQUIRE(w);
        CHECK(*w == tri.weights);
    }
}

TEST_CASE("vertex weights solve") {
    auto b5 = raw({r::s0, r::s5, r::s6}, {Q(1, 2), Q(1, 6), Q(1, 3)});
    std::vector<Belief<Q>> hood = {raw({r::s0}, {Q(1)}), raw({r::s5}, {Q(1)}),
                                   raw({r::s5, r::s6}, {Q(1, 4), Q(3, 4)})};
    auto w = vertexWeightsSolve(b5, hood);
    REQUIRE(w);
    CHECK(*w == std::vector<Q>{Q(1, 2), Q(1, 18), Q(4, 9)});
    CHECK(*vertexWeightsSolve(b5, {b5}) == std::vector<Q>{Q(1)});
    CHECK_FALSE(vertexWeightsSolve(raw({r::s1}, {Q(1)}), {raw({r::s2}, {Q(1)})}));
    // float mode agrees
    Belief<double> bd{0, {r::s0, r::s5, r::s6}, {0.5, 1.0 / 6, 1.0 / 3}};
    std::vector<Belief<double>> hd = {{0, {r::s0}, {1.0}}, {0, {r::s5}, {1.0}}, {0, {r::s5, r::s6}, {0.25, 0.75}}};
    auto wd = vertexWeightsSolve(bd, hd);
    REQUIRE(wd);
    CHECK((*wd)[1] == doctest::Approx(1.0 / 18));
}

TEST_CASE("dynamic neighbourhoods") {
    auto sizeAt = [](Belief<Q> const& b, std::uint64_t e) { return freudenthalNeighbourhood(b, e).size(); };
    auto expected = [&](Belief<Q> const& b, std::uint64_t etaZ) {
        std::size_t best = static_cast<std::size_t>(-1);
        std::uint64_t arg = 0;
        for (std::uint64_t e = 1; e <= etaZ; ++e) {
            if (sizeAt(b, e) <= best) {
                best = sizeAt(b, e);
                arg = e;
            }
        }
        return arg;
    };
    std::uint64_t chosen = 0;
    auto grid2 = raw({0, 1}, {Q(1, 2), Q(1, 2)});
    auto tri = dynamicNeighbourhood(grid2, 12, &chosen);
    CHECK(chosen == 12);
    CHECK(chosen == expected(grid2, 12));
    CHECK(tri.size() == 1);

    auto dirac = raw({3}, {Q(1)});
    dynamicNeighbourhood(dirac, 7, &chosen);
    CHECK(chosen == 7);

    auto generic = raw({0, 1, 2}, {Q(7, 19), Q(5, 19), Q(7, 19)});
    tri = dynamicNeighbourhood(generic, 3, &chosen);
    CHECK(chosen == 3);
    CHECK(chosen == expected(generic, 3));
    CHECK(tri.size() == 3);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 300; ++i) {
        auto b = randomBelief(rng, 1 + rng() % 4);
        std::uint64_t etaZ = 1 + rng() % 10;
        auto dyn = dynamicNeighbourhood(b, etaZ, &chosen);
        CHECK(chosen == expected(b, etaZ));
        CHECK(dyn.size() <= freudenthalNeighbourhood(b, etaZ).size());
        checkReconstruction(b, dyn, chosen);
    }
}

TEST_CASE("scores") {
    TriangulationResult<Q> uniform;
    for (int k = 0; k < 3; ++k) {
        uniform.vertices.push_back(raw({static_cast<StateId>(k)}, {Q(1)}));
        uniform.weights.push_back(Q(1, 3));
    }
    CHECK(scoreBelief(raw({0, 1, 2}, {Q(1, 3), Q(1, 3), Q(1, 3)}), uniform) == doctest::Approx(0.0));
    auto dirac = raw({4}, {Q(1)});
    CHECK(scoreBelief(dirac, freudenthalNeighbourhood(dirac, 3)) == 1.0);

    auto f = makeFoundation(2, 3, 2.0);
    f.resolution[1] = 6;
    CHECK(scoreObservation(0, {1.0 / 3}, f) == doctest::Approx(1.0 / 6));
    CHECK(scoreObservation(0, {}, f) == 1.0);
    CHECK(scoreObservation(1, {1.0, 1.0}, f) == 1.0);
}

TEST_CASE("foundation extension") {
    auto f = makeFoundation(2, 3, 2.0);
    auto ext = extendFoundation(f, {0.05, 0.9}, 0.1, 0.1);
    CHECK(ext.extended == std::vector<ObsId>{0});
    CHECK(ext.foundation.resolution == std::vector<std::uint64_t>{6, 3});
    CHECK(ext.nextRhoZ == doctest::Approx(0.19));
    auto again = extendFoundation(ext.foundation, {1.0, 1.0}, ext.nextRhoZ, 0.1);
    CHECK(again.extended.empty());
    CHECK(again.foundation.resolution == ext.foundation.resolution);
    CHECK(again.nextRhoZ == doctest::Approx(0.271));
    double rho = 0.1;
    for (int i = 0; i < 200; ++i) {
        rho = extendFoundation(f, {}, rho, 0.1).nextRhoZ;
    }
    CHECK(rho == doctest::Approx(1.0));

    auto g = makeFoundation(1, 3, std::sqrt(2.0));
    auto grown = extendFoundation(g, {0.0}, 0.1, 0.05);
    CHECK(grown.foundation.resolution[0] == 5);
    CHECK_THROWS(makeFoundation(1, 0, 2.0));
    CHECK_THROWS(makeFoundation(1, 3, 1.0));
}

TEST_CASE("random rational beliefs") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 2000; ++i) {
        auto b = randomBelief(rng, 1 + rng() % 6);
        std::uint64_t eta = 1 + rng() % 8;
        auto tri = freudenthalNeighbourhood(b, eta);
        checkReconstruction(b, tri, eta);
        CHECK((tri.size() == 1) == onGrid(b, eta));
        CHECK(freudenthalNeighbourhood(b, eta).weights == tri.weights);
    }
}

TEST_CASE("float triangulation stays convex") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 2000; ++i) {
        auto bq = randomBelief(rng, 1 + rng() % 6);
        Belief<double> b{0, bq.support, {}};
        for (auto const& p : bq.probs) {
            b.probs.push_back(toDouble(p));
        }
        std::uint64_t eta = 1 + rng() % 12;
        auto tri = freudenthalNeighbourhood(b, eta);
        double total = 0;
        std::vector<double> sum(b.size(), 0.0);
        for (std::size_t k = 0; k < tri.size(); ++k) {
            total += tri.weights[k];
            CHECK(onGrid(tri.vertices[k], eta));
            for (std::size_t j = 0; j < tri.vertices[k].size(); ++j) {
                sum[tri.vertices[k].support[j]] += tri.weights[k] * tri.vertices[k].probs[j];
            }
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t j = 0; j < b.size(); ++j) {
            CHECK(sum[j] == doctest::Approx(b.probs[j]).epsilon(1e-9));
        }
    }
}
