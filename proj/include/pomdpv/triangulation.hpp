#pragma once

#include "pomdpv/belief.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace pomdpv {

template<typename ValueType>
struct TriangulationResult {
    std::vector<Belief<ValueType>> vertices;
    std::vector<ValueType> weights;

    std::size_t size() const { return vertices.size(); }
};

template<typename ValueType>
bool onGrid(Belief<ValueType> const& b, std::uint64_t eta);

// Freudenthal triangulation of b's support simplex at resolution eta.
template<typename ValueType>
TriangulationResult<ValueType> freudenthalNeighbourhood(Belief<ValueType> const& b, std::uint64_t eta);

// Convex weights reconstructing b from the given beliefs, or nullopt if b lies outside their hull.
template<typename ValueType>
std::optional<std::vector<ValueType>> vertexWeightsSolve(Belief<ValueType> const& b,
                                                         std::vector<Belief<ValueType>> const& neighbourhood);

// Largest eta' <= eta whose neighbourhood is smallest.
template<typename ValueType>
TriangulationResult<ValueType> dynamicNeighbourhood(Belief<ValueType> const& b, std::uint64_t eta,
                                                    std::uint64_t* chosen = nullptr);

template<typename ValueType>
double scoreBelief(Belief<ValueType> const& b, TriangulationResult<ValueType> const& tri);

enum class Scheme { Static, Dynamic };

struct Foundation {
    std::vector<std::uint64_t> resolution;
    Scheme scheme = Scheme::Static;
    std::uint64_t etaInit = 3;
    double growth = 2.0;

    std::uint64_t maxResolution() const;
};

Foundation makeFoundation(std::size_t numObservations, std::uint64_t etaInit, double growth,
                          Scheme scheme = Scheme::Static);

template<typename ValueType>
TriangulationResult<ValueType> triangulate(Belief<ValueType> const& b, Foundation const& f);

// min over the given belief scores, scaled by eta_z / max eta; 1 for an empty list.
double scoreObservation(ObsId z, std::vector<double> const& beliefScores, Foundation const& f);

struct FoundationExtension {
    Foundation foundation;
    std::vector<ObsId> extended;
    double nextRhoZ = 0.0;
};

// Observations scoring at most rhoZ get eta <- ceil(eta * growth).
FoundationExtension extendFoundation(Foundation const& f, std::vector<double> const& scores, double rhoZ, double fZ);

}  // namespace pomdpv
