#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>

namespace pomdpv {

using Rational = mpq_class;

enum class Arithmetic { Exact, Float };

template<typename ValueType>
struct NumTraits;

template<>
struct NumTraits<double> {
    static constexpr bool exact = false;
    // row sums and belief masses
    static constexpr double sumTolerance = 1e-12;
    static constexpr double pruneThreshold = 1e-14;
};

template<>
struct NumTraits<Rational> {
    static constexpr bool exact = true;
};

// Accepts "n/d", integers and decimals with optional exponent ("0.125", "1e-3").
Rational parseRational(std::string_view text);

// Nearest double.
double roundToDouble(Rational const& q);

template<typename ValueType>
ValueType fromRational(Rational const& q);

template<>
inline Rational fromRational<Rational>(Rational const& q) {
    return q;
}

template<>
inline double fromRational<double>(Rational const& q) {
    return roundToDouble(q);
}

inline double toDouble(double v) {
    return v;
}

inline double toDouble(Rational const& v) {
    return v.get_d();
}

// Conversion to an exact rational; doubles are converted bit-exactly.
inline Rational toRational(Rational const& v) {
    return v;
}

inline Rational toRational(double v) {
    return Rational(v);
}

std::string toString(double v);
std::string toString(Rational const& v);

template<typename ValueType>
inline bool isZero(ValueType const& v) {
    return v == 0;
}

template<typename ValueType>
inline ValueType absValue(ValueType const& v) {
    return v < 0 ? ValueType(-v) : v;
}

inline double floorValue(double v) {
    return std::floor(v);
}

inline Rational floorValue(Rational const& v) {
    mpz_class q;
    mpz_fdiv_q(q.get_mpz_t(), v.get_num_mpz_t(), v.get_den_mpz_t());
    return Rational(q);
}

// Sum check for probability rows.
inline bool isOne(Rational const& v) {
    return v == 1;
}

inline bool isOne(double v) {
    return std::fabs(v - 1.0) <= NumTraits<double>::sumTolerance * 16;
}

inline std::size_t hashValue(double v) {
    return std::hash<double>{}(v);
}

inline std::size_t hashValue(Rational const& v) {
    auto limbHash = [](mpz_srcptr z) {
        std::size_t h = static_cast<std::size_t>(mpz_sgn(z)) * 0x9e3779b97f4a7c15ULL;
        std::size_t n = mpz_size(z);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= static_cast<std::size_t>(mpz_getlimbn(z, i)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    };
    std::size_t h = limbHash(v.get_num_mpz_t());
    return h ^ (limbHash(v.get_den_mpz_t()) * 31);
}

inline void hashCombine(std::size_t& seed, std::size_t value) {
    seed ^= value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace pomdpv
