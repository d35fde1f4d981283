#include "pomdpv/numeric.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pomdpv {

namespace {

bool allDigits(std::string_view s) {
    if (s.empty()) {
        return false;
    }
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            return false;
        }
    }
    return true;
}

mpz_class parseInteger(std::string_view s) {
    bool negative = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    if (!allDigits(s)) {
        throw std::invalid_argument("malformed number");
    }
    mpz_class z(std::string(s), 10);
    return negative ? mpz_class(-z) : z;
}

Rational scaleByPowerOfTen(Rational q, long exponent) {
    if (exponent == 0) {
        return q;
    }
    mpz_class p;
    mpz_ui_pow_ui(p.get_mpz_t(), 10, static_cast<unsigned long>(exponent < 0 ? -exponent : exponent));
    if (exponent > 0) {
        q *= p;
    } else {
        q /= p;
    }
    return q;
}

}  // namespace

Rational parseRational(std::string_view text) {
    if (text.empty()) {
        throw std::invalid_argument("empty number");
    }
    auto slash = text.find('/');
    if (slash != std::string_view::npos) {
        mpz_class num = parseInteger(text.substr(0, slash));
        std::string_view denText = text.substr(slash + 1);
        if (!allDigits(denText)) {
            throw std::invalid_argument("malformed denominator");
        }
        mpz_class den(std::string(denText), 10);
        if (den == 0) {
            throw std::invalid_argument("zero denominator");
        }
        Rational q(num, den);
        q.canonicalize();
        return q;
    }
    long exponent = 0;
    auto ePos = text.find_first_of("eE");
    if (ePos != std::string_view::npos) {
        mpz_class e = parseInteger(text.substr(ePos + 1));
        if (!e.fits_slong_p() || abs(e) > 4096) {
            throw std::invalid_argument("exponent out of range");
        }
        exponent = e.get_si();
        text = text.substr(0, ePos);
    }
    auto dot = text.find('.');
    if (dot == std::string_view::npos) {
        return scaleByPowerOfTen(Rational(parseInteger(text)), exponent);
    }
    std::string_view intPart = text.substr(0, dot);
    std::string_view fracPart = text.substr(dot + 1);
    bool negative = false;
    if (!intPart.empty() && (intPart.front() == '-' || intPart.front() == '+')) {
        negative = intPart.front() == '-';
        intPart.remove_prefix(1);
    }
    if ((intPart.empty() && fracPart.empty()) || (!intPart.empty() && !allDigits(intPart)) ||
        (!fracPart.empty() && !allDigits(fracPart))) {
        throw std::invalid_argument("malformed decimal");
    }
    std::string digits = std::string(intPart) + std::string(fracPart);
    if (digits.empty()) {
        digits = "0";
    }
    mpz_class num(digits, 10);
    mpz_class den;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, fracPart.size());
    Rational q(negative ? mpz_class(-num) : num, den);
    q.canonicalize();
    return scaleByPowerOfTen(q, exponent);
}

double roundToDouble(Rational const& q) {
    double d = q.get_d();
    if (!std::isfinite(d)) {
        return d;
    }
    // get_d truncates; pick the nearer neighbour.
    double best = d;
    Rational bestErr = abs(Rational(d) - q);
    for (double cand : {std::nextafter(d, -kInfinity), std::nextafter(d, kInfinity)}) {
        if (!std::isfinite(cand)) {
            continue;
        }
        Rational err = abs(Rational(cand) - q);
        if (err < bestErr) {
            best = cand;
            bestErr = err;
        }
    }
    return best;
}

std::string toString(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string toString(Rational const& v) {
    return v.get_str();
}

}  // namespace pomdpv
