#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>

namespace reflectlab {

/// Exact rational scalar. Expression templates are disabled so that `auto`
/// and generic code always see a concrete value type.
using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational,
                                               boost::multiprecision::et_off>;
using BigInt = boost::multiprecision::number<boost::multiprecision::gmp_int,
                                             boost::multiprecision::et_off>;

template <class Num>
inline constexpr bool is_exact_v = std::is_same_v<Num, Rational>;

/// Parses "3", "-1/4", "0.125", "1e-3", "2.5e2" into an exact rational.
/// Throws std::invalid_argument on malformed input.
Rational parse_rational(std::string_view text);

/// Canonical text form: "p/q" in lowest terms, "p" when q == 1.
std::string to_string(const Rational& q);
/// Shortest round-trip decimal form.
std::string to_string(double x);

template <class Num>
Num from_rational(const Rational& q) {
    if constexpr (is_exact_v<Num>) {
        return q;
    } else {
        return q.convert_to<double>();
    }
}

inline double to_double(const Rational& q) { return q.convert_to<double>(); }
inline double to_double(double x) { return x; }

template <class Num>
Num abs_value(const Num& x) {
    return x < Num(0) ? Num(-x) : x;
}

template <class Num>
Num positive_part(const Num& x) {
    return x > Num(0) ? x : Num(0);
}

template <class Num>
Num max_of(const Num& a, const Num& b) {
    return a < b ? b : a;
}

template <class Num>
Num min_of(const Num& a, const Num& b) {
    return b < a ? b : a;
}

/// median(lo, x, hi) for lo <= hi.
template <class Num>
Num clamp_between(const Num& lo, const Num& x, const Num& hi) {
    if (x < lo) return lo;
    if (hi < x) return hi;
    return x;
}

/// Arithmetic mode of a run: exact rationals, or doubles with a comparison
/// tolerance.
struct NumericMode {
    bool exact = true;
    double tol = 1e-10;

    static NumericMode rational() { return {true, 0.0}; }
    static NumericMode floating(double tol = 1e-10) { return {false, tol}; }
};

}  // namespace reflectlab
