#include "doctest.h"

#include "reflectlab/number.hpp"

#include <stdexcept>

using reflectlab::parse_rational;
using reflectlab::Rational;

TEST_CASE("parse_rational accepts fractions, decimals and exponents exactly") {
    CHECK(parse_rational("3") == Rational(3));
    CHECK(parse_rational("-1/4") == Rational(-1, 4));
    CHECK(parse_rational("6/8") == Rational(3, 4));
    CHECK(parse_rational("0.125") == Rational(1, 8));
    CHECK(parse_rational("-.5") == Rational(-1, 2));
    CHECK(parse_rational("1e-3") == Rational(1, 1000));
    CHECK(parse_rational("2.5e2") == Rational(250));
    CHECK(parse_rational("0.1") == Rational(1, 10));
    CHECK(parse_rational("010/08") == Rational(5, 4));
}

TEST_CASE("parse_rational rejects malformed text") {
    CHECK_THROWS_AS(parse_rational(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_rational("1/0"), std::invalid_argument);
    CHECK_THROWS_AS(parse_rational("abc"), std::invalid_argument);
    CHECK_THROWS_AS(parse_rational("1..2"), std::invalid_argument);
    CHECK_THROWS_AS(parse_rational("1/-2"), std::invalid_argument);
}

TEST_CASE("canonical text form round-trips") {
    for (const char* s : {"0", "7", "-3/5", "22/7", "-1"}) {
        CHECK(reflectlab::to_string(parse_rational(s)) == s);
    }
    CHECK(reflectlab::to_string(0.1) == "0.1");
    CHECK(reflectlab::to_string(1e-10) == "1e-10");
}

TEST_CASE("scalar helpers") {
    CHECK(reflectlab::clamp_between(Rational(0), Rational(2), Rational(1)) == 1);
    CHECK(reflectlab::clamp_between(0.0, -2.0, 1.0) == 0.0);
    CHECK(reflectlab::positive_part(Rational(-3)) == 0);
    CHECK(reflectlab::abs_value(Rational(-3, 2)) == Rational(3, 2));
}
