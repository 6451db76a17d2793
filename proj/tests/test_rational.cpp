#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <numeric>
#include <random>

#include "semimarkov/rational.hpp"

using namespace semimarkov;

TEST_CASE("BigInt small arithmetic") {
    CHECK(BigInt(0).is_zero());
    CHECK((BigInt(7) + BigInt(-7)).is_zero());
    CHECK(BigInt(123456789) * BigInt(987654321) == BigInt(121932631112635269LL));
    CHECK(BigInt(-5) + BigInt(3) == BigInt(-2));
    CHECK(BigInt(5) - BigInt(8) == BigInt(-3));
    CHECK(BigInt(1).shifted_left(40) == BigInt(1099511627776LL));
    CHECK(BigInt(1099511627776LL).shifted_right(40) == BigInt(1));
    CHECK(BigInt::compare(BigInt(-10), BigInt(2)) < 0);
}

TEST_CASE("BigInt divmod and gcd against 128-bit arithmetic") {
    std::mt19937_64 rng(42);
    for (int it = 0; it < 2000; ++it) {
        long long a = static_cast<long long>(rng() >> 2) - (1LL << 61);
        long long b = static_cast<long long>(rng() >> 20) + 1;
        BigInt q, r;
        BigInt::divmod_magnitude(BigInt(a), BigInt(b), q, r);
        unsigned long long am = a < 0 ? -(unsigned long long)a : a;
        CHECK(q == BigInt(static_cast<long long>(am / (unsigned long long)b)));
        CHECK(r == BigInt(static_cast<long long>(am % (unsigned long long)b)));
        long long g1 = std::gcd(a < 0 ? -a : a, b);
        CHECK(BigInt::gcd(BigInt(a), BigInt(b)) == BigInt(g1));
    }
}

TEST_CASE("BigInt multi-limb identities") {
    // (2^200 + 1)(2^200 - 1) = 2^400 - 1
    BigInt p = BigInt(1).shifted_left(200) + BigInt(1);
    BigInt m = BigInt(1).shifted_left(200) - BigInt(1);
    CHECK(p * m == BigInt(1).shifted_left(400) - BigInt(1));
    BigInt q, r;
    BigInt::divmod_magnitude(BigInt(1).shifted_left(400) - BigInt(1), p, q, r);
    CHECK(q == m);
    CHECK(r.is_zero());
    CHECK((BigInt(1).shifted_left(100)).to_string() == "1267650600228229401496703205376");
}

TEST_CASE("Rational arithmetic and normalization") {
    Rational a(1, 2), b(1, 3);
    CHECK((a + b) == Rational(5, 6));
    CHECK((a - b) == Rational(1, 6));
    CHECK((a * b) == Rational(1, 6));
    CHECK((a / b) == Rational(3, 2));
    CHECK(Rational(6, -4) == Rational(-3, 2));
    CHECK(Rational(0, 7) == Rational(0));
    CHECK(Rational(2, 4).to_string() == "1/2");
    CHECK(Rational(1, 3) < Rational(1, 2));
    CHECK((-Rational(1, 2)).to_double() == -0.5);
}

TEST_CASE("Rational::from_double is exact on dyadic values") {
    CHECK(Rational::from_double(0.5) == Rational(1, 2));
    CHECK(Rational::from_double(-0.375) == Rational(-3, 8));
    CHECK(Rational::from_double(3.0) == Rational(3));
    CHECK(Rational::from_double(0.0) == Rational(0));
    // 0.1 is not 1/10 in binary; conversion must reproduce the double bit
    // pattern, not the decimal intent
    Rational tenth = Rational::from_double(0.1);
    CHECK(tenth != Rational(1, 10));
    CHECK(tenth.to_double() == 0.1);
    std::mt19937_64 rng(7);
    for (int it = 0; it < 500; ++it) {
        double d = std::ldexp(static_cast<double>(rng() >> 11) - (1LL << 52), -30 + (int)(rng() % 60));
        if (!std::isfinite(d)) continue;
        CHECK(Rational::from_double(d).to_double() == d);
    }
}

TEST_CASE("Rational powers") {
    CHECK(Rational(2).pow(10) == Rational(1024));
    CHECK(Rational(1, 2).pow(3) == Rational(1, 8));
    CHECK(Rational(3, 2).pow(0) == Rational(1));
    CHECK(Rational(2).pow(-2) == Rational(1, 4));
}
