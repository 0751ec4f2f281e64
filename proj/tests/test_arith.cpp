#include <catch2/catch_amalgamated.hpp>
#include <vector>

#include "twm/arith.hpp"

using namespace twm;
using Catch::Matchers::WithinAbs;

namespace {

// Trial-division oracle, independent of the Miller-Rabin path.
bool is_prime_trial(int64_t n) {
    if (n < 2) return false;
    for (int64_t d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

} // namespace

TEST_CASE("mod_pow matches repeated multiplication") {
    // (2, 10, 1000): direct repeated multiplication gives 1024 mod 1000 = 24
    int64_t direct = 1;
    for (int i = 0; i < 10; ++i) direct = direct * 2 % 1000;
    REQUIRE(direct == 24);
    REQUIRE(mod_pow(2, 10, 1000).value == 24);
    REQUIRE(mod_pow(5, 0, 7).value == 1);
    // Fermat check by direct product: 3^6 mod 7
    int64_t f = 1;
    for (int i = 0; i < 6; ++i) f = f * 3 % 7;
    REQUIRE(f == 1);
    REQUIRE(mod_pow(3, 6, 7).value == 1);
    // wide operands stay exact
    REQUIRE(mod_pow(1234567891011LL, 3, 1000000007LL).value ==
            mod_mul(mod_mul(1234567891011LL, 1234567891011LL, 1000000007LL), 1234567891011LL,
                    1000000007LL));
    REQUIRE(mod_pow(7, 5, 1).value == 0);
}

TEST_CASE("mod_inverse") {
    SECTION("exhaustive search oracle at small primes") {
        for (int64_t q : {3, 5, 7, 11, 13, 97}) {
            for (int64_t a = 1; a < q; ++a) {
                int64_t expected = -1;
                for (int64_t x = 1; x < q; ++x)
                    if (a * x % q == 1) { expected = x; break; }
                REQUIRE(mod_inverse(a, q).value == expected);
            }
        }
    }
    REQUIRE(mod_inverse(3, 7).value == 5);
    REQUIRE(mod_inverse(1, 9973).value == 1);
    REQUIRE_THROWS_AS(mod_inverse(6, 9), NotInvertible);
    SECTION("property: a * inv(a) = 1 mod q for all a, all primes up to 1000") {
        for (int64_t q = 2; q <= 1000; ++q) {
            if (!is_prime_trial(q)) continue;
            for (int64_t a = 1; a < q; ++a)
                if (mod_mul(a, mod_inverse(a, q).value, q) != 1)
                    FAIL("inverse fails at a=" << a << " q=" << q);
        }
    }
}

TEST_CASE("is_prime is exact against trial division") {
    for (int64_t n = 1; n <= 20000; ++n) REQUIRE(is_prime(n) == is_prime_trial(n));
    REQUIRE(is_prime(2));
    REQUIRE_FALSE(is_prime(1));
    REQUIRE(is_prime(1000000007LL));
    // strong-pseudoprime classics
    REQUIRE_FALSE(is_prime(3215031751LL));
    REQUIRE_FALSE(is_prime(3825123056546413051LL));
    REQUIRE(is_prime(9223372036854775783LL));  // largest prime below 2^63
}

TEST_CASE("primes_in_interval") {
    REQUIRE(primes_in_interval(10).primes == std::vector<int64_t>{11, 13, 17, 19});
    REQUIRE(primes_in_interval(3).primes == std::vector<int64_t>{5});
    REQUIRE(primes_in_interval(10, {11LL * 13 * 17 * 19}).primes.empty());
    SECTION("strict endpoints and completeness vs a sieve") {
        for (int64_t Q : {2, 5, 17, 100, 257}) {
            std::vector<int64_t> sieve;
            for (int64_t n = Q + 1; n < 2 * Q; ++n)
                if (is_prime_trial(n)) sieve.push_back(n);
            REQUIRE(primes_in_interval(Q).primes == sieve);
        }
    }
    SECTION("exclusions are gcd-based") {
        const auto got = primes_in_interval(10, {26}).primes;  // 2 * 13 knocks out 13
        REQUIRE(got == std::vector<int64_t>{11, 17, 19});
    }
}

TEST_CASE("euler_phi") {
    REQUIRE(euler_phi(1) == 1);
    REQUIRE(euler_phi(12) == 4);
    REQUIRE(euler_phi(101) == 100);
    SECTION("coprime-count oracle") {
        for (int64_t n = 1; n <= 300; ++n) {
            int64_t count = 0;
            for (int64_t a = 1; a <= n; ++a)
                if (std::gcd(a, n) == 1) ++count;
            REQUIRE(euler_phi(n) == count);
        }
    }
}

TEST_CASE("additive_character") {
    REQUIRE_THAT(additive_character(1, 2).real(), WithinAbs(-1.0, 1e-15));
    REQUIRE_THAT(additive_character(1, 2).imag(), WithinAbs(0.0, 1e-15));
    REQUIRE(additive_character(7, 7) == cplx(1.0, 0.0));  // exact reduction first
    REQUIRE_THAT(additive_character(1, 3).real(), WithinAbs(-0.5, 1e-12));
    REQUIRE_THAT(additive_character(1, 3).imag(), WithinAbs(0.8660254037844386, 1e-12));
    SECTION("period q in x") {
        for (int64_t q : {2, 3, 17, 997}) {
            for (int64_t x : std::vector<int64_t>{0, 1, 5, q - 1, 12345}) {
                REQUIRE_THAT(std::abs(additive_character(x + q, q) - additive_character(x, q)),
                             WithinAbs(0.0, 1e-12));
                REQUIRE_THAT(std::abs(additive_character(x, q)), WithinAbs(1.0, 1e-14));
            }
        }
    }
    SECTION("complete sums cancel for every q up to 1000") {
        for (int64_t q = 2; q <= 1000; ++q) {
            CompensatedCSum acc;
            for (int64_t x = 0; x < q; ++x) acc.add(additive_character(x, q));
            if (std::abs(acc.value()) > 1e-10) FAIL("cancellation fails at q=" << q);
        }
    }
}

TEST_CASE("prime_power_sum") {
    REQUIRE(prime_power_sum(2, 10) == 940);  // 11^2 + 13^2 + 17^2 + 19^2
    REQUIRE(prime_power_sum(1, 10) == 60);
    REQUIRE(prime_power_sum(0, 10) == 4);
    SECTION("r = 0 counts the interval primes") {
        for (int64_t X : {2, 3, 10, 47, 500})
            REQUIRE(prime_power_sum(0, X) ==
                    static_cast<int64_t>(primes_in_interval(X).primes.size()));
    }
    SECTION("direct sum oracle") {
        for (int64_t X : {5, 23, 120}) {
            for (int r : {1, 2, 3}) {
                int64_t acc = 0;
                for (int64_t p = X + 1; p < 2 * X; ++p) {
                    if (!is_prime_trial(p)) continue;
                    int64_t t = 1;
                    for (int i = 0; i < r; ++i) t *= p;
                    acc += t;
                }
                REQUIRE(prime_power_sum(r, X) == acc);
            }
        }
    }
}

TEST_CASE("primitive_root") {
    REQUIRE(primitive_root(7).value == 3);
    REQUIRE(primitive_root(2).value == 1);
    REQUIRE(primitive_root(11).value == 2);
    REQUIRE_THROWS_AS(primitive_root(8), NotPrime);
    SECTION("generator order check for primes up to 1000") {
        for (int64_t q = 3; q <= 1000; ++q) {
            if (!is_prime_trial(q)) continue;
            const int64_t g = primitive_root(q).value;
            for (int64_t ell : prime_factors(q - 1))
                REQUIRE(mod_pow(g, static_cast<uint64_t>((q - 1) / ell), q).value != 1);
        }
    }
}

TEST_CASE("compensated sums beat naive accumulation") {
    // 1 + 1e-16 added 1e6 times: naive accumulation loses the small terms.
    CompensatedSum acc;
    acc.add(1.0);
    for (int i = 0; i < 1000000; ++i) acc.add(1e-16);
    REQUIRE_THAT(acc.value(), WithinAbs(1.0 + 1e-10, 1e-14));
}
