#include <catch2/catch_amalgamated.hpp>

#include "twm/characters.hpp"
#include "twm/kloosterman.hpp"

using namespace twm;
using Catch::Matchers::WithinAbs;

namespace {

// Legendre symbol by Euler's criterion, as an independent oracle for the
// quadratic character.
int legendre(int64_t a, int64_t q) {
    const int64_t e = mod_pow(a, static_cast<uint64_t>((q - 1) / 2), q).value;
    return e == 1 ? 1 : (e == 0 ? 0 : -1);
}

} // namespace

TEST_CASE("enumerate_primitive") {
    REQUIRE(enumerate_primitive(3).size() == 1);
    REQUIRE(enumerate_primitive(7).size() == 5);
    REQUIRE_THROWS_AS(enumerate_primitive(9), NotPrime);
    SECTION("closed under conjugation, k <-> q-1-k") {
        const auto chars = enumerate_primitive(5);
        for (const auto& chi : chars) {
            const auto conj_chi = chi.conjugate();
            bool found = false;
            for (const auto& other : chars)
                if (other.exponent() == conj_chi.exponent()) found = true;
            REQUIRE(found);
            for (int64_t n = 1; n < 5; ++n)
                REQUIRE_THAT(std::abs(conj_chi(n) - std::conj(chi(n))), WithinAbs(0.0, 1e-15));
        }
    }
}

TEST_CASE("char_value") {
    const DirichletCharacter principal7(7, 0);
    REQUIRE(principal7(3) == cplx(1.0, 0.0));
    for (int64_t k = 0; k <= 5; ++k) REQUIRE(DirichletCharacter(7, k)(14) == cplx(0.0, 0.0));
    SECTION("quadratic character is the Legendre symbol") {
        for (int64_t q : {5, 13, 17, 29}) {
            const DirichletCharacter quad(q, (q - 1) / 2);
            for (int64_t n = 1; n < q; ++n) {
                REQUIRE_THAT(quad(n).imag(), WithinAbs(0.0, 1e-15));
                REQUIRE_THAT(quad(n).real(), WithinAbs(legendre(n, q), 1e-12));
            }
        }
    }
    REQUIRE_THAT(DirichletCharacter(5, 2)(2).real(), WithinAbs(-1.0, 1e-14));
    SECTION("multiplicativity is exact at the exponent level") {
        for (int64_t q : {7, 11, 13}) {
            for (int64_t k = 1; k <= q - 2; k += 2) {
                const DirichletCharacter chi(q, k);
                for (int64_t m = 1; m < q; ++m)
                    for (int64_t n = 1; n < q; ++n)
                        REQUIRE_THAT(std::abs(chi(m * n) - chi(m) * chi(n)),
                                     WithinAbs(0.0, 1e-12));
            }
        }
    }
    SECTION("parity is the value at -1") {
        for (int64_t q : {5, 7, 13}) {
            for (int64_t k = 0; k <= q - 2; ++k) {
                const DirichletCharacter chi(q, k);
                REQUIRE_THAT(std::abs(chi(q - 1) - cplx(chi.parity(), 0.0)),
                             WithinAbs(0.0, 1e-12));
            }
        }
    }
    SECTION("modulus 1 is identically one") {
        const DirichletCharacter triv;
        REQUIRE(triv(0) == cplx(1.0, 0.0));
        REQUIRE(triv(12345) == cplx(1.0, 0.0));
        REQUIRE(triv.is_primitive());
    }
}

TEST_CASE("gauss_sum") {
    SECTION("quadratic mod 5 is sqrt(5)") {
        const cplx g = gauss_sum(DirichletCharacter(5, 2));
        REQUIRE_THAT(g.real(), WithinAbs(2.2360679774997896, 1e-9));
        REQUIRE_THAT(g.imag(), WithinAbs(0.0, 1e-12));
    }
    SECTION("principal gives the Ramanujan sum c_q(1) = -1") {
        for (int64_t q : {3, 5, 7, 11, 101})
            REQUIRE_THAT(std::abs(gauss_sum(DirichletCharacter(q, 0)) - cplx(-1.0, 0.0)),
                         WithinAbs(0.0, 1e-10));
    }
    SECTION("quadratic mod 3 is i sqrt(3)") {
        const cplx g = gauss_sum(DirichletCharacter(3, 1));
        REQUIRE_THAT(g.real(), WithinAbs(0.0, 1e-12));
        REQUIRE_THAT(g.imag(), WithinAbs(1.7320508075688772, 1e-9));
    }
    SECTION("|G|^2 = q for every primitive character, q <= 101") {
        for (int64_t q = 3; q <= 101; ++q) {
            if (!is_prime(q)) continue;
            for (int64_t k = 1; k <= q - 2; ++k) {
                const double abs2 = std::norm(gauss_sum(DirichletCharacter(q, k)));
                REQUIRE_THAT(abs2 / static_cast<double>(q), WithinAbs(1.0, 1e-9));
            }
        }
    }
    SECTION("G(conj chi) = chi(-1) conj(G(chi))") {
        for (int64_t q : {5, 7, 13, 31}) {
            for (int64_t k = 1; k <= q - 2; ++k) {
                const DirichletCharacter chi(q, k);
                const cplx lhs = gauss_sum(chi.conjugate());
                const cplx rhs = static_cast<double>(chi.parity()) * std::conj(gauss_sum(chi));
                REQUIRE_THAT(std::abs(lhs - rhs), WithinAbs(0.0, 1e-10));
            }
        }
    }
}

TEST_CASE("primitive_char_average") {
    REQUIRE_THAT(std::abs(primitive_char_average(7, 3, 3) - cplx(5.0, 0.0)), WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(std::abs(primitive_char_average(7, 3, 5) - cplx(-1.0, 0.0)), WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(std::abs(primitive_char_average(7, 10, 3) - cplx(5.0, 0.0)), WithinAbs(0.0, 1e-12));
    REQUIRE_THROWS_AS(primitive_char_average(7, 14, 3), NonCoprime);
    SECTION("matches phi(q) delta - 1 for q <= 101") {
        for (int64_t q = 3; q <= 101; ++q) {
            if (!is_prime(q)) continue;
            uint64_t state = 42;
            for (int i = 0; i < 25; ++i) {
                state = state * 6364136223846793005ULL + 1442695040888963407ULL;
                const int64_t n = 1 + static_cast<int64_t>(state % static_cast<uint64_t>(q - 1));
                state = state * 6364136223846793005ULL + 1442695040888963407ULL;
                const int64_t r = 1 + static_cast<int64_t>(state % static_cast<uint64_t>(q - 1));
                const double expected = n == r ? static_cast<double>(q - 2) : -1.0;
                REQUIRE_THAT(std::abs(primitive_char_average(q, n, r) - expected),
                             WithinAbs(0.0, 1e-10));
            }
        }
    }
}

TEST_CASE("gauss_square_average") {
    SECTION("matches phi(q) S(1,r;q) - 1") {
        // (5, 1): 4 S(1,1;5) - 1 with S(1,1;5) = 0.3819660...
        REQUIRE_THAT(gauss_square_average(5, 1).real(), WithinAbs(0.5278640450004201, 1e-9));
        // (3, 1): S(1,1;3) = -1 so 2(-1) - 1 = -3
        REQUIRE_THAT(gauss_square_average(3, 1).real(), WithinAbs(-3.0, 1e-12));
        // (3, 2): both sides by direct sum
        const cplx lhs = gauss_square_average(3, 2);
        const cplx rhs = 2.0 * kloosterman(1, 2, 3) - 1.0;
        REQUIRE_THAT(std::abs(lhs - rhs), WithinAbs(0.0, 1e-12));
    }
    REQUIRE_THROWS_AS(gauss_square_average(7, 0), NonCoprime);
    SECTION("all r for q <= 61") {
        for (int64_t q = 3; q <= 61; ++q) {
            if (!is_prime(q)) continue;
            for (int64_t r = 1; r < q; ++r) {
                const cplx lhs = gauss_square_average(q, r);
                const cplx rhs = static_cast<double>(q - 1) * kloosterman(1, r, q) - 1.0;
                REQUIRE_THAT(std::abs(lhs - rhs), WithinAbs(0.0, 1e-9));
            }
        }
    }
}

TEST_CASE("product_character") {
    REQUIRE_THROWS_AS(ProductCharacter(DirichletCharacter(5, 1), DirichletCharacter(5, 2)),
                      EqualModuli);
    SECTION("Gauss product rule for the quadratic pair (3, 5)") {
        const DirichletCharacter chi(3, 1), psi(5, 2);
        const ProductCharacter prod(chi, psi);
        const cplx lhs = gauss_sum(prod);
        const cplx rhs = gauss_sum(chi) * gauss_sum(psi) * chi(5) * psi(3);
        REQUIRE_THAT(std::abs(lhs - rhs) / std::abs(lhs), WithinAbs(0.0, 1e-9));
    }
    SECTION("principal x principal behaves as principal mod q1 q2") {
        const ProductCharacter prod(DirichletCharacter(3, 0), DirichletCharacter(5, 0));
        REQUIRE(prod.is_principal());
        for (int64_t n = 1; n <= 15; ++n) {
            const double expected = std::gcd(n, int64_t{15}) == 1 ? 1.0 : 0.0;
            REQUIRE_THAT(std::abs(prod(n) - expected), WithinAbs(0.0, 1e-14));
        }
    }
    SECTION("vanishes off the units") {
        const ProductCharacter prod(DirichletCharacter(3, 1), DirichletCharacter(5, 1));
        REQUIRE(prod(3) == cplx(0.0, 0.0));
        REQUIRE(prod(5) == cplx(0.0, 0.0));
        REQUIRE(prod.modulus() == 15);
    }
    SECTION("Gauss product rule on random primitive pairs") {
        uint64_t state = 7;
        const std::vector<int64_t> primes = {3, 5, 7, 11, 13, 17, 19, 23};
        for (int i = 0; i < 10; ++i) {
            state = state * 6364136223846793005ULL + 1442695040888963407ULL;
            const int64_t q1 = primes[state % primes.size()];
            state = state * 6364136223846793005ULL + 1442695040888963407ULL;
            int64_t q2 = primes[state % primes.size()];
            if (q1 == q2) q2 = q1 == 3 ? 5 : 3;
            state = state * 6364136223846793005ULL + 1442695040888963407ULL;
            const int64_t e1 = 1 + static_cast<int64_t>(state % static_cast<uint64_t>(q1 - 2));
            state = state * 6364136223846793005ULL + 1442695040888963407ULL;
            const int64_t e2 = 1 + static_cast<int64_t>(state % static_cast<uint64_t>(q2 - 2));
            const DirichletCharacter chi(q1, e1), psi(q2, e2);
            const cplx lhs = gauss_sum(ProductCharacter(chi, psi));
            const cplx rhs = gauss_sum(chi) * gauss_sum(psi) * chi(q2) * psi(q1);
            REQUIRE_THAT(std::abs(lhs - rhs) / std::abs(lhs), WithinAbs(0.0, 1e-9));
        }
    }
}
