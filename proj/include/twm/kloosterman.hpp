#pragma once

// Classical Kloosterman sums and the complete-sum diagnostics T, T1, T2 with
// their exact CRT factorization.  All sums are direct summation over the full
// residue range: these are correctness oracles, not production kernels.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "twm/arith.hpp"
#include "twm/errors.hpp"

namespace twm {

/// S(a,b;c) = sum over invertible x mod c of e_c(ax + b*inv(x)).
/// Kept complex: the imaginary part must cancel, and asserting that catches
/// index errors.
inline cplx kloosterman(int64_t a, int64_t b, int64_t c) {
    if (c < 1) throw std::invalid_argument("kloosterman: c must be >= 1");
    CompensatedCSum acc;
    for (int64_t x = 1; x < c; ++x) {
        if (std::gcd(x, c) != 1) continue;
        const int64_t xinv = mod_inverse(x, c).value;
        acc.add(additive_character(mod_mul(a, x, c) + mod_mul(b, xinv, c), c));
    }
    if (c == 1) return cplx(1.0, 0.0);  // empty product convention: the single x = 0 term
    return acc.value();
}

/// Weil bound check |S(a,b;c)| <= 2 sqrt(c) for prime c, gcd(ab,c) = 1.
inline bool weil_check(int64_t a, int64_t b, int64_t c) {
    if (!is_prime(c)) throw NotPrime("weil_check: c must be prime");
    if (std::gcd(mod_reduce(a, c), c) != 1 || std::gcd(mod_reduce(b, c), c) != 1)
        throw NonCoprime("weil_check: a, b must be coprime to c");
    return std::abs(kloosterman(a, b, c)) <= 2.0 * std::sqrt(static_cast<double>(c)) + 1e-9;
}

/// Table of S(1, r; c) for r = 0..c-1 (O(c^2) build).
inline std::vector<cplx> kloosterman_row(int64_t c) {
    std::vector<cplx> row(static_cast<size_t>(c));
    std::vector<int64_t> units, inverses;
    for (int64_t x = 1; x < c; ++x) {
        if (std::gcd(x, c) != 1) continue;
        units.push_back(x);
        inverses.push_back(mod_inverse(x, c).value);
    }
    std::vector<cplx> roots(static_cast<size_t>(c));
    for (int64_t j = 0; j < c; ++j) roots[static_cast<size_t>(j)] = additive_character(j, c);
    for (int64_t r = 0; r < c; ++r) {
        CompensatedCSum acc;
        for (size_t i = 0; i < units.size(); ++i)
            acc.add(roots[static_cast<size_t>(mod_reduce(units[i] + mod_mul(r, inverses[i], c), c))]);
        row[static_cast<size_t>(r)] = c == 1 ? cplx(1.0, 0.0) : acc.value();
    }
    return row;
}

/// T2(n; q1, q1', q2) = sum_{a2 mod q2} e_{q2}(a2 n inv(q1 q1'))
///                      S(1, a2 p inv(q1^2); q2) S(1, a2 p inv(q1'^2); q2).
/// When q2 | n this is q2*phi(q2) if q2 | (q1^2 - q1'^2) and -q2 otherwise.
inline cplx t2_sum(int64_t n, int64_t q1, int64_t q1p, int64_t q2, int64_t p) {
    if (!is_prime(q2)) throw NotPrime("t2_sum: q2 must be prime");
    if (std::gcd(p, q2) != 1) throw NonCoprime("t2_sum: gcd(p, q2) must be 1");
    if (q2 == q1 || q2 == q1p) throw EqualModuli("t2_sum: q2 must differ from q1, q1'");
    const auto K = kloosterman_row(q2);
    const int64_t w = mod_inverse(mod_mul(q1, q1p, q2), q2).value;
    const int64_t r1 = mod_mul(p, mod_inverse(mod_mul(q1, q1, q2), q2).value, q2);
    const int64_t r2 = mod_mul(p, mod_inverse(mod_mul(q1p, q1p, q2), q2).value, q2);
    CompensatedCSum acc;
    for (int64_t a = 0; a < q2; ++a) {
        acc.add(additive_character(mod_mul(a, mod_mul(n, w, q2), q2), q2) *
                K[static_cast<size_t>(mod_mul(a, r1, q2))] *
                K[static_cast<size_t>(mod_mul(a, r2, q2))]);
    }
    return acc.value();
}

/// T1(n; m, q1, q1', q2) = sum_{a1 mod q1 q1'} e_{q1 q1'}(a1 n inv(q2))
///                         S(1, m a1 p inv(q2^2); q1) S(1, m a1 p inv(q2^2); q1').
/// Vanishes when n = 0 and q1 != q1'.
inline cplx t1_sum(int64_t n, int64_t m, int64_t q1, int64_t q1p, int64_t q2, int64_t p) {
    if (!is_prime(q1) || !is_prime(q1p)) throw NotPrime("t1_sum: q1, q1' must be prime");
    const int64_t Q = q1 * q1p;
    if (std::gcd(mod_reduce(m, Q), Q) != 1 || std::gcd(mod_reduce(p, Q), Q) != 1)
        throw NonCoprime("t1_sum: gcd(mp, q1 q1') must be 1");
    const auto K1 = kloosterman_row(q1);
    const auto K1p = q1p == q1 ? K1 : kloosterman_row(q1p);
    const int64_t w = mod_inverse(q2, Q).value;  // q2 inverse mod q1 q1'
    const int64_t c1 = mod_mul(mod_mul(m, p, q1), mod_inverse(mod_mul(q2, q2, q1), q1).value, q1);
    const int64_t c1p = mod_mul(mod_mul(m, p, q1p), mod_inverse(mod_mul(q2, q2, q1p), q1p).value, q1p);
    CompensatedCSum acc;
    for (int64_t a = 0; a < Q; ++a) {
        acc.add(additive_character(mod_mul(a, mod_mul(n, w, Q), Q), Q) *
                K1[static_cast<size_t>(mod_mul(a, c1, q1))] *
                K1p[static_cast<size_t>(mod_mul(a, c1p, q1p))]);
    }
    return acc.value();
}

/// One single-modulus factor of the q1 != q1' factorization of T1.  The CRT
/// cofactor inv(other) mod q appears inside the additive character; with it
/// the product of the two factors equals t1_sum exactly.
inline cplx t1_factor(int64_t n, int64_t m, int64_t q, int64_t other, int64_t q2, int64_t p) {
    const auto K = kloosterman_row(q);
    const int64_t w = mod_mul(mod_inverse(q2, q).value, mod_inverse(other, q).value, q);
    const int64_t c = mod_mul(mod_mul(m, p, q), mod_inverse(mod_mul(q2, q2, q), q).value, q);
    CompensatedCSum acc;
    for (int64_t a = 0; a < q; ++a) {
        acc.add(additive_character(mod_mul(a, mod_mul(n, w, q), q), q) *
                K[static_cast<size_t>(mod_mul(a, c, q))]);
    }
    return acc.value();
}

/// The full diagnostic sum with its factorization check.
struct TSumDiagnostics {
    int64_t n = 0;
    int64_t m = 1;
    int64_t q1 = 0, q1p = 0, q2 = 0, p = 0;
    cplx t_full;
    cplx t1;
    cplx t2;
};

/// T(n; m, q1, q1', q2) over a mod q1 q1' q2, asserted equal to t1*t2.
inline TSumDiagnostics t_full(int64_t n, int64_t m, int64_t q1, int64_t q1p, int64_t q2,
                              int64_t p) {
    if (!is_prime(q1) || !is_prime(q1p) || !is_prime(q2) || !is_prime(p))
        throw NotPrime("t_full: q1, q1', q2, p must be prime");
    if (q2 == q1 || q2 == q1p) throw EqualModuli("t_full: q2 must differ from q1, q1'");
    const int64_t M = q1 * q1p * q2;
    if (std::gcd(mod_reduce(m, M), M) != 1 || std::gcd(mod_reduce(p, M), M) != 1)
        throw NonCoprime("t_full: gcd(mp, q1 q1' q2) must be 1");

    const auto K1 = kloosterman_row(q1);
    const auto K1p = q1p == q1 ? K1 : kloosterman_row(q1p);
    const auto K2 = kloosterman_row(q2);
    const int64_t r1 = mod_mul(p, mod_inverse(mod_mul(q1, q1, q2), q2).value, q2);
    const int64_t r2 = mod_mul(p, mod_inverse(mod_mul(q1p, q1p, q2), q2).value, q2);
    const int64_t c1 = mod_mul(mod_mul(m, p, q1), mod_inverse(mod_mul(q2, q2, q1), q1).value, q1);
    const int64_t c1p = mod_mul(mod_mul(m, p, q1p), mod_inverse(mod_mul(q2, q2, q1p), q1p).value, q1p);

    CompensatedCSum acc;
    for (int64_t a = 0; a < M; ++a) {
        acc.add(K2[static_cast<size_t>(mod_mul(a, r1, q2))] *
                K1[static_cast<size_t>(mod_mul(a, c1, q1))] *
                K2[static_cast<size_t>(mod_mul(a, r2, q2))] *
                K1p[static_cast<size_t>(mod_mul(a, c1p, q1p))] *
                additive_character(mod_mul(a, n, M), M));
    }

    TSumDiagnostics d;
    d.n = n; d.m = m; d.q1 = q1; d.q1p = q1p; d.q2 = q2; d.p = p;
    d.t_full = acc.value();
    d.t1 = t1_sum(n, m, q1, q1p, q2, p);
    d.t2 = t2_sum(n, q1, q1p, q2, p);
    const double scale = std::max({1.0, std::abs(d.t_full), std::abs(d.t1 * d.t2)});
    if (std::abs(d.t_full - d.t1 * d.t2) > 1e-6 * scale)
        throw FactorizationMismatch(
            "t_full: T != T1*T2 at n=" + std::to_string(n) + " m=" + std::to_string(m) +
            " q1=" + std::to_string(q1) + " q1'=" + std::to_string(q1p) +
            " q2=" + std::to_string(q2) + " p=" + std::to_string(p));
    return d;
}

} // namespace twm
