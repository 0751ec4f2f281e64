#pragma once

// Exact 64-bit modular arithmetic, deterministic primality, prime intervals,
// totients, additive characters and prime-power sums.  Everything here is
// pure and stateless.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "twm/errors.hpp"

namespace twm {

using cplx = std::complex<double>;
using std::int64_t;

inline constexpr double two_pi = 6.283185307179586476925286766559;

/// A residue class value mod a positive modulus, kept normalized to [0, modulus).
struct Residue {
    int64_t value = 0;
    int64_t modulus = 1;

    Residue() = default;
    Residue(int64_t v, int64_t m) : modulus(m) {
        if (m < 1) throw std::invalid_argument("Residue: modulus must be >= 1");
        value = v % m;
        if (value < 0) value += m;
    }
    friend bool operator==(const Residue&, const Residue&) = default;
};

inline int64_t mod_reduce(int64_t x, int64_t m) {
    x %= m;
    return x < 0 ? x + m : x;
}

// 64-bit safe product mod m via 128-bit widening.
inline int64_t mod_mul(int64_t a, int64_t b, int64_t m) {
    return static_cast<int64_t>(static_cast<__int128>(mod_reduce(a, m)) * mod_reduce(b, m) % m);
}

inline Residue mod_pow(int64_t base, uint64_t exp, int64_t m) {
    if (m < 1) throw std::invalid_argument("mod_pow: modulus must be >= 1");
    int64_t result = m == 1 ? 0 : 1;
    int64_t b = mod_reduce(base, m);
    while (exp > 0) {
        if (exp & 1) result = mod_mul(result, b, m);
        b = mod_mul(b, b, m);
        exp >>= 1;
    }
    return Residue(result, m);
}

/// Inverse of a mod m; signals NotInvertible when gcd(a,m) > 1.
inline Residue mod_inverse(int64_t a, int64_t m) {
    if (m < 1) throw std::invalid_argument("mod_inverse: modulus must be >= 1");
    if (m == 1) return Residue(0, 1);
    int64_t r0 = m, r1 = mod_reduce(a, m);
    int64_t t0 = 0, t1 = 1;
    while (r1 != 0) {
        int64_t q = r0 / r1;
        r0 -= q * r1; std::swap(r0, r1);
        t0 -= q * t1; std::swap(t0, t1);
    }
    if (r0 != 1)
        throw NotInvertible("mod_inverse: gcd(" + std::to_string(a) + ", " + std::to_string(m) +
                            ") = " + std::to_string(r0));
    return Residue(t0, m);
}

/// Deterministic Miller-Rabin, exact for every 64-bit input.
inline bool is_prime(int64_t n) {
    if (n < 2) return false;
    for (int64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
        if (n == p) return true;
        if (n % p == 0) return false;
    }
    int64_t d = n - 1;
    int r = 0;
    while ((d & 1) == 0) { d >>= 1; ++r; }
    // This witness set is exact for all n < 3.3e24, in particular all int64.
    for (int64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
        int64_t x = mod_pow(a, static_cast<uint64_t>(d), n).value;
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int i = 1; i < r; ++i) {
            x = mod_mul(x, x, n);
            if (x == n - 1) { composite = false; break; }
        }
        if (composite) return false;
    }
    return true;
}

/// The modulus family of the moment experiments: primes strictly inside
/// (lower, 2*lower), coprime to every listed exclusion.
struct PrimeInterval {
    int64_t lower = 2;
    std::vector<int64_t> exclusions;
    std::vector<int64_t> primes;

    bool empty() const { return primes.empty(); }
    int64_t size() const { return static_cast<int64_t>(primes.size()); }
};

inline PrimeInterval primes_in_interval(int64_t Q, std::vector<int64_t> exclusions = {}) {
    if (Q < 2) throw std::invalid_argument("primes_in_interval: Q must be >= 2");
    PrimeInterval out;
    out.lower = Q;
    out.exclusions = exclusions;
    for (int64_t q = Q + 1; q < 2 * Q; ++q) {
        if (!is_prime(q)) continue;
        bool ok = true;
        for (int64_t e : exclusions)
            if (std::gcd(q, e) != 1) { ok = false; break; }
        if (ok) out.primes.push_back(q);
    }
    return out;
}

inline int64_t euler_phi(int64_t n) {
    if (n < 1) throw std::invalid_argument("euler_phi: n must be >= 1");
    int64_t phi = n;
    for (int64_t p = 2; p * p <= n; ++p) {
        if (n % p) continue;
        phi -= phi / p;
        while (n % p == 0) n /= p;
    }
    if (n > 1) phi -= phi / n;
    return phi;
}

/// e_q(x) = exp(2*pi*i*x/q); x is reduced mod q first so periodicity is exact.
inline cplx additive_character(int64_t x, int64_t q) {
    if (q < 1) throw std::invalid_argument("additive_character: q must be >= 1");
    const double arg = two_pi * static_cast<double>(mod_reduce(x, q)) / static_cast<double>(q);
    return cplx(std::cos(arg), std::sin(arg));
}

/// pi_r(X) = sum of p^r over primes strictly between X and 2X.
inline int64_t prime_power_sum(int r, int64_t X) {
    if (r < 0) throw std::invalid_argument("prime_power_sum: r must be >= 0");
    if (X < 2) throw std::invalid_argument("prime_power_sum: X must be >= 2");
    __int128 acc = 0;
    for (int64_t p = X + 1; p < 2 * X; ++p) {
        if (!is_prime(p)) continue;
        __int128 t = 1;
        for (int i = 0; i < r; ++i) t *= p;
        acc += t;
    }
    if (acc > static_cast<__int128>(INT64_MAX))
        throw std::overflow_error("prime_power_sum: result exceeds 64 bits");
    return static_cast<int64_t>(acc);
}

inline std::vector<int64_t> prime_factors(int64_t n) {
    std::vector<int64_t> out;
    for (int64_t p = 2; p * p <= n; ++p) {
        if (n % p) continue;
        out.push_back(p);
        while (n % p == 0) n /= p;
    }
    if (n > 1) out.push_back(n);
    return out;
}

/// Smallest generator of (Z/qZ)^* for prime q.  q = 2 gives the trivial group.
inline Residue primitive_root(int64_t q) {
    if (!is_prime(q)) throw NotPrime("primitive_root: " + std::to_string(q) + " is not prime");
    if (q == 2) return Residue(1, 2);
    const auto factors = prime_factors(q - 1);
    for (int64_t g = 2; g < q; ++g) {
        bool generates = true;
        for (int64_t ell : factors) {
            if (mod_pow(g, static_cast<uint64_t>((q - 1) / ell), q).value == 1) {
                generates = false;
                break;
            }
        }
        if (generates) return Residue(g, q);
    }
    throw std::logic_error("primitive_root: no generator found (unreachable for prime q)");
}

// Neumaier compensated accumulator.  Long sums here reach 1e7 terms; plain
// accumulation would cost several digits.
struct CompensatedSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

struct CompensatedCSum {
    CompensatedSum re, im;
    void add(cplx z) { re.add(z.real()); im.add(z.imag()); }
    cplx value() const { return cplx(re.value(), im.value()); }
};

} // namespace twm
