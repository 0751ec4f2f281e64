#pragma once

// Deligne-normalized Hecke eigenvalues.  Built-in newforms are expanded from
// their eta products with exact integer coefficients; external forms are
// ingested from coefficient files.
//
// Coefficients live in __int128: |a(n)| <= d(n) n^{(k-1)/2} stays below 1e32
// for weight 12 up to n = 2e5, and convolution partials below ~5e33, both far
// inside the 1.7e38 range.  Values convert to floating point only inside
// lambda().

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "twm/arith.hpp"
#include "twm/errors.hpp"

namespace twm {

using int128 = __int128;

inline std::string int128_to_string(int128 v) {
    if (v == 0) return "0";
    const bool neg = v < 0;
    unsigned __int128 u = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
    std::string digits;
    while (u > 0) {
        digits.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
        u /= 10;
    }
    if (neg) digits.push_back('-');
    return std::string(digits.rbegin(), digits.rend());
}

inline int128 parse_int128(const std::string& s) {
    if (s.empty()) throw ParseError("empty integer literal");
    size_t i = 0;
    bool neg = false;
    if (s[0] == '+' || s[0] == '-') { neg = s[0] == '-'; i = 1; }
    if (i == s.size()) throw ParseError("bare sign in integer literal");
    unsigned __int128 u = 0;
    const unsigned __int128 limit = neg ? static_cast<unsigned __int128>(1) << 127
                                        : (~static_cast<unsigned __int128>(0)) >> 1;
    for (; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') throw ParseError("bad digit in integer literal: " + s);
        if (u > (limit - static_cast<unsigned>(s[i] - '0')) / 10)
            throw ParseError("integer literal overflows 128 bits: " + s);
        u = u * 10 + static_cast<unsigned>(s[i] - '0');
    }
    return neg ? -static_cast<int128>(u) : static_cast<int128>(u);
}

enum class Builtin { delta, eta11 };

struct NewformSpec {
    std::string label;
    int weight = 0;
    int64_t level = 1;
    std::vector<int128> a;  // a[0] unused; a[1] = 1
    std::vector<double> lam;
    std::vector<std::string> warnings;

    int64_t n_max() const { return static_cast<int64_t>(a.size()) - 1; }

    /// lambda(n) = a(n) / n^{(k-1)/2}; signals OutOfRange past the expansion.
    double lambda(int64_t n) const {
        if (n < 1 || n > n_max())
            throw OutOfRange(label + ": lambda(" + std::to_string(n) + ") beyond expansion n_max=" +
                             std::to_string(n_max()));
        return lam[static_cast<size_t>(n)];
    }
};

namespace detail {

// Sparse expansion of prod_{j>=1} (1 - q^{s j}) by the pentagonal number
// theorem, truncated at degree n_max.
struct SparsePoly {
    std::vector<int64_t> degree;
    std::vector<int> coeff;  // +-1
};

inline SparsePoly euler_product(int64_t scale, int64_t n_max) {
    SparsePoly e;
    for (int64_t j = 1;; ++j) {
        const int64_t g1 = scale * (j * (3 * j - 1) / 2);
        const int64_t g2 = scale * (j * (3 * j + 1) / 2);
        if (g1 > n_max && g2 > n_max) break;
        const int sign = (j % 2 == 0) ? 1 : -1;
        if (g1 <= n_max) { e.degree.push_back(g1); e.coeff.push_back(sign); }
        if (g2 <= n_max) { e.degree.push_back(g2); e.coeff.push_back(sign); }
    }
    return e;
}

// In-place p *= e, truncated at n_max.  Descending order keeps the reads on
// not-yet-written entries.
inline void multiply_sparse(std::vector<int128>& p, const SparsePoly& e) {
    const int64_t n_max = static_cast<int64_t>(p.size()) - 1;
    for (int64_t n = n_max; n >= 0; --n) {
        int128 acc = p[static_cast<size_t>(n)];
        for (size_t i = 0; i < e.degree.size(); ++i) {
            const int64_t d = e.degree[i];
            if (d > n) break;
            acc += e.coeff[i] > 0 ? p[static_cast<size_t>(n - d)] : -p[static_cast<size_t>(n - d)];
        }
        p[static_cast<size_t>(n)] = acc;
    }
}

inline void finalize(NewformSpec& f) {
    f.lam.assign(f.a.size(), 0.0);
    const double half_shift = (f.weight - 1) / 2.0;
    for (int64_t n = 1; n <= f.n_max(); ++n)
        f.lam[static_cast<size_t>(n)] =
            static_cast<double>(f.a[static_cast<size_t>(n)]) /
            std::pow(static_cast<double>(n), half_shift);
}

} // namespace detail

/// delta: q prod (1-q^j)^24, weight 12 level 1.
/// eta11: q prod (1-q^j)^2 (1-q^{11j})^2, weight 2 level 11.
inline NewformSpec expand_builtin(Builtin which, int64_t n_max) {
    if (n_max < 1) throw std::invalid_argument("expand_builtin: n_max must be >= 1");
    if (n_max > 200000)
        throw std::invalid_argument("expand_builtin: n_max beyond the exact-integer range");
    NewformSpec f;
    // Coefficients of the eta product, degree 0..n_max-1; a(n) picks up the
    // leading q shift.
    std::vector<int128> p(static_cast<size_t>(n_max), 0);
    p[0] = 1;
    const auto e1 = detail::euler_product(1, n_max - 1);
    if (which == Builtin::delta) {
        f.label = "delta";
        f.weight = 12;
        f.level = 1;
        for (int i = 0; i < 24; ++i) detail::multiply_sparse(p, e1);
    } else {
        f.label = "eta11";
        f.weight = 2;
        f.level = 11;
        const auto e11 = detail::euler_product(11, n_max - 1);
        detail::multiply_sparse(p, e1);
        detail::multiply_sparse(p, e1);
        detail::multiply_sparse(p, e11);
        detail::multiply_sparse(p, e11);
    }
    f.a.assign(static_cast<size_t>(n_max) + 1, 0);
    for (int64_t n = 1; n <= n_max; ++n) f.a[static_cast<size_t>(n)] = p[static_cast<size_t>(n - 1)];
    detail::finalize(f);
    return f;
}

inline NewformSpec expand_builtin(const std::string& name, int64_t n_max) {
    if (name == "delta") return expand_builtin(Builtin::delta, n_max);
    if (name == "eta11") return expand_builtin(Builtin::eta11, n_max);
    throw NotFound("unknown builtin form: " + name);
}

inline double hecke_eigenvalue(const NewformSpec& form, int64_t n) { return form.lambda(n); }

/// lambda(p^{r+1}) = lambda(p) lambda(p^r) - lambda(p^{r-1}) for p coprime to
/// the level, lambda(p^{r+1}) = lambda(p) lambda(p^r) when p divides it.
inline bool hecke_relation_check(const NewformSpec& form, int64_t p, int r) {
    if (!is_prime(p)) throw NotPrime("hecke_relation_check: p must be prime");
    if (r < 1) throw std::invalid_argument("hecke_relation_check: r must be >= 1");
    int128 need = 1;
    for (int i = 0; i < r + 1; ++i) {
        need *= p;
        if (need > form.n_max())
            throw OutOfRange("hecke_relation_check: p^{r+1} beyond expansion");
    }
    std::vector<double> lam_pow(static_cast<size_t>(r) + 2);  // lambda(p^0..p^{r+1})
    lam_pow[0] = 1.0;
    int64_t pk = 1;
    for (int i = 1; i <= r + 1; ++i) {
        pk *= p;
        lam_pow[static_cast<size_t>(i)] = form.lambda(pk);
    }
    const double lhs = lam_pow[static_cast<size_t>(r + 1)];
    const double rhs = form.level % p == 0
                           ? lam_pow[1] * lam_pow[static_cast<size_t>(r)]
                           : lam_pow[1] * lam_pow[static_cast<size_t>(r)] - lam_pow[static_cast<size_t>(r - 1)];
    return std::abs(lhs - rhs) <= 1e-9;
}

/// Coefficient file: first non-comment line "k N", then contiguous lines
/// "n a(n)" from n = 1; '#' starts a comment.
inline NewformSpec load_coefficients(std::istream& in, const std::string& label = "file") {
    NewformSpec f;
    f.label = label;
    std::string line;
    bool have_header = false;
    int64_t expected = 1;
    std::vector<int128> coeffs;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        if (!have_header) {
            int64_t k, N;
            if (!(ss >> k)) continue;  // blank or comment-only line
            if (!(ss >> N) || k < 1 || N < 1)
                throw ParseError("line " + std::to_string(lineno) + ": malformed header, want \"k N\"");
            std::string rest;
            if (ss >> rest) throw ParseError("line " + std::to_string(lineno) + ": trailing tokens in header");
            f.weight = static_cast<int>(k);
            f.level = N;
            have_header = true;
            continue;
        }
        std::string ns, as;
        if (!(ss >> ns)) continue;
        if (!(ss >> as)) throw ParseError("line " + std::to_string(lineno) + ": want \"n a(n)\"");
        std::string rest;
        if (ss >> rest) throw ParseError("line " + std::to_string(lineno) + ": trailing tokens");
        int64_t n;
        try {
            n = std::stoll(ns);
        } catch (const std::exception&) {
            throw ParseError("line " + std::to_string(lineno) + ": bad index " + ns);
        }
        if (n != expected)
            throw ParseError("line " + std::to_string(lineno) + ": expected n=" +
                             std::to_string(expected) + ", got " + std::to_string(n));
        coeffs.push_back(parse_int128(as));
        ++expected;
    }
    if (!have_header) throw ParseError("no header line \"k N\" found");
    if (coeffs.empty()) throw ParseError("no coefficient lines found");
    if (coeffs[0] != 1) throw ValidationError("a(1) must be 1 for a normalized newform");
    f.a.assign(coeffs.size() + 1, 0);
    for (size_t i = 0; i < coeffs.size(); ++i) f.a[i + 1] = coeffs[i];
    detail::finalize(f);
    for (int64_t p = 2; p <= f.n_max(); ++p) {
        if (!is_prime(p) || f.level % p == 0) continue;
        if (std::abs(f.lambda(p)) > 2.0 + 1e-12)
            f.warnings.push_back("Deligne bound violated at p=" + std::to_string(p) +
                                 ": |lambda| = " + std::to_string(std::abs(f.lambda(p))));
    }
    return f;
}

inline NewformSpec load_coefficients(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open coefficient file: " + path);
    auto slash = path.find_last_of('/');
    return load_coefficients(in, slash == std::string::npos ? path : path.substr(slash + 1));
}

inline void write_coefficients(const NewformSpec& form, std::ostream& out) {
    out << form.weight << " " << form.level << "\n";
    for (int64_t n = 1; n <= form.n_max(); ++n)
        out << n << " " << int128_to_string(form.a[static_cast<size_t>(n)]) << "\n";
}

/// Smallest prime p coprime to every element of avoid with lambda(p)^2 >=
/// floor; the twist prime of the main-term experiments.
inline int64_t pick_prime(const NewformSpec& form, double floor_value,
                          const std::vector<int64_t>& avoid = {}) {
    if (floor_value > 4.0)
        throw NotFound("pick_prime: floor " + std::to_string(floor_value) +
                       " exceeds the Deligne cap lambda(p)^2 <= 4");
    for (int64_t p = 2; p <= form.n_max(); ++p) {
        if (!is_prime(p)) continue;
        bool excluded = false;
        for (int64_t e : avoid)
            if (std::gcd(p, e) != 1) { excluded = true; break; }
        if (excluded) continue;
        const double l = form.lambda(p);
        if (l * l >= floor_value) return p;
    }
    throw NotFound("pick_prime: no prime with lambda(p)^2 >= " + std::to_string(floor_value) +
                   " within the expansion");
}

} // namespace twm
