#pragma once

// Dirichlet characters of prime modulus, stored exactly as exponents over a
// fixed primitive root.  Complex values are materialized only at evaluation,
// so multiplicativity and orthogonality hold at the exponent level.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <vector>

#include "twm/arith.hpp"
#include "twm/errors.hpp"

namespace twm {

namespace detail {

// Immutable per-modulus data: discrete-log table, root-of-unity tables,
// lazily built Gauss sums for every exponent.
class CharacterTable {
public:
    int64_t q;          // prime modulus (1 and 2 are handled as trivial cases)
    int64_t generator;  // smallest primitive root, 0 for q = 1
    int64_t order;      // q - 1 (1 for q = 1)
    std::vector<int32_t> index;     // index[n] = ind_g(n), -1 off units
    std::vector<cplx> order_roots;  // e(j / order)
    std::vector<cplx> mod_roots;    // e(j / q)

    explicit CharacterTable(int64_t modulus) : q(modulus) {
        if (q == 1) {
            generator = 0;
            order = 1;
            order_roots = {cplx(1.0, 0.0)};
            mod_roots = {cplx(1.0, 0.0)};
            return;
        }
        if (!is_prime(q)) throw NotPrime("character modulus " + std::to_string(q) + " is not prime");
        generator = primitive_root(q).value;
        order = q - 1;
        index.assign(static_cast<size_t>(q), -1);
        int64_t pw = 1;
        for (int64_t j = 0; j < order; ++j) {
            index[static_cast<size_t>(pw)] = static_cast<int32_t>(j);
            pw = mod_mul(pw, generator, q);
        }
        order_roots.resize(static_cast<size_t>(order));
        for (int64_t j = 0; j < order; ++j) {
            const double arg = two_pi * static_cast<double>(j) / static_cast<double>(order);
            order_roots[static_cast<size_t>(j)] = cplx(std::cos(arg), std::sin(arg));
        }
        mod_roots.resize(static_cast<size_t>(q));
        for (int64_t j = 0; j < q; ++j) {
            const double arg = two_pi * static_cast<double>(j) / static_cast<double>(q);
            mod_roots[static_cast<size_t>(j)] = cplx(std::cos(arg), std::sin(arg));
        }
    }

    CharacterTable(const CharacterTable&) = delete;
    CharacterTable& operator=(const CharacterTable&) = delete;

    cplx value(int64_t exponent, int64_t n) const {
        if (q == 1) return cplx(1.0, 0.0);
        const int64_t r = mod_reduce(n, q);
        const int32_t ind = r == 0 ? -1 : index[static_cast<size_t>(r)];
        if (ind < 0) return cplx(0.0, 0.0);
        return order_roots[static_cast<size_t>(mod_reduce(exponent * ind, order))];
    }

    // Gauss sums for every exponent, built once on first use (O(q^2)).
    const std::vector<cplx>& gauss_all() const {
        std::call_once(gauss_once_, [this] {
            gauss_.resize(static_cast<size_t>(std::max<int64_t>(order, 1)));
            if (q == 1) { gauss_[0] = cplx(1.0, 0.0); return; }
            for (int64_t k = 0; k < order; ++k) {
                CompensatedCSum acc;
                for (int64_t a = 1; a < q; ++a)
                    acc.add(value(k, a) * mod_roots[static_cast<size_t>(a)]);
                gauss_[static_cast<size_t>(k)] = acc.value();
            }
        });
        return gauss_;
    }

private:
    mutable std::once_flag gauss_once_;
    mutable std::vector<cplx> gauss_;
};

inline std::shared_ptr<const CharacterTable> character_table(int64_t q) {
    static std::mutex mu;
    static std::map<int64_t, std::shared_ptr<const CharacterTable>> registry;
    std::lock_guard<std::mutex> lock(mu);
    auto it = registry.find(q);
    if (it != registry.end()) return it->second;
    auto table = std::make_shared<const CharacterTable>(q);
    registry.emplace(q, table);
    return table;
}

} // namespace detail

/// chi(n) = e_{q-1}(k * ind_g(n)) on units, 0 otherwise.  k = 0 is the
/// principal character; for prime q every k != 0 is primitive.
class DirichletCharacter {
public:
    DirichletCharacter() : table_(detail::character_table(1)), exponent_(0) {}
    DirichletCharacter(int64_t q, int64_t exponent)
        : table_(detail::character_table(q)), exponent_(mod_reduce(exponent, table_->order)) {}

    int64_t modulus() const { return table_->q; }
    int64_t exponent() const { return exponent_; }
    int64_t generator() const { return table_->generator; }
    bool is_principal() const { return exponent_ == 0; }
    bool is_primitive() const { return table_->q == 1 || exponent_ != 0; }
    int parity() const {
        if (table_->q <= 2) return 1;
        return exponent_ % 2 == 0 ? 1 : -1;  // chi(-1) via ind(-1) = (q-1)/2
    }

    cplx operator()(int64_t n) const { return table_->value(exponent_, n); }

    DirichletCharacter conjugate() const {
        return DirichletCharacter(table_->q, table_->order - exponent_);
    }

    const detail::CharacterTable& table() const { return *table_; }

private:
    std::shared_ptr<const detail::CharacterTable> table_;
    int64_t exponent_;
};

/// chi*psi of modulus q1*q2 for distinct prime moduli; primitive iff both
/// factors are.
class ProductCharacter {
public:
    ProductCharacter(DirichletCharacter chi, DirichletCharacter psi)
        : chi_(std::move(chi)), psi_(std::move(psi)) {
        if (chi_.modulus() == psi_.modulus())
            throw EqualModuli("product character needs distinct prime moduli, got " +
                              std::to_string(chi_.modulus()) + " twice");
    }

    int64_t modulus() const { return chi_.modulus() * psi_.modulus(); }
    const DirichletCharacter& factor1() const { return chi_; }
    const DirichletCharacter& factor2() const { return psi_; }
    bool is_primitive() const { return chi_.is_primitive() && psi_.is_primitive(); }
    bool is_principal() const { return chi_.is_principal() && psi_.is_principal(); }

    cplx operator()(int64_t n) const { return chi_(n) * psi_(n); }

    ProductCharacter conjugate() const {
        return ProductCharacter(chi_.conjugate(), psi_.conjugate());
    }

private:
    DirichletCharacter chi_;
    DirichletCharacter psi_;
};

inline ProductCharacter product_character(const DirichletCharacter& chi,
                                          const DirichletCharacter& psi) {
    return ProductCharacter(chi, psi);
}

inline cplx char_value(const DirichletCharacter& chi, int64_t n) { return chi(n); }
inline cplx char_value(const ProductCharacter& chi, int64_t n) { return chi(n); }

/// The q-2 primitive characters mod prime q, ascending exponent.
inline std::vector<DirichletCharacter> enumerate_primitive(int64_t q) {
    if (!is_prime(q)) throw NotPrime("enumerate_primitive: " + std::to_string(q) + " is not prime");
    std::vector<DirichletCharacter> out;
    for (int64_t k = 1; k <= q - 2; ++k) out.emplace_back(q, k);
    return out;
}

/// G(chi) = sum_{a mod q} chi(a) e_q(a), by direct summation.
inline cplx gauss_sum(const DirichletCharacter& chi) {
    return chi.table().gauss_all()[static_cast<size_t>(chi.exponent())];
}

inline cplx gauss_sum(const ProductCharacter& chi) {
    const int64_t q = chi.modulus();
    CompensatedCSum acc;
    // Rotation recurrence for e_q(a) with periodic resync to keep the phase
    // error at resync granularity.
    const cplx step = additive_character(1, q);
    cplx root(1.0, 0.0);
    for (int64_t a = 0; a < q; ++a) {
        if (a % 256 == 0) root = additive_character(a, q);
        acc.add(chi(a) * root);
        root *= step;
    }
    return acc.value();
}

/// sum over primitive chi mod q of chi(n) conj(chi(r)); must equal
/// phi(q) - 1 when n = r mod q and -1 otherwise.
inline cplx primitive_char_average(int64_t q, int64_t n, int64_t r) {
    if (!is_prime(q)) throw NotPrime("primitive_char_average: modulus must be prime");
    if (std::gcd(mod_reduce(n, q), q) != 1 || std::gcd(mod_reduce(r, q), q) != 1)
        throw NonCoprime("primitive_char_average: n and r must be coprime to q");
    const auto table = detail::character_table(q);
    CompensatedCSum acc;
    for (int64_t k = 1; k <= q - 2; ++k)
        acc.add(table->value(k, n) * std::conj(table->value(k, r)));
    return acc.value();
}

/// sum over primitive chi mod q of G(chi)^2 conj(chi(r)); must equal
/// phi(q) S(1,r;q) - 1.
inline cplx gauss_square_average(int64_t q, int64_t r) {
    if (!is_prime(q)) throw NotPrime("gauss_square_average: modulus must be prime");
    if (std::gcd(mod_reduce(r, q), q) != 1)
        throw NonCoprime("gauss_square_average: r must be coprime to q");
    const auto table = detail::character_table(q);
    const auto& gauss = table->gauss_all();
    CompensatedCSum acc;
    for (int64_t k = 1; k <= q - 2; ++k) {
        const cplx g = gauss[static_cast<size_t>(k)];
        acc.add(g * g * std::conj(table->value(k, r)));
    }
    return acc.value();
}

} // namespace twm
