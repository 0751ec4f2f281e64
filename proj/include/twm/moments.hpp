#pragma once

// The twisted moment S over the family (q1 in D, primitive chi mod q1,
// primitive psi mod q2), its exact four-term AFE decomposition, the U-term
// expansion of S_dn, the main-term comparison, the prime-moduli average W,
// and the non-vanishing census.
//
// Each part S_** is computed two ways and the totals are asserted equal:
//   direct  - substitute the AFE term by term and sum over characters
//             explicitly (product Gauss sums evaluated by direct summation);
//   reduced - eliminate the character sums exactly through the averaged
//             identities, keeping every -1 correction term and the character
//             support restrictions, so the identity is exact rather than
//             asymptotic.
// Both ways share the same truncation lengths, so residuals are pure
// rounding.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "twm/arith.hpp"
#include "twm/characters.hpp"
#include "twm/errors.hpp"
#include "twm/hecke.hpp"
#include "twm/kloosterman.hpp"
#include "twm/lfunc.hpp"
#include "twm/parallel.hpp"

namespace twm {

/// One moment experiment: the q1 family D is derived from Q1 with the level
/// prime factors and q2 excluded.
struct FamilyParams {
    int64_t Q1 = 3;
    int64_t q2 = 11;
    int64_t p = 2;
    double X = 1.0;
    double Y = 1.0;
    int64_t N1 = 1;
    int64_t N2 = 1;
    PrimeInterval D;
    double c = 0.0;                // log q2 / log Q1, reported
    bool q2_level_coprime = true;  // gcd(q2, N2) = 1; identities run either way
};

inline FamilyParams make_family(int64_t Q1, int64_t q2, int64_t p, const NewformSpec& f,
                                const NewformSpec& g, double X = 1.0, double Y = 1.0) {
    if (Q1 < 2) throw std::invalid_argument("make_family: Q1 must be >= 2");
    if (!is_prime(q2)) throw NotPrime("make_family: q2 = " + std::to_string(q2) + " is not prime");
    if (!is_prime(p)) throw NotPrime("make_family: p = " + std::to_string(p) + " is not prime");
    FamilyParams par;
    par.Q1 = Q1;
    par.q2 = q2;
    par.p = p;
    par.X = X;
    par.Y = Y;
    par.N1 = f.level;
    par.N2 = g.level;
    if (std::gcd(p, par.N1 * par.N2) != 1)
        throw CoprimalityViolation("make_family: p must be coprime to N1 N2");
    std::vector<int64_t> excl = prime_factors(par.N1 * par.N2);
    excl.push_back(q2);
    par.D = primes_in_interval(Q1, excl);
    if (p == q2) throw std::invalid_argument("make_family: p must differ from q2");
    if (!par.D.primes.empty() && p >= par.D.primes.front())
        throw std::invalid_argument("make_family: p must be below every modulus in D");
    par.c = std::log(static_cast<double>(q2)) / std::log(static_cast<double>(Q1));
    par.q2_level_coprime = std::gcd(q2, par.N2) == 1;
    return par;
}

/// Smallest prime strictly greater than Q1^{203/100} and coprime to N2.
inline int64_t q2_auto(int64_t Q1, int64_t N2) {
    const double x = std::pow(static_cast<double>(Q1), 2.03);
    int64_t q = static_cast<int64_t>(std::floor(x)) + 1;
    while (!is_prime(q) || std::gcd(q, N2) != 1) ++q;
    return q;
}

/// Default twist prime: smallest with lambda_g(p)^2 >= 0.25, avoiding the
/// levels and q2.
inline int64_t p_auto(const NewformSpec& g, int64_t N1, int64_t q2, double floor_value = 0.25) {
    return pick_prime(g, floor_value, {N1, g.level, q2});
}

struct MomentOptions {
    AfeOptions afe;
    int threads = 1;
    double identity_tol = 1e-8;
};

struct MomentReport {
    cplx S;                          // brute-force moment (or parts total)
    cplx s_nn, s_nd, s_dn, s_dd;     // reduced parts
    cplx u1, u2, u3, u4;             // S_dn expansion
    double main_term = 0.0;
    cplx ratio;
    double envelope_a = 0.0;         // Q1^{599/200} q2
    double envelope_b = 0.0;         // Q1^{701/200} q2^{3/4}
    int64_t family_size = 0;
    // identity residuals (relative, against 1 + magnitude)
    double decomposition_residual = 0.0;  // S vs sum of parts
    double part_residual_max = 0.0;       // direct vs reduced, worst part
    double u_residual = 0.0;              // S_dn vs U1-U2-U3+U4
    double imag_residual = 0.0;           // Im S
    int64_t snd_zero_frequency_pairs = 0;
    bool q2_level_coprime = true;
    bool includes_bruteforce = false;
};

struct LemmaWReport {
    std::string label;
    int64_t Q = 0;
    int64_t p = 0;
    cplx W;
    double main = 0.0;
    cplx ratio;
    int64_t family_size = 0;
    double imag_residual = 0.0;
};

struct NonvanishingCensus {
    double threshold = 0.0;
    int64_t count = 0;        // |M|
    int64_t family_size = 0;  // |F|
    double proportion = 0.0;
    double median_product = 0.0;  // median |L L| over the family, for context
    double comparator = 0.0;      // Q1^2 (log Q1)^{-3} q2^{1-1/c}
};

/// Cache of central values keyed by (form label, moduli, exponents, X); the
/// same L(f x chi) serves every psi and the census rescans cached entries.
class LValueCache {
public:
    struct Key {
        std::string form;
        int64_t q1 = 1, e1 = 0, q2 = 0, e2 = 0;  // q2 = 0 for prime-modulus twists
        uint64_t xbits = 0;
        auto operator<=>(const Key&) const = default;
    };

    template <class Fn>
    cplx get_or_compute(const Key& key, Fn&& compute) {
        {
            std::shared_lock lock(mu_);
            auto it = map_.find(key);
            if (it != map_.end()) return it->second;
        }
        const cplx value = compute();
        std::unique_lock lock(mu_);
        return map_.emplace(key, value).first->second;
    }

    std::vector<std::pair<Key, cplx>> snapshot() const {
        std::shared_lock lock(mu_);
        return {map_.begin(), map_.end()};
    }

    size_t size() const {
        std::shared_lock lock(mu_);
        return map_.size();
    }

    void clear() {
        std::unique_lock lock(mu_);
        map_.clear();
    }

    static uint64_t bits(double x) {
        uint64_t u;
        static_assert(sizeof(u) == sizeof(x));
        std::memcpy(&u, &x, sizeof(u));
        return u;
    }

private:
    mutable std::shared_mutex mu_;
    std::map<Key, cplx> map_;
};

namespace detail {

// Everything that depends only on q1 (and the fixed q2, p, X, Y): truncation
// lengths, AFE weight arrays, residue-class sums, Kloosterman rows.
struct MomentBlock {
    int64_t q1 = 0;
    AfeLengths lf, lg;
    // class sums over residues; index a for m mod q1, b1*q2+b2 for n
    std::vector<double> cf_nd, cf_d;        // size q1, slot 0 stays 0
    std::vector<double> cg_nd, cg_d;        // size q1*q2, slots with b1=0 or b2=0 stay 0
    std::vector<double> rg_nd;              // rg_nd[b1] = sum_b2 cg_nd[b1][b2]
    std::vector<double> k1;                 // S(1, r; q1)
    std::shared_ptr<const twm::detail::CharacterTable> chars;
};

struct MomentContext {
    const NewformSpec* f = nullptr;
    const NewformSpec* g = nullptr;
    FamilyParams par;
    MomentOptions opts;
    std::shared_ptr<const SmoothWeightTable> tf, tg;
    std::vector<MomentBlock> blocks;
    std::vector<double> k2;  // S(1, r; q2)
    std::shared_ptr<const twm::detail::CharacterTable> chars2;

    MomentContext(const NewformSpec& form_f, const NewformSpec& form_g, const FamilyParams& params,
                  const MomentOptions& options)
        : f(&form_f), g(&form_g), par(params), opts(options) {
        tf = weight_table(f->weight, opts.afe.table_tol, opts.afe.sigma0);
        tg = weight_table(g->weight, opts.afe.table_tol, opts.afe.sigma0);
        chars2 = twm::detail::character_table(par.q2);
        {
            auto row = kloosterman_row(par.q2);
            k2.reserve(row.size());
            for (auto z : row) k2.push_back(z.real());
        }
        for (int64_t q1 : par.D.primes) blocks.push_back(build_block(q1));
    }

    MomentBlock build_block(int64_t q1) const {
        MomentBlock b;
        b.q1 = q1;
        b.chars = twm::detail::character_table(q1);
        {
            auto row = kloosterman_row(q1);
            b.k1.reserve(row.size());
            for (auto z : row) b.k1.push_back(z.real());
        }
        const int64_t q2 = par.q2;
        b.lf = afe_truncation(*f, par.N1 * q1 * q1, par.X, opts.afe.tail_tol, opts.afe.sigma0);
        b.lg = afe_truncation(*g, par.N2 * q1 * q2 * q1 * q2, par.Y, opts.afe.tail_tol,
                              opts.afe.sigma0);
        if (std::max(b.lf.nondual, b.lf.dual) > f->n_max())
            throw OutOfRange(f->label + ": needs " +
                             std::to_string(std::max(b.lf.nondual, b.lf.dual)) +
                             " coefficients for q1=" + std::to_string(q1));
        if (std::max(b.lg.nondual, b.lg.dual) > g->n_max())
            throw OutOfRange(g->label + ": needs " +
                             std::to_string(std::max(b.lg.nondual, b.lg.dual)) +
                             " coefficients for q1=" + std::to_string(q1));

        const double root_f = std::sqrt(static_cast<double>(par.N1)) * q1;
        const double root_g = std::sqrt(static_cast<double>(par.N2)) * q1 * q2;
        b.cf_nd.assign(static_cast<size_t>(q1), 0.0);
        b.cf_d.assign(static_cast<size_t>(q1), 0.0);
        std::vector<CompensatedSum> acc_nd(static_cast<size_t>(q1)), acc_d(static_cast<size_t>(q1));
        const int64_t mf = std::max(b.lf.nondual, b.lf.dual);
        for (int64_t m = 1; m <= mf; ++m) {
            const int64_t a = m % q1;
            if (a == 0) continue;
            const double w = f->lambda(m) / std::sqrt(static_cast<double>(m));
            if (m <= b.lf.nondual) acc_nd[static_cast<size_t>(a)].add(w * (*tf)(m * par.X / root_f));
            if (m <= b.lf.dual) acc_d[static_cast<size_t>(a)].add(w * (*tf)(m / (par.X * root_f)));
        }
        for (int64_t a = 0; a < q1; ++a) {
            b.cf_nd[static_cast<size_t>(a)] = acc_nd[static_cast<size_t>(a)].value();
            b.cf_d[static_cast<size_t>(a)] = acc_d[static_cast<size_t>(a)].value();
        }

        b.cg_nd.assign(static_cast<size_t>(q1 * q2), 0.0);
        b.cg_d.assign(static_cast<size_t>(q1 * q2), 0.0);
        std::vector<CompensatedSum> gcc_nd(static_cast<size_t>(q1 * q2)),
            gcc_d(static_cast<size_t>(q1 * q2));
        const int64_t mg = std::max(b.lg.nondual, b.lg.dual);
        for (int64_t n = 1; n <= mg; ++n) {
            const int64_t b1 = n % q1, b2 = n % q2;
            if (b1 == 0 || b2 == 0) continue;
            const double w = g->lambda(n) / std::sqrt(static_cast<double>(n));
            const size_t slot = static_cast<size_t>(b1 * q2 + b2);
            if (n <= b.lg.nondual) gcc_nd[slot].add(w * (*tg)(n * par.Y / root_g));
            if (n <= b.lg.dual) gcc_d[slot].add(w * (*tg)(n / (par.Y * root_g)));
        }
        for (size_t i = 0; i < gcc_nd.size(); ++i) {
            b.cg_nd[i] = gcc_nd[i].value();
            b.cg_d[i] = gcc_d[i].value();
        }
        b.rg_nd.assign(static_cast<size_t>(q1), 0.0);
        for (int64_t b1 = 1; b1 < q1; ++b1) {
            CompensatedSum row;
            for (int64_t b2 = 1; b2 < q2; ++b2)
                row.add(b.cg_nd[static_cast<size_t>(b1 * q2 + b2)]);
            b.rg_nd[static_cast<size_t>(b1)] = row.value();
        }
        return b;
    }
};

struct PartTotals {
    cplx nn, nd, dn, dd;
    cplx total() const { return nn + nd + dn + dd; }
};

// Reduced path: all four kernels are real once the character sums are
// eliminated.
inline PartTotals reduced_parts(const MomentContext& ctx) {
    const int64_t q2 = ctx.par.q2, p = ctx.par.p;
    const double phi2 = static_cast<double>(q2 - 1);
    const int64_t pm2 = mod_reduce(p, q2);
    CompensatedSum nn, nd, dn, dd;
    for (const auto& b : ctx.blocks) {
        const int64_t q1 = b.q1;
        const double phi1 = static_cast<double>(q1 - 1);
        const int64_t pbar1 = mod_inverse(p, q1).value;
        const int64_t q2sq_bar1 = mod_inverse(mod_mul(q2, q2, q1), q1).value;
        const int64_t q1sq_bar2 = mod_inverse(mod_mul(q1, q1, q2), q2).value;

        // psi-eliminated row sums against the dual-g classes, shared by
        // S_nd and S_dd: hg[b1] = sum_b2 cg_d[b1][b2] (phi2 K2[b2 p inv(q1^2)] - 1)
        std::vector<double> hg(static_cast<size_t>(q1), 0.0);
        CompensatedSum hg_total_acc;
        for (int64_t b1 = 1; b1 < q1; ++b1) {
            CompensatedSum acc;
            for (int64_t b2 = 1; b2 < q2; ++b2) {
                const int64_t r = mod_mul(mod_mul(b2, p, q2), q1sq_bar2, q2);
                acc.add(b.cg_d[static_cast<size_t>(b1 * q2 + b2)] *
                        (phi2 * ctx.k2[static_cast<size_t>(r)] - 1.0));
            }
            hg[static_cast<size_t>(b1)] = acc.value();
            hg_total_acc.add(acc.value());
        }
        const double hg_total = hg_total_acc.value();

        // S_nn: kernels (phi1 S(1, m n pbar; q1) - 1)(phi2 delta_{n=p(q2)} - 1)
        CompensatedSum nn_blk;
        for (int64_t a = 1; a < q1; ++a) {
            if (b.cf_nd[static_cast<size_t>(a)] == 0.0) continue;
            CompensatedSum inner;
            for (int64_t b1 = 1; b1 < q1; ++b1) {
                const int64_t r = mod_mul(mod_mul(a, b1, q1), pbar1, q1);
                const double psi_part =
                    phi2 * b.cg_nd[static_cast<size_t>(b1 * q2 + pm2)] - b.rg_nd[static_cast<size_t>(b1)];
                inner.add((phi1 * b.k1[static_cast<size_t>(r)] - 1.0) * psi_part);
            }
            nn_blk.add(b.cf_nd[static_cast<size_t>(a)] * inner.value());
        }
        nn.add(nn_blk.value());

        // S_nd: (q1/q2) (phi1 delta_{m q2^2 = n p (q1)} - 1)(phi2 K2[n p inv(q1^2)] - 1)
        CompensatedSum nd_blk;
        for (int64_t a = 1; a < q1; ++a) {
            if (b.cf_nd[static_cast<size_t>(a)] == 0.0) continue;
            const int64_t b1_star =
                mod_mul(mod_mul(a, mod_mul(q2, q2, q1), q1), pbar1, q1);  // n = m q2^2 pbar
            nd_blk.add(b.cf_nd[static_cast<size_t>(a)] *
                       (phi1 * hg[static_cast<size_t>(b1_star)] - hg_total));
        }
        nd.add(static_cast<double>(q1) / static_cast<double>(q2) * nd_blk.value());

        // S_dn: q1 (phi1 delta_{n = m p (q1)} - 1)(phi2 delta_{n = p (q2)} - 1)
        CompensatedSum t_dd, t_d1, sum_cf;
        for (int64_t a = 1; a < q1; ++a) {
            const double cf = b.cf_d[static_cast<size_t>(a)];
            if (cf == 0.0) continue;
            const int64_t ap = mod_mul(a, p, q1);
            t_dd.add(cf * b.cg_nd[static_cast<size_t>(ap * q2 + pm2)]);
            t_d1.add(cf * b.rg_nd[static_cast<size_t>(ap)]);
            sum_cf.add(cf);
        }
        CompensatedSum sum_cg_pm, sum_rg;
        for (int64_t b1 = 1; b1 < q1; ++b1) {
            sum_cg_pm.add(b.cg_nd[static_cast<size_t>(b1 * q2 + pm2)]);
            sum_rg.add(b.rg_nd[static_cast<size_t>(b1)]);
        }
        dn.add(static_cast<double>(q1) *
               (phi1 * phi2 * t_dd.value() - phi1 * t_d1.value() -
                phi2 * sum_cf.value() * sum_cg_pm.value() + sum_cf.value() * sum_rg.value()));

        // S_dd: (1/q2) (phi1 K1[m n p inv(q2^2)] - 1)(phi2 K2[n p inv(q1^2)] - 1)
        CompensatedSum dd_blk;
        for (int64_t a = 1; a < q1; ++a) {
            const double cf = b.cf_d[static_cast<size_t>(a)];
            if (cf == 0.0) continue;
            CompensatedSum inner;
            for (int64_t b1 = 1; b1 < q1; ++b1) {
                const int64_t r = mod_mul(mod_mul(mod_mul(a, b1, q1), p, q1), q2sq_bar1, q1);
                inner.add((phi1 * b.k1[static_cast<size_t>(r)] - 1.0) * hg[static_cast<size_t>(b1)]);
            }
            dd_blk.add(cf * inner.value());
        }
        dd.add(dd_blk.value() / static_cast<double>(q2));
    }
    return PartTotals{cplx(nn.value(), 0.0), cplx(nd.value(), 0.0), cplx(dn.value(), 0.0),
                      cplx(dd.value(), 0.0)};
}

// Direct path: explicit sums over (chi, psi) with product Gauss sums by
// direct summation, organized through the residue-class sums (an exact
// regrouping of the finite double series).
inline PartTotals direct_parts(const MomentContext& ctx) {
    const int64_t q2 = ctx.par.q2, p = ctx.par.p;
    struct TaskResult {
        cplx nn, nd, dn, dd;
    };
    // Flatten (block, chi-exponent) for the deterministic parallel map.
    std::vector<std::pair<size_t, int64_t>> tasks;
    for (size_t bi = 0; bi < ctx.blocks.size(); ++bi)
        for (int64_t e1 = 1; e1 <= ctx.blocks[bi].q1 - 2; ++e1) tasks.emplace_back(bi, e1);

    auto results = parallel_map<TaskResult>(
        tasks.size(), ctx.opts.threads, [&](size_t ti) -> TaskResult {
            const auto [bi, e1] = tasks[ti];
            const auto& b = ctx.blocks[bi];
            const int64_t q1 = b.q1;
            const auto& tab1 = *b.chars;
            const auto& tab2 = *ctx.chars2;
            const cplx gchi = tab1.gauss_all()[static_cast<size_t>(e1)];

            std::vector<cplx> chi(static_cast<size_t>(q1));
            for (int64_t a = 0; a < q1; ++a) chi[static_cast<size_t>(a)] = tab1.value(e1, a);

            cplx f_nd(0.0, 0.0), f_dual_series(0.0, 0.0);
            for (int64_t a = 1; a < q1; ++a) {
                f_nd += chi[static_cast<size_t>(a)] * b.cf_nd[static_cast<size_t>(a)];
                f_dual_series += std::conj(chi[static_cast<size_t>(a)]) * b.cf_d[static_cast<size_t>(a)];
            }
            const cplx f_d = gchi * gchi / static_cast<double>(q1) * f_dual_series;

            std::vector<cplx> dg_nd(static_cast<size_t>(q2)), dg_d(static_cast<size_t>(q2));
            for (int64_t b2 = 1; b2 < q2; ++b2) {
                CompensatedCSum snd, sd;
                for (int64_t b1 = 1; b1 < q1; ++b1) {
                    snd.add(chi[static_cast<size_t>(b1)] * b.cg_nd[static_cast<size_t>(b1 * q2 + b2)]);
                    sd.add(std::conj(chi[static_cast<size_t>(b1)]) *
                           b.cg_d[static_cast<size_t>(b1 * q2 + b2)]);
                }
                dg_nd[static_cast<size_t>(b2)] = snd.value();
                dg_d[static_cast<size_t>(b2)] = sd.value();
            }

            const cplx w0 = std::conj(chi[static_cast<size_t>(mod_reduce(p, q1))]) *
                            std::conj(gchi) * std::conj(gchi);

            CompensatedCSum nn, nd, dn, dd;
            for (int64_t e2 = 1; e2 <= q2 - 2; ++e2) {
                cplx g_nd(0.0, 0.0), g_dual_series(0.0, 0.0);
                for (int64_t b2 = 1; b2 < q2; ++b2) {
                    const cplx psi = tab2.value(e2, b2);
                    g_nd += psi * dg_nd[static_cast<size_t>(b2)];
                    g_dual_series += std::conj(psi) * dg_d[static_cast<size_t>(b2)];
                }
                // Product Gauss sum by direct summation over q1 q2 residues.
                const cplx gprod =
                    gauss_sum(ProductCharacter(DirichletCharacter(q1, e1), DirichletCharacter(q2, e2)));
                const cplx g_d = gprod * gprod / static_cast<double>(q1 * q2) * g_dual_series;
                const cplx w =
                    w0 * std::conj(tab2.value(e2, p));
                nn.add(w * f_nd * g_nd);
                nd.add(w * f_nd * g_d);
                dn.add(w * f_d * g_nd);
                dd.add(w * f_d * g_d);
            }
            return TaskResult{nn.value(), nd.value(), dn.value(), dd.value()};
        });

    CompensatedCSum nn, nd, dn, dd;
    for (const auto& r : results) {
        nn.add(r.nn);
        nd.add(r.nd);
        dn.add(r.dn);
        dd.add(r.dd);
    }
    return PartTotals{nn.value(), nd.value(), dn.value(), dd.value()};
}

// U-terms by honest double sums over (m, n) with the character support
// restrictions; n_filter is a test hook restricting the n range.
inline std::array<cplx, 4> u_terms(const MomentContext& ctx,
                                   const std::function<bool(int64_t)>& n_filter) {
    const int64_t q2 = ctx.par.q2, p = ctx.par.p;
    const double phi2 = static_cast<double>(q2 - 1);
    const int64_t pm2 = mod_reduce(p, q2);
    CompensatedSum u1, u2, u3, u4;
    for (const auto& b : ctx.blocks) {
        const int64_t q1 = b.q1;
        const double phi1 = static_cast<double>(q1 - 1);
        const double root_f = std::sqrt(static_cast<double>(ctx.par.N1)) * q1;
        const double root_g = std::sqrt(static_cast<double>(ctx.par.N2)) * q1 * q2;
        // Weight arrays for the honest loops.
        std::vector<double> wf(static_cast<size_t>(b.lf.dual) + 1, 0.0);
        for (int64_t m = 1; m <= b.lf.dual; ++m) {
            if (m % q1 == 0) continue;
            wf[static_cast<size_t>(m)] = ctx.f->lambda(m) / std::sqrt(static_cast<double>(m)) *
                                         (*ctx.tf)(m / (ctx.par.X * root_f));
        }
        std::vector<double> wg(static_cast<size_t>(b.lg.nondual) + 1, 0.0);
        for (int64_t n = 1; n <= b.lg.nondual; ++n) {
            if (n % q1 == 0 || n % q2 == 0) continue;
            if (n_filter && !n_filter(n)) continue;
            wg[static_cast<size_t>(n)] = ctx.g->lambda(n) / std::sqrt(static_cast<double>(n)) *
                                         (*ctx.tg)(n * ctx.par.Y / root_g);
        }
        CompensatedSum b1s, b2s, b3s, b4s;
        for (int64_t m = 1; m <= b.lf.dual; ++m) {
            const double fm = wf[static_cast<size_t>(m)];
            if (fm == 0.0) continue;
            const int64_t mp = mod_mul(m, p, q1);
            CompensatedSum s_both, s_c1, s_c2, s_all;
            for (int64_t n = 1; n <= b.lg.nondual; ++n) {
                const double gn = wg[static_cast<size_t>(n)];
                if (gn == 0.0) continue;
                const bool c1 = n % q1 == mp;
                const bool c2 = n % q2 == pm2;
                s_all.add(gn);
                if (c1) s_c1.add(gn);
                if (c2) s_c2.add(gn);
                if (c1 && c2) s_both.add(gn);
            }
            b1s.add(fm * s_both.value());
            b2s.add(fm * s_c1.value());
            b3s.add(fm * s_c2.value());
            b4s.add(fm * s_all.value());
        }
        u1.add(q1 * phi1 * phi2 * b1s.value());
        u2.add(q1 * phi1 * b2s.value());
        u3.add(q1 * phi2 * b3s.value());
        u4.add(q1 * b4s.value());
    }
    return {cplx(u1.value(), 0.0), cplx(u2.value(), 0.0), cplx(u3.value(), 0.0),
            cplx(u4.value(), 0.0)};
}

inline int64_t snd_zero_frequency(const MomentContext& ctx) {
    // Pairs with n p = m q2^2 exactly inside the reduced S_nd ranges
    // (m from the non-dual f series, n from the dual g series).
    int64_t count = 0;
    const int64_t q2 = ctx.par.q2, p = ctx.par.p;
    for (const auto& b : ctx.blocks) {
        for (int64_t m = p; m <= b.lf.nondual; m += p) {
            const int64_t n = (m / p) * q2 * q2;
            if (n > b.lg.dual) break;
            if (m % b.q1 == 0 || n % b.q1 == 0 || n % q2 == 0) continue;
            ++count;
        }
    }
    return count;
}

inline double rel_residual(cplx a, cplx b) { return std::abs(a - b) / (1.0 + std::abs(a)); }

} // namespace detail

/// Triple sum over (q1, chi, psi) of the weighted product of central values,
/// both L-values through central_value (paper phase), deterministic order,
/// parallel over (q1, chi) with ordered merge.
inline cplx moment_bruteforce(const NewformSpec& f, const NewformSpec& g,
                              const FamilyParams& par, const MomentOptions& opts = {},
                              LValueCache* cache = nullptr) {
    LValueCache local;
    LValueCache& lcache = cache ? *cache : local;
    AfeOptions afe = opts.afe;
    afe.allow_level_overlap = afe.allow_level_overlap || !par.q2_level_coprime;

    std::vector<std::pair<int64_t, int64_t>> tasks;  // (q1, e1)
    for (int64_t q1 : par.D.primes)
        for (int64_t e1 = 1; e1 <= q1 - 2; ++e1) tasks.emplace_back(q1, e1);

    auto partials = parallel_map<cplx>(tasks.size(), opts.threads, [&](size_t ti) -> cplx {
        const auto [q1, e1] = tasks[ti];
        const DirichletCharacter chi(q1, e1);
        const cplx lf =
            lcache.get_or_compute({f.label, q1, e1, 0, 0, LValueCache::bits(par.X)}, [&] {
                return central_value(f, Twist(chi), par.X, PhaseMode::paper, afe).value;
            });
        const cplx gchi = gauss_sum(chi);
        const cplx w0 = std::conj(chi(par.p)) * std::conj(gchi) * std::conj(gchi);
        CompensatedCSum acc;
        for (int64_t e2 = 1; e2 <= par.q2 - 2; ++e2) {
            const DirichletCharacter psi(par.q2, e2);
            const cplx lg = lcache.get_or_compute(
                {g.label, q1, e1, par.q2, e2, LValueCache::bits(par.Y)}, [&] {
                    return central_value(g, Twist(ProductCharacter(chi, psi)), par.Y,
                                         PhaseMode::paper, afe)
                        .value;
                });
            acc.add(w0 * std::conj(psi(par.p)) * lf * lg);
        }
        return acc.value();
    });

    CompensatedCSum total;
    for (cplx z : partials) total.add(z);
    return total.value();
}

inline double main_term(const NewformSpec& g, const FamilyParams& par) {
    return g.lambda(par.p) / std::sqrt(static_cast<double>(par.p)) *
           static_cast<double>(prime_power_sum(2, par.Q1)) * static_cast<double>(par.q2);
}

/// The four U-terms of S_dn by direct double sums.  The optional n_filter
/// restricts the n range (a test hook for the empty-congruence-class case).
inline std::array<cplx, 4> s_dn_u_terms(const NewformSpec& f, const NewformSpec& g,
                                        const FamilyParams& par, const MomentOptions& opts = {},
                                        const std::function<bool(int64_t)>& n_filter = {}) {
    detail::MomentContext ctx(f, g, par, opts);
    return detail::u_terms(ctx, n_filter);
}

/// Both decomposition paths, the U-expansion, and every identity check; the
/// report's S is the parts total (see asymptotic_report for the brute-force
/// cross-check).
inline MomentReport moment_decomposed(const NewformSpec& f, const NewformSpec& g,
                                      const FamilyParams& par, const MomentOptions& opts = {}) {
    detail::MomentContext ctx(f, g, par, opts);
    const auto red = detail::reduced_parts(ctx);
    const auto dir = detail::direct_parts(ctx);

    MomentReport rep;
    rep.part_residual_max = std::max({detail::rel_residual(dir.nn, red.nn),
                                      detail::rel_residual(dir.nd, red.nd),
                                      detail::rel_residual(dir.dn, red.dn),
                                      detail::rel_residual(dir.dd, red.dd)});
    if (rep.part_residual_max > opts.identity_tol)
        throw DecompositionMismatch("direct vs reduced parts disagree: residual " +
                                    std::to_string(rep.part_residual_max));
    const auto us = detail::u_terms(ctx, nullptr);
    rep.u1 = us[0];
    rep.u2 = us[1];
    rep.u3 = us[2];
    rep.u4 = us[3];
    const cplx u_alt = us[0] - us[1] - us[2] + us[3];
    rep.u_residual = detail::rel_residual(red.dn, u_alt);
    if (rep.u_residual > opts.identity_tol)
        throw DecompositionMismatch("S_dn vs U-expansion disagree: residual " +
                                    std::to_string(rep.u_residual));

    rep.s_nn = red.nn;
    rep.s_nd = red.nd;
    rep.s_dn = red.dn;
    rep.s_dd = red.dd;
    rep.S = red.total();
    rep.decomposition_residual = detail::rel_residual(dir.total(), red.total());
    rep.imag_residual = std::abs(rep.S.imag()) / (1.0 + std::abs(rep.S));
    rep.main_term = main_term(g, par);
    rep.ratio = rep.main_term != 0.0 ? rep.S / rep.main_term : cplx(0.0, 0.0);
    rep.envelope_a = std::pow(static_cast<double>(par.Q1), 599.0 / 200.0) * par.q2;
    rep.envelope_b =
        std::pow(static_cast<double>(par.Q1), 701.0 / 200.0) * std::pow(par.q2, 0.75);
    rep.family_size = 0;
    for (int64_t q1 : par.D.primes) rep.family_size += (q1 - 2) * (par.q2 - 2);
    rep.snd_zero_frequency_pairs = detail::snd_zero_frequency(ctx);
    rep.q2_level_coprime = par.q2_level_coprime;
    return rep;
}

/// Full report: brute-force S, reduced parts, U-terms, main term, ratio,
/// error envelopes.  No pass/fail judgment on the ratio (the asymptotic is
/// not reachable at desk scale).
inline MomentReport asymptotic_report(const NewformSpec& f, const NewformSpec& g,
                                      const FamilyParams& par, const MomentOptions& opts = {},
                                      LValueCache* cache = nullptr) {
    MomentReport rep = moment_decomposed(f, g, par, opts);
    const cplx parts_total = rep.S;
    rep.S = moment_bruteforce(f, g, par, opts, cache);
    rep.includes_bruteforce = true;
    rep.decomposition_residual = detail::rel_residual(rep.S, parts_total);
    if (rep.decomposition_residual > opts.identity_tol)
        throw DecompositionMismatch("brute-force S vs decomposition disagree: residual " +
                                    std::to_string(rep.decomposition_residual));
    rep.imag_residual = std::abs(rep.S.imag()) / (1.0 + std::abs(rep.S));
    rep.ratio = rep.main_term != 0.0 ? rep.S / rep.main_term : cplx(0.0, 0.0);
    return rep;
}

/// W = sum over primes q in (Q, 2Q) and primitive psi mod q of
/// conj(psi(p)) L(1/2, h x psi), with the main-term comparison of the
/// prime-moduli average.
inline LemmaWReport lemma_w(const NewformSpec& h, int64_t Q, int64_t p,
                            const MomentOptions& opts = {},
                            const std::vector<int64_t>* explicit_moduli = nullptr) {
    if (!is_prime(p)) throw NotPrime("lemma_w: p must be prime");
    if (std::gcd(p, h.level) != 1)
        throw CoprimalityViolation("lemma_w: p must be coprime to the level");
    if (p >= Q) throw std::invalid_argument("lemma_w: p must be below Q");
    std::vector<int64_t> moduli;
    if (explicit_moduli) {
        moduli = *explicit_moduli;
    } else {
        moduli = primes_in_interval(Q, prime_factors(h.level)).primes;
    }
    std::vector<std::pair<int64_t, int64_t>> tasks;
    for (int64_t q : moduli)
        for (int64_t e = 1; e <= q - 2; ++e) tasks.emplace_back(q, e);

    auto partials = parallel_map<cplx>(tasks.size(), opts.threads, [&](size_t ti) -> cplx {
        const auto [q, e] = tasks[ti];
        const DirichletCharacter psi(q, e);
        const cplx lv = central_value(h, Twist(psi), 1.0, PhaseMode::paper, opts.afe).value;
        return std::conj(psi(p)) * lv;
    });
    CompensatedCSum acc;
    for (cplx z : partials) acc.add(z);

    LemmaWReport rep;
    rep.label = h.label;
    rep.Q = Q;
    rep.p = p;
    rep.W = acc.value();
    rep.main = h.lambda(p) / std::sqrt(static_cast<double>(p)) *
               static_cast<double>(prime_power_sum(1, Q));
    rep.ratio = rep.main != 0.0 ? rep.W / rep.main : cplx(0.0, 0.0);
    rep.family_size = static_cast<int64_t>(tasks.size());
    rep.imag_residual = std::abs(rep.W.imag()) / (1.0 + std::abs(rep.W));
    return rep;
}

/// Census of pairs whose |L(1/2,f x chi) L(1/2,g x chi psi)| exceeds the
/// threshold; |F| = sum (q1-2)(q2-2).  A negative threshold selects the
/// default 1e-8 * median(|L L|) over the family (floating point cannot
/// decide exact non-vanishing; the resolved threshold is reported).
inline NonvanishingCensus nonvanishing_census(const NewformSpec& f, const NewformSpec& g,
                                              const FamilyParams& par, double threshold,
                                              const MomentOptions& opts = {},
                                              LValueCache* cache = nullptr) {
    LValueCache local;
    LValueCache& lcache = cache ? *cache : local;
    AfeOptions afe = opts.afe;
    afe.allow_level_overlap = afe.allow_level_overlap || !par.q2_level_coprime;

    std::vector<std::pair<int64_t, int64_t>> tasks;
    for (int64_t q1 : par.D.primes)
        for (int64_t e1 = 1; e1 <= q1 - 2; ++e1) tasks.emplace_back(q1, e1);

    auto rows = parallel_map<std::vector<double>>(
        tasks.size(), opts.threads, [&](size_t ti) -> std::vector<double> {
            const auto [q1, e1] = tasks[ti];
            const DirichletCharacter chi(q1, e1);
            const cplx lf =
                lcache.get_or_compute({f.label, q1, e1, 0, 0, LValueCache::bits(par.X)}, [&] {
                    return central_value(f, Twist(chi), par.X, PhaseMode::paper, afe).value;
                });
            std::vector<double> out;
            out.reserve(static_cast<size_t>(par.q2 - 2));
            for (int64_t e2 = 1; e2 <= par.q2 - 2; ++e2) {
                const DirichletCharacter psi(par.q2, e2);
                const cplx lg = lcache.get_or_compute(
                    {g.label, q1, e1, par.q2, e2, LValueCache::bits(par.Y)}, [&] {
                        return central_value(g, Twist(ProductCharacter(chi, psi)), par.Y,
                                             PhaseMode::paper, afe)
                            .value;
                    });
                out.push_back(std::abs(lf * lg));
            }
            return out;
        });

    std::vector<double> products;
    for (const auto& row : rows) products.insert(products.end(), row.begin(), row.end());

    NonvanishingCensus census;
    census.family_size = static_cast<int64_t>(products.size());
    if (!products.empty()) {
        std::vector<double> sorted = products;
        std::sort(sorted.begin(), sorted.end());
        const size_t mid = sorted.size() / 2;
        census.median_product = sorted.size() % 2 == 1
                                    ? sorted[mid]
                                    : 0.5 * (sorted[mid - 1] + sorted[mid]);
    }
    census.threshold = threshold < 0.0 ? 1e-8 * census.median_product : threshold;
    for (double v : products)
        if (v > census.threshold) ++census.count;
    census.proportion = census.family_size > 0
                            ? static_cast<double>(census.count) / static_cast<double>(census.family_size)
                            : 0.0;
    const double lq = std::log(static_cast<double>(par.Q1));
    census.comparator = par.c > 0.0
                            ? static_cast<double>(par.Q1) * par.Q1 / (lq * lq * lq) *
                                  std::pow(static_cast<double>(par.q2), 1.0 - 1.0 / par.c)
                            : 0.0;
    return census;
}

/// Coefficient lengths the forms must be expanded to for these parameters.
inline std::pair<int64_t, int64_t> required_expansion(const NewformSpec& f, const NewformSpec& g,
                                                      const FamilyParams& par,
                                                      const MomentOptions& opts = {}) {
    int64_t need_f = 1, need_g = 1;
    for (int64_t q1 : par.D.primes) {
        const auto lf =
            afe_truncation(f, par.N1 * q1 * q1, par.X, opts.afe.tail_tol, opts.afe.sigma0);
        const auto lg = afe_truncation(g, par.N2 * q1 * par.q2 * q1 * par.q2, par.Y,
                                       opts.afe.tail_tol, opts.afe.sigma0);
        need_f = std::max({need_f, lf.nondual, lf.dual});
        need_g = std::max({need_g, lg.nondual, lg.dual});
    }
    return {need_f, need_g};
}

/// Rough term-evaluation count for the budget guard.
inline double work_estimate(const NewformSpec& f, const NewformSpec& g, const FamilyParams& par,
                            const MomentOptions& opts = {}) {
    double work = 0.0;
    for (int64_t q1 : par.D.primes) {
        const auto lf =
            afe_truncation(f, par.N1 * q1 * q1, par.X, opts.afe.tail_tol, opts.afe.sigma0);
        const auto lg = afe_truncation(g, par.N2 * q1 * par.q2 * q1 * par.q2, par.Y,
                                       opts.afe.tail_tol, opts.afe.sigma0);
        const double chars = static_cast<double>(q1 - 2);
        const double pairs = chars * static_cast<double>(par.q2 - 2);
        work += chars * static_cast<double>(lf.nondual + lf.dual);
        work += pairs * static_cast<double>(lg.nondual + lg.dual);
        work += pairs * static_cast<double>(q1 * par.q2);                 // product Gauss sums
        work += static_cast<double>(lf.dual) * static_cast<double>(lg.nondual);  // U loops
    }
    return work;
}

} // namespace twm
