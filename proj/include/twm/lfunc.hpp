#pragma once

// The smooth AFE cutoff V_h by numerical Mellin inversion, decay-certified
// truncation lengths, and central values of twisted L-functions.
//
// V_h(y) = (1/2pi i) int y^{-s} gamma_h(1/2+s)/gamma_h(1/2) ds/s with
// gamma_h(s) = (2pi)^{-s} Gamma(s + (k-1)/2), so the integrand ratio is
// (2pi y)^{-s} Gamma(k/2+s)/Gamma(k/2).  The contour runs along Re s = sigma0
// (default 1.0); the integrand decays like exp(-pi|t|/2), so a 0.05-step
// trapezoid is spectrally accurate, and one halving serves as the accuracy
// audit.  For y below a pivot the contour is shifted to Re s = -sigma0/4
// (picking up the residue 1 at s = 0): at Re s = sigma0 the y^{-sigma0}
// prefactor would erase ~10 digits at y = 1e-8.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "twm/arith.hpp"
#include "twm/characters.hpp"
#include "twm/errors.hpp"
#include "twm/gamma.hpp"
#include "twm/hecke.hpp"

namespace twm {

/// gamma_h(s) = (2pi)^{-s} Gamma(s + (k-1)/2); gamma_h(1/2) is finite and
/// positive, which fixes the conductor of h x chi at N q^2.
struct GammaFactor {
    int weight;
    cplx operator()(cplx s) const {
        return std::pow(cplx(two_pi, 0.0), -s) * complex_gamma(s + (weight - 1) / 2.0);
    }
};

namespace detail {

// Precomputed trapezoid coefficients for (1/2pi) int (2pi y)^{-s}
// Gamma(a+s)/Gamma(a) s^m dt on a fixed vertical line.  Per y the sum is just
// coef[j] * y^{-sigma} * exp(-i t_j ln y), with the phase advanced by a
// rotation step (resynced every 128 nodes to hold the phase error near one
// ulp).
struct ContourKernel {
    double sigma = 1.0;
    double step = 0.05;
    int half_count = 0;  // nodes at t = j*step, |j| <= half_count
    std::array<std::vector<cplx>, 3> coef;  // m = -1, 0, 1

    double height() const { return step * half_count; }
};

inline ContourKernel build_kernel(double a, double sigma, double h) {
    ContourKernel ker;
    ker.sigma = sigma;
    ker.step = h;
    const double gamma_a = std::abs(complex_gamma(cplx(a, 0.0)));
    const double scale0 = std::abs(complex_gamma(cplx(a + sigma, 0.0))) / gamma_a;
    double T = 20.0;
    while (T < 400.0) {
        const double mag =
            std::abs(complex_gamma(cplx(a + sigma, T))) * (1.0 + T) * (1.0 + T) / gamma_a;
        if (mag < 1e-21 * std::max(1.0, scale0)) break;
        T += 10.0;
    }
    ker.half_count = static_cast<int>(std::ceil(T / h));
    const int n = 2 * ker.half_count + 1;
    for (auto& v : ker.coef) v.resize(static_cast<size_t>(n));
    const double log_two_pi = std::log(two_pi);
    for (int idx = 0; idx < n; ++idx) {
        const int j = idx - ker.half_count;
        const cplx s(sigma, j * h);
        // (2pi)^{-s} Gamma(a+s)/Gamma(a) * h/(2pi)
        const cplx base = std::exp(-s * log_two_pi) * complex_gamma(a + s) / gamma_a *
                          (h / two_pi);
        ker.coef[0][static_cast<size_t>(idx)] = base / s;
        ker.coef[1][static_cast<size_t>(idx)] = base;
        ker.coef[2][static_cast<size_t>(idx)] = base * s;
    }
    return ker;
}

// m = -1, 0, 1 selects the s-power; the y^{-s} factor is applied here.
inline cplx kernel_sum(const ContourKernel& ker, double y, int m) {
    const auto& coef = ker.coef[static_cast<size_t>(m + 1)];
    const double L = std::log(y);
    const double h = ker.step;
    const cplx rot(std::cos(h * L), -std::sin(h * L));
    CompensatedCSum acc;
    cplx phase;
    const int n = 2 * ker.half_count + 1;
    for (int idx = 0; idx < n; ++idx) {
        if (idx % 128 == 0) {
            const double ph = -(idx - ker.half_count) * h * L;
            phase = cplx(std::cos(ph), std::sin(ph));
        }
        acc.add(coef[static_cast<size_t>(idx)] * phase);
        phase *= rot;
    }
    return std::pow(y, -ker.sigma) * acc.value();
}

// Decay certificates: contour shifts to Re s = A give
// |V(y)| <= J_A (2pi y)^{-A}, the computable instance of the
// (1 + y/k^2)^{-A} envelope.  The quarter-shift to Re s = -1/4 bounds
// |V(y) - 1| <= J_q (2pi y)^{1/4}.
class VDecayBound {
public:
    explicit VDecayBound(int weight) : k_(weight) {
        const double a = weight / 2.0;
        for (double A : menu_) logJ_.push_back(std::log(shift_integral(a, A)));
        j_quarter_ = shift_integral(a, -0.25);
    }

    int weight() const { return k_; }

    /// Pointwise certificate: min of the quarter-shift leg 1 + J_q (2pi y)^{1/4}
    /// and the best right-shift leg J_A (2pi y)^{-A}; each leg is valid for
    /// every y > 0.
    double bound(double y) const { return std::min(quarter_leg(y), power_leg(y)); }

    /// Rigorous bound for sup |V| on (0, ymax]: the increasing quarter leg and
    /// the decreasing power leg cross once; the sup of their min is the value
    /// at the crossing (or at the interval end).
    double sup_below(double ymax) const {
        double lo = 1e-12, hi = ymax;
        if (quarter_leg(hi) <= power_leg(hi)) return quarter_leg(hi);
        if (quarter_leg(lo) >= power_leg(lo)) return power_leg(lo);
        for (int i = 0; i < 200; ++i) {
            const double mid = std::sqrt(lo * hi);
            if (quarter_leg(mid) < power_leg(mid))
                lo = mid;
            else
                hi = mid;
        }
        return quarter_leg(hi);
    }

    /// Constant C with |V(y)| <= C (1 + y/k^2)^{-A} for all y > 0.
    double envelope_constant(int A) const {
        const double a = k_ / 2.0;
        double logJA = 0.0;
        bool found = false;
        for (size_t i = 0; i < menu_.size(); ++i)
            if (menu_[i] == static_cast<double>(A)) { logJA = logJ_[i]; found = true; }
        if (!found) logJA = std::log(shift_integral(a, static_cast<double>(A)));
        const double c1 = sup_below(static_cast<double>(k_) * k_) * std::pow(2.0, A);
        const double c2 = std::exp(logJA - A * std::log(pi_ * k_ * k_));
        return std::max(c1, c2);
    }

    /// Smallest M with sum_{n>M} d(n) n^{-1/2} |V(n y0)| certified below tol.
    int64_t truncation_length(double y0, double tol) const {
        const double log_target = std::log(tol);
        auto tail_log = [&](double M) {
            double best = 1e300;
            for (size_t i = 0; i < menu_.size(); ++i) {
                const double A = menu_[i];
                const double v = logJ_[i] - A * std::log(two_pi * y0 * M) +
                                 std::log1p(M / (A - 1.0));
                best = std::min(best, v);
            }
            return best + std::log(2.0);  // d(n) <= 2 sqrt(n)
        };
        int64_t hi = 8;
        while (tail_log(static_cast<double>(hi)) >= log_target) {
            hi *= 2;
            if (hi > (int64_t{1} << 33))
                throw std::runtime_error("truncation certificate not reached below 8e9 terms");
        }
        int64_t lo = hi / 2;
        while (lo + 1 < hi) {
            const int64_t mid = lo + (hi - lo) / 2;
            if (tail_log(static_cast<double>(mid)) < log_target)
                hi = mid;
            else
                lo = mid;
        }
        return std::max<int64_t>(hi, 1);
    }

private:
    static constexpr double pi_ = 3.14159265358979323846264338327950288;

    double quarter_leg(double y) const { return 1.0 + j_quarter_ * std::pow(two_pi * y, 0.25); }

    double power_leg(double y) const {
        double best = 1e300;
        const double ly = std::log(two_pi * y);
        for (size_t i = 0; i < menu_.size(); ++i)
            best = std::min(best, std::exp(logJ_[i] - menu_[i] * ly));
        return best;
    }

    // (1/2pi) int |Gamma(a+sigma+it)| / (|sigma+it| Gamma(a)) dt by trapezoid.
    static double shift_integral(double a, double sigma) {
        const double gamma_a = std::abs(complex_gamma(cplx(a, 0.0)));
        const double h = 0.05;
        CompensatedSum acc;
        for (int j = 0;; ++j) {
            const double t = j * h;
            const double mag = std::abs(complex_gamma(cplx(a + sigma, t))) /
                               (std::hypot(sigma, t) * gamma_a);
            acc.add(j == 0 ? mag : 2.0 * mag);
            if (t > 20.0 && mag < 1e-22 * std::max(1.0, acc.value())) break;
            if (t > 600.0) break;
        }
        return acc.value() * h / two_pi;
    }

    int k_;
    std::vector<double> menu_ = {2, 3, 4, 6, 8, 12, 16, 24, 32, 48};
    std::vector<double> logJ_;
    double j_quarter_ = 0.0;
};

// Everything y-independent for one (weight, sigma0): the four kernels (right
// and left contour, audit and fine step) plus the decay certificates.
class MellinEvaluator {
public:
    MellinEvaluator(int weight, double sigma0)
        : weight_(weight), sigma0_(sigma0), decay_(weight) {
        if (weight < 1) throw std::invalid_argument("smooth weight: weight must be >= 1");
        if (sigma0 <= 0.0) throw std::invalid_argument("smooth weight: sigma0 must be > 0");
        const double a = weight / 2.0;
        const double left = -sigma0 / 4.0;
        right_fine_ = build_kernel(a, sigma0, 0.025);
        right_coarse_ = build_kernel(a, sigma0, 0.05);
        left_fine_ = build_kernel(a, left, 0.025);
        left_coarse_ = build_kernel(a, left, 0.05);
    }

    int weight() const { return weight_; }
    double sigma0() const { return sigma0_; }
    double pivot() const { return pivot_; }
    double truncation_height() const { return right_fine_.height(); }
    const VDecayBound& decay() const { return decay_; }

    cplx value_complex(double y, bool fine = true) const {
        if (y <= 0.0) throw std::invalid_argument("smooth weight: y must be > 0");
        if (y < pivot_)
            return 1.0 + kernel_sum(fine ? left_fine_ : left_coarse_, y, -1);
        return kernel_sum(fine ? right_fine_ : right_coarse_, y, -1);
    }

    double value(double y) const { return value_complex(y).real(); }

    struct Node {
        double v = 0.0;   // V(y)
        double d1 = 0.0;  // dV/d ln y
        double d2 = 0.0;  // d^2V/d ln y^2
    };

    Node node(double y) const {
        const bool small = y < pivot_;
        const ContourKernel& ker = small ? left_fine_ : right_fine_;
        Node n;
        n.v = (small ? 1.0 : 0.0) + kernel_sum(ker, y, -1).real();
        n.d1 = -kernel_sum(ker, y, 0).real();
        n.d2 = kernel_sum(ker, y, 1).real();
        return n;
    }

private:
    int weight_;
    double sigma0_;
    double pivot_ = 0.01;
    ContourKernel right_fine_, right_coarse_, left_fine_, left_coarse_;
    VDecayBound decay_;
};

inline std::shared_ptr<const MellinEvaluator> mellin_evaluator(int weight, double sigma0) {
    static std::mutex mu;
    static std::map<std::pair<int, double>, std::shared_ptr<const MellinEvaluator>> registry;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(weight, sigma0);
    auto it = registry.find(key);
    if (it != registry.end()) return it->second;
    auto ev = std::make_shared<const MellinEvaluator>(weight, sigma0);
    registry.emplace(key, ev);
    return ev;
}

} // namespace detail

/// V_h(y) by direct numerical Mellin inversion.
inline double smooth_weight(int weight, double y, double sigma0 = 1.0) {
    return detail::mellin_evaluator(weight, sigma0)->value(y);
}

/// Complex-valued variant; the imaginary part is a cancellation diagnostic.
inline cplx smooth_weight_complex(int weight, double y, double sigma0 = 1.0) {
    return detail::mellin_evaluator(weight, sigma0)->value_complex(y);
}

/// Precomputed grid of V on a geometric mesh (64 points per decade) with
/// stored log-derivatives; lookups are two-point quintic Hermite in ln y.
/// Falls back to direct quadrature outside the grid, and everywhere if the
/// build-time midpoint audit missed the tolerance.
class SmoothWeightTable {
public:
    struct Node {
        double v = 0.0, d1 = 0.0, d2 = 0.0;
    };

    SmoothWeightTable(int weight, double tolerance, double sigma0 = 1.0)
        : ev_(detail::mellin_evaluator(weight, sigma0)), tol_(tolerance) {
        if (tolerance < 1e-12)
            throw std::invalid_argument("smooth weight table: tolerance must be >= 1e-12");
        build_grid();
        nodes_.resize(static_cast<size_t>(count_));
        for (int i = 0; i < count_; ++i) {
            const double y = std::exp(w_min_ + i * h_);
            const auto n = ev_->node(y);
            nodes_[static_cast<size_t>(i)] = Node{n.v, n.d1, n.d2};
            const double coarse = ev_->value_complex(y, false).real();
            quad_audit_ = std::max(quad_audit_, std::abs(coarse - n.v));
        }
        run_midpoint_audit();
    }

    /// Rebuild from persisted nodes (cache path); same interpolation code, so
    /// lookups are bit-identical with a fresh build.
    SmoothWeightTable(int weight, double tolerance, double sigma0, std::vector<Node> nodes,
                      bool interp_ok)
        : ev_(detail::mellin_evaluator(weight, sigma0)), tol_(tolerance) {
        build_grid();
        if (static_cast<int>(nodes.size()) != count_)
            throw CacheCorrupt("smooth weight table: persisted grid size mismatch");
        nodes_ = std::move(nodes);
        interp_ok_ = interp_ok;
    }

    int weight() const { return ev_->weight(); }
    double sigma0() const { return ev_->sigma0(); }
    double tolerance() const { return tol_; }
    double truncation_height() const { return ev_->truncation_height(); }
    int interpolation_order() const { return 5; }
    bool interpolation_ok() const { return interp_ok_; }
    double midpoint_audit_max() const { return midpoint_audit_; }
    double quad_audit_max() const { return quad_audit_; }
    double grid_y_min() const { return std::exp(w_min_); }
    double grid_y_max() const { return std::exp(w_min_ + (count_ - 1) * h_); }
    int grid_size() const { return count_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const detail::VDecayBound& decay() const { return ev_->decay(); }

    double node_y(int i) const { return std::exp(w_min_ + i * h_); }

    double quadrature(double y) const { return ev_->value(y); }

    double operator()(double y) const {
        if (y <= 0.0) throw std::invalid_argument("smooth weight table: y must be > 0");
        const double w = std::log(y);
        if (!interp_ok_ || w < w_min_ || w >= w_min_ + (count_ - 1) * h_) return ev_->value(y);
        int i = static_cast<int>((w - w_min_) / h_);
        i = std::min(i, count_ - 2);
        const Node& a = nodes_[static_cast<size_t>(i)];
        const Node& b = nodes_[static_cast<size_t>(i + 1)];
        const double tau = (w - (w_min_ + i * h_)) / h_;
        return hermite_quintic(a, b, tau, h_);
    }

private:
    void build_grid() {
        w_min_ = std::log(1e-10);
        // Grid upper end: where the decay certificate is below 1e-18, at
        // least 16.
        double ycut = 16.0;
        while (ev_->decay().bound(ycut) > 1e-18 && ycut < 1e6) ycut *= 2.0;
        h_ = std::log(10.0) / 64.0;
        count_ = static_cast<int>(std::ceil((std::log(ycut) - w_min_) / h_)) + 1;
    }

    static double hermite_quintic(const Node& a, const Node& b, double t, double h) {
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
        const double h00 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
        const double h10 = t - 6 * t3 + 8 * t4 - 3 * t5;
        const double h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
        const double h01 = 10 * t3 - 15 * t4 + 6 * t5;
        const double h11 = -4 * t3 + 7 * t4 - 3 * t5;
        const double h21 = 0.5 * t3 - t4 + 0.5 * t5;
        return a.v * h00 + h * a.d1 * h10 + h * h * a.d2 * h20 + b.v * h01 + h * b.d1 * h11 +
               h * h * b.d2 * h21;
    }

    void run_midpoint_audit() {
        interp_ok_ = true;
        for (int i = 0; i + 1 < count_; ++i) {
            const double w = w_min_ + (i + 0.5) * h_;
            const double y = std::exp(w);
            const double direct = ev_->value(y);
            const double interp =
                hermite_quintic(nodes_[static_cast<size_t>(i)], nodes_[static_cast<size_t>(i + 1)],
                                0.5, h_);
            midpoint_audit_ = std::max(midpoint_audit_, std::abs(direct - interp));
        }
        if (midpoint_audit_ > tol_) interp_ok_ = false;
    }

    std::shared_ptr<const detail::MellinEvaluator> ev_;
    double tol_;
    double w_min_ = 0.0, h_ = 0.0;
    int count_ = 0;
    std::vector<Node> nodes_;
    bool interp_ok_ = false;
    double midpoint_audit_ = 0.0;
    double quad_audit_ = 0.0;
};

namespace detail {

struct WeightTableRegistry {
    std::mutex mu;
    std::map<std::tuple<int, double, double>, std::shared_ptr<const SmoothWeightTable>> reg;
    static WeightTableRegistry& instance() {
        static WeightTableRegistry r;
        return r;
    }
};

} // namespace detail

inline std::shared_ptr<const SmoothWeightTable> build_weight_table(int weight, double tolerance,
                                                                   double sigma0 = 1.0) {
    return std::make_shared<const SmoothWeightTable>(weight, tolerance, sigma0);
}

/// Shared per-(weight, tolerance, sigma0) table, built on first use.  The
/// build runs under the registry lock: first-touch may come from concurrent
/// workers.
inline std::shared_ptr<const SmoothWeightTable> weight_table(int weight, double tolerance = 1e-8,
                                                             double sigma0 = 1.0) {
    auto& registry = detail::WeightTableRegistry::instance();
    std::lock_guard<std::mutex> lock(registry.mu);
    auto& slot = registry.reg[std::make_tuple(weight, tolerance, sigma0)];
    if (!slot) slot = build_weight_table(weight, tolerance, sigma0);
    return slot;
}

/// Install a persisted table (cache load) so later lookups reuse it.
inline void install_weight_table(std::shared_ptr<const SmoothWeightTable> table) {
    auto& registry = detail::WeightTableRegistry::instance();
    std::lock_guard<std::mutex> lock(registry.mu);
    registry.reg[std::make_tuple(table->weight(), table->tolerance(), table->sigma0())] =
        std::move(table);
}

struct AfeLengths {
    int64_t nondual = 1;
    int64_t dual = 1;
};

/// Smallest series lengths whose discarded tails are certified below
/// tail_tol by the V-decay envelopes, with |lambda(n)| <= d(n) <= 2 sqrt(n).
inline AfeLengths afe_truncation(const NewformSpec& form, int64_t conductor, double X,
                                 double tail_tol, double sigma0 = 1.0) {
    if (tail_tol <= 0.0) throw std::invalid_argument("afe_truncation: tail_tol must be > 0");
    if (conductor < 1) throw std::invalid_argument("afe_truncation: conductor must be >= 1");
    const auto ev = detail::mellin_evaluator(form.weight, sigma0);
    const double root = std::sqrt(static_cast<double>(conductor));
    AfeLengths len;
    len.nondual = ev->decay().truncation_length(X / root, tail_tol);
    len.dual = ev->decay().truncation_length(1.0 / (X * root), tail_tol);
    return len;
}

/// A twist: the trivial character (modulus 1), a primitive character of prime
/// modulus, or a product character of two distinct prime moduli.
class Twist {
public:
    Twist() : chi_(DirichletCharacter()), gauss_(1.0, 0.0) {}
    Twist(DirichletCharacter chi) : chi_(std::move(chi)) {
        gauss_ = gauss_sum(std::get<DirichletCharacter>(chi_));
    }
    Twist(ProductCharacter chi) : chi_(std::move(chi)) {
        gauss_ = gauss_sum(std::get<ProductCharacter>(chi_));
    }

    int64_t modulus() const {
        return std::visit([](const auto& c) { return c.modulus(); }, chi_);
    }
    bool is_primitive() const {
        return std::visit([](const auto& c) { return c.is_primitive(); }, chi_);
    }
    cplx value(int64_t n) const {
        return std::visit([n](const auto& c) { return c(n); }, chi_);
    }
    cplx gauss() const { return gauss_; }
    Twist conjugate() const {
        return std::visit([](const auto& c) { return Twist(c.conjugate()); }, chi_);
    }
    bool is_product() const { return std::holds_alternative<ProductCharacter>(chi_); }
    const ProductCharacter& product() const { return std::get<ProductCharacter>(chi_); }
    const DirichletCharacter& prime_char() const { return std::get<DirichletCharacter>(chi_); }

private:
    std::variant<DirichletCharacter, ProductCharacter> chi_;
    cplx gauss_;
};

enum class PhaseMode { paper, auto_fit };

inline std::string to_string(PhaseMode m) { return m == PhaseMode::paper ? "paper" : "auto"; }

struct AfeOptions {
    double tail_tol = 1e-12;
    double sigma0 = 1.0;
    double table_tol = 1e-8;
    bool allow_level_overlap = false;  // run the formal AFE formula even when
                                       // gcd(modulus, level) > 1
    bool spread_diagnostic = false;    // evaluate the X in {1/2,1,2} spread
};

struct CentralValue {
    cplx value;
    int64_t len_nondual = 0;
    int64_t len_dual = 0;
    cplx phase = cplx(1.0, 0.0);  // unit phase applied to the dual term
    PhaseMode mode = PhaseMode::paper;
    double spread = -1.0;  // relative X-spread over {1/2, 1, 2}; -1 if not evaluated
};

namespace detail {

struct AfeSide {
    cplx nondual;
    cplx dual;  // includes the G^2/q factor, phase 1
};

inline AfeSide afe_sides(const NewformSpec& form, const Twist& twist, double X,
                         const SmoothWeightTable& table, const AfeLengths& len) {
    const int64_t q = twist.modulus();
    const double root_cond =
        std::sqrt(static_cast<double>(form.level)) * static_cast<double>(q);
    const double y_nd = X / root_cond;
    const double y_d = 1.0 / (X * root_cond);
    CompensatedCSum nd, du;
    for (int64_t n = 1; n <= len.nondual; ++n) {
        const cplx ch = twist.value(n);
        if (ch == cplx(0.0, 0.0)) continue;
        nd.add(ch * (form.lambda(n) / std::sqrt(static_cast<double>(n)) * table(n * y_nd)));
    }
    for (int64_t n = 1; n <= len.dual; ++n) {
        const cplx ch = twist.value(n);
        if (ch == cplx(0.0, 0.0)) continue;
        du.add(std::conj(ch) * (form.lambda(n) / std::sqrt(static_cast<double>(n)) * table(n * y_d)));
    }
    const cplx g = twist.gauss();
    AfeSide side;
    side.nondual = nd.value();
    side.dual = g * g / static_cast<double>(q) * du.value();
    return side;
}

} // namespace detail

/// Central value L(1/2, h x chi) by the approximate functional equation with
/// balance parameter X and conductor N q^2.  phase_mode auto fits the unit
/// phase on the dual term that minimizes the spread over X in {1/2, 1, 2}
/// (the diagnostic for the root-number factor the plain formula omits).
inline CentralValue central_value(const NewformSpec& form, const Twist& twist, double X,
                                  PhaseMode mode = PhaseMode::paper, AfeOptions opts = {}) {
    if (X <= 0.0) throw std::invalid_argument("central_value: X must be > 0");
    const int64_t q = twist.modulus();
    if (!opts.allow_level_overlap && std::gcd(q, form.level) != 1)
        throw CoprimalityViolation("central_value: twist modulus " + std::to_string(q) +
                                   " shares a factor with level " + std::to_string(form.level));
    const __int128 cond_wide = static_cast<__int128>(form.level) * q * q;
    if (cond_wide > INT64_MAX) throw std::invalid_argument("central_value: conductor overflow");
    const int64_t cond = static_cast<int64_t>(cond_wide);
    const auto table = weight_table(form.weight, opts.table_tol, opts.sigma0);

    const bool need_spread = mode == PhaseMode::auto_fit || opts.spread_diagnostic;
    CentralValue out;
    out.mode = mode;

    const auto len_main = afe_truncation(form, cond, X, opts.tail_tol, opts.sigma0);
    out.len_nondual = len_main.nondual;
    out.len_dual = len_main.dual;

    if (!need_spread) {
        if (std::max(len_main.nondual, len_main.dual) > form.n_max())
            throw OutOfRange(form.label + ": AFE needs " +
                             std::to_string(std::max(len_main.nondual, len_main.dual)) +
                             " coefficients, have " + std::to_string(form.n_max()));
        const auto side = detail::afe_sides(form, twist, X, *table, len_main);
        out.value = side.nondual + side.dual;
        return out;
    }

    // Evaluate at the spread probes and the requested X with shared lengths.
    const std::array<double, 3> probes = {0.5, 1.0, 2.0};
    std::array<detail::AfeSide, 3> sides;
    int64_t need = std::max(len_main.nondual, len_main.dual);
    std::array<AfeLengths, 3> probe_len;
    for (size_t i = 0; i < probes.size(); ++i) {
        probe_len[i] = afe_truncation(form, cond, probes[i], opts.tail_tol, opts.sigma0);
        need = std::max({need, probe_len[i].nondual, probe_len[i].dual});
    }
    if (need > form.n_max())
        throw OutOfRange(form.label + ": AFE needs " + std::to_string(need) +
                         " coefficients, have " + std::to_string(form.n_max()));
    for (size_t i = 0; i < probes.size(); ++i)
        sides[i] = detail::afe_sides(form, twist, probes[i], *table, probe_len[i]);

    cplx phase(1.0, 0.0);
    if (mode == PhaseMode::auto_fit) {
        // v_i = A_i + phi B_i; minimizing sum |v_i - mean|^2 over |phi| = 1
        // gives phi = -conj(w)/|w| with w = sum (B_i - B_mean) conj(A_i - A_mean).
        cplx a_mean = (sides[0].nondual + sides[1].nondual + sides[2].nondual) / 3.0;
        cplx b_mean = (sides[0].dual + sides[1].dual + sides[2].dual) / 3.0;
        cplx w(0.0, 0.0);
        for (const auto& s : sides) w += (s.dual - b_mean) * std::conj(s.nondual - a_mean);
        if (std::abs(w) > 1e-300) phase = -std::conj(w) / std::abs(w);
    }
    out.phase = phase;

    std::array<cplx, 3> v;
    cplx mean(0.0, 0.0);
    for (size_t i = 0; i < 3; ++i) {
        v[i] = sides[i].nondual + phase * sides[i].dual;
        mean += v[i] / 3.0;
    }
    double spread = 0.0;
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = i + 1; j < 3; ++j) spread = std::max(spread, std::abs(v[i] - v[j]));
    // Magnitude floor: twists with vanishing central value (sign -1 forces
    // them) would otherwise divide rounding junk by rounding junk.
    out.spread = spread / std::max(std::abs(mean), 1e-3);

    const auto side = detail::afe_sides(form, twist, X, *table, len_main);
    out.value = side.nondual + phase * side.dual;
    return out;
}

} // namespace twm
