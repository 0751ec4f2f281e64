// twm: command-line front end for the twisted-moment toolkit.
//
// Commands: characters, lvalue, moment, lemma-w, census, cache.
// Exit codes: 0 success, 2 usage, 3 precondition violation, 4 budget
// exceeded, 5 internal identity failure.

#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "twm/cache.hpp"
#include "twm/config.hpp"
#include "twm/moments.hpp"
#include "twm/output.hpp"

using namespace twm;

namespace {

int resolved_threads(const RunConfig& cfg) {
    return cfg.threads == 0 ? default_thread_count() : cfg.threads;
}

MomentOptions moment_options(const RunConfig& cfg) {
    MomentOptions opts;
    opts.afe.tail_tol = cfg.tail_tol;
    opts.afe.table_tol = cfg.table_tol;
    opts.afe.sigma0 = cfg.sigma0;
    opts.threads = resolved_threads(cfg);
    opts.identity_tol = cfg.identity_tol;
    return opts;
}

struct FormMeta {
    int weight;
    int64_t level;
};

FormMeta builtin_meta(const std::string& name) {
    if (name == "delta") return {12, 1};
    if (name == "eta11") return {2, 11};
    throw NotFound("unknown form: " + name + " (want delta, eta11, or file)");
}

// Resolve a form to at least `need` coefficients, preferring the disk cache
// for builtins.
NewformSpec resolve_form(const RunConfig& cfg, const std::string& name, int64_t need) {
    if (name == "file") {
        if (cfg.coeff_file.empty()) throw ParseError("--coeff-file required for form 'file'");
        NewformSpec f = load_coefficients(cfg.coeff_file);
        for (const auto& w : f.warnings) std::cerr << "warning: " << w << "\n";
        if (f.n_max() < need)
            throw OutOfRange("coefficient file has " + std::to_string(f.n_max()) +
                             " coefficients, need " + std::to_string(need));
        return f;
    }
    builtin_meta(name);
    if (auto cached = cachefs::load_coeffs(cfg.cache_dir, name); cached && cached->n_max() >= need)
        return *cached;
    return expand_builtin(name, need);
}

FormMeta form_meta(const RunConfig& cfg, const std::string& name) {
    if (name == "file") {
        NewformSpec f = load_coefficients(cfg.coeff_file);
        return {f.weight, f.level};
    }
    return builtin_meta(name);
}

// Install persisted cutoff tables (if warmed) so lookups skip the rebuild.
void install_cached_tables(const RunConfig& cfg, std::initializer_list<int> weights) {
    for (int weight : weights) {
        if (auto table = cachefs::load_vtable(cfg.cache_dir, weight, cfg.table_tol, cfg.sigma0))
            install_weight_table(std::move(table));
    }
}

void emit(const RunConfig& cfg, const std::vector<Record>& records) {
    std::fputs(render(cfg, records).c_str(), stdout);
}

// ---------------------------------------------------------------------------

int cmd_characters(RunConfig& cfg, int64_t modulus, int64_t modulus2, bool identity_check,
                   int64_t pair_count) {
    if (!is_prime(modulus)) throw NotPrime("characters: modulus must be prime");
    if (modulus > 10000)
        throw BudgetExceeded("characters: modulus " + std::to_string(modulus) +
                             " above the desk-scale guard 10000 (Gauss tables are O(q^2))");
    std::vector<Record> records;
    if (identity_check) {
        // Averaged character identities with residuals.
        double eq25 = 0.0;
        if (modulus >= 3) {
            uint64_t state = 0x5a17b3d9u;
            const int64_t pairs = modulus <= 61 ? (modulus - 1) * (modulus - 1) : pair_count;
            for (int64_t i = 0; i < pairs; ++i) {
                int64_t n, r;
                if (modulus <= 61) {
                    n = 1 + i / (modulus - 1);
                    r = 1 + i % (modulus - 1);
                } else {
                    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
                    n = 1 + static_cast<int64_t>(state % static_cast<uint64_t>(modulus - 1));
                    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
                    r = 1 + static_cast<int64_t>(state % static_cast<uint64_t>(modulus - 1));
                }
                const cplx avg = primitive_char_average(modulus, n, r);
                const double expected = n % modulus == r % modulus
                                            ? static_cast<double>(modulus - 1) - 1.0
                                            : -1.0;
                eq25 = std::max(eq25, std::abs(avg - expected));
            }
        }
        double eq26 = 0.0;
        for (int64_t r = 1; r < modulus; ++r) {
            const cplx avg = gauss_square_average(modulus, r);
            const cplx expected =
                static_cast<double>(modulus - 1) * kloosterman(1, r, modulus) - 1.0;
            eq26 = std::max(eq26, std::abs(avg - expected));
        }
        if (modulus2 == 0) {
            modulus2 = modulus + 1;
            while (!is_prime(modulus2)) ++modulus2;
        }
        if (!is_prime(modulus2) || modulus2 == modulus)
            throw NotPrime("characters: modulus2 must be a distinct prime");
        double eq27 = 0.0;
        int64_t done = 0;
        for (int64_t e1 = 1; e1 <= modulus - 2 && done < 20; ++e1) {
            for (int64_t e2 = 1; e2 <= modulus2 - 2 && done < 20; ++e2, ++done) {
                const DirichletCharacter chi(modulus, e1), psi(modulus2, e2);
                const cplx lhs = gauss_sum(ProductCharacter(chi, psi));
                const cplx rhs = gauss_sum(chi) * gauss_sum(psi) * chi(modulus2) * psi(modulus);
                eq27 = std::max(eq27, std::abs(lhs - rhs) / std::abs(lhs));
            }
        }
        Record rec;
        rec.add("modulus", modulus);
        rec.add("primitive_characters", modulus >= 3 ? modulus - 2 : int64_t{0});
        rec.add("char_average_max_residual", eq25);
        rec.add("gauss_square_average_max_residual", eq26);
        rec.add("product_gauss_modulus2", modulus2);
        rec.add("product_gauss_max_residual", eq27);
        records.push_back(std::move(rec));
    } else {
        const double root_q = std::sqrt(static_cast<double>(modulus));
        for (int64_t e = 0; e <= std::max<int64_t>(modulus - 2, 0); ++e) {
            const DirichletCharacter chi(modulus, e);
            const cplx g = gauss_sum(chi);
            Record rec;
            rec.add("exponent", e);
            rec.add("parity", int64_t{chi.parity()});
            rec.add("principal", chi.is_principal());
            rec.add("gauss_re", g.real());
            rec.add("gauss_im", g.imag());
            rec.add("gauss_abs", std::abs(g));
            rec.add("gauss_abs_residual", e == 0 ? 0.0 : std::abs(std::abs(g) - root_q));
            records.push_back(std::move(rec));
        }
    }
    emit(cfg, records);
    return 0;
}

int cmd_lvalue(RunConfig& cfg, const std::string& form_name, int64_t modulus, int64_t exponent) {
    if (modulus != 1 && !is_prime(modulus)) throw NotPrime("lvalue: modulus must be 1 or prime");
    const FormMeta meta = form_meta(cfg, form_name);
    const __int128 cond_wide = static_cast<__int128>(meta.level) * modulus * modulus;
    if (cond_wide > INT64_MAX) throw std::invalid_argument("lvalue: conductor overflow");
    if (std::gcd(modulus, meta.level) != 1)
        throw CoprimalityViolation("lvalue: modulus " + std::to_string(modulus) +
                                   " shares a factor with level " + std::to_string(meta.level));
    const int64_t cond = static_cast<int64_t>(cond_wide);
    int64_t need = 1;
    for (double xp : {cfg.x, 0.5, 1.0, 2.0}) {
        NewformSpec probe;  // weight-only probe for truncation lengths
        probe.weight = meta.weight;
        probe.level = meta.level;
        const auto len = afe_truncation(probe, cond, xp, cfg.tail_tol, cfg.sigma0);
        need = std::max({need, len.nondual, len.dual});
    }
    const NewformSpec form = resolve_form(cfg, form_name, need);
    install_cached_tables(cfg, {form.weight});
    const Twist twist = modulus == 1 ? Twist() : Twist(DirichletCharacter(modulus, exponent));
    AfeOptions opts;
    opts.tail_tol = cfg.tail_tol;
    opts.table_tol = cfg.table_tol;
    opts.sigma0 = cfg.sigma0;
    opts.spread_diagnostic = true;
    const PhaseMode mode = cfg.phase_mode == "auto" ? PhaseMode::auto_fit : PhaseMode::paper;
    const CentralValue cv = central_value(form, twist, cfg.x, mode, opts);

    Record rec;
    rec.add("form", form.label);
    rec.add("modulus", modulus);
    rec.add("exponent", exponent);
    rec.add("x", cfg.x);
    rec.add("phase_mode", to_string(cv.mode));
    rec.add("value_re", cv.value.real());
    rec.add("value_im", cv.value.imag());
    rec.add("value_abs", std::abs(cv.value));
    rec.add("len_nondual", cv.len_nondual);
    rec.add("len_dual", cv.len_dual);
    rec.add("phase_re", cv.phase.real());
    rec.add("phase_im", cv.phase.imag());
    rec.add("x_spread", cv.spread);
    // Envelope constant for the configured decay exponent, for tail context.
    rec.add("decay_a", cfg.decay_a);
    rec.add("decay_envelope_constant",
            weight_table(form.weight, cfg.table_tol, cfg.sigma0)
                ->decay()
                .envelope_constant(cfg.decay_a));
    emit(cfg, {rec});
    return 0;
}

FamilyParams build_family(RunConfig& cfg, int64_t Q1, const NewformSpec& f_small,
                          const NewformSpec& g_small) {
    int64_t q2 = cfg.q2 > 0 ? cfg.q2 : q2_auto(Q1, g_small.level);
    int64_t p = cfg.p > 0 ? cfg.p : p_auto(g_small, f_small.level, q2);
    double X = cfg.x, Y = cfg.y;
    if (cfg.preset == "paper-proof") {
        X = std::pow(static_cast<double>(Q1), 0.01);
        Y = std::pow(static_cast<double>(q2), -0.01);
    } else if (!cfg.preset.empty()) {
        throw ParseError("unknown preset: " + cfg.preset);
    }
    return make_family(Q1, q2, p, f_small, g_small, X, Y);
}

void add_moment_fields(Record& rec, const FamilyParams& par, const MomentReport& rep) {
    rec.add("q1", par.Q1);
    rec.add("q2", par.q2);
    rec.add("p", par.p);
    rec.add("x", par.X);
    rec.add("y", par.Y);
    rec.add("c", par.c);
    rec.add("moduli", static_cast<int64_t>(par.D.primes.size()));
    rec.add("family_size", rep.family_size);
    rec.add("S_re", rep.S.real());
    rec.add("S_im", rep.S.imag());
    rec.add("S_abs", std::abs(rep.S));
    rec.add("S_nn_re", rep.s_nn.real());
    rec.add("S_nd_re", rep.s_nd.real());
    rec.add("S_dn_re", rep.s_dn.real());
    rec.add("S_dd_re", rep.s_dd.real());
    rec.add("U1_re", rep.u1.real());
    rec.add("U2_re", rep.u2.real());
    rec.add("U3_re", rep.u3.real());
    rec.add("U4_re", rep.u4.real());
    rec.add("main_term", rep.main_term);
    rec.add("ratio_re", rep.ratio.real());
    rec.add("ratio_im", rep.ratio.imag());
    rec.add("error_envelope_a", rep.envelope_a);
    rec.add("error_envelope_b", rep.envelope_b);
    rec.add("decomposition_residual", rep.decomposition_residual);
    rec.add("part_residual_max", rep.part_residual_max);
    rec.add("u_residual", rep.u_residual);
    rec.add("imag_residual", rep.imag_residual);
    rec.add("snd_zero_frequency_pairs", rep.snd_zero_frequency_pairs);
    rec.add("q2_level_coprime", rep.q2_level_coprime);
}

int cmd_moment(RunConfig& cfg, const std::vector<int64_t>& q1_list) {
    const auto opts = moment_options(cfg);
    NewformSpec f_small = resolve_form(cfg, cfg.form_f, 64);
    NewformSpec g_small = resolve_form(cfg, cfg.form_g, 64);

    // Budget guard over the whole sweep before any heavy work.
    double total_work = 0.0;
    std::vector<FamilyParams> families;
    for (int64_t Q1 : q1_list) {
        FamilyParams par = build_family(cfg, Q1, f_small, g_small);
        total_work += work_estimate(f_small, g_small, par, opts);
        families.push_back(std::move(par));
    }
    if (total_work > cfg.budget)
        throw BudgetExceeded("moment: estimated work " + std::to_string(total_work) +
                             " term evaluations exceeds budget " + std::to_string(cfg.budget));

    int64_t need_f = 1, need_g = 1;
    for (const auto& par : families) {
        const auto need = required_expansion(f_small, g_small, par, opts);
        need_f = std::max(need_f, need.first);
        need_g = std::max(need_g, need.second);
    }
    const NewformSpec f = resolve_form(cfg, cfg.form_f, need_f);
    const NewformSpec g = resolve_form(cfg, cfg.form_g, need_g);
    install_cached_tables(cfg, {f.weight, g.weight});

    LValueCache lcache;
    std::vector<Record> records;
    for (const auto& par : families) {
        MomentOptions run_opts = opts;
        run_opts.afe.allow_level_overlap = !par.q2_level_coprime;
        if (!par.q2_level_coprime)
            std::cerr << "warning: q2 = " << par.q2 << " shares a factor with the level of "
                      << g.label << "; formal AFE evaluation only\n";
        const MomentReport rep = asymptotic_report(f, g, par, run_opts, &lcache);
        if (cfg.format == "plotdata") {
            Record rec;
            rec.add("q1", par.Q1);
            rec.add("S_abs", std::abs(rep.S));
            rec.add("main_term", rep.main_term);
            rec.add("ratio", rep.ratio.real());
            records.push_back(std::move(rec));
        } else {
            Record rec;
            add_moment_fields(rec, par, rep);
            records.push_back(std::move(rec));
        }
    }
    emit(cfg, records);
    return 0;
}

int cmd_lemma_w(RunConfig& cfg, const std::string& form_name, const std::vector<int64_t>& q_list) {
    NewformSpec h_small = resolve_form(cfg, form_name, 64);
    const int64_t p = cfg.p > 0 ? cfg.p : pick_prime(h_small, 0.25, {h_small.level});

    // Budget and expansion needs across the sweep.
    double work = 0.0;
    int64_t need = 1;
    for (int64_t Q : q_list) {
        const auto D = primes_in_interval(Q, prime_factors(h_small.level));
        for (int64_t q : D.primes) {
            const auto len =
                afe_truncation(h_small, h_small.level * q * q, 1.0, cfg.tail_tol, cfg.sigma0);
            work += static_cast<double>(q - 2) * static_cast<double>(len.nondual + len.dual);
            need = std::max({need, len.nondual, len.dual});
        }
    }
    if (work > cfg.budget)
        throw BudgetExceeded("lemma-w: estimated work " + std::to_string(work) +
                             " term evaluations exceeds budget " + std::to_string(cfg.budget));
    const NewformSpec h = resolve_form(cfg, form_name, need);
    install_cached_tables(cfg, {h.weight});

    const auto opts = moment_options(cfg);
    std::vector<Record> records;
    for (int64_t Q : q_list) {
        const LemmaWReport rep = lemma_w(h, Q, p, opts);
        Record rec;
        rec.add("form", rep.label);
        rec.add("Q", rep.Q);
        rec.add("p", rep.p);
        rec.add("W_re", rep.W.real());
        rec.add("W_im", rep.W.imag());
        rec.add("main", rep.main);
        rec.add("ratio_re", rep.ratio.real());
        rec.add("ratio_im", rep.ratio.imag());
        rec.add("family_size", rep.family_size);
        rec.add("imag_residual", rep.imag_residual);
        rec.add("note", "trend only: the O(Q^{7/4}) error term is not dominated at desk scale");
        records.push_back(std::move(rec));
    }
    emit(cfg, records);
    return 0;
}

int cmd_census(RunConfig& cfg, const std::string& threshold_arg) {
    const auto opts = moment_options(cfg);
    NewformSpec f_small = resolve_form(cfg, cfg.form_f, 64);
    NewformSpec g_small = resolve_form(cfg, cfg.form_g, 64);
    FamilyParams par = build_family(cfg, cfg.q1, f_small, g_small);
    const double work = work_estimate(f_small, g_small, par, opts);
    if (work > cfg.budget)
        throw BudgetExceeded("census: estimated work " + std::to_string(work) +
                             " term evaluations exceeds budget " + std::to_string(cfg.budget));
    const auto need = required_expansion(f_small, g_small, par, opts);
    const NewformSpec f = resolve_form(cfg, cfg.form_f, need.first);
    const NewformSpec g = resolve_form(cfg, cfg.form_g, need.second);
    install_cached_tables(cfg, {f.weight, g.weight});

    double threshold = -1.0;
    if (threshold_arg != "auto") {
        try {
            size_t pos = 0;
            threshold = std::stod(threshold_arg, &pos);
            if (pos != threshold_arg.size()) throw ParseError("");
        } catch (...) {
            throw ParseError("census: bad --threshold '" + threshold_arg + "' (number or auto)");
        }
        if (threshold < 0) throw ParseError("census: threshold must be >= 0 or auto");
    }
    MomentOptions run_opts = opts;
    run_opts.afe.allow_level_overlap = !par.q2_level_coprime;
    LValueCache lcache;
    const NonvanishingCensus census = nonvanishing_census(f, g, par, threshold, run_opts, &lcache);

    Record rec;
    rec.add("q1", par.Q1);
    rec.add("q2", par.q2);
    rec.add("p", par.p);
    rec.add("c", par.c);
    rec.add("threshold", census.threshold);
    rec.add("count", census.count);
    rec.add("family_size", census.family_size);
    rec.add("proportion", census.proportion);
    rec.add("median_product", census.median_product);
    rec.add("theorem_comparator", census.comparator);
    emit(cfg, {rec});
    return 0;
}

int cmd_cache(RunConfig& cfg, const std::string& action) {
    std::vector<Record> records;
    if (action == "warm") {
        NewformSpec f_small = resolve_form(cfg, cfg.form_f, 64);
        NewformSpec g_small = resolve_form(cfg, cfg.form_g, 64);
        FamilyParams par = build_family(cfg, cfg.q1, f_small, g_small);
        const auto need = required_expansion(f_small, g_small, par, moment_options(cfg));
        const int64_t need_f = std::max<int64_t>(need.first, 10000);
        const int64_t need_g = std::max<int64_t>(need.second, 10000);
        const NewformSpec f = expand_builtin(cfg.form_f, need_f);
        const NewformSpec g = expand_builtin(cfg.form_g, need_g);
        cachefs::save_coeffs(f, cfg.cache_dir);
        cachefs::save_coeffs(g, cfg.cache_dir);
        for (int weight : {f.weight, g.weight}) {
            auto table = weight_table(weight, cfg.table_tol, cfg.sigma0);
            cachefs::save_vtable(*table, cfg.cache_dir);
        }
        Record rec;
        rec.add("action", "warm");
        rec.add("coeff_tables", int64_t{2});
        rec.add("coeff_n_f", f.n_max());
        rec.add("coeff_n_g", g.n_max());
        rec.add("vtables", int64_t{2});
        records.push_back(std::move(rec));
    } else if (action == "verify") {
        const auto rep = cachefs::verify(cfg.cache_dir);
        Record rec;
        rec.add("action", "verify");
        rec.add("tables", int64_t{rep.tables});
        rec.add("entries_checked", int64_t{rep.entries_checked});
        rec.add("status", rep.tables == 0 ? "cache empty" : "ok");
        records.push_back(std::move(rec));
    } else if (action == "clear") {
        const int removed = cachefs::clear(cfg.cache_dir);
        Record rec;
        rec.add("action", "clear");
        rec.add("files_removed", int64_t{removed});
        records.push_back(std::move(rec));
    } else {
        throw ParseError("cache: unknown action '" + action + "' (want warm, verify, clear)");
    }
    emit(cfg, records);
    return 0;
}

std::vector<int64_t> parse_sweep(const std::string& arg) {
    std::vector<int64_t> out;
    std::string token;
    std::istringstream ss(arg);
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        out.push_back(std::stoll(token));
    }
    if (out.empty()) throw ParseError("empty sweep list");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"twisted-moment toolkit: characters, Kloosterman sums, Hecke eigenvalues,\n"
                 "AFE central L-values, and family moment experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig cfg;
    std::string config_path;
    // Config-file values load first, then explicit flags re-apply on top.
    std::vector<std::function<void()>> overrides;
    auto opt_s = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                     const std::string& help) {
        cmd->add_option_function<std::string>(
            flag, [&overrides, &cfg, key](const std::string& v) {
                overrides.push_back([&cfg, key, v] { cfg.set(key, v); });
            },
            help);
    };

    app.add_option("--config", config_path, "flat key = value config file");
    opt_s(&app, "--format", "format", "output format: json | csv | plotdata");
    opt_s(&app, "--threads", "threads", "worker threads (0 = hardware)");
    opt_s(&app, "--cache-dir", "cache-dir", "persistent cache directory");
    opt_s(&app, "--budget", "budget", "term-evaluation budget for heavy commands");

    // characters
    auto* c_chars = app.add_subcommand("characters", "character table, Gauss sums, identities");
    int64_t modulus = 0, modulus2 = 0, pair_count = 200;
    bool identity_check = false, gauss_flag = false;
    c_chars->add_option("--modulus", modulus, "prime modulus")->required();
    c_chars->add_option("--modulus2", modulus2, "second prime for the product-Gauss identity");
    c_chars->add_flag("--identity-check", identity_check, "run the averaged identities");
    c_chars->add_flag("--gauss", gauss_flag, "list Gauss sums (default output already does)");
    c_chars->add_option("--pairs", pair_count, "sample size for large moduli");

    // lvalue
    auto* c_lvalue = app.add_subcommand("lvalue", "one central L-value via the AFE");
    std::string lv_form = "delta";
    int64_t lv_modulus = 1, lv_exponent = 0;
    c_lvalue->add_option("--form", lv_form, "delta | eta11 | file");
    opt_s(c_lvalue, "--coeff-file", "coeff-file", "coefficient file for --form file");
    c_lvalue->add_option("--modulus", lv_modulus, "twist modulus (1 or prime)");
    c_lvalue->add_option("--exponent", lv_exponent, "character exponent");
    opt_s(c_lvalue, "--x", "x", "AFE balance parameter");
    opt_s(c_lvalue, "--phase-mode", "phase-mode", "paper | auto");

    // moment
    auto* c_moment = app.add_subcommand("moment", "twisted moment with full decomposition");
    std::string q1_sweep;
    opt_s(c_moment, "--form-f", "form-f", "first form");
    opt_s(c_moment, "--form-g", "form-g", "second form");
    opt_s(c_moment, "--coeff-file", "coeff-file", "coefficient file for form 'file'");
    opt_s(c_moment, "--q1", "q1", "family parameter Q1");
    c_moment->add_option("--q1-sweep", q1_sweep, "comma-separated Q1 list (plotdata rows)");
    opt_s(c_moment, "--q2", "q2", "prime q2 (0 = auto)");
    opt_s(c_moment, "--p", "p", "twist prime (0 = auto)");
    opt_s(c_moment, "--x", "x", "AFE parameter X");
    opt_s(c_moment, "--y", "y", "AFE parameter Y");
    opt_s(c_moment, "--preset", "preset", "parameter preset: paper-proof");

    // lemma-w
    auto* c_lemma = app.add_subcommand("lemma-w", "prime-moduli average W with main term");
    std::string lw_form = "delta", q_sweep;
    int64_t lw_q = 20;
    c_lemma->add_option("--form", lw_form, "delta | eta11 | file");
    opt_s(c_lemma, "--coeff-file", "coeff-file", "coefficient file for --form file");
    c_lemma->add_option("--q", lw_q, "interval parameter Q");
    c_lemma->add_option("--q-sweep", q_sweep, "comma-separated Q list");
    opt_s(c_lemma, "--p", "p", "twist prime (0 = auto)");

    // census
    auto* c_census = app.add_subcommand("census", "non-vanishing census over the family");
    std::string threshold_arg = "auto";
    opt_s(c_census, "--form-f", "form-f", "first form");
    opt_s(c_census, "--form-g", "form-g", "second form");
    opt_s(c_census, "--coeff-file", "coeff-file", "coefficient file for form 'file'");
    opt_s(c_census, "--q1", "q1", "family parameter Q1");
    opt_s(c_census, "--q2", "q2", "prime q2 (0 = auto)");
    opt_s(c_census, "--p", "p", "twist prime (0 = auto)");
    opt_s(c_census, "--x", "x", "AFE parameter X");
    opt_s(c_census, "--y", "y", "AFE parameter Y");
    c_census->add_option("--threshold", threshold_arg, "magnitude threshold or 'auto'");

    // cache
    auto* c_cache = app.add_subcommand("cache", "persistent cache: warm, verify, clear");
    std::string cache_action;
    c_cache->add_option("action", cache_action, "warm | verify | clear")->required();
    opt_s(c_cache, "--form-f", "form-f", "first form to warm");
    opt_s(c_cache, "--form-g", "form-g", "second form to warm");
    opt_s(c_cache, "--q1", "q1", "family Q1 sizing the warm expansion");
    opt_s(c_cache, "--q2", "q2", "prime q2 (0 = auto)");
    opt_s(c_cache, "--p", "p", "twist prime (0 = auto)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const auto& apply : overrides) apply();

        if (c_chars->parsed()) {
            cfg.command = "characters";
            return cmd_characters(cfg, modulus, modulus2, identity_check, pair_count);
        }
        if (c_lvalue->parsed()) {
            cfg.command = "lvalue";
            return cmd_lvalue(cfg, lv_form, lv_modulus, lv_exponent);
        }
        if (c_moment->parsed()) {
            cfg.command = "moment";
            const auto q1_list = q1_sweep.empty() ? std::vector<int64_t>{cfg.q1}
                                                  : parse_sweep(q1_sweep);
            return cmd_moment(cfg, q1_list);
        }
        if (c_lemma->parsed()) {
            cfg.command = "lemma-w";
            const auto q_list = q_sweep.empty() ? std::vector<int64_t>{lw_q} : parse_sweep(q_sweep);
            return cmd_lemma_w(cfg, lw_form, q_list);
        }
        if (c_census->parsed()) {
            cfg.command = "census";
            return cmd_census(cfg, threshold_arg);
        }
        if (c_cache->parsed()) {
            cfg.command = "cache";
            return cmd_cache(cfg, cache_action);
        }
        std::cerr << "no command given\n";
        return 2;
    } catch (const BudgetExceeded& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const FactorizationMismatch& e) {
        std::cerr << "internal identity failure: " << e.what() << "\n";
        return 5;
    } catch (const DecompositionMismatch& e) {
        std::cerr << "internal identity failure: " << e.what() << "\n";
        return 5;
    } catch (const CacheCorrupt& e) {
        std::cerr << "cache corrupt: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
