#pragma once

// Run configuration: defaults, flat key = value config files, and the
// resolved snapshot embedded in every output artifact.  Explicit flags
// override the config file, which overrides defaults.

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "twm/errors.hpp"

namespace twm {

struct RunConfig {
    std::string command;
    std::string form_f = "delta";
    std::string form_g = "eta11";
    std::string coeff_file;  // optional ingested form ("file" selects it)
    int64_t q1 = 3;          // Q1 for families, modulus for single-twist commands
    int64_t q2 = 0;          // 0 = auto (smallest prime > Q1^{203/100} coprime to N2)
    int64_t p = 0;           // 0 = auto (pick_prime floor 0.25)
    double x = 1.0;
    double y = 1.0;
    std::string preset;      // "" or "paper-proof" (X = Q1^{1/100}, Y = q2^{-1/100})
    std::string phase_mode = "paper";
    double tail_tol = 1e-12;
    double table_tol = 1e-8;
    double sigma0 = 1.0;
    int decay_a = 8;
    double identity_tol = 1e-8;
    std::string format = "json";  // json | csv | plotdata
    std::string cache_dir = "twm-cache";
    int threads = 0;  // 0 = hardware concurrency
    double budget = 1e9;
    bool deterministic = true;  // seed-free determinism (no stochastic inputs anywhere)

    void set(const std::string& key, const std::string& value) {
        auto bad = [&] {
            throw ParseError("config: bad value '" + value + "' for key '" + key + "'");
        };
        auto to_i = [&]() -> int64_t {
            try {
                size_t pos = 0;
                int64_t v = std::stoll(value, &pos);
                if (pos != value.size()) bad();
                return v;
            } catch (const ParseError&) {
                throw;
            } catch (...) {
                bad();
            }
            return 0;
        };
        auto to_d = [&]() -> double {
            try {
                size_t pos = 0;
                double v = std::stod(value, &pos);
                if (pos != value.size()) bad();
                return v;
            } catch (const ParseError&) {
                throw;
            } catch (...) {
                bad();
            }
            return 0;
        };
        if (key == "form-f") form_f = value;
        else if (key == "form-g") form_g = value;
        else if (key == "coeff-file") coeff_file = value;
        else if (key == "q1") q1 = to_i();
        else if (key == "q2") q2 = to_i();
        else if (key == "p") p = to_i();
        else if (key == "x") x = to_d();
        else if (key == "y") y = to_d();
        else if (key == "preset") preset = value;
        else if (key == "phase-mode") phase_mode = value;
        else if (key == "tail-tol") tail_tol = to_d();
        else if (key == "table-tol") table_tol = to_d();
        else if (key == "sigma0") sigma0 = to_d();
        else if (key == "decay-a") decay_a = static_cast<int>(to_i());
        else if (key == "identity-tol") identity_tol = to_d();
        else if (key == "format") format = value;
        else if (key == "cache-dir") cache_dir = value;
        else if (key == "threads") threads = static_cast<int>(to_i());
        else if (key == "budget") budget = to_d();
        else if (key == "deterministic") deterministic = value == "1" || value == "true";
        else throw ParseError("config: unknown key '" + key + "'");
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("config: cannot open " + path);
        std::string line;
        int64_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                std::istringstream check(line);
                std::string token;
                if (check >> token)
                    throw ParseError("config line " + std::to_string(lineno) + ": want key = value");
                continue;
            }
            auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t");
                const auto b = s.find_last_not_of(" \t");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    /// Resolved snapshot, fixed key order, for artifact provenance.
    std::vector<std::pair<std::string, std::string>> snapshot() const {
        auto fmt_d = [](double v) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        return {
            {"command", command},
            {"form-f", form_f},
            {"form-g", form_g},
            {"coeff-file", coeff_file},
            {"q1", std::to_string(q1)},
            {"q2", std::to_string(q2)},
            {"p", std::to_string(p)},
            {"x", fmt_d(x)},
            {"y", fmt_d(y)},
            {"preset", preset},
            {"phase-mode", phase_mode},
            {"tail-tol", fmt_d(tail_tol)},
            {"table-tol", fmt_d(table_tol)},
            {"sigma0", fmt_d(sigma0)},
            {"decay-a", std::to_string(decay_a)},
            {"identity-tol", fmt_d(identity_tol)},
            {"format", format},
            {"cache-dir", cache_dir},
            {"threads", std::to_string(threads)},
            {"budget", fmt_d(budget)},
            {"deterministic", deterministic ? "true" : "false"},
        };
    }
};

} // namespace twm
