#pragma once

// Persistent text caches: smooth-weight tables (hexfloat node triples) and
// builtin coefficient tables (decimal integers).  One file per table with a
// parameter header and an FNV-1a content digest; values round-trip bitwise.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "twm/errors.hpp"
#include "twm/hecke.hpp"
#include "twm/lfunc.hpp"

namespace twm {
namespace cachefs {

namespace fs = std::filesystem;

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

inline std::string hexfloat(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return std::string(buf);
}

inline double parse_hexfloat(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw CacheCorrupt("bad hexfloat: " + s);
    return v;
}

inline std::string sanitize(double v) {
    std::string s = hexfloat(v);
    for (char& c : s)
        if (c == '+') c = 'P';
    return s;
}

inline std::string vtable_filename(int weight, double tol, double sigma0) {
    return "vtable-w" + std::to_string(weight) + "-t" + sanitize(tol) + "-s" + sanitize(sigma0) +
           ".txt";
}

inline std::string coeffs_filename(const std::string& label) { return "coeffs-" + label + ".txt"; }

inline void save_vtable(const SmoothWeightTable& table, const std::string& dir) {
    fs::create_directories(dir);
    std::string payload;
    const auto& nodes = table.nodes();
    for (size_t i = 0; i < nodes.size(); ++i) {
        payload += std::to_string(i) + " " + hexfloat(nodes[i].v) + " " + hexfloat(nodes[i].d1) +
                   " " + hexfloat(nodes[i].d2) + "\n";
    }
    std::ofstream out(fs::path(dir) / vtable_filename(table.weight(), table.tolerance(),
                                                      table.sigma0()));
    out << "# twm cache v1\n";
    out << "kind vtable\n";
    out << "weight " << table.weight() << "\n";
    out << "sigma0 " << hexfloat(table.sigma0()) << "\n";
    out << "tolerance " << hexfloat(table.tolerance()) << "\n";
    out << "interp_ok " << (table.interpolation_ok() ? 1 : 0) << "\n";
    out << "grid_size " << table.grid_size() << "\n";
    out << "digest " << hex64(fnv1a(payload)) << "\n";
    out << "begin\n" << payload << "end\n";
}

inline std::shared_ptr<const SmoothWeightTable> load_vtable(const std::string& dir, int weight,
                                                            double tol, double sigma0) {
    const fs::path path = fs::path(dir) / vtable_filename(weight, tol, sigma0);
    std::ifstream in(path);
    if (!in) return nullptr;
    std::string line, key, value;
    int interp_ok = -1;
    int grid_size = -1;
    std::string digest;
    while (std::getline(in, line) && line != "begin") {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        ss >> key >> value;
        if (key == "interp_ok") interp_ok = std::stoi(value);
        else if (key == "grid_size") grid_size = std::stoi(value);
        else if (key == "digest") digest = value;
        else if (key == "kind" && value != "vtable")
            throw CacheCorrupt(path.string() + ": wrong kind");
    }
    if (interp_ok < 0 || grid_size < 0 || digest.empty())
        throw CacheCorrupt(path.string() + ": incomplete header");
    std::string payload;
    std::vector<SmoothWeightTable::Node> nodes;
    nodes.reserve(static_cast<size_t>(grid_size));
    while (std::getline(in, line) && line != "end") {
        payload += line + "\n";
        std::istringstream ss(line);
        std::string idx, v, d1, d2;
        if (!(ss >> idx >> v >> d1 >> d2)) throw CacheCorrupt(path.string() + ": bad node line");
        nodes.push_back({parse_hexfloat(v), parse_hexfloat(d1), parse_hexfloat(d2)});
    }
    if (hex64(fnv1a(payload)) != digest)
        throw CacheCorrupt(path.string() + ": digest mismatch");
    if (static_cast<int>(nodes.size()) != grid_size)
        throw CacheCorrupt(path.string() + ": node count mismatch");
    return std::make_shared<const SmoothWeightTable>(weight, tol, sigma0, std::move(nodes),
                                                     interp_ok == 1);
}

inline void save_coeffs(const NewformSpec& form, const std::string& dir) {
    fs::create_directories(dir);
    std::string payload;
    for (int64_t n = 1; n <= form.n_max(); ++n)
        payload += std::to_string(n) + " " + int128_to_string(form.a[static_cast<size_t>(n)]) + "\n";
    std::ofstream out(fs::path(dir) / coeffs_filename(form.label));
    out << "# twm cache v1\n";
    out << "kind coeffs\n";
    out << "label " << form.label << "\n";
    out << "weight " << form.weight << "\n";
    out << "level " << form.level << "\n";
    out << "n_max " << form.n_max() << "\n";
    out << "digest " << hex64(fnv1a(payload)) << "\n";
    out << "begin\n" << payload << "end\n";
}

inline std::optional<NewformSpec> load_coeffs(const std::string& dir, const std::string& label) {
    const fs::path path = fs::path(dir) / coeffs_filename(label);
    std::ifstream in(path);
    if (!in) return std::nullopt;
    NewformSpec f;
    f.label = label;
    std::string line, key, value;
    int64_t n_max = -1;
    std::string digest;
    while (std::getline(in, line) && line != "begin") {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        ss >> key >> value;
        if (key == "weight") f.weight = std::stoi(value);
        else if (key == "level") f.level = std::stoll(value);
        else if (key == "n_max") n_max = std::stoll(value);
        else if (key == "digest") digest = value;
        else if (key == "kind" && value != "coeffs")
            throw CacheCorrupt(path.string() + ": wrong kind");
    }
    if (n_max < 1 || digest.empty() || f.weight == 0)
        throw CacheCorrupt(path.string() + ": incomplete header");
    std::string payload;
    f.a.assign(static_cast<size_t>(n_max) + 1, 0);
    int64_t expect = 1;
    while (std::getline(in, line) && line != "end") {
        payload += line + "\n";
        std::istringstream ss(line);
        std::string ns, as;
        if (!(ss >> ns >> as)) throw CacheCorrupt(path.string() + ": bad coeff line");
        if (std::stoll(ns) != expect) throw CacheCorrupt(path.string() + ": bad index");
        f.a[static_cast<size_t>(expect)] = parse_int128(as);
        ++expect;
    }
    if (expect != n_max + 1) throw CacheCorrupt(path.string() + ": coefficient count mismatch");
    if (hex64(fnv1a(payload)) != digest) throw CacheCorrupt(path.string() + ": digest mismatch");
    detail::finalize(f);
    return f;
}

struct VerifyReport {
    int tables = 0;
    int entries_checked = 0;
    std::vector<std::string> files;
};

// 32 deterministically chosen entries per table, recomputed from scratch and
// compared through their bitwise serialization.
inline VerifyReport verify(const std::string& dir) {
    VerifyReport rep;
    if (!fs::exists(dir)) return rep;
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    for (const auto& path : paths) {
        const std::string name = path.filename().string();
        if (name.rfind("vtable-", 0) == 0) {
            // Header carries exact parameters; reload and recompute nodes.
            std::ifstream in(path);
            std::string line, key, value;
            int weight = 0;
            double sigma0 = 0.0, tol = 0.0;
            std::string digest;
            while (std::getline(in, line) && line != "begin") {
                if (line.empty() || line[0] == '#') continue;
                std::istringstream ss(line);
                ss >> key >> value;
                if (key == "weight") weight = std::stoi(value);
                else if (key == "sigma0") sigma0 = parse_hexfloat(value);
                else if (key == "tolerance") tol = parse_hexfloat(value);
                else if (key == "digest") digest = value;
            }
            auto stored = load_vtable(dir, weight, tol, sigma0);  // digest check included
            if (!stored) throw CacheCorrupt(path.string() + ": unreadable");
            const auto ev = twm::detail::mellin_evaluator(weight, sigma0);
            uint64_t state = fnv1a(digest);
            for (int i = 0; i < 32; ++i) {
                state = state * 6364136223846793005ULL + 1442695040888963407ULL;
                const int idx = static_cast<int>(state % static_cast<uint64_t>(stored->grid_size()));
                const auto fresh = ev->node(stored->node_y(idx));
                const auto& have = stored->nodes()[static_cast<size_t>(idx)];
                if (hexfloat(fresh.v) != hexfloat(have.v) || hexfloat(fresh.d1) != hexfloat(have.d1) ||
                    hexfloat(fresh.d2) != hexfloat(have.d2))
                    throw CacheCorrupt(path.string() + ": node " + std::to_string(idx) +
                                       " does not match recomputation");
                ++rep.entries_checked;
            }
            ++rep.tables;
            rep.files.push_back(name);
        } else if (name.rfind("coeffs-", 0) == 0) {
            std::ifstream in(path);
            std::string line, key, value, label, digest;
            while (std::getline(in, line) && line != "begin") {
                if (line.empty() || line[0] == '#') continue;
                std::istringstream ss(line);
                ss >> key >> value;
                if (key == "label") label = value;
                else if (key == "digest") digest = value;
            }
            auto stored = load_coeffs(dir, label);
            if (!stored) throw CacheCorrupt(path.string() + ": unreadable");
            const NewformSpec fresh = expand_builtin(label, stored->n_max());
            uint64_t state = fnv1a(digest);
            for (int i = 0; i < 32; ++i) {
                state = state * 6364136223846793005ULL + 1442695040888963407ULL;
                const int64_t n =
                    1 + static_cast<int64_t>(state % static_cast<uint64_t>(stored->n_max()));
                if (int128_to_string(fresh.a[static_cast<size_t>(n)]) !=
                    int128_to_string(stored->a[static_cast<size_t>(n)]))
                    throw CacheCorrupt(path.string() + ": a(" + std::to_string(n) +
                                       ") does not match recomputation");
                ++rep.entries_checked;
            }
            ++rep.tables;
            rep.files.push_back(name);
        }
    }
    return rep;
}

inline int clear(const std::string& dir) {
    if (!fs::exists(dir)) return 0;
    int removed = 0;
    std::vector<fs::path> doomed;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("vtable-", 0) == 0 || name.rfind("coeffs-", 0) == 0)
            doomed.push_back(entry.path());
    }
    for (const auto& p : doomed) {
        fs::remove(p);
        ++removed;
    }
    return removed;
}

} // namespace cachefs
} // namespace twm
