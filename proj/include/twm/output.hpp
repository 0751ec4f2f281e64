#pragma once

// Output rendering: one run produces an ordered list of records, serialized
// as json (one object per run), csv (header + rows, config in leading
// comments), or plotdata (whitespace columns, '#' comment header).  Doubles
// are printed with 17 significant digits so every format round-trips to the
// same values.

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "twm/config.hpp"
#include "twm/version.hpp"

namespace twm {

using FieldValue = std::variant<int64_t, double, std::string, bool>;

struct Record {
    std::vector<std::pair<std::string, FieldValue>> fields;

    void add(const std::string& key, int64_t v) { fields.emplace_back(key, v); }
    void add(const std::string& key, int v) { fields.emplace_back(key, static_cast<int64_t>(v)); }
    void add(const std::string& key, double v) { fields.emplace_back(key, v); }
    void add(const std::string& key, const std::string& v) { fields.emplace_back(key, v); }
    void add(const std::string& key, const char* v) { fields.emplace_back(key, std::string(v)); }
    void add(const std::string& key, bool v) { fields.emplace_back(key, v); }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

inline std::string field_to_string(const FieldValue& v) {
    if (std::holds_alternative<int64_t>(v)) return std::to_string(std::get<int64_t>(v));
    if (std::holds_alternative<double>(v)) return format_double(std::get<double>(v));
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? "true" : "false";
    return std::get<std::string>(v);
}

} // namespace detail

inline std::string render_json(const RunConfig& config, const std::vector<Record>& records) {
    nlohmann::ordered_json doc;
    doc["version"] = tool_version;
    nlohmann::ordered_json cfg;
    for (const auto& [k, v] : config.snapshot()) cfg[k] = v;
    doc["config"] = cfg;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& rec : records) {
        nlohmann::ordered_json row;
        for (const auto& [k, v] : rec.fields) {
            if (std::holds_alternative<int64_t>(v)) row[k] = std::get<int64_t>(v);
            else if (std::holds_alternative<double>(v)) row[k] = std::get<double>(v);
            else if (std::holds_alternative<bool>(v)) row[k] = std::get<bool>(v);
            else row[k] = std::get<std::string>(v);
        }
        rows.push_back(std::move(row));
    }
    doc["results"] = std::move(rows);
    return doc.dump(2) + "\n";
}

inline std::string render_csv(const RunConfig& config, const std::vector<Record>& records) {
    std::string out;
    out += "# twm " + std::string(tool_version) + "\n";
    for (const auto& [k, v] : config.snapshot()) out += "# " + k + " = " + v + "\n";
    if (records.empty()) return out;
    for (size_t i = 0; i < records[0].fields.size(); ++i) {
        if (i) out += ",";
        out += records[0].fields[i].first;
    }
    out += "\n";
    for (const auto& rec : records) {
        for (size_t i = 0; i < rec.fields.size(); ++i) {
            if (i) out += ",";
            out += detail::field_to_string(rec.fields[i].second);
        }
        out += "\n";
    }
    return out;
}

inline std::string render_plotdata(const RunConfig& config, const std::vector<Record>& records) {
    std::string out;
    out += "# twm " + std::string(tool_version) + "\n";
    for (const auto& [k, v] : config.snapshot()) out += "# " + k + " = " + v + "\n";
    if (records.empty()) return out;
    out += "#";
    for (const auto& [k, v] : records[0].fields) out += " " + k;
    out += "\n";
    for (const auto& rec : records) {
        for (size_t i = 0; i < rec.fields.size(); ++i) {
            if (i) out += " ";
            out += detail::field_to_string(rec.fields[i].second);
        }
        out += "\n";
    }
    return out;
}

inline std::string render(const RunConfig& config, const std::vector<Record>& records) {
    if (config.format == "json") return render_json(config, records);
    if (config.format == "csv") return render_csv(config, records);
    if (config.format == "plotdata") return render_plotdata(config, records);
    throw ParseError("unknown output format: " + config.format);
}

} // namespace twm
