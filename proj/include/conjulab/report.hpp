#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "conjulab/conjugacy.hpp"
#include "conjulab/errors.hpp"
#include "conjulab/stability_lab.hpp"
#include "conjulab/vectorspace.hpp"

namespace conjulab {

// Dense vectors serialize as arrays, sparse ones as index->value objects with
// string keys.
inline nlohmann::json vector_to_json(const Vector& v) {
    if (v.is_dense()) return nlohmann::json(v.dense_values());
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [i, val] : v.sparse_entries()) obj[std::to_string(i)] = val;
    return obj;
}

inline nlohmann::json budget_to_json(const ErrorBudget& b) {
    return {{"tau", b.target},
            {"K", b.truncation_depth},
            {"m", b.iterations},
            {"certified_error", b.certified_error}};
}

inline nlohmann::json report_to_json(const ResidualReport& r) {
    nlohmann::json j{{"scenario", r.scenario},
                     {"verifier", r.verifier},
                     {"mode", std::string(1, r.mode)},
                     {"p", r.period},
                     {"max_residual", r.max_residual},
                     {"bound", r.bound},
                     {"pass", r.pass},
                     {"seed", r.seed},
                     {"budget", budget_to_json(r.budget)},
                     {"samples", r.sample_count},
                     {"wall_time_s", r.wall_time_s}};
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

/// Append one object per line (JSON-lines, LF endings).
inline void append_jsonl(const std::filesystem::path& file, const nlohmann::json& line) {
    std::ofstream out(file, std::ios::app);
    if (!out) throw config_error("cannot open report file for writing: " + file.string());
    out << line.dump() << '\n';
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// CSV with a header row, '.' decimal separator, LF line endings.
inline void write_csv(const std::filesystem::path& file, const std::string& header,
                      const std::vector<std::string>& rows) {
    std::ofstream out(file);
    if (!out) throw config_error("cannot open csv file for writing: " + file.string());
    out << header << '\n';
    for (const auto& row : rows) out << row << '\n';
}

} // namespace conjulab
