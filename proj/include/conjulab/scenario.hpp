#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "conjulab/errors.hpp"
#include "conjulab/operators.hpp"
#include "conjulab/perturbations.hpp"
#include "conjulab/stability_lab.hpp"

namespace conjulab {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Scenario configuration: a single versioned JSON document drives every
// command. Validation happens before any computation; admissibility is
// checked and reported before solving.
// ---------------------------------------------------------------------------

struct SweepSpec {
    std::string axis;  // "eps_fraction" | "p" | "K" | "m"
    std::vector<double> values;
};

struct FixedPointSpec {
    std::int64_t index = 0;  // basis vector fed into the orbit sum
    int window = 40;
    std::vector<double> lambdas{1.0};
};

struct Scenario {
    std::string id;
    json operator_desc;
    std::optional<double> rate;  // fixed certification rate; absent = auto search
    int period = 1;
    std::vector<json> perturbation_descs;
    std::vector<json> tuple_prime_descs;
    char mode = 'B';
    double delta = 0.5;
    double tau = 1e-8;
    SampleSpec samples{100, 10.0, 0};
    BudgetCaps caps;
    std::vector<std::string> verifiers{"conjugacy", "inverse_pair", "franks"};
    std::vector<json> points;
    std::optional<SweepSpec> sweep;
    std::optional<FixedPointSpec> fixed_point;
};

struct LabConfig {
    std::uint64_t seed = 1;
    std::vector<Scenario> scenarios;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
    if (!ok) throw config_error(message);
}

inline Eigen::MatrixXd parse_matrix(const json& m, const std::string& what) {
    require(m.is_array(), what + " must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(m.size());
    if (rows == 0) return Eigen::MatrixXd(0, 0);
    require(m[0].is_array() && !m[0].empty(), what + " rows must be nonempty arrays");
    const auto cols = static_cast<Eigen::Index>(m[0].size());
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        require(m[r].is_array() && static_cast<Eigen::Index>(m[r].size()) == cols,
                what + " rows must have equal length");
        for (Eigen::Index c = 0; c < cols; ++c) {
            require(m[r][c].is_number(), what + " entries must be numbers");
            out(r, c) = m[r][c].get<double>();
        }
    }
    return out;
}

} // namespace detail

inline SplitOperator build_operator(const json& desc) {
    detail::require(desc.is_object() && desc.contains("kind"), "operator descriptor needs a kind");
    const std::string kind = desc.at("kind").get<std::string>();
    try {
        if (kind == "diagonal") {
            detail::require(desc.contains("weights") && desc.at("weights").is_array(),
                            "diagonal operator needs a weights array");
            return make_diagonal_operator(desc.at("weights").get<std::vector<double>>());
        }
        if (kind == "block") {
            detail::require(desc.contains("P") && desc.contains("A_M") && desc.contains("A_N"),
                            "block operator needs P, A_M, A_N");
            return make_block_operator(detail::parse_matrix(desc.at("P"), "P"),
                                       detail::parse_matrix(desc.at("A_M"), "A_M"),
                                       detail::parse_matrix(desc.at("A_N"), "A_N"));
        }
        if (kind == "shift") {
            detail::require(
                desc.contains("lambda_minus") && desc.contains("lambda_plus") && desc.contains("m0"),
                "shift operator needs lambda_minus, lambda_plus, m0");
            return make_weighted_shift(desc.at("lambda_minus").get<double>(),
                                       desc.at("lambda_plus").get<double>(),
                                       desc.at("m0").get<std::int64_t>());
        }
    } catch (const std::invalid_argument& e) {
        throw config_error(std::string("operator descriptor: ") + e.what());
    }
    throw config_error("unknown operator kind: " + kind);
}

/// Dense space dimension of a dense-family operator descriptor; 0 for the
/// sequence family.
inline std::size_t operator_dimension(const json& desc) {
    const std::string kind = desc.at("kind").get<std::string>();
    if (kind == "diagonal") return desc.at("weights").size();
    if (kind == "block") return desc.at("A_M").size() + desc.at("A_N").size();
    return 0;
}

inline Vector parse_vector(const json& v, Vector::Family family, std::size_t dim) {
    if (family == Vector::Family::dense) {
        detail::require(v.is_array(), "dense vector must be a JSON array");
        auto vals = v.get<std::vector<double>>();
        detail::require(vals.size() == dim, "dense vector dimension mismatch");
        return Vector::dense(std::move(vals));
    }
    detail::require(v.is_object(), "sparse vector must be a JSON object of index:value pairs");
    std::map<std::int64_t, double> entries;
    for (auto it = v.begin(); it != v.end(); ++it) {
        try {
            entries[std::stoll(it.key())] = it.value().get<double>();
        } catch (const std::exception&) {
            throw config_error("sparse vector keys must be integer strings");
        }
    }
    return Vector::sparse(std::move(entries));
}

inline LipMap build_perturbation(const json& desc, Vector::Family family, std::size_t dim) {
    detail::require(desc.is_object() && desc.contains("kind"),
                    "perturbation descriptor needs a kind");
    const std::string kind = desc.at("kind").get<std::string>();
    try {
        if (kind == "const") {
            detail::require(desc.contains("c"), "const perturbation needs c");
            return LipMap::constant(parse_vector(desc.at("c"), family, dim));
        }
        if (kind == "sine") {
            detail::require(desc.contains("i") && desc.contains("A") && desc.contains("w"),
                            "sine perturbation needs i, A, w");
            const auto read = desc.at("i").get<std::int64_t>();
            const auto write = desc.contains("target") ? desc.at("target").get<std::int64_t>() : read;
            return LipMap::sine(read, write, desc.at("A").get<double>(), desc.at("w").get<double>());
        }
        if (kind == "clamp_linear") {
            detail::require(desc.contains("B") && desc.contains("R"),
                            "clamp_linear perturbation needs B, R");
            detail::require(family == Vector::Family::dense,
                            "clamp_linear acts on the dense family only");
            return LipMap::clamp_linear(detail::parse_matrix(desc.at("B"), "B"),
                                        desc.at("R").get<double>());
        }
        if (kind == "sum") {
            detail::require(desc.contains("args") && desc.at("args").is_array() &&
                                !desc.at("args").empty(),
                            "sum perturbation needs a nonempty args array");
            std::vector<LipMap> terms;
            for (const auto& arg : desc.at("args")) terms.push_back(build_perturbation(arg, family, dim));
            return LipMap::sum(std::move(terms));
        }
        if (kind == "scale") {
            detail::require(desc.contains("alpha") && desc.contains("arg"),
                            "scale perturbation needs alpha, arg");
            return LipMap::scaled(desc.at("alpha").get<double>(),
                                  build_perturbation(desc.at("arg"), family, dim));
        }
        if (kind == "compose") {
            detail::require(desc.contains("outer") && desc.contains("inner"),
                            "compose perturbation needs outer, inner");
            return LipMap::composed(build_perturbation(desc.at("outer"), family, dim),
                                    build_perturbation(desc.at("inner"), family, dim));
        }
    } catch (const std::invalid_argument& e) {
        throw config_error(std::string("perturbation descriptor: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw config_error(std::string("perturbation descriptor: ") + e.what());
    }
    throw config_error("unknown perturbation kind: " + kind);
}

inline PerturbationTuple build_tuple(const std::vector<json>& descs, int period,
                                     Vector::Family family, std::size_t dim) {
    detail::require(!descs.empty(), "perturbation tuple must not be empty");
    detail::require(static_cast<int>(descs.size()) == period || descs.size() == 1,
                    "perturbations must list one descriptor per slot (or a single one to repeat)");
    std::vector<LipMap> maps;
    maps.reserve(static_cast<std::size_t>(period));
    for (int j = 0; j < period; ++j) {
        const json& d = descs.size() == 1 ? descs.front() : descs[static_cast<std::size_t>(j)];
        maps.push_back(build_perturbation(d, family, dim));
    }
    return PerturbationTuple(std::move(maps));
}

inline Scenario parse_scenario(const json& s) {
    detail::require(s.is_object(), "scenario must be an object");
    Scenario sc;
    detail::require(s.contains("id") && s.at("id").is_string(), "scenario needs a string id");
    sc.id = s.at("id").get<std::string>();
    detail::require(s.contains("operator"), "scenario '" + sc.id + "' needs an operator");
    sc.operator_desc = s.at("operator");

    if (s.contains("t")) {
        const auto& t = s.at("t");
        if (t.is_string()) {
            detail::require(t.get<std::string>() == "auto", "t must be a number in (0,1) or \"auto\"");
        } else {
            detail::require(t.is_number(), "t must be a number in (0,1) or \"auto\"");
            sc.rate = t.get<double>();
            detail::require(*sc.rate > 0.0 && *sc.rate < 1.0, "t must lie in (0,1)");
        }
    }

    sc.period = s.value("p", 1);
    detail::require(sc.period >= 1 && sc.period <= 1024, "p must lie in [1, 1024]");
    detail::require(s.contains("perturbations") && s.at("perturbations").is_array(),
                    "scenario '" + sc.id + "' needs a perturbations array");
    for (const auto& d : s.at("perturbations")) sc.perturbation_descs.push_back(d);
    if (s.contains("tuple_prime"))
        for (const auto& d : s.at("tuple_prime")) sc.tuple_prime_descs.push_back(d);

    const std::string mode = s.value("mode", std::string("B"));
    detail::require(mode == "A" || mode == "B", "mode must be \"A\" or \"B\"");
    sc.mode = mode[0];
    sc.delta = s.value("delta", 0.5);
    detail::require(sc.delta > 0.0 && sc.delta < 1.0, "delta must lie in (0,1)");
    sc.tau = s.value("tau", 1e-8);
    detail::require(sc.tau > 0.0, "tau must be positive");

    if (s.contains("samples")) {
        const auto& sm = s.at("samples");
        const std::int64_t count = sm.value("count", std::int64_t{100});
        detail::require(count >= 0 && count <= 1000000, "sample count must lie in [0, 1e6]");
        sc.samples.count = static_cast<std::size_t>(count);
        sc.samples.radius = sm.value("radius", 10.0);
        sc.samples.seed = sm.value("seed", std::uint64_t{0});
        detail::require(sc.samples.radius > 0.0, "sample radius must be positive");
    }
    if (s.contains("budget")) {
        const auto& b = s.at("budget");
        sc.caps.max_truncation_depth = b.value("max_K", 200);
        sc.caps.max_iterations = b.value("max_m", 60);
        detail::require(sc.caps.max_truncation_depth >= 1 && sc.caps.max_iterations >= 1,
                        "budget caps must be positive");
        if (b.contains("tau")) {
            sc.tau = b.at("tau").get<double>();
            detail::require(sc.tau > 0.0, "tau must be positive");
        }
    }
    if (s.contains("verifiers")) {
        sc.verifiers.clear();
        static const std::set<std::string> known{
            "conjugacy",   "inverse_pair",   "franks",    "correspondence",
            "series_roundtrip", "nonuniqueness", "uniqueness"};
        for (const auto& v : s.at("verifiers")) {
            const std::string name = v.get<std::string>();
            detail::require(known.count(name) > 0, "unknown verifier: " + name);
            sc.verifiers.push_back(name);
        }
    }
    if (s.contains("points"))
        for (const auto& p : s.at("points")) sc.points.push_back(p);
    if (s.contains("sweep")) {
        SweepSpec sw;
        sw.axis = s.at("sweep").value("axis", std::string());
        detail::require(sw.axis == "eps_fraction" || sw.axis == "p" || sw.axis == "K" ||
                            sw.axis == "m",
                        "sweep axis must be one of eps_fraction, p, K, m");
        detail::require(s.at("sweep").contains("values") && s.at("sweep").at("values").is_array() &&
                            !s.at("sweep").at("values").empty(),
                        "sweep needs a nonempty values array");
        sw.values = s.at("sweep").at("values").get<std::vector<double>>();
        sc.sweep = std::move(sw);
    }
    if (s.contains("fixed_point")) {
        FixedPointSpec fp;
        fp.index = s.at("fixed_point").value("index", std::int64_t{0});
        fp.window = s.at("fixed_point").value("window", 40);
        if (s.at("fixed_point").contains("lambdas"))
            fp.lambdas = s.at("fixed_point").at("lambdas").get<std::vector<double>>();
        detail::require(fp.window >= 1, "fixed_point window must be positive");
        sc.fixed_point = std::move(fp);
    }
    return sc;
}

inline LabConfig parse_config(const json& doc) {
    detail::require(doc.is_object(), "config root must be an object");
    detail::require(doc.contains("schema") && doc.at("schema").is_number_integer() &&
                        doc.at("schema").get<int>() == 1,
                    "config must declare \"schema\": 1");
    LabConfig cfg;
    cfg.seed = doc.value("seed", std::uint64_t{1});
    detail::require(doc.contains("scenarios") && doc.at("scenarios").is_array() &&
                        !doc.at("scenarios").empty(),
                    "config needs a nonempty scenarios array");
    std::set<std::string> ids;
    for (const auto& s : doc.at("scenarios")) {
        Scenario sc = parse_scenario(s);
        detail::require(ids.insert(sc.id).second, "duplicate scenario id: " + sc.id);
        cfg.scenarios.push_back(std::move(sc));
    }
    return cfg;
}

inline LabConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw config_error(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

} // namespace conjulab
