#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "conjulab/conjugacy.hpp"
#include "conjulab/errors.hpp"
#include "conjulab/log.hpp"
#include "conjulab/report.hpp"
#include "conjulab/scenario.hpp"
#include "conjulab/stability_lab.hpp"

namespace conjulab {

// Exit codes shared by every command: 0 all-pass, 1 verification failure,
// 2 configuration/admissibility error, 3 budget infeasible.
inline constexpr int kExitPass = 0;
inline constexpr int kExitVerificationFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitBudgetInfeasible = 3;

struct RunOptions {
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

struct BuiltScenario {
    Scenario spec;
    SplitOperator op;
    HyperbolicityCertificate cert;
    PerturbationTuple tuple;
    std::optional<PerturbationTuple> tuple_prime;
    std::vector<Vector> samples;
    VerifierContext ctx;
    double eps = 0.0;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t global, const std::string& id) {
    // FNV-1a over the id, folded into the global seed
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : id) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h ^ global;
}

} // namespace detail

/// Validate one scenario end to end: operator, certificate, tuple(s),
/// admissibility in the declared mode, samples. Throws config_error /
/// admissibility_error / certification_error on bad input.
inline BuiltScenario build_scenario(const Scenario& sc, std::uint64_t global_seed) {
    BuiltScenario built{sc, build_operator(sc.operator_desc), {}, {}, {}, {}, {}, 0.0};
    built.cert = certify_constants(built.op, sc.rate);
    const std::size_t dim = operator_dimension(sc.operator_desc);
    built.tuple = build_tuple(sc.perturbation_descs, sc.period, built.op.family(), dim);
    if (!sc.tuple_prime_descs.empty())
        built.tuple_prime = build_tuple(sc.tuple_prime_descs, sc.period, built.op.family(), dim);

    built.eps = epsilon_threshold(built.cert, sc.delta);
    built.tuple.require_admissible(sc.mode, built.eps);
    if (built.tuple_prime) built.tuple_prime->require_admissible(sc.mode, built.eps);

    built.ctx.scenario_id = sc.id;
    built.ctx.mode = sc.mode;
    built.ctx.delta = sc.delta;
    built.ctx.tau = sc.tau;
    built.ctx.caps = sc.caps;
    built.ctx.seed = sc.samples.seed != 0 ? sc.samples.seed : detail::mix_seed(global_seed, sc.id);

    SampleSpec spec = sc.samples;
    spec.seed = built.ctx.seed;
    built.samples = make_samples(built.op.family(), dim, spec);
    return built;
}

inline std::vector<BuiltScenario> build_all(const LabConfig& cfg, const RunOptions& opts) {
    const std::uint64_t seed = opts.seed.value_or(cfg.seed);
    std::vector<BuiltScenario> built;
    built.reserve(cfg.scenarios.size());
    for (const auto& sc : cfg.scenarios) built.push_back(build_scenario(sc, seed));
    std::sort(built.begin(), built.end(),
              [](const BuiltScenario& a, const BuiltScenario& b) { return a.spec.id < b.spec.id; });
    return built;
}

inline std::filesystem::path prepare_out_dir(const RunOptions& opts) {
    std::filesystem::path dir(opts.out_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// constants: certificate and derived thresholds per scenario.
// ---------------------------------------------------------------------------
inline int cmd_constants(const LabConfig& cfg, const RunOptions& opts) {
    try {
        const auto built = build_all(cfg, opts);
        const auto dir = prepare_out_dir(opts);
        for (const auto& b : built) {
            nlohmann::json line{{"scenario", b.spec.id},
                                {"kind", b.op.describe()},
                                {"a", b.cert.prefactor},
                                {"t", b.cert.rate},
                                {"b", b.cert.projection_bound},
                                {"inv", b.cert.inverse_norm},
                                {"n0", b.cert.horizon},
                                {"eps", b.eps},
                                {"C", franks_constant(b.cert)},
                                {"corr", correspondence_lip_constant(b.cert, b.spec.delta)},
                                {"delta", b.spec.delta}};
            append_jsonl(dir / "report.jsonl", line);
            std::cout << line.dump() << '\n';
        }
        return kExitPass;
    } catch (const budget_error& e) {
        std::cerr << "budget: " << e.what() << '\n';
        return kExitBudgetInfeasible;
    } catch (const config_error& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const certification_error& e) {
        std::cerr << "certification: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfigError;
    }
}

// ---------------------------------------------------------------------------
// solve: pointwise h and h^{-1} values with certified errors.
// ---------------------------------------------------------------------------
inline int cmd_solve(const LabConfig& cfg, const RunOptions& opts) {
    try {
        const auto built = build_all(cfg, opts);
        const auto dir = prepare_out_dir(opts);
        for (const auto& b : built) {
            const std::size_t dim = operator_dimension(b.spec.operator_desc);
            std::vector<Vector> points;
            for (const auto& pj : b.spec.points)
                points.push_back(parse_vector(pj, b.op.family(), dim));
            if (points.empty()) points = corner_samples(b.op.family(), dim);

            const ErrorBudget fwd = plan_forward_budget(b.op, b.cert, b.tuple, b.spec.tau, b.spec.caps);
            const ErrorBudget inv = plan_inverse_budget(b.op, b.cert, b.tuple, b.spec.tau, b.spec.caps);
            DefectEvaluator h(b.op, b.cert, b.tuple, fwd, DefectEvaluator::Mode::forward);
            DefectEvaluator hinv(b.op, b.cert, b.tuple, inv, DefectEvaluator::Mode::inverse);
            for (const Vector& x : points) {
                double err_h = 0.0, err_hinv = 0.0;
                const Vector hx = add(x, h.eval(x, 0, &err_h));
                const Vector hix = add(x, hinv.eval(x, 0, &err_hinv));
                nlohmann::json line{{"scenario", b.spec.id},
                                    {"point", vector_to_json(x)},
                                    {"h", vector_to_json(hx)},
                                    {"h_inverse", vector_to_json(hix)},
                                    {"certified_error_h", err_h},
                                    {"certified_error_h_inverse", err_hinv},
                                    {"budget", budget_to_json(fwd)}};
                append_jsonl(dir / "report.jsonl", line);
                std::cout << line.dump() << '\n';
            }
        }
        return kExitPass;
    } catch (const budget_error& e) {
        std::cerr << "budget: " << e.what() << '\n';
        return kExitBudgetInfeasible;
    } catch (const config_error& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const certification_error& e) {
        std::cerr << "certification: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfigError;
    }
}

// ---------------------------------------------------------------------------
// verify: run the scenario's verifier set, one JSON line per report.
// ---------------------------------------------------------------------------
inline std::vector<ResidualReport> run_verifiers(const BuiltScenario& b) {
    std::vector<ResidualReport> reports;
    for (const std::string& name : b.spec.verifiers) {
        if (name == "conjugacy") {
            reports.push_back(verify_conjugacy(b.op, b.cert, b.tuple, b.samples, b.ctx));
        } else if (name == "inverse_pair") {
            reports.push_back(verify_inverse_pair(b.op, b.cert, b.tuple, b.samples, b.ctx));
        } else if (name == "franks") {
            reports.push_back(verify_franks_bound(b.op, b.cert, b.tuple, b.samples, b.ctx));
        } else if (name == "correspondence") {
            if (!b.tuple_prime)
                throw config_error("scenario '" + b.spec.id +
                                   "': correspondence verifier needs tuple_prime");
            reports.push_back(verify_correspondence_lip(b.op, b.cert, b.tuple, *b.tuple_prime,
                                                        b.samples, b.ctx));
        } else if (name == "series_roundtrip") {
            reports.push_back(verify_series_roundtrip(b.op, b.cert, b.tuple, OrbitMode::powers,
                                                      b.samples, b.ctx));
            reports.push_back(verify_series_roundtrip(b.op, b.cert, b.tuple, OrbitMode::perturbed,
                                                      b.samples, b.ctx));
        } else if (name == "nonuniqueness") {
            if (!b.spec.fixed_point)
                throw config_error("scenario '" + b.spec.id +
                                   "': nonuniqueness verifier needs a fixed_point block");
            const auto& fp = *b.spec.fixed_point;
            const FixedPointVector z =
                fixed_point_vector(b.op, b.cert, Vector::basis(fp.index), fp.window);
            ResidualReport zr;
            zr.scenario = b.spec.id;
            zr.verifier = "fixed_point";
            zr.mode = b.spec.mode;
            zr.period = b.tuple.period();
            zr.seed = b.ctx.seed;
            zr.residuals = {z.residual};
            zr.max_residual = z.residual;
            zr.bound = z.bound;
            zr.sample_count = 1;
            zr.pass = z.residual <= z.bound;
            zr.note = "window=" + std::to_string(fp.window);
            reports.push_back(zr);
            for (double lambda : fp.lambdas)
                reports.push_back(
                    nonuniqueness_family(b.op, b.cert, b.tuple, z.z, lambda, b.samples, b.ctx));
        } else if (name == "uniqueness") {
            // self-witness: the computed h fed back through the recursion
            const ErrorBudget budget = plan_forward_budget(b.op, b.cert, b.tuple, b.spec.tau, b.spec.caps);
            auto h = std::make_shared<DefectEvaluator>(b.op, b.cert, b.tuple, budget,
                                                       DefectEvaluator::Mode::forward);
            auto candidate = [h](const Vector& x) { return add(x, h->eval(x, 0)); };
            reports.push_back(uniqueness_witness_check(b.op, b.cert, b.tuple, candidate,
                                                       budget.certified_error, b.samples, b.ctx));
        }
    }
    return reports;
}

inline int cmd_verify(const LabConfig& cfg, const RunOptions& opts) {
    std::vector<BuiltScenario> built;
    try {
        built = build_all(cfg, opts);
    } catch (const config_error& e) {
        std::cerr << "config/admissibility: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const certification_error& e) {
        std::cerr << "certification: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfigError;
    }

    try {
        const auto dir = prepare_out_dir(opts);
        std::vector<std::vector<ResidualReport>> all(built.size());
        const int jobs = std::max(1, opts.jobs);
        for (std::size_t base = 0; base < built.size(); base += static_cast<std::size_t>(jobs)) {
            std::vector<std::future<std::vector<ResidualReport>>> wave;
            const std::size_t end = std::min(built.size(), base + static_cast<std::size_t>(jobs));
            for (std::size_t i = base; i < end; ++i)
                wave.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                          [&built, i] { return run_verifiers(built[i]); }));
            for (std::size_t i = base; i < end; ++i) all[i] = wave[i - base].get();
        }

        bool all_pass = true;
        for (const auto& reports : all) {
            for (const auto& r : reports) {
                append_jsonl(dir / "report.jsonl", report_to_json(r));
                std::cout << (r.pass ? "[pass] " : "[FAIL] ") << r.scenario << "/" << r.verifier
                          << " max_residual=" << format_number(r.max_residual)
                          << " bound=" << format_number(r.bound) << '\n';
                all_pass = all_pass && r.pass;
            }
        }
        return all_pass ? kExitPass : kExitVerificationFailure;
    } catch (const budget_error& e) {
        std::cerr << "budget: " << e.what() << '\n';
        return kExitBudgetInfeasible;
    } catch (const config_error& e) {
        std::cerr << "config/admissibility: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfigError;
    }
}

// ---------------------------------------------------------------------------
// sweep: residual/bound/rate columns along one axis, CSV output.
// ---------------------------------------------------------------------------
struct SweepRow {
    std::string axis;
    double value = 0.0;
    double max_residual = 0.0;
    double certified_bound = 0.0;
    double wall_time_s = 0.0;
    double contraction_ratio = 0.0;
};

inline SweepRow sweep_point(const BuiltScenario& b, const std::string& axis, double value) {
    detail::WallTimer timer;
    SweepRow row;
    row.axis = axis;
    row.value = value;

    const auto conjugacy_residual = [&](const PerturbationTuple& maps, const ErrorBudget& budget) {
        DefectEvaluator h(b.op, b.cert, maps, budget, DefectEvaluator::Mode::forward);
        double worst = 0.0;
        for (const Vector& x : b.samples) {
            h.clear_cache();
            const Vector hx = add(x, h.eval(x, 0));
            const Vector lhs = perturbed_product(b.op, maps, hx);
            const Vector tpx = operator_power(b.op, x, maps.period());
            const Vector rhs = add(tpx, h.eval(tpx, 0));
            worst = std::max(worst, distance(lhs, rhs));
        }
        return worst;
    };

    if (axis == "m" || axis == "K") {
        const ErrorBudget planned = plan_forward_budget(b.op, b.cert, b.tuple, b.spec.tau, b.spec.caps);
        const int depth = axis == "K" ? static_cast<int>(value) : planned.truncation_depth;
        const int iters = axis == "m" ? static_cast<int>(value) : planned.iterations;
        const ErrorBudget forced = forward_budget_for(b.op, b.cert, b.tuple, b.spec.tau, depth, iters);
        row.max_residual = conjugacy_residual(b.tuple, forced);
        row.certified_bound = (perturbed_product_lip(b.op, b.tuple) + 1.0) * forced.certified_error;
        row.contraction_ratio = observed_contraction_ratio(b.op, b.cert, b.tuple, b.samples, depth,
                                                           std::max(iters, 1));
    } else if (axis == "eps_fraction") {
        if (b.tuple.max_lip() <= 0.0)
            throw config_error("eps_fraction sweep needs a tuple with a positive Lipschitz bound");
        const double factor = value * b.eps / b.tuple.max_lip();
        std::vector<LipMap> scaled;
        for (const auto& m : b.tuple.maps()) scaled.push_back(LipMap::scaled(factor, m));
        const PerturbationTuple tuple(std::move(scaled));
        const ErrorBudget budget = plan_forward_budget(b.op, b.cert, tuple, b.spec.tau, b.spec.caps);
        row.max_residual = conjugacy_residual(tuple, budget);
        row.certified_bound = (perturbed_product_lip(b.op, tuple) + 1.0) * budget.certified_error;
        row.contraction_ratio = observed_contraction_ratio(b.op, b.cert, tuple, b.samples,
                                                           budget.truncation_depth,
                                                           std::max(budget.iterations, 1));
    } else {  // axis == "p": replicate the first map; identity-distance bound column
        const int p = static_cast<int>(value);
        if (p < 1) throw config_error("p sweep values must be positive integers");
        const PerturbationTuple tuple(std::vector<LipMap>(static_cast<std::size_t>(p), b.tuple.map(0)));
        const ErrorBudget budget = plan_forward_budget(b.op, b.cert, tuple, b.spec.tau, b.spec.caps);
        DefectEvaluator h(b.op, b.cert, tuple, budget, DefectEvaluator::Mode::forward);
        double worst = 0.0;
        for (const Vector& x : b.samples) {
            h.clear_cache();
            worst = std::max(worst, sup_norm(h.eval(x, 0)));
        }
        row.max_residual = worst;
        row.certified_bound = franks_constant(b.cert) * tuple.max_sup() + b.spec.tau;
        row.contraction_ratio = observed_contraction_ratio(b.op, b.cert, tuple, b.samples,
                                                           budget.truncation_depth,
                                                           std::max(budget.iterations, 1));
    }
    row.wall_time_s = timer.seconds();
    return row;
}

inline int cmd_sweep(const LabConfig& cfg, const RunOptions& opts) {
    std::vector<BuiltScenario> built;
    try {
        built = build_all(cfg, opts);
        for (const auto& b : built)
            if (!b.spec.sweep)
                throw config_error("scenario '" + b.spec.id + "' has no sweep block");
    } catch (const config_error& e) {
        std::cerr << "config/admissibility: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const certification_error& e) {
        std::cerr << "certification: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfigError;
    }

    try {
        const auto dir = prepare_out_dir(opts);
        std::vector<std::string> rows;
        for (const auto& b : built) {
            for (double v : b.spec.sweep->values) {
                const SweepRow row = sweep_point(b, b.spec.sweep->axis, v);
                std::ostringstream line;
                line << b.spec.id << ',' << row.axis << ',' << format_number(row.value) << ','
                     << format_number(row.max_residual) << ','
                     << format_number(row.certified_bound) << ','
                     << format_number(row.wall_time_s) << ','
                     << format_number(row.contraction_ratio);
                rows.push_back(line.str());
                std::cout << rows.back() << '\n';
            }
        }
        write_csv(dir / "sweep.csv",
                  "scenario,axis,value,max_residual,certified_bound,wall_time_s,contraction_ratio",
                  rows);
        return kExitPass;
    } catch (const budget_error& e) {
        std::cerr << "budget: " << e.what() << '\n';
        return kExitBudgetInfeasible;
    } catch (const config_error& e) {
        std::cerr << "config/admissibility: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfigError;
    }
}

} // namespace conjulab
