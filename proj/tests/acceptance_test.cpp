// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Every tolerance is pinned here, in code; each line reports the measured
// margin next to its bound.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "conjulab/conjugacy.hpp"
#include "conjulab/operators.hpp"
#include "conjulab/perturbations.hpp"
#include "conjulab/stability_lab.hpp"

using namespace conjulab;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

// The bundled scenario set exercised by the whole-suite criteria.
struct Bundled {
    std::string id;
    std::size_t dim;  // 0 for the sequence family
    SplitOperator op;
    HyperbolicityCertificate cert;
    PerturbationTuple tuple;
    char mode;
    double tau;
    std::vector<Vector> samples;
};

std::vector<Bundled> bundled_scenarios() {
    std::vector<Bundled> out;

    Bundled diag{"diag-const", 2, make_diagonal_operator({0.5, 2.0}), {},
                 PerturbationTuple({LipMap::constant(Vector::dense({0.1, 0.1}))}), 'B', 1e-9, {}};
    diag.cert = certify_constants(diag.op, 0.5);
    diag.samples = make_samples(Vector::Family::dense, 2, {20, 10.0, 1001});
    out.push_back(std::move(diag));

    Bundled p2{"scalar-p2", 1, make_diagonal_operator({2.0}), {},
               PerturbationTuple({LipMap::constant(Vector::dense({0.3})),
                                  LipMap::constant(Vector::dense({0.0}))}),
               'A', 1e-9, {}};
    p2.cert = certify_constants(p2.op, 0.5);
    p2.samples = make_samples(Vector::Family::dense, 1, {20, 10.0, 1002});
    out.push_back(std::move(p2));

    Bundled sine{"scalar-sine", 1, make_diagonal_operator({2.0}), {},
                 PerturbationTuple({LipMap::sine(0, 0, 0.1, 1.0)}), 'B', 1e-6, {}};
    sine.cert = certify_constants(sine.op, 0.5);
    sine.samples = make_samples(Vector::Family::dense, 1, {100, 10.0, 1003});
    out.push_back(std::move(sine));

    Eigen::MatrixXd basis(3, 3), stable(2, 2), unstable(1, 1);
    basis << 1.0, 0.0, 0.5, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0;
    stable << 0.4, 0.1, 0.0, 0.4;
    unstable << 2.0;
    Bundled block{"block-coupled", 3, make_block_operator(basis, stable, unstable), {},
                  PerturbationTuple({LipMap::constant(Vector::dense({0.02, 0.02, 0.02}))}), 'B',
                  1e-8, {}};
    block.cert = certify_constants(block.op, 0.75);
    block.samples = make_samples(Vector::Family::dense, 3, {15, 5.0, 1004});
    out.push_back(std::move(block));

    Bundled shift_sine{"shift-sine", 0, make_weighted_shift(2.0, 0.5, 0), {},
                       PerturbationTuple({LipMap::sine(0, 0, 0.05, 1.0)}), 'B', 1e-7, {}};
    shift_sine.cert = certify_constants(shift_sine.op, 0.5);
    shift_sine.samples = make_samples(Vector::Family::sparse_bilateral, 0, {25, 5.0, 1005});
    out.push_back(std::move(shift_sine));

    Bundled shift_zero{"shift-nonuniq", 0, make_weighted_shift(2.0, 0.5, 0), {},
                       PerturbationTuple({LipMap::constant(Vector::sparse({}))}), 'B', 1e-9, {}};
    shift_zero.cert = certify_constants(shift_zero.op, 0.5);
    shift_zero.samples = make_samples(Vector::Family::sparse_bilateral, 0, {20, 5.0, 1006});
    out.push_back(std::move(shift_zero));

    Bundled corr{"corr-base", 1, make_diagonal_operator({2.0}), {},
                 PerturbationTuple({LipMap::constant(Vector::dense({0.1}))}), 'B', 1e-9, {}};
    corr.cert = certify_constants(corr.op, 0.5);
    corr.samples = make_samples(Vector::Family::dense, 1, {20, 10.0, 1007});
    out.push_back(std::move(corr));

    return out;
}

VerifierContext context_for(const Bundled& b) {
    VerifierContext ctx;
    ctx.scenario_id = b.id;
    ctx.mode = b.mode;
    ctx.delta = 0.5;
    ctx.tau = b.tau;
    ctx.seed = 9000;
    return ctx;
}

// Deep-iteration oracle for T = 2, L = 0.1 sin (60 series terms per level).
class DeepSineOracle {
public:
    double eval(double x, int depth) {
        if (depth == 0) return 0.0;
        std::uint64_t bits = 0;
        std::memcpy(&bits, &x, sizeof bits);
        const auto key = std::make_pair(depth, bits);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        double sum = 0.0;
        double pow2 = 1.0;
        for (int k = 1; k <= 60; ++k) {
            const double arg = pow2 * x;
            // overflowed arguments sit >= 17 damped levels deep; their terms
            // move the top-level value by less than 1e-13
            if (std::isfinite(arg)) sum -= 0.1 * std::sin(arg + eval(arg, depth - 1)) / (2.0 * pow2);
            pow2 *= 2.0;
        }
        memo_.emplace(key, sum);
        return sum;
    }

private:
    std::map<std::pair<int, std::uint64_t>, double> memo_;
};

// --- criteria ----------------------------------------------------------------

Outcome criterion_closed_form_diagonal() {
    const auto start = std::chrono::steady_clock::now();
    const SplitOperator op = make_diagonal_operator({0.5, 2.0});
    const HyperbolicityCertificate cert = certify_constants(op, 0.5);
    const PerturbationTuple maps({LipMap::constant(Vector::dense({0.1, 0.1}))});
    const ErrorBudget budget = plan_forward_budget(op, cert, maps, 1e-9);
    DefectEvaluator h(op, cert, maps, budget, DefectEvaluator::Mode::forward);

    double worst = 0.0;
    for (const Vector& x : make_samples(Vector::Family::dense, 2, {20, 10.0, 4001})) {
        const Vector hx = add(x, h.eval(x, 0));
        const Vector expected = Vector::dense({x.get(0) + 0.2, x.get(1) - 0.1});
        worst = std::max(worst, distance(hx, expected));
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = worst <= 1e-8 && elapsed < 1.0;
    return {pass, "max|h - oracle| = " + num(worst) + " (tol 1e-08), runtime " + num(elapsed) + " s"};
}

Outcome criterion_closed_form_time_dependent() {
    const SplitOperator op = make_diagonal_operator({2.0});
    const HyperbolicityCertificate cert = certify_constants(op, 0.5);
    const PerturbationTuple maps({LipMap::constant(Vector::dense({0.3})),
                                  LipMap::constant(Vector::dense({0.0}))});
    const ErrorBudget budget = plan_forward_budget(op, cert, maps, 1e-9);
    DefectEvaluator h(op, cert, maps, budget, DefectEvaluator::Mode::forward);

    double worst_value = 0.0;
    double worst_residual = 0.0;
    for (const Vector& x : make_samples(Vector::Family::dense, 1, {20, 10.0, 4002})) {
        const Vector hx = add(x, h.eval(x, 0));
        worst_value = std::max(worst_value, std::abs(hx.get(0) - (x.get(0) - 0.2)));
        const Vector lhs = perturbed_product(op, maps, hx);
        const Vector t2x = operator_power(op, x, 2);
        const Vector rhs = add(t2x, h.eval(t2x, 0));
        worst_residual = std::max(worst_residual, distance(lhs, rhs));
    }
    const bool pass = worst_value <= 1e-8 && worst_residual <= 1e-8;
    return {pass, "max|h - (x - 0.2)| = " + num(worst_value) + ", max conjugacy residual = " +
                      num(worst_residual) + " (tol 1e-08)"};
}

Outcome criterion_nonlinear_sine() {
    const SplitOperator op = make_diagonal_operator({2.0});
    const HyperbolicityCertificate cert = certify_constants(op, 0.5);
    const PerturbationTuple maps({LipMap::sine(0, 0, 0.1, 1.0)});
    const double tau = 1e-6;
    const ErrorBudget budget = plan_forward_budget(op, cert, maps, tau);
    DefectEvaluator h(op, cert, maps, budget, DefectEvaluator::Mode::forward);
    DeepSineOracle oracle;

    double worst_residual = 0.0;
    double worst_oracle = 0.0;
    for (const Vector& x : make_samples(Vector::Family::dense, 1, {100, 10.0, 4003})) {
        const Vector hx = add(x, h.eval(x, 0));
        const Vector lhs = perturbed_product(op, maps, hx);
        const Vector tx = op.apply(x);
        const Vector rhs = add(tx, h.eval(tx, 0));
        worst_residual = std::max(worst_residual, distance(lhs, rhs));
        worst_oracle = std::max(worst_oracle,
                                std::abs(h.eval(x, 0).get(0) - oracle.eval(x.get(0), 18)));
    }
    const bool pass = worst_residual <= tau && worst_oracle <= 1e-6;
    return {pass, "max residual = " + num(worst_residual) + " (tau 1e-06), max|u - oracle| = " +
                      num(worst_oracle) + " (tol 1e-06)"};
}

Outcome criterion_identity_distance_bound() {
    std::size_t violations = 0;
    std::ostringstream detail;
    for (const Bundled& b : bundled_scenarios()) {
        const ResidualReport r =
            verify_franks_bound(b.op, b.cert, b.tuple, b.samples, context_for(b));
        if (!r.pass) {
            ++violations;
            detail << " " << b.id << "(max=" << num(r.max_residual) << ",bound=" << num(r.bound)
                   << ")";
        }
    }
    if (violations == 0)
        return {true, "sampled sup ||h - I|| <= C max||L||: zero violations over " +
                          std::to_string(bundled_scenarios().size()) + " scenarios"};
    return {false, std::to_string(violations) + " violation(s):" + detail.str()};
}

Outcome criterion_lipschitz_dependence() {
    const SplitOperator op = make_diagonal_operator({2.0});
    const HyperbolicityCertificate cert = certify_constants(op, 0.5);
    const double delta = 0.5;
    const double constant = correspondence_lip_constant(cert, delta);  // 12, independent of p
    const double dist = 0.02;
    const auto samples = make_samples(Vector::Family::dense, 1, {30, 10.0, 4005});

    double worst = 0.0;
    for (int p : {1, 2, 5}) {
        const PerturbationTuple a(
            std::vector<LipMap>(static_cast<std::size_t>(p), LipMap::constant(Vector::dense({0.10}))));
        const PerturbationTuple b(
            std::vector<LipMap>(static_cast<std::size_t>(p), LipMap::constant(Vector::dense({0.12}))));
        const ErrorBudget ba = plan_forward_budget(op, cert, a, 1e-10);
        const ErrorBudget bb = plan_forward_budget(op, cert, b, 1e-10);
        DefectEvaluator ha(op, cert, a, ba, DefectEvaluator::Mode::forward);
        DefectEvaluator hb(op, cert, b, bb, DefectEvaluator::Mode::forward);
        for (const Vector& x : samples)
            worst = std::max(worst, distance(ha.eval(x, 0), hb.eval(x, 0)));
        if (worst > constant * dist)
            return {false, "violated at p=" + std::to_string(p) + ": " + num(worst) + " > " +
                               num(constant * dist)};
    }
    return {true, "max||h_L - h_L'|| = " + num(worst) + " <= " + num(constant * dist) +
                      " for p in {1,2,5}, constant " + num(constant) + " shared"};
}

Outcome criterion_series_inverse_roundtrip() {
    const SplitOperator op = make_diagonal_operator({0.5, 2.0});
    const HyperbolicityCertificate cert = certify_constants(op, 0.5);
    const double eps = epsilon_threshold(cert, 0.5);
    std::mt19937_64 rng(4006);
    std::uniform_real_distribution<double> amp(0.2, 0.5);
    std::uniform_real_distribution<double> off(-0.3, 0.3);

    double worst_margin = 0.0;  // residual / bound, maximized
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<LipMap> maps;
        for (int j = 0; j < 2; ++j) {
            maps.push_back(LipMap::sum(
                {LipMap::sine(j % 2, (j + 1) % 2, amp(rng) * eps, 1.0),
                 LipMap::constant(Vector::dense({off(rng) * eps, off(rng) * eps}))}));
        }
        const PerturbationTuple tuple(std::move(maps));
        if (!tuple.admissible('B', eps)) return {false, "generated tuple unexpectedly inadmissible"};
        const auto samples = make_samples(Vector::Family::dense, 2, {50, 8.0, 4100u + static_cast<std::uint64_t>(trial)});
        VerifierContext ctx{"roundtrip-" + std::to_string(trial), 'B', 0.5, 1e-8, {}, 4100u + trial};
        for (OrbitMode mode : {OrbitMode::powers, OrbitMode::perturbed}) {
            const ResidualReport r = verify_series_roundtrip(op, cert, tuple, mode, samples, ctx);
            if (!r.pass)
                return {false, "violation in " + r.verifier + " trial " + std::to_string(trial) +
                                   ": max=" + num(r.max_residual) + " bound=" + num(r.bound)};
            if (r.bound > 0.0) worst_margin = std::max(worst_margin, r.max_residual / r.bound);
        }
    }
    return {true, "defect = G within certified error, both orbit modes, 5 tuples x 50+ points "
                  "(worst residual/bound = " + num(worst_margin) + ")"};
}

Outcome criterion_contraction_rate() {
    const SplitOperator op = make_diagonal_operator({2.0});
    const HyperbolicityCertificate cert = certify_constants(op, 0.5);
    const PerturbationTuple sine({LipMap::sine(0, 0, 0.1, 1.0)});
    const auto samples = make_samples(Vector::Family::dense, 1, {15, 5.0, 4007});
    std::ostringstream detail;

    // iteration-count sweep
    for (int m : {1, 2, 3, 4, 5, 6, 7, 8}) {
        const double ratio = observed_contraction_ratio(op, cert, sine, samples, 24, m);
        const double limit = contraction_factor(cert, sine) + 0.05;
        if (ratio > limit)
            return {false, "m-sweep at m=" + std::to_string(m) + ": ratio " + num(ratio) + " > " +
                               num(limit)};
    }
    // truncation-depth sweep
    for (int depth : {5, 10, 20}) {
        const double ratio = observed_contraction_ratio(op, cert, sine, samples, depth, 3);
        const double limit = contraction_factor(cert, sine) + 0.05;
        if (ratio > limit)
            return {false, "K-sweep at K=" + std::to_string(depth) + ": ratio " + num(ratio) +
                               " > " + num(limit)};
    }
    // perturbation-size sweep
    const double eps = epsilon_threshold(cert, 0.5);
    for (double fraction : {0.1, 0.3, 0.5, 0.8}) {
        const double factor = fraction * eps / sine.max_lip();
        const PerturbationTuple scaled({LipMap::scaled(factor, sine.map(0))});
        const double ratio = observed_contraction_ratio(op, cert, scaled, samples, 24, 2);
        const double limit = contraction_factor(cert, scaled) + 0.05;
        if (ratio > limit)
            return {false, "eps-sweep at f=" + num(fraction) + ": ratio " + num(ratio) + " > " +
                               num(limit)};
    }
    // tuple-length sweep
    for (int p : {1, 2, 5}) {
        const PerturbationTuple tuple(
            std::vector<LipMap>(static_cast<std::size_t>(p), LipMap::sine(0, 0, 0.05, 1.0)));
        const double ratio = observed_contraction_ratio(op, cert, tuple, samples, 24, 2);
        const double limit = contraction_factor(cert, tuple) + 0.05;
        if (ratio > limit)
            return {false, "p-sweep at p=" + std::to_string(p) + ": ratio " + num(ratio) + " > " +
                               num(limit)};
    }
    return {true, "observed ratio <= C max Lip + 0.05 across m/K/eps_fraction/p sweeps"};
}

Outcome criterion_nonuniqueness_family() {
    const SplitOperator op = make_weighted_shift(2.0, 0.5, 0);
    const HyperbolicityCertificate cert = certify_constants(op, 0.5);
    const PerturbationTuple zero({LipMap::constant(Vector::sparse({}))});
    const int window = 40;
    const FixedPointVector fp = fixed_point_vector(op, cert, Vector::basis(0), window);

    for (std::int64_t n = -window; n <= window; ++n)
        if (fp.z.get(n) != std::pow(2.0, -static_cast<double>(std::llabs(n))))
            return {false, "z entries differ from 2^{-|n|} at n=" + std::to_string(n)};
    if (fp.residual > 1e-9)
        return {false, "||Tz - z|| = " + num(fp.residual) + " > 1e-09"};

    const auto samples = make_samples(Vector::Family::sparse_bilateral, 0, {20, 5.0, 4008});
    VerifierContext ctx{"shift-nonuniq", 'B', 0.5, 1e-9, {}, 4008};
    const ErrorBudget budget = plan_forward_budget(op, cert, zero, 1e-9);
    DefectEvaluator h(op, cert, zero, budget, DefectEvaluator::Mode::forward);
    const Vector origin = Vector::sparse({});
    const Vector h0 = add(origin, h.eval(origin, 0));

    for (double lambda : {0.1, 1.0}) {
        const ResidualReport r = nonuniqueness_family(op, cert, zero, fp.z, lambda, samples, ctx);
        if (!r.pass || r.max_residual > 1e-6)
            return {false, "translate lambda=" + num(lambda) + " residual " + num(r.max_residual)};
        const Vector arg = scale(lambda, fp.z);
        const Vector h_lambda_0 = add(arg, h.eval(arg, 0));
        const double separation = distance(h_lambda_0, h0);
        if (std::abs(separation - lambda * sup_norm(fp.z)) > 1e-9)
            return {false, "separation at origin " + num(separation) + " differs from |lambda| ||z||"};
    }
    return {true, "||Tz - z|| = " + num(fp.residual) + " <= 1e-09; translates conjugate within "
                  "1e-06 and separate by |lambda| ||z|| at the origin"};
}

Outcome criterion_doubling_stability() {
    std::ostringstream detail;
    for (const Bundled& b : bundled_scenarios()) {
        const ErrorBudget small = plan_forward_budget(b.op, b.cert, b.tuple, b.tau);
        const ErrorBudget big = forward_budget_for(b.op, b.cert, b.tuple, b.tau,
                                                   2 * small.truncation_depth,
                                                   2 * std::max(small.iterations, 1));
        DefectEvaluator ev_small(b.op, b.cert, b.tuple, small, DefectEvaluator::Mode::forward);
        DefectEvaluator ev_big(b.op, b.cert, b.tuple, big, DefectEvaluator::Mode::forward);
        double worst = 0.0;
        std::size_t used = 0;
        for (const Vector& x : b.samples) {
            if (++used > 10) break;  // ten points per scenario keep the suite brisk
            worst = std::max(worst, distance(ev_small.eval(x, 0), ev_big.eval(x, 0)));
        }
        if (b.tuple.zero_bound()) {
            if (worst != 0.0) return {false, b.id + ": zero tuple produced nonzero defect"};
            continue;
        }
        if (worst > small.certified_error)
            return {false, b.id + ": doubling gap " + num(worst) + " exceeds certified " +
                               num(small.certified_error)};
        detail << " " << b.id << "=" << num(worst) << "/" << num(small.certified_error);
    }
    return {true, "(K,m) vs (2K,2m) within certified error:" + detail.str()};
}

} // namespace

int main() {
    const auto suite_start = std::chrono::steady_clock::now();
    struct Entry {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Entry> criteria = {
        {1, "closed-form conjugacy (diagonal, constant tuple)", criterion_closed_form_diagonal},
        {2, "time-dependent closed form (p = 2)", criterion_closed_form_time_dependent},
        {3, "nonlinear scenario vs deep-iteration oracle", criterion_nonlinear_sine},
        {4, "identity-distance bound across the bundle", criterion_identity_distance_bound},
        {5, "Lipschitz dependence on the tuple, p-independent", criterion_lipschitz_dependence},
        {6, "series-inverse round trip, both orbit modes", criterion_series_inverse_roundtrip},
        {7, "observed contraction rate in every sweep", criterion_contraction_rate},
        {8, "non-uniqueness family on the weighted shift", criterion_nonuniqueness_family},
        {9, "doubling stability across the bundle", criterion_doubling_stability},
    };

    int failures = 0;
    for (const auto& entry : criteria) {
        Outcome outcome;
        try {
            outcome = entry.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " criterion " << entry.id << ": "
                  << entry.name << " -- " << outcome.detail << '\n';
        if (!outcome.pass) ++failures;
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - suite_start).count();
    std::cout << (failures == 0 ? "[PASS]" : "[FAIL]") << " acceptance suite: "
              << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
              << " criteria passed in " << num(elapsed) << " s\n";
    if (elapsed >= 300.0) {
        std::cout << "[FAIL] runtime budget: suite exceeded 300 s\n";
        return 1;
    }
    return failures == 0 ? 0 : 1;
}
