#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conjulab/conjugacy.hpp"
#include "conjulab/errors.hpp"
#include "conjulab/mapping_torus.hpp"
#include "conjulab/operators.hpp"
#include "conjulab/perturbations.hpp"
#include "conjulab/vectorspace.hpp"

namespace conjulab {

// ---------------------------------------------------------------------------
// Verifiers for the quantitative claims: conjugacy residuals, mutual-inverse
// residuals, the identity-distance bound, Lipschitz dependence on the tuple,
// the series-inverse round trip, the fixed-point vector of the shift, the
// translate family it generates, and the uniqueness recursion witness.
//
// Sup-norm claims are checked as sampled lower bounds against certified upper
// bounds; reports always carry both numbers.
// ---------------------------------------------------------------------------

struct SampleSpec {
    std::size_t count = 100;
    double radius = 10.0;
    std::uint64_t seed = 0;
};

inline std::vector<Vector> corner_samples(Vector::Family family, std::size_t dim) {
    std::vector<Vector> pts;
    if (family == Vector::Family::dense) {
        pts.push_back(Vector::dense(std::vector<double>(dim, 0.0)));
        for (std::size_t i = 0; i < dim; ++i) {
            std::vector<double> e(dim, 0.0);
            e[i] = 1.0;
            pts.push_back(Vector::dense(e));
            e[i] = -1.0;
            pts.push_back(Vector::dense(e));
        }
    } else {
        pts.push_back(Vector::sparse({}));
        for (std::int64_t i = -2; i <= 2; ++i) {
            pts.push_back(Vector::basis(i, 1.0));
            pts.push_back(Vector::basis(i, -1.0));
        }
    }
    return pts;
}

/// Deterministic corner cases plus `count` seeded pseudo-random points of sup
/// norm <= radius.
inline std::vector<Vector> make_samples(Vector::Family family, std::size_t dim,
                                        const SampleSpec& spec) {
    std::vector<Vector> pts = corner_samples(family, dim);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> coord(-spec.radius, spec.radius);
    if (family == Vector::Family::dense) {
        for (std::size_t n = 0; n < spec.count; ++n) {
            std::vector<double> v(dim);
            for (double& c : v) c = coord(rng);
            pts.push_back(Vector::dense(std::move(v)));
        }
    } else {
        std::uniform_int_distribution<std::int64_t> idx(-4, 4);
        for (std::size_t n = 0; n < spec.count; ++n) {
            std::map<std::int64_t, double> entries;
            for (int k = 0; k < 3; ++k) entries[idx(rng)] = coord(rng);
            pts.push_back(Vector::sparse(std::move(entries)));
        }
    }
    return pts;
}

struct ResidualReport {
    std::string scenario;
    std::string verifier;
    char mode = 'A';
    int period = 1;
    std::uint64_t seed = 0;
    std::size_t sample_count = 0;
    std::vector<double> residuals;
    double max_residual = 0.0;
    double bound = 0.0;
    bool pass = false;
    double wall_time_s = 0.0;
    ErrorBudget budget;
    std::string note;
};

struct VerifierContext {
    std::string scenario_id;
    char mode = 'A';
    double delta = 0.5;
    double tau = 1e-8;
    BudgetCaps caps;
    std::uint64_t seed = 0;
};

namespace detail {

class WallTimer {
public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void finalize(ResidualReport& report, const WallTimer& timer) {
    report.max_residual = 0.0;
    for (double r : report.residuals) report.max_residual = std::max(report.max_residual, r);
    report.sample_count = report.residuals.size();
    // an infinite or NaN bound certifies nothing
    report.pass = std::isfinite(report.bound) && report.max_residual <= report.bound;
    report.wall_time_s = timer.seconds();
}

} // namespace detail

/// S_{p-1} o ... o S_0 applied to x (first coordinate of the p-fold lift).
inline Vector perturbed_product(const SplitOperator& op, const PerturbationTuple& maps, Vector x) {
    for (int j = 0; j < maps.period(); ++j) x = apply_perturbed(op, maps.map(j), x);
    return x;
}

inline Vector operator_power(const SplitOperator& op, Vector x, int n) {
    for (int i = 0; i < n; ++i) x = op.apply(x);
    return x;
}

/// Certified Lipschitz bound of S_{p-1} o ... o S_0.
inline double perturbed_product_lip(const SplitOperator& op, const PerturbationTuple& maps) {
    double lip = 1.0;
    for (int j = 0; j < maps.period(); ++j) lip *= op.operator_norm() + maps.map(j).lip_bound();
    return lip;
}

/// Residuals of (S_{p-1} o ... o S_0)(h(x)) = h(T^p x) over the sample set.
inline ResidualReport verify_conjugacy(const SplitOperator& op, const HyperbolicityCertificate& cert,
                                       const PerturbationTuple& maps,
                                       std::span<const Vector> samples, const VerifierContext& ctx) {
    detail::WallTimer timer;
    ResidualReport report;
    report.scenario = ctx.scenario_id;
    report.verifier = "conjugacy";
    report.mode = ctx.mode;
    report.period = maps.period();
    report.seed = ctx.seed;
    report.budget = plan_forward_budget(op, cert, maps, ctx.tau, ctx.caps);
    report.bound = (perturbed_product_lip(op, maps) + 1.0) * report.budget.certified_error;

    DefectEvaluator h(op, cert, maps, report.budget, DefectEvaluator::Mode::forward);
    for (const Vector& x : samples) {
        h.clear_cache();
        const Vector hx = add(x, h.eval(x, 0));
        const Vector lhs = perturbed_product(op, maps, hx);
        const Vector tpx = operator_power(op, x, maps.period());
        const Vector rhs = add(tpx, h.eval(tpx, 0));
        report.residuals.push_back(distance(lhs, rhs));
    }
    detail::finalize(report, timer);
    return report;
}

/// Residuals of h^{-1}(h(x)) = x and h(h^{-1}(x)) = x. The bound is the
/// mutual-inverse contract 2 tau.
inline ResidualReport verify_inverse_pair(const SplitOperator& op,
                                          const HyperbolicityCertificate& cert,
                                          const PerturbationTuple& maps,
                                          std::span<const Vector> samples,
                                          const VerifierContext& ctx) {
    detail::WallTimer timer;
    ResidualReport report;
    report.scenario = ctx.scenario_id;
    report.verifier = "inverse_pair";
    report.mode = ctx.mode;
    report.period = maps.period();
    report.seed = ctx.seed;
    report.budget = plan_forward_budget(op, cert, maps, ctx.tau, ctx.caps);
    const ErrorBudget inverse_budget = plan_inverse_budget(op, cert, maps, ctx.tau, ctx.caps);
    report.bound = 2.0 * ctx.tau;

    DefectEvaluator h(op, cert, maps, report.budget, DefectEvaluator::Mode::forward);
    DefectEvaluator hinv(op, cert, maps, inverse_budget, DefectEvaluator::Mode::inverse);
    for (const Vector& x : samples) {
        h.clear_cache();
        const Vector hx = add(x, h.eval(x, 0));
        const Vector back = add(hx, hinv.eval(hx, 0));
        report.residuals.push_back(distance(back, x));
        const Vector hinvx = add(x, hinv.eval(x, 0));
        const Vector forth = add(hinvx, h.eval(hinvx, 0));
        report.residuals.push_back(distance(forth, x));
    }
    detail::finalize(report, timer);
    return report;
}

/// Sampled sup of ||h - I|| against the certified bound C * max_j ||L_j||_inf.
/// In mode B with C * max sup < delta, the distance must additionally stay
/// below delta.
inline ResidualReport verify_franks_bound(const SplitOperator& op,
                                          const HyperbolicityCertificate& cert,
                                          const PerturbationTuple& maps,
                                          std::span<const Vector> samples,
                                          const VerifierContext& ctx) {
    detail::WallTimer timer;
    ResidualReport report;
    report.scenario = ctx.scenario_id;
    report.verifier = "franks";
    report.mode = ctx.mode;
    report.period = maps.period();
    report.seed = ctx.seed;
    report.budget = plan_forward_budget(op, cert, maps, ctx.tau, ctx.caps);
    const double franks = franks_constant(cert);
    report.bound = franks * maps.max_sup() + ctx.tau;

    DefectEvaluator h(op, cert, maps, report.budget, DefectEvaluator::Mode::forward);
    for (const Vector& x : samples) {
        h.clear_cache();
        report.residuals.push_back(sup_norm(h.eval(x, 0)));
    }
    detail::finalize(report, timer);
    if (ctx.mode == 'B' && franks * maps.max_sup() < ctx.delta) {
        report.note = "mode B: also requires ||h - I|| < delta = " + std::to_string(ctx.delta);
        report.pass = report.pass && report.max_residual < ctx.delta;
    }
    return report;
}

/// Sampled sup of ||h_L - h_L'|| against the correspondence constant times a
/// certified upper bound for D(L, L').
inline ResidualReport verify_correspondence_lip(const SplitOperator& op,
                                                const HyperbolicityCertificate& cert,
                                                const PerturbationTuple& maps,
                                                const PerturbationTuple& maps_prime,
                                                std::span<const Vector> samples,
                                                const VerifierContext& ctx) {
    detail::WallTimer timer;
    ResidualReport report;
    report.scenario = ctx.scenario_id;
    report.verifier = "correspondence";
    report.mode = ctx.mode;
    report.period = maps.period();
    report.seed = ctx.seed;

    const double eps = epsilon_threshold(cert, ctx.delta);
    maps.require_admissible(ctx.mode, eps);
    maps_prime.require_admissible(ctx.mode, eps);

    const TupleDistance dist = tuple_distance(maps, maps_prime, samples);
    const double constant = correspondence_lip_constant(cert, ctx.delta);
    report.budget = plan_forward_budget(op, cert, maps, ctx.tau, ctx.caps);
    const ErrorBudget budget_prime = plan_forward_budget(op, cert, maps_prime, ctx.tau, ctx.caps);
    report.bound = constant * dist.upper +
                   report.budget.certified_error + budget_prime.certified_error;

    DefectEvaluator ha(op, cert, maps, report.budget, DefectEvaluator::Mode::forward);
    DefectEvaluator hb(op, cert, maps_prime, budget_prime, DefectEvaluator::Mode::forward);
    for (const Vector& x : samples) {
        ha.clear_cache();
        hb.clear_cache();
        report.residuals.push_back(distance(ha.eval(x, 0), hb.eval(x, 0)));
    }
    detail::finalize(report, timer);
    report.note = std::string("D_upper=") + std::to_string(dist.upper) +
                  (dist.sampled ? " (sampled)" : (dist.exact ? " (exact)" : " (certified)")) +
                  "; D_lower_sampled=" + std::to_string(dist.lower_sampled) +
                  "; constant=" + std::to_string(constant);
    return report;
}

/// Surjectivity witness for the series inverse: with F = Psi^{-1}(G) truncated
/// at K terms, the defect F(R(pt)) - T~(F(pt)) must reproduce G(pt) up to the
/// two boundary terms of the telescoped sums (plus transported inversion
/// residuals in perturbed mode).
inline ResidualReport verify_series_roundtrip(const SplitOperator& op,
                                              const HyperbolicityCertificate& cert,
                                              const PerturbationTuple& maps, OrbitMode mode,
                                              std::span<const Vector> samples,
                                              const VerifierContext& ctx) {
    detail::WallTimer timer;
    ResidualReport report;
    report.scenario = ctx.scenario_id;
    report.verifier = mode == OrbitMode::powers ? "series_roundtrip_T" : "series_roundtrip_S";
    report.mode = ctx.mode;
    report.period = maps.period();
    report.seed = ctx.seed;
    report.budget = plan_inverse_budget(op, cert, maps, ctx.tau, ctx.caps);
    const int depth = report.budget.truncation_depth;
    const double allowance = report.budget.orbit_tol;

    const FunElem g = lbar_elem(maps);
    const double ab = cert.prefactor * cert.projection_bound;
    const double boundary = (op.has_stable() ? 1.0 : 0.0) + (op.has_unstable() ? 1.0 : 0.0);
    double worst_orbit = 0.0;

    std::size_t fiber_cycle = 0;
    for (const Vector& x : samples) {
        const TorusPoint pt{x, mod_fiber(static_cast<int>(fiber_cycle++), maps.period())};
        const TorusPoint rpt =
            mode == OrbitMode::powers ? torus_T(op, pt, maps.period()) : torus_S(op, maps, pt);
        const SeriesTerms f_at_r = psi_inverse_apply(op, cert, maps, mode, g, rpt, depth, allowance);
        const SeriesTerms f_at_p = psi_inverse_apply(op, cert, maps, mode, g, pt, depth, allowance);
        const Vector lhs = subtract(f_at_r.value, op.apply(f_at_p.value));
        const Vector rhs = g.fiber_value(pt.x, pt.fiber);
        report.residuals.push_back(distance(lhs, rhs));
        worst_orbit = std::max(worst_orbit,
                               f_at_r.orbit_bound + op.operator_norm() * f_at_p.orbit_bound);
    }
    report.bound =
        boundary * ab * std::pow(cert.rate, depth) * g.sup_bound + worst_orbit;
    detail::finalize(report, timer);
    return report;
}

/// Observed Picard contraction: sup over samples of |U_{m+1} - U_m| divided by
/// sup of |U_m - U_{m-1}|. Returns 0 when the denominator has hit the machine
/// floor (iteration already converged).
inline double observed_contraction_ratio(const SplitOperator& op,
                                         const HyperbolicityCertificate& cert,
                                         const PerturbationTuple& maps,
                                         std::span<const Vector> samples, int depth,
                                         int iterations) {
    if (iterations < 1 || maps.zero_bound()) return 0.0;
    const ErrorBudget probe = forward_budget_for(op, cert, maps, 1.0, depth, iterations + 1);
    DefectEvaluator ev(op, cert, maps, probe, DefectEvaluator::Mode::forward);
    double num = 0.0;
    double den = 0.0;
    for (const Vector& x : samples) {
        const Vector lo = ev.iterate(x, 0, iterations - 1);
        const Vector mid = ev.iterate(x, 0, iterations);
        const Vector hi = ev.iterate(x, 0, iterations + 1);
        den = std::max(den, distance(mid, lo));
        num = std::max(num, distance(hi, mid));
    }
    return den > 1e-13 ? num / den : 0.0;
}

// ---------------------------------------------------------------------------
// Non-uniqueness on the non-hyperbolic shift: a doubly infinite orbit sum of a
// vector in the overlap M n T(N) is a fixed point of T; translating the
// argument of h by multiples of it yields distinct conjugating maps.
// ---------------------------------------------------------------------------

struct FixedPointVector {
    Vector z;
    double residual = 0.0;  // ||T z - z||, exact on the truncated window
    double bound = 0.0;     // 2 a t^K (1+t)/(1-t) ||y||
};

inline FixedPointVector fixed_point_vector(const SplitOperator& op,
                                           const HyperbolicityCertificate& cert, const Vector& y,
                                           int window) {
    if (op.hyperbolic())
        throw std::invalid_argument(
            "fixed-point construction needs a non-hyperbolic splitting (M n T(N) != {0})");
    if (window < 1) throw std::invalid_argument("window must be positive");
    if (y.is_zero()) throw std::invalid_argument("y must be a nonzero vector in M n T(N)");
    if (!(op.project_stable(y) == y))
        throw std::invalid_argument("y must lie in M");
    const Vector pre = op.apply_inverse(y);
    if (!(op.project_unstable(pre) == pre))
        throw std::invalid_argument("y must lie in T(N): T^{-1} y is not in N");

    FixedPointVector out;
    out.z = y;
    Vector fwd = y;
    Vector back = y;
    for (int n = 1; n <= window; ++n) {
        fwd = op.apply(fwd);
        back = op.apply_inverse(back);
        out.z = add(out.z, add(fwd, back));
    }
    out.residual = distance(op.apply(out.z), out.z);
    out.bound = 2.0 * cert.prefactor * std::pow(cert.rate, window) * sup_norm(y) *
                (1.0 + cert.rate) / (1.0 - cert.rate);
    return out;
}

/// Conjugacy residuals of the translate h_lambda(x) = h(x + lambda z), plus a
/// distinctness probe at the origin. The bound combines the h budget with the
/// exact residual of the truncated fixed point.
inline ResidualReport nonuniqueness_family(const SplitOperator& op,
                                           const HyperbolicityCertificate& cert,
                                           const PerturbationTuple& maps, const Vector& z,
                                           double lambda, std::span<const Vector> samples,
                                           const VerifierContext& ctx) {
    detail::WallTimer timer;
    ResidualReport report;
    report.scenario = ctx.scenario_id;
    report.verifier = "nonuniqueness";
    report.mode = ctx.mode;
    report.period = maps.period();
    report.seed = ctx.seed;
    report.budget = plan_forward_budget(op, cert, maps, ctx.tau, ctx.caps);

    const Vector w = subtract(operator_power(op, z, maps.period()), z);
    const double contraction = contraction_factor(cert, maps);
    const double margin = contraction / (1.0 - contraction);
    report.bound = (perturbed_product_lip(op, maps) + 1.0) * report.budget.certified_error +
                   (1.0 + margin) * std::abs(lambda) * sup_norm(w);

    DefectEvaluator h(op, cert, maps, report.budget, DefectEvaluator::Mode::forward);
    auto h_lambda = [&](const Vector& x) {
        const Vector arg = add(x, scale(lambda, z));
        return add(arg, h.eval(arg, 0));
    };
    for (const Vector& x : samples) {
        h.clear_cache();
        const Vector lhs = perturbed_product(op, maps, h_lambda(x));
        const Vector rhs = h_lambda(operator_power(op, x, maps.period()));
        report.residuals.push_back(distance(lhs, rhs));
    }
    detail::finalize(report, timer);

    h.clear_cache();
    const Vector origin = Vector::zero_like(z);
    const Vector at_zero = add(origin, h.eval(origin, 0));
    const Vector shifted = h_lambda(origin);
    report.note = "distinctness_at_origin=" + std::to_string(distance(shifted, at_zero)) +
                  "; lambda=" + std::to_string(lambda) +
                  "; fixed_point_residual_p=" + std::to_string(sup_norm(w));
    return report;
}

// ---------------------------------------------------------------------------
// Uniqueness witness for hyperbolic operators: any candidate g with bounded
// g - I that conjugates the product to T^p induces, via the recursion
//   b_0 = g - I,  b_j = S_{j-1} o (I + b_{j-1}) o T^{-1} - I,
// a fiber-preserving element whose Picard defect must vanish; fixed-point
// uniqueness then forces g to agree with h. The verifier evaluates the defect
// and the sampled distance to the computed h.
// ---------------------------------------------------------------------------
inline ResidualReport uniqueness_witness_check(const SplitOperator& op,
                                               const HyperbolicityCertificate& cert,
                                               const PerturbationTuple& maps,
                                               const std::function<Vector(const Vector&)>& candidate,
                                               double candidate_err,
                                               std::span<const Vector> samples,
                                               const VerifierContext& ctx) {
    if (!op.hyperbolic())
        throw std::invalid_argument(
            "uniqueness recursion requires a hyperbolic operator; the splitting overlap breaks it");
    detail::WallTimer timer;
    ResidualReport report;
    report.scenario = ctx.scenario_id;
    report.verifier = "uniqueness_witness";
    report.mode = ctx.mode;
    report.period = maps.period();
    report.seed = ctx.seed;
    report.budget = plan_forward_budget(op, cert, maps, ctx.tau, ctx.caps);

    const int p = maps.period();
    std::function<Vector(int, const Vector&)> b = [&](int j, const Vector& x) -> Vector {
        if (j == 0) return subtract(candidate(x), x);
        const Vector y = op.apply_inverse(x);
        const Vector arg = add(y, b(j - 1, y));
        return subtract(apply_perturbed(op, maps.map(j - 1), arg), x);
    };

    const double op_norm = op.operator_norm();
    const double lip = maps.max_lip();
    report.bound = (std::pow(op_norm + lip + 1.0, p) + op_norm + lip + 1.0) * candidate_err + 1e-10;

    DefectEvaluator h(op, cert, maps, report.budget, DefectEvaluator::Mode::forward);
    double candidate_vs_h = 0.0;
    for (const Vector& x : samples) {
        h.clear_cache();
        for (int j = 0; j < p; ++j) {
            const Vector bjx = b(j, x);
            const Vector lhs = b(mod_fiber(j + 1, p), op.apply(x));
            const Vector rhs = add(op.apply(bjx), maps.map(j).eval(add(x, bjx)));
            report.residuals.push_back(distance(lhs, rhs));
        }
        candidate_vs_h = std::max(candidate_vs_h, distance(candidate(x), add(x, h.eval(x, 0))));
    }
    detail::finalize(report, timer);

    const double contraction = contraction_factor(cert, maps);
    const double agreement_bound = franks_constant(cert) * report.max_residual /
                                       (1.0 - contraction) +
                                   report.budget.certified_error;
    report.note = "candidate_vs_h=" + std::to_string(candidate_vs_h) +
                  "; agreement_bound=" + std::to_string(agreement_bound);
    if (!report.pass) report.note += "; not a conjugacy witness";
    report.pass = report.pass && candidate_vs_h <= agreement_bound;
    return report;
}

} // namespace conjulab
