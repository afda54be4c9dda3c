#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conjulab/errors.hpp"
#include "conjulab/mapping_torus.hpp"
#include "conjulab/operators.hpp"
#include "conjulab/perturbations.hpp"
#include "conjulab/vectorspace.hpp"

namespace conjulab {

// ---------------------------------------------------------------------------
// Pointwise construction of the conjugating map h and its inverse.
//
// The linear map Psi(F) = F o R - T~ o F on fiber-preserving elements has the
// explicit inverse
//
//   Psi^{-1}(G)(x,j) =   sum_{k>=0} T~^k  Q_M G(R^{-k-1}(x,j))
//                      - sum_{k>=1} T~^{-k} Q_N G(R^{k-1}(x,j)),
//
// truncated here at K terms per half with a certified geometric tail. The
// forward defect U (with h = I + u_0) is the fixed point of F -> Psi1^{-1}
// (Lbar((.,.) + F)), reached by Picard iteration from the zero element; the
// inverse defect is the single application V = -Psi2^{-1}(Lbar), where Psi2
// uses the perturbed product for R and therefore needs backward inversions.
// ---------------------------------------------------------------------------

struct BudgetCaps {
    int max_truncation_depth = 200;  // cap on K
    int max_iterations = 60;         // cap on m
};

struct ErrorBudget {
    double target = 0.0;         // requested tolerance tau
    int truncation_depth = 1;    // K: terms kept in each half of the series
    int iterations = 1;          // m: Picard steps from the zero element
    double certified_error = 0.0;
    double fixed_point_term = 0.0;  // delta^m/(1-delta) * |U_1|
    double series_term = 0.0;       // accumulated truncation tails
    double orbit_term = 0.0;        // planned allowance for backward inversions
    double orbit_tol = 0.0;         // that allowance, handed to the series evaluator
};

/// Truncation tail of one application of the series inverse, per unit of
/// |G|_inf: a b t^K/(1-t) for the stable half plus a b t^{K+1}/(1-t) for the
/// unstable half. A trivial subspace contributes nothing.
inline double series_tail_factor(const SplitOperator& op, const HyperbolicityCertificate& cert,
                                 int depth) {
    const double ab = cert.prefactor * cert.projection_bound;
    const double t = cert.rate;
    double tail = 0.0;
    if (op.has_stable()) tail += ab * std::pow(t, depth) / (1.0 - t);
    if (op.has_unstable()) tail += ab * std::pow(t, depth + 1) / (1.0 - t);
    return tail;
}

/// Contraction factor of the Picard map, bounded by
/// ||Psi1^{-1}|| * max_j Lip(L_j) = franks_constant * max lip.
inline double contraction_factor(const HyperbolicityCertificate& cert,
                                 const PerturbationTuple& maps) {
    return franks_constant(cert) * maps.max_lip();
}

namespace detail {

struct ForwardErrorModel {
    double contraction = 0.0;
    double first_step = 0.0;  // |U_1 - U_0| <= C * max sup
    double sup = 0.0;

    double fixed_point_term(int m) const {
        if (sup == 0.0) return 0.0;
        if (contraction == 0.0) return m >= 1 ? 0.0 : first_step;
        return std::pow(contraction, m) / (1.0 - contraction) * first_step;
    }

    double series_term(const SplitOperator& op, const HyperbolicityCertificate& cert,
                       int depth) const {
        // per-application tail, accumulated geometrically across iterations
        return series_tail_factor(op, cert, depth) * sup / (1.0 - contraction);
    }
};

} // namespace detail

/// Budget for the Picard solve with explicitly chosen (K, m); certified_error
/// is computed but not required to meet the target. Used by sweeps and
/// doubling probes.
inline ErrorBudget forward_budget_for(const SplitOperator& op, const HyperbolicityCertificate& cert,
                                      const PerturbationTuple& maps, double tau, int depth,
                                      int iterations) {
    detail::ForwardErrorModel model{contraction_factor(cert, maps), 0.0, maps.max_sup()};
    if (model.contraction >= 1.0)
        throw admissibility_error("fixed-point map is not a certified contraction");
    model.first_step = franks_constant(cert) * model.sup;
    ErrorBudget b;
    b.target = tau;
    b.truncation_depth = depth;
    b.iterations = maps.zero_bound() ? 0 : iterations;
    b.fixed_point_term = model.fixed_point_term(b.iterations);
    b.series_term = model.series_term(op, cert, depth);
    b.certified_error = b.fixed_point_term + b.series_term;
    return b;
}

/// Choose (K, m) for a target tolerance. Seeds come from solving the two
/// error terms in closed form; a growth loop then enforces the rigorous
/// combined bound, and the caps turn infeasibility into budget_error.
inline ErrorBudget plan_forward_budget(const SplitOperator& op, const HyperbolicityCertificate& cert,
                                       const PerturbationTuple& maps, double tau,
                                       const BudgetCaps& caps = {}) {
    if (!(tau > 0.0)) throw std::invalid_argument("budget target must be positive");
    if (maps.zero_bound()) {
        ErrorBudget b;
        b.target = tau;
        b.truncation_depth = 1;
        b.iterations = 0;
        return b;
    }
    detail::ForwardErrorModel model{contraction_factor(cert, maps), 0.0, maps.max_sup()};
    if (model.contraction >= 1.0)
        throw admissibility_error("fixed-point map is not a certified contraction: C * max Lip = " +
                                  std::to_string(model.contraction));
    model.first_step = franks_constant(cert) * model.sup;

    int m = 1;
    if (model.contraction > 0.0) {
        const double lhs = (1.0 - model.contraction) * tau / (2.0 * model.first_step);
        if (lhs < 1.0)
            m = static_cast<int>(std::ceil(std::log(lhs) / std::log(model.contraction)));
        m = std::clamp(m, 1, caps.max_iterations);
    }
    const double ab = cert.prefactor * cert.projection_bound;
    const double karg = (1.0 - cert.rate) * tau / (4.0 * ab * model.sup * std::max(m, 1));
    int depth = 1;
    if (karg < 1.0) depth = static_cast<int>(std::ceil(std::log(karg) / std::log(cert.rate)));
    depth = std::clamp(depth, 1, caps.max_truncation_depth);

    while (model.fixed_point_term(m) + model.series_term(op, cert, depth) > tau) {
        const bool can_m = m < caps.max_iterations && model.contraction > 0.0;
        const bool can_k = depth < caps.max_truncation_depth;
        if (!can_m && !can_k)
            throw budget_error("budget infeasible: certified error cannot reach tau = " +
                               std::to_string(tau) + " within K <= " +
                               std::to_string(caps.max_truncation_depth) + ", m <= " +
                               std::to_string(caps.max_iterations));
        if (can_m && (model.fixed_point_term(m) >= model.series_term(op, cert, depth) || !can_k))
            ++m;
        else
            ++depth;
    }
    return forward_budget_for(op, cert, maps, tau, depth, m);
}

/// Budget for the single series application defining the inverse defect.
/// The backward-orbit inversion allowance sits one decade below the series
/// tail; iterations is 1 by construction.
inline ErrorBudget plan_inverse_budget(const SplitOperator& op, const HyperbolicityCertificate& cert,
                                       const PerturbationTuple& maps, double tau,
                                       const BudgetCaps& caps = {}) {
    if (!(tau > 0.0)) throw std::invalid_argument("budget target must be positive");
    ErrorBudget b;
    b.target = tau;
    b.iterations = 1;
    if (maps.zero_bound()) {
        b.truncation_depth = 1;
        b.iterations = 0;
        return b;
    }
    const double sup = maps.max_sup();
    int depth = 1;
    while (1.1 * series_tail_factor(op, cert, depth) * sup > tau) {
        if (++depth > caps.max_truncation_depth)
            throw budget_error("budget infeasible: series tail cannot reach tau = " +
                               std::to_string(tau) + " within K <= " +
                               std::to_string(caps.max_truncation_depth));
    }
    b.truncation_depth = depth;
    b.series_term = series_tail_factor(op, cert, depth) * sup;
    b.orbit_term = b.series_term / 10.0;
    b.orbit_tol = b.orbit_term;
    b.certified_error = b.series_term + b.orbit_term;
    return b;
}

enum class OrbitMode {
    powers,     // R = T~ : orbits by exact forward/backward application
    perturbed,  // R = S  : backward orbit needs tolerance-controlled inversion
};

struct SeriesTerms {
    Vector value;         // stable_sum - unstable_sum
    Vector stable_sum;    // lies in M (exactly, for coordinate splittings)
    Vector unstable_sum;  // lies in T^{-1}(N)
    double tail_bound = 0.0;   // truncation tail actually incurred
    double orbit_bound = 0.0;  // transported backward-inversion residuals
};

/// One truncated application of the series inverse at a point. `orbit_allowance`
/// is the error budget for backward inversions in perturbed mode (ignored for
/// powers mode, whose orbits are exact).
///
/// Perturbed-mode accounting: step i is solved to residual tol_i proportional
/// to the local scale; its transported effect on term k (i <= k+1) is modeled
/// as a b t^k * lip * (a t^{-(k+1-i)}) * tol_i: backward expansion along M is
/// at most a t^{-r} over r steps, cancelled by the forward damping. The reported
/// orbit_bound is that double sum with the tolerances actually used.
inline SeriesTerms psi_inverse_apply(const SplitOperator& op, const HyperbolicityCertificate& cert,
                                     const PerturbationTuple& maps, OrbitMode mode,
                                     const FunElem& g, const TorusPoint& pt, int depth,
                                     double orbit_allowance = 0.0) {
    if (depth < 1) throw std::invalid_argument("series truncation depth must be at least 1");
    if (g.space != FiberSpace::advancing)
        throw std::invalid_argument("series inverse applies to fiber-advancing elements");
    const int p = g.period;
    if (mode == OrbitMode::perturbed && maps.period() != p)
        throw std::invalid_argument("tuple length does not match the element's period");

    SeriesTerms out;
    out.stable_sum = Vector::zero_like(pt.x);
    out.unstable_sum = Vector::zero_like(pt.x);

    const double a = cert.prefactor;
    const double b = cert.projection_bound;
    const double t = cert.rate;
    const double lip_g = g.lip_bound.value_or(0.0);

    if (op.has_stable()) {
        // Backward orbit q_i = R^{-i}(pt), i = 1..K; term k uses q_{k+1}.
        double beta = 0.0;
        if (mode == OrbitMode::perturbed && lip_g > 0.0) {
            if (!g.lip_bound.has_value())
                throw std::invalid_argument("perturbed-mode series needs a Lipschitz bound for G");
            // t^{i-1} max(1, |q_{i-1}|) <= max(1, a |x|) / t along the walk, so
            // this beta keeps the modeled sum within the allowance
            const double weight = a * a * b * lip_g / t * std::max(1.0, a * sup_norm(pt.x)) *
                                  depth * (depth + 1) / 2.0;
            beta = orbit_allowance > 0.0 ? orbit_allowance / weight : 1e-14;
        }
        std::vector<Vector> coeffs;
        coeffs.reserve(static_cast<std::size_t>(depth));
        TorusPoint back = pt;
        double orbit_accum = 0.0;
        for (int i = 1; i <= depth; ++i) {
            if (mode == OrbitMode::powers) {
                back = torus_T_inverse(op, back, p);
            } else {
                const double local_scale = std::max(1.0, sup_norm(back.x));
                double tol_i = lip_g > 0.0 ? std::max(beta, 1e-14) * local_scale
                                           : 1e-12 * local_scale;
                back = torus_S_inverse(op, maps, back, tol_i);
                if (lip_g > 0.0)
                    orbit_accum += (depth - i + 1) * std::pow(t, i - 1) * tol_i;
            }
            coeffs.push_back(op.project_stable(g.eval(back).x));
        }
        if (mode == OrbitMode::perturbed && lip_g > 0.0)
            out.orbit_bound += a * a * b * lip_g * orbit_accum;
        // Horner: sum_k T^k c_k = c_0 + T(c_1 + T(...)). Every partial sum lies
        // in M; re-projecting keeps round-off out of the expanding complement.
        Vector acc = coeffs.back();
        for (int k = depth - 2; k >= 0; --k)
            acc = add(coeffs[static_cast<std::size_t>(k)], op.project_stable(op.apply(acc)));
        out.stable_sum = std::move(acc);
        out.tail_bound += a * b * std::pow(t, depth) / (1.0 - t) * g.sup_bound;
    }

    if (op.has_unstable()) {
        // Forward orbit r_i = R^i(pt), i = 0..K-1; term k uses r_{k-1}. Exact in
        // both modes: the perturbed product is applied directly, never inverted.
        std::vector<Vector> coeffs;
        coeffs.reserve(static_cast<std::size_t>(depth));
        TorusPoint fwd = pt;
        for (int k = 1; k <= depth; ++k) {
            coeffs.push_back(op.project_unstable(g.eval(fwd).x));
            if (k < depth)
                fwd = mode == OrbitMode::powers ? torus_T(op, fwd, p) : torus_S(op, maps, fwd);
        }
        // Horner: sum_{k=1..K} T^{-k} d_k = T^{-1}(d_1 + T^{-1}(d_2 + ...)).
        // Partial sums live in N; re-projection again controls round-off.
        Vector acc = coeffs.back();
        for (int k = depth - 2; k >= 0; --k)
            acc = add(coeffs[static_cast<std::size_t>(k)],
                      op.project_unstable(op.apply_inverse(acc)));
        out.unstable_sum = op.project_unstable(op.apply_inverse(acc));
        out.tail_bound += a * b * std::pow(t, depth + 1) / (1.0 - t) * g.sup_bound;
    }

    out.value = subtract(out.stable_sum, out.unstable_sum);
    return out;
}

enum class PhiKind {
    full,     // Phi_1(F)(x,j) = Lbar((x,j) + F(x,j))
    reduced,  // Phi_2 = Phi_1 - Lbar
};

/// Apply Phi to a fiber-preserving element at a point. The result advances the
/// fiber; its Lipschitz constant on the function space is max_j Lip(L_j).
inline TorusPoint phi_apply(PhiKind which, const PerturbationTuple& maps, const FunElem& f,
                            const TorusPoint& pt) {
    if (f.space != FiberSpace::preserving)
        throw std::invalid_argument("Phi applies to fiber-preserving elements");
    const TorusPoint shifted{add(pt.x, f.fiber_value(pt.x, pt.fiber)), pt.fiber};
    TorusPoint out = lbar_eval(maps, shifted);
    if (which == PhiKind::reduced) out.x = subtract(out.x, maps.map(pt.fiber).eval(pt.x));
    return out;
}

// ---------------------------------------------------------------------------
// Defect evaluators. Forward mode realizes the Picard iterate U_m lazily: one
// evaluation at (x, j) triggers at most 2K evaluations of U_{m-1} along the
// orbit of (x, j), so the recursion is memoized on the exact key
// (depth, fiber, point). Inverse mode is a single series application.
// ---------------------------------------------------------------------------
class DefectEvaluator {
public:
    enum class Mode { forward, inverse };

    DefectEvaluator(SplitOperator op, HyperbolicityCertificate cert, PerturbationTuple maps,
                    ErrorBudget budget, Mode mode,
                    std::shared_ptr<MemoCache> cache = std::make_shared<MemoCache>())
        : op_(std::move(op)),
          cert_(cert),
          maps_(std::move(maps)),
          budget_(budget),
          mode_(mode),
          cache_(std::move(cache)) {}

    /// u_j(x) (forward) or v_j(x) (inverse). `certified`, when non-null,
    /// receives the per-evaluation certified error.
    Vector eval(const Vector& x, int fiber, double* certified = nullptr) const {
        if (mode_ == Mode::forward) {
            if (certified) *certified = budget_.certified_error;
            return forward_iterate(budget_.iterations, x, fiber);
        }
        if (maps_.zero_bound()) {
            if (certified) *certified = 0.0;
            return Vector::zero_like(x);
        }
        const SeriesTerms st =
            psi_inverse_apply(op_, cert_, maps_, OrbitMode::perturbed, lbar_elem(maps_),
                              {x, mod_fiber(fiber, maps_.period())}, budget_.truncation_depth,
                              budget_.orbit_tol);
        if (certified) *certified = st.tail_bound + st.orbit_bound;
        return scale(-1.0, st.value);
    }

    /// Forward Picard iterate at an explicit depth (convergence-rate probes).
    Vector iterate(const Vector& x, int fiber, int depth) const {
        return forward_iterate(depth, x, fiber);
    }

    /// |defect|_inf <= C * max_j sup L_j in both modes.
    double defect_sup_bound() const { return franks_constant(cert_) * maps_.max_sup(); }

    const ErrorBudget& budget() const { return budget_; }
    Mode mode() const { return mode_; }
    const SplitOperator& op() const { return op_; }
    const PerturbationTuple& maps() const { return maps_; }

    void clear_cache() {
        if (cache_) cache_->clear();
    }

    std::size_t cache_size() const { return cache_ ? cache_->size() : 0; }

private:
    Vector forward_iterate(int depth, const Vector& x, int fiber) const {
        if (depth <= 0 || maps_.zero_bound()) return Vector::zero_like(x);
        fiber = mod_fiber(fiber, maps_.period());
        std::string key;
        if (cache_) {
            key = MemoCache::key(depth, fiber, x);
            if (auto hit = cache_->find(key)) return *hit;
        }
        FunElem g{FiberSpace::advancing, maps_.period(),
                  [this, depth](const Vector& y, int i) {
                      const Vector u_prev = forward_iterate(depth - 1, y, i);
                      return maps_.map(i).eval(add(y, u_prev));
                  },
                  maps_.max_sup(), std::nullopt};
        const SeriesTerms st = psi_inverse_apply(op_, cert_, maps_, OrbitMode::powers, g,
                                                 {x, fiber}, budget_.truncation_depth);
        if (cache_) cache_->store(key, st.value);
        return st.value;
    }

    SplitOperator op_;
    HyperbolicityCertificate cert_;
    PerturbationTuple maps_;
    ErrorBudget budget_;
    Mode mode_;
    std::shared_ptr<MemoCache> cache_;
};

inline Vector solve_forward_defect(const SplitOperator& op, const HyperbolicityCertificate& cert,
                                   const PerturbationTuple& maps, const TorusPoint& pt,
                                   const ErrorBudget& budget,
                                   std::shared_ptr<MemoCache> cache = nullptr,
                                   double* certified = nullptr) {
    DefectEvaluator ev(op, cert, maps, budget, DefectEvaluator::Mode::forward,
                       cache ? std::move(cache) : std::make_shared<MemoCache>());
    return ev.eval(pt.x, pt.fiber, certified);
}

inline Vector solve_inverse_defect(const SplitOperator& op, const HyperbolicityCertificate& cert,
                                   const PerturbationTuple& maps, const TorusPoint& pt,
                                   const ErrorBudget& budget, double* certified = nullptr) {
    DefectEvaluator ev(op, cert, maps, budget, DefectEvaluator::Mode::inverse, nullptr);
    return ev.eval(pt.x, pt.fiber, certified);
}

/// h(x) = x + u_0(x), with certified error at most tau.
inline Vector conjugacy_h(const SplitOperator& op, const HyperbolicityCertificate& cert,
                          const PerturbationTuple& maps, const Vector& x, double tau,
                          const BudgetCaps& caps = {}, std::shared_ptr<MemoCache> cache = nullptr,
                          double* certified = nullptr) {
    const ErrorBudget budget = plan_forward_budget(op, cert, maps, tau, caps);
    return add(x, solve_forward_defect(op, cert, maps, {x, 0}, budget, std::move(cache), certified));
}

/// h^{-1}(x) = x + v_0(x), with certified error at most tau.
inline Vector conjugacy_h_inverse(const SplitOperator& op, const HyperbolicityCertificate& cert,
                                  const PerturbationTuple& maps, const Vector& x, double tau,
                                  const BudgetCaps& caps = {}, double* certified = nullptr) {
    const ErrorBudget budget = plan_inverse_budget(op, cert, maps, tau, caps);
    return add(x, solve_inverse_defect(op, cert, maps, {x, 0}, budget, certified));
}

} // namespace conjulab
