#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "conjulab/errors.hpp"
#include "conjulab/operators.hpp"
#include "conjulab/vectorspace.hpp"

namespace conjulab {

struct MapNode;

// ---------------------------------------------------------------------------
// Bounded Lipschitz maps with bounds certified by construction. Primitives
// carry exact sup/Lipschitz constants; combinators propagate upper bounds by
// the usual calculus. Sampling can falsify a bound but never certify one,
// which is why the algebra, not estimation, produces the numbers.
// ---------------------------------------------------------------------------
class LipMap {
public:
    LipMap() = default;

    Vector eval(const Vector& x) const;

    double sup_bound() const { return sup_bound_; }
    double lip_bound() const { return lip_bound_; }
    bool is_zero_bound() const { return sup_bound_ == 0.0 && lip_bound_ == 0.0; }
    const MapNode& node() const;

    /// x -> c.
    static LipMap constant(Vector offset);
    /// x -> A sin(w * x_read) e_write. On sparse vectors this reads exactly
    /// one declared index and writes exactly one, preserving finite support.
    static LipMap sine(std::int64_t read_index, std::int64_t write_index, double amplitude,
                       double frequency);
    /// x -> B clamp(x, radius), componentwise clamp; dense family only.
    static LipMap clamp_linear(Eigen::MatrixXd gain, double radius);
    static LipMap sum(std::vector<LipMap> terms);
    static LipMap scaled(double factor, LipMap inner);
    /// outer composed with (identity + inner): x -> outer(x + inner(x)).
    static LipMap composed(LipMap outer, LipMap inner);

private:
    std::shared_ptr<const MapNode> node_;
    double sup_bound_ = 0.0;
    double lip_bound_ = 0.0;
};

struct ConstantMap {
    Vector offset;
};

struct SineMap {
    std::int64_t read_index = 0;
    std::int64_t write_index = 0;
    double amplitude = 0.0;
    double frequency = 0.0;
};

struct ClampLinearMap {
    Eigen::MatrixXd gain;
    double radius = 0.0;
    double gain_norm = 0.0;  // max row sum, exact
};

struct SumMap {
    std::vector<LipMap> terms;
};

struct ScaleMap {
    double factor = 0.0;
    LipMap inner;
};

struct ComposeMap {
    LipMap outer;
    LipMap inner;
};

struct MapNode {
    std::variant<ConstantMap, SineMap, ClampLinearMap, SumMap, ScaleMap, ComposeMap> kind;
};

inline const MapNode& LipMap::node() const {
    if (!node_) throw std::invalid_argument("empty perturbation map");
    return *node_;
}

inline LipMap LipMap::constant(Vector offset) {
    LipMap m;
    m.sup_bound_ = sup_norm(offset);
    m.lip_bound_ = 0.0;
    m.node_ = std::make_shared<MapNode>(MapNode{ConstantMap{std::move(offset)}});
    return m;
}

inline LipMap LipMap::sine(std::int64_t read_index, std::int64_t write_index, double amplitude,
                           double frequency) {
    if (!std::isfinite(amplitude) || !std::isfinite(frequency))
        throw std::invalid_argument("sine map parameters must be finite");
    LipMap m;
    m.sup_bound_ = std::abs(amplitude);
    m.lip_bound_ = std::abs(amplitude * frequency);
    m.node_ = std::make_shared<MapNode>(MapNode{SineMap{read_index, write_index, amplitude, frequency}});
    return m;
}

inline LipMap LipMap::clamp_linear(Eigen::MatrixXd gain, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("clamp radius must be positive");
    if (gain.rows() != gain.cols()) throw std::invalid_argument("clamp gain must be square");
    ClampLinearMap node{std::move(gain), radius, 0.0};
    node.gain_norm = detail::max_row_sum(node.gain);
    LipMap m;
    m.sup_bound_ = node.gain_norm * radius;
    m.lip_bound_ = node.gain_norm;
    m.node_ = std::make_shared<MapNode>(MapNode{std::move(node)});
    return m;
}

inline LipMap LipMap::sum(std::vector<LipMap> terms) {
    if (terms.empty()) throw std::invalid_argument("sum needs at least one term");
    LipMap m;
    for (const auto& t : terms) {
        m.sup_bound_ += t.sup_bound();
        m.lip_bound_ += t.lip_bound();
    }
    m.node_ = std::make_shared<MapNode>(MapNode{SumMap{std::move(terms)}});
    return m;
}

inline LipMap LipMap::scaled(double factor, LipMap inner) {
    if (!std::isfinite(factor)) throw std::invalid_argument("scale factor must be finite");
    LipMap m;
    m.sup_bound_ = std::abs(factor) * inner.sup_bound();
    m.lip_bound_ = std::abs(factor) * inner.lip_bound();
    m.node_ = std::make_shared<MapNode>(MapNode{ScaleMap{factor, std::move(inner)}});
    return m;
}

inline LipMap LipMap::composed(LipMap outer, LipMap inner) {
    LipMap m;
    // sup(f o (I+g)) <= sup f;  lip(f o (I+g)) <= lip f * (1 + lip g)
    m.sup_bound_ = outer.sup_bound();
    m.lip_bound_ = outer.lip_bound() * (1.0 + inner.lip_bound());
    m.node_ = std::make_shared<MapNode>(MapNode{ComposeMap{std::move(outer), std::move(inner)}});
    return m;
}

inline Vector LipMap::eval(const Vector& x) const {
    const MapNode& n = node();
    if (const auto* c = std::get_if<ConstantMap>(&n.kind)) {
        if (!c->offset.compatible_with(x))
            throw std::invalid_argument("constant map offset is incompatible with the input space");
        return c->offset;
    }
    if (const auto* s = std::get_if<SineMap>(&n.kind)) {
        // an orbit argument can overflow the exponent range; any value in
        // [-A, A] is admissible there and 0 keeps the walk finite
        const double phase = s->frequency * x.get(s->read_index);
        const double v = std::isfinite(phase) ? s->amplitude * std::sin(phase) : 0.0;
        if (x.is_dense()) {
            std::vector<double> out(x.dense_values().size(), 0.0);
            if (s->write_index < 0 || static_cast<std::size_t>(s->write_index) >= out.size())
                throw std::out_of_range("sine map write index out of range");
            out[static_cast<std::size_t>(s->write_index)] = v;
            return Vector::dense(std::move(out));
        }
        return Vector::sparse({{s->write_index, v}});
    }
    if (const auto* cl = std::get_if<ClampLinearMap>(&n.kind)) {
        if (!x.is_dense()) throw std::invalid_argument("clamped linear maps act on the dense family");
        const auto& vals = x.dense_values();
        if (static_cast<Eigen::Index>(vals.size()) != cl->gain.rows())
            throw std::invalid_argument("clamped linear map dimension mismatch");
        Eigen::VectorXd clamped(cl->gain.rows());
        for (std::size_t i = 0; i < vals.size(); ++i)
            clamped[static_cast<Eigen::Index>(i)] = std::clamp(vals[i], -cl->radius, cl->radius);
        return detail::from_eigen(cl->gain * clamped);
    }
    if (const auto* s = std::get_if<SumMap>(&n.kind)) {
        Vector acc = s->terms.front().eval(x);
        for (std::size_t i = 1; i < s->terms.size(); ++i) acc = add(acc, s->terms[i].eval(x));
        return acc;
    }
    if (const auto* s = std::get_if<ScaleMap>(&n.kind)) return scale(s->factor, s->inner.eval(x));
    const auto& c = std::get<ComposeMap>(n.kind);
    return c.outer.eval(add(x, c.inner.eval(x)));
}

// ---------------------------------------------------------------------------
// Ordered tuples (L_0, ..., L_{p-1}). Admissibility mode A constrains only the
// Lipschitz bounds; mode B additionally constrains the sup bounds. The checks
// are strict with a relative safety margin, since equality at the threshold is
// meaningless in floating point.
// ---------------------------------------------------------------------------
class PerturbationTuple {
public:
    PerturbationTuple() = default;

    explicit PerturbationTuple(std::vector<LipMap> maps) : maps_(std::move(maps)) {
        if (maps_.empty()) throw std::invalid_argument("a perturbation tuple needs p >= 1 maps");
    }

    int period() const { return static_cast<int>(maps_.size()); }
    const LipMap& map(int j) const { return maps_.at(static_cast<std::size_t>(j)); }
    const std::vector<LipMap>& maps() const { return maps_; }

    double max_sup() const {
        double m = 0.0;
        for (const auto& l : maps_) m = std::max(m, l.sup_bound());
        return m;
    }

    double max_lip() const {
        double m = 0.0;
        for (const auto& l : maps_) m = std::max(m, l.lip_bound());
        return m;
    }

    bool zero_bound() const { return max_sup() == 0.0 && max_lip() == 0.0; }

    static constexpr double kStrictMargin = 1e-12;

    bool admissible(char mode, double eps) const {
        const double cutoff = eps * (1.0 - kStrictMargin);
        if (!(max_lip() < cutoff)) return false;
        if (mode == 'B' && !(max_sup() < cutoff)) return false;
        return true;
    }

    void require_admissible(char mode, double eps) const {
        if (admissible(mode, eps)) return;
        throw admissibility_error(std::string("perturbation tuple is not admissible in mode ") +
                                  mode + ": max Lip = " + std::to_string(max_lip()) +
                                  ", max sup = " + std::to_string(max_sup()) +
                                  ", eps = " + std::to_string(eps));
    }

private:
    std::vector<LipMap> maps_;
};

// ---------------------------------------------------------------------------
// Distance between tuples: max_j ||L_j - L'_j||_inf. Structural recursion on
// matched descriptor trees gives exact or certified upper bounds; unmatched
// shapes fall back to the trivial bound sup + sup' and the result is flagged
// as carrying only a sampled lower bound for the true sup.
// ---------------------------------------------------------------------------
struct DistanceBound {
    double upper = 0.0;
    bool exact = false;
};

inline std::optional<DistanceBound> structural_map_distance(const LipMap& f, const LipMap& g) {
    const MapNode& a = f.node();
    const MapNode& b = g.node();
    if (a.kind.index() != b.kind.index()) return std::nullopt;
    if (const auto* ca = std::get_if<ConstantMap>(&a.kind)) {
        const auto& cb = std::get<ConstantMap>(b.kind);
        if (!ca->offset.compatible_with(cb.offset)) return std::nullopt;
        return DistanceBound{distance(ca->offset, cb.offset), true};
    }
    if (const auto* sa = std::get_if<SineMap>(&a.kind)) {
        const auto& sb = std::get<SineMap>(b.kind);
        if (sa->read_index != sb.read_index || sa->write_index != sb.write_index ||
            sa->frequency != sb.frequency)
            return std::nullopt;
        return DistanceBound{std::abs(sa->amplitude - sb.amplitude), true};
    }
    if (const auto* la = std::get_if<ClampLinearMap>(&a.kind)) {
        const auto& lb = std::get<ClampLinearMap>(b.kind);
        if (la->radius != lb.radius || la->gain.rows() != lb.gain.rows()) return std::nullopt;
        // sup over x of ||(B - B') clamp(x)|| is attained at a corner of the box
        return DistanceBound{detail::max_row_sum(la->gain - lb.gain) * la->radius, true};
    }
    if (const auto* ma = std::get_if<SumMap>(&a.kind)) {
        const auto& mb = std::get<SumMap>(b.kind);
        if (ma->terms.size() != mb.terms.size()) return std::nullopt;
        DistanceBound out{0.0, ma->terms.size() == 1};
        for (std::size_t i = 0; i < ma->terms.size(); ++i) {
            auto d = structural_map_distance(ma->terms[i], mb.terms[i]);
            if (!d) return std::nullopt;
            out.upper += d->upper;
            out.exact = out.exact && d->exact;
        }
        return out;
    }
    if (const auto* ma = std::get_if<ScaleMap>(&a.kind)) {
        const auto& mb = std::get<ScaleMap>(b.kind);
        auto d = structural_map_distance(ma->inner, mb.inner);
        if (!d) return std::nullopt;
        if (ma->factor == mb.factor)
            return DistanceBound{std::abs(ma->factor) * d->upper, d->exact};
        return DistanceBound{std::abs(ma->factor - mb.factor) * mb.inner.sup_bound() +
                                 std::abs(ma->factor) * d->upper,
                             false};
    }
    const auto& ca = std::get<ComposeMap>(a.kind);
    const auto& cb = std::get<ComposeMap>(b.kind);
    auto douter = structural_map_distance(ca.outer, cb.outer);
    auto dinner = structural_map_distance(ca.inner, cb.inner);
    if (!douter || !dinner) return std::nullopt;
    return DistanceBound{douter->upper + cb.outer.lip_bound() * dinner->upper, false};
}

struct TupleDistance {
    double upper = 0.0;          // certified upper bound for max_j ||L_j - L'_j||_inf
    double lower_sampled = 0.0;  // largest pointwise difference seen on the probe set
    bool sampled = false;        // true when some pair fell back to the trivial bound
    bool exact = false;          // true when every pair had an exact structural distance
};

inline TupleDistance tuple_distance(const PerturbationTuple& a, const PerturbationTuple& b,
                                    std::span<const Vector> probes = {}) {
    if (a.period() != b.period())
        throw std::invalid_argument("tuple distance requires equal tuple lengths");
    TupleDistance out;
    out.exact = true;
    for (int j = 0; j < a.period(); ++j) {
        const LipMap& f = a.map(j);
        const LipMap& g = b.map(j);
        if (auto d = structural_map_distance(f, g)) {
            out.upper = std::max(out.upper, d->upper);
            out.exact = out.exact && d->exact;
        } else {
            out.upper = std::max(out.upper, f.sup_bound() + g.sup_bound());
            out.sampled = true;
            out.exact = false;
        }
        for (const Vector& x : probes)
            out.lower_sampled = std::max(out.lower_sampled, distance(f.eval(x), g.eval(x)));
    }
    return out;
}

/// (T + L)(x).
inline Vector apply_perturbed(const SplitOperator& op, const LipMap& L, const Vector& x) {
    return add(op.apply(x), L.eval(x));
}

/// Solve (T + L)(x) = y by the contraction x -> T^{-1}(y - L(x)); the returned
/// x satisfies ||(T+L)(x) - y|| <= tol. The iteration count comes from the
/// a-priori bound q^k/(1-q) * ||x_1 - x_0|| with q = ||T^{-1}|| Lip(L).
inline Vector invert_perturbed(const SplitOperator& op, const LipMap& L, const Vector& y,
                               double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("inversion tolerance must be positive");
    if (!op.invertible())
        throw admissibility_error("perturbed map not certifiably invertible: operator has no inverse");
    const double q = op.inverse_norm() * L.lip_bound();
    if (!(q < 1.0))
        throw admissibility_error(
            "perturbed map not certifiably invertible: ||T^{-1}|| * Lip(L) >= 1");

    auto step = [&](const Vector& x) { return op.apply_inverse(subtract(y, L.eval(x))); };

    Vector x = op.apply_inverse(y);
    Vector x1 = step(x);
    const double first_step = distance(x1, x);
    x = std::move(x1);

    std::size_t planned = 1;
    if (first_step > 0.0 && q > 0.0) {
        const double k = std::ceil(std::log(tol * (1.0 - q) / first_step) / std::log(q));
        if (k > 1.0) planned = static_cast<std::size_t>(k);
    }
    for (std::size_t i = 1; i < planned; ++i) x = step(x);

    // The a-priori count bounds the distance to the fixed point; the contract
    // is on the residual, so verify and top up if round-off left us short.
    const std::size_t cap = planned + 64;
    std::size_t done = planned;
    while (sup_norm(subtract(apply_perturbed(op, L, x), y)) > tol) {
        if (++done > cap)
            throw budget_error("perturbed inversion failed to reach the requested tolerance");
        x = step(x);
    }
    return x;
}

} // namespace conjulab
