#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "conjulab/errors.hpp"
#include "conjulab/vectorspace.hpp"

namespace conjulab {

// ---------------------------------------------------------------------------
// Concrete invertible operators with an invariant splitting X = M (+) N,
// where T contracts forward on M and T^{-1} contracts forward on N.
// Three models:
//   diagonal       - T(x)_i = w_i x_i on R^n, split by |w_i| <> 1
//   block          - T = P diag(A_M, A_N) P^{-1}, split by the P-blocks
//   weighted shift - T(x)_n = w_n x_{n-1} on finitely supported sequences,
//                    two-level weights (|w| > 1 up to a split index, < 1 after)
// The shift realizes the class that splits but is not hyperbolic:
// M and T(N) overlap in the basis vector at the split index.
// ---------------------------------------------------------------------------

namespace detail {

inline double max_row_sum(const Eigen::MatrixXd& m) {
    double best = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) best = std::max(best, m.row(r).cwiseAbs().sum());
    return best;
}

inline Eigen::VectorXd to_eigen(const Vector& v) {
    const auto& vals = v.dense_values();
    Eigen::VectorXd e(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) e[static_cast<Eigen::Index>(i)] = vals[i];
    return e;
}

inline Vector from_eigen(const Eigen::VectorXd& e) {
    std::vector<double> vals(static_cast<std::size_t>(e.size()));
    for (Eigen::Index i = 0; i < e.size(); ++i) vals[static_cast<std::size_t>(i)] = e[i];
    return Vector::dense(std::move(vals));
}

} // namespace detail

struct DiagonalModel {
    std::vector<double> weights;
};

struct BlockModel {
    Eigen::MatrixXd basis;           // P
    Eigen::MatrixXd basis_inv;       // P^{-1}
    Eigen::MatrixXd stable_block;    // A_M (may be 0x0)
    Eigen::MatrixXd unstable_block;  // A_N (may be 0x0)
    Eigen::MatrixXd unstable_inv;    // A_N^{-1}
    Eigen::MatrixXd forward;         // T
    Eigen::MatrixXd inverse;         // T^{-1}; meaningful only if invertible
    Eigen::MatrixXd proj_stable;     // P diag(I,0) P^{-1}
    Eigen::MatrixXd proj_unstable;   // P diag(0,I) P^{-1}
    bool invertible = true;
};

struct ShiftModel {
    double lambda_minus = 2.0;  // weight for index <= split_index, |.| > 1
    double lambda_plus = 0.5;   // weight for index  > split_index, |.| < 1
    std::int64_t split_index = 0;

    double weight(std::int64_t n) const { return n <= split_index ? lambda_minus : lambda_plus; }
};

class SplitOperator {
public:
    using Model = std::variant<DiagonalModel, BlockModel, ShiftModel>;

    Vector::Family family() const {
        return std::holds_alternative<ShiftModel>(model_) ? Vector::Family::sparse_bilateral
                                                          : Vector::Family::dense;
    }

    /// False exactly for the weighted shift, whose splitting overlaps under T.
    bool hyperbolic() const { return !std::holds_alternative<ShiftModel>(model_); }

    bool invertible() const {
        if (const auto* b = std::get_if<BlockModel>(&model_)) return b->invertible;
        return true;
    }

    bool has_stable() const {
        if (const auto* d = std::get_if<DiagonalModel>(&model_)) {
            for (double w : d->weights)
                if (std::abs(w) < 1.0) return true;
            return false;
        }
        if (const auto* b = std::get_if<BlockModel>(&model_)) return b->stable_block.rows() > 0;
        return true;
    }

    bool has_unstable() const {
        if (const auto* d = std::get_if<DiagonalModel>(&model_)) {
            for (double w : d->weights)
                if (std::abs(w) > 1.0) return true;
            return false;
        }
        if (const auto* b = std::get_if<BlockModel>(&model_)) return b->unstable_block.rows() > 0;
        return true;
    }

    Vector apply(const Vector& x) const {
        check_family(x);
        if (const auto* d = std::get_if<DiagonalModel>(&model_)) {
            std::vector<double> out(x.dense_values());
            for (std::size_t i = 0; i < out.size(); ++i) out[i] *= d->weights[i];
            return Vector::dense(std::move(out));
        }
        if (const auto* b = std::get_if<BlockModel>(&model_))
            return detail::from_eigen(b->forward * detail::to_eigen(x));
        const auto& s = std::get<ShiftModel>(model_);
        std::map<std::int64_t, double> out;
        for (const auto& [n, v] : x.sparse_entries()) out[n + 1] = s.weight(n + 1) * v;
        return Vector::sparse(std::move(out));
    }

    Vector apply_inverse(const Vector& x) const {
        check_family(x);
        if (const auto* d = std::get_if<DiagonalModel>(&model_)) {
            std::vector<double> out(x.dense_values());
            for (std::size_t i = 0; i < out.size(); ++i) out[i] /= d->weights[i];
            return Vector::dense(std::move(out));
        }
        if (const auto* b = std::get_if<BlockModel>(&model_)) {
            if (!b->invertible)
                throw certification_error("block operator has a singular stable block; no inverse");
            return detail::from_eigen(b->inverse * detail::to_eigen(x));
        }
        const auto& s = std::get<ShiftModel>(model_);
        std::map<std::int64_t, double> out;
        for (const auto& [n, v] : x.sparse_entries()) out[n - 1] = v / s.weight(n);
        return Vector::sparse(std::move(out));
    }

    /// Projection onto M along N.
    Vector project_stable(const Vector& x) const {
        check_family(x);
        if (const auto* d = std::get_if<DiagonalModel>(&model_)) {
            std::vector<double> out(x.dense_values());
            for (std::size_t i = 0; i < out.size(); ++i)
                if (std::abs(d->weights[i]) > 1.0) out[i] = 0.0;
            return Vector::dense(std::move(out));
        }
        if (const auto* b = std::get_if<BlockModel>(&model_))
            return detail::from_eigen(b->proj_stable * detail::to_eigen(x));
        const auto& s = std::get<ShiftModel>(model_);
        std::map<std::int64_t, double> out;
        for (const auto& [n, v] : x.sparse_entries())
            if (n >= s.split_index) out[n] = v;
        return Vector::sparse(std::move(out));
    }

    /// Projection onto N along M.
    Vector project_unstable(const Vector& x) const {
        check_family(x);
        if (const auto* d = std::get_if<DiagonalModel>(&model_)) {
            std::vector<double> out(x.dense_values());
            for (std::size_t i = 0; i < out.size(); ++i)
                if (std::abs(d->weights[i]) < 1.0) out[i] = 0.0;
            return Vector::dense(std::move(out));
        }
        if (const auto* b = std::get_if<BlockModel>(&model_))
            return detail::from_eigen(b->proj_unstable * detail::to_eigen(x));
        const auto& s = std::get<ShiftModel>(model_);
        std::map<std::int64_t, double> out;
        for (const auto& [n, v] : x.sparse_entries())
            if (n < s.split_index) out[n] = v;
        return Vector::sparse(std::move(out));
    }

    /// ||T||, exact (max |weight| / max row sum).
    double operator_norm() const {
        if (const auto* d = std::get_if<DiagonalModel>(&model_)) {
            double m = 0.0;
            for (double w : d->weights) m = std::max(m, std::abs(w));
            return m;
        }
        if (const auto* b = std::get_if<BlockModel>(&model_)) return detail::max_row_sum(b->forward);
        const auto& s = std::get<ShiftModel>(model_);
        return std::max(std::abs(s.lambda_minus), std::abs(s.lambda_plus));
    }

    /// ||T^{-1}||, exact; +inf when the operator is not invertible.
    double inverse_norm() const {
        if (const auto* d = std::get_if<DiagonalModel>(&model_)) {
            double m = 0.0;
            for (double w : d->weights) m = std::max(m, 1.0 / std::abs(w));
            return m;
        }
        if (const auto* b = std::get_if<BlockModel>(&model_)) {
            if (!b->invertible) return std::numeric_limits<double>::infinity();
            return detail::max_row_sum(b->inverse);
        }
        const auto& s = std::get<ShiftModel>(model_);
        return std::max(1.0 / std::abs(s.lambda_minus), 1.0 / std::abs(s.lambda_plus));
    }

    double stable_projection_norm() const {
        if (std::holds_alternative<BlockModel>(model_))
            return detail::max_row_sum(std::get<BlockModel>(model_).proj_stable);
        return has_stable() ? 1.0 : 0.0;
    }

    double unstable_projection_norm() const {
        if (std::holds_alternative<BlockModel>(model_))
            return detail::max_row_sum(std::get<BlockModel>(model_).proj_unstable);
        return has_unstable() ? 1.0 : 0.0;
    }

    /// Certified upper bounds on ||T^n restricted to M|| and ||T^{-n} restricted
    /// to N|| for n = 0..up_to, measured in the ambient sup norm. Exact for the
    /// diagonal and shift models; exact row sums of the embedded block powers
    /// otherwise. A trivial subspace reports 0 at every n.
    std::pair<std::vector<double>, std::vector<double>> restricted_power_norms(int up_to) const {
        std::vector<double> cm(static_cast<std::size_t>(up_to) + 1, 0.0);
        std::vector<double> cn(static_cast<std::size_t>(up_to) + 1, 0.0);
        if (const auto* d = std::get_if<DiagonalModel>(&model_)) {
            double tm = 0.0, tn = 0.0;
            bool sm = false, sn = false;
            for (double w : d->weights) {
                if (std::abs(w) < 1.0) { sm = true; tm = std::max(tm, std::abs(w)); }
                if (std::abs(w) > 1.0) { sn = true; tn = std::max(tn, 1.0 / std::abs(w)); }
            }
            for (int n = 0; n <= up_to; ++n) {
                if (sm) cm[static_cast<std::size_t>(n)] = std::pow(tm, n);
                if (sn) cn[static_cast<std::size_t>(n)] = std::pow(tn, n);
            }
            return {cm, cn};
        }
        if (const auto* b = std::get_if<BlockModel>(&model_)) {
            const Eigen::Index dm = b->stable_block.rows();
            const Eigen::Index dn = b->unstable_block.rows();
            Eigen::MatrixXd em = b->basis.leftCols(dm);        // embeds M-coordinates
            Eigen::MatrixXd rm = b->basis_inv.topRows(dm);     // reads M-coordinates
            Eigen::MatrixXd en = b->basis.rightCols(dn);
            Eigen::MatrixXd rn = b->basis_inv.bottomRows(dn);
            Eigen::MatrixXd pm = Eigen::MatrixXd::Identity(dm, dm);
            Eigen::MatrixXd pn = Eigen::MatrixXd::Identity(dn, dn);
            if (dm > 0) cm[0] = 1.0;
            if (dn > 0) cn[0] = 1.0;
            for (int n = 1; n <= up_to; ++n) {
                if (dm > 0) {
                    pm = b->stable_block * pm;
                    cm[static_cast<std::size_t>(n)] = detail::max_row_sum(em * pm * rm);
                }
                if (dn > 0) {
                    pn = b->unstable_inv * pn;
                    cn[static_cast<std::size_t>(n)] = detail::max_row_sum(en * pn * rn);
                }
            }
            return {cm, cn};
        }
        const auto& s = std::get<ShiftModel>(model_);
        // On M every forward step multiplies by the post-split weight; on N
        // every backward step divides by the pre-split weight.
        for (int n = 0; n <= up_to; ++n) {
            cm[static_cast<std::size_t>(n)] = std::pow(std::abs(s.lambda_plus), n);
            cn[static_cast<std::size_t>(n)] = std::pow(1.0 / std::abs(s.lambda_minus), n);
        }
        return {cm, cn};
    }

    const Model& model() const { return model_; }

    std::string describe() const {
        if (std::holds_alternative<DiagonalModel>(model_)) return "diagonal";
        if (std::holds_alternative<BlockModel>(model_)) return "block";
        return "shift";
    }

    static SplitOperator with_model(Model m) {
        SplitOperator op;
        op.model_ = std::move(m);
        return op;
    }

private:
    void check_family(const Vector& x) const {
        if (x.family() != family())
            throw std::invalid_argument("vector family does not match the operator's space");
    }

    Model model_;
};

inline SplitOperator make_diagonal_operator(const std::vector<double>& weights) {
    if (weights.empty()) throw std::invalid_argument("diagonal operator needs at least one weight");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!std::isfinite(weights[i]) || weights[i] == 0.0)
            throw std::invalid_argument("diagonal weights must be finite and nonzero");
        if (std::abs(weights[i]) == 1.0)
            throw certification_error("not hyperbolic on coordinate " + std::to_string(i));
    }
    return SplitOperator::with_model(DiagonalModel{weights});
}

inline SplitOperator make_block_operator(const Eigen::MatrixXd& basis_change,
                                         const Eigen::MatrixXd& stable_block,
                                         const Eigen::MatrixXd& unstable_block) {
    const Eigen::Index dm = stable_block.rows();
    const Eigen::Index dn = unstable_block.rows();
    if (stable_block.cols() != dm || unstable_block.cols() != dn)
        throw std::invalid_argument("diagonal blocks must be square");
    const Eigen::Index dim = dm + dn;
    if (dim == 0) throw std::invalid_argument("block operator needs a nonempty space");
    if (basis_change.rows() != dim || basis_change.cols() != dim)
        throw std::invalid_argument("basis change must be square of matching dimension");

    Eigen::FullPivLU<Eigen::MatrixXd> plu(basis_change);
    if (!plu.isInvertible()) throw certification_error("singular basis change");

    BlockModel b;
    b.basis = basis_change;
    b.basis_inv = plu.inverse();
    b.stable_block = stable_block;
    b.unstable_block = unstable_block;

    Eigen::FullPivLU<Eigen::MatrixXd> nlu(unstable_block);
    if (dn > 0 && !nlu.isInvertible())
        throw certification_error("unstable block is singular; backward contraction undefined");
    b.unstable_inv = dn > 0 ? Eigen::MatrixXd(nlu.inverse()) : Eigen::MatrixXd(0, 0);

    Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(dim, dim);
    diag.topLeftCorner(dm, dm) = stable_block;
    diag.bottomRightCorner(dn, dn) = unstable_block;
    b.forward = b.basis * diag * b.basis_inv;

    Eigen::FullPivLU<Eigen::MatrixXd> mlu(stable_block);
    b.invertible = dm == 0 || mlu.isInvertible();
    if (b.invertible) {
        Eigen::MatrixXd diag_inv = Eigen::MatrixXd::Zero(dim, dim);
        if (dm > 0) diag_inv.topLeftCorner(dm, dm) = mlu.inverse();
        if (dn > 0) diag_inv.bottomRightCorner(dn, dn) = b.unstable_inv;
        b.inverse = b.basis * diag_inv * b.basis_inv;
    } else {
        b.inverse = Eigen::MatrixXd::Zero(dim, dim);
    }

    Eigen::MatrixXd sel_m = Eigen::MatrixXd::Zero(dim, dim);
    sel_m.topLeftCorner(dm, dm) = Eigen::MatrixXd::Identity(dm, dm);
    b.proj_stable = b.basis * sel_m * b.basis_inv;
    b.proj_unstable = Eigen::MatrixXd::Identity(dim, dim) - b.proj_stable;
    return SplitOperator::with_model(std::move(b));
}

inline SplitOperator make_weighted_shift(double lambda_minus, double lambda_plus,
                                         std::int64_t split_index) {
    if (!std::isfinite(lambda_minus) || std::abs(lambda_minus) <= 1.0)
        throw std::invalid_argument("shift: |lambda_minus| must exceed 1");
    if (!std::isfinite(lambda_plus) || lambda_plus == 0.0 || std::abs(lambda_plus) >= 1.0)
        throw std::invalid_argument("shift: lambda_plus must satisfy 0 < |lambda_plus| < 1");
    return SplitOperator::with_model(ShiftModel{lambda_minus, lambda_plus, split_index});
}

// ---------------------------------------------------------------------------
// Certification. A certificate (a, t, b, ||T^{-1}||, n0) asserts, for all
// n >= 0 and unit y in M, z in N:
//     ||T^n y|| <= a t^n   and   ||T^{-n} z|| <= a t^n.
// It is produced constructively: n0 is the least exponent with both restricted
// norms <= t^{n0}; a covers the finite prefix; submultiplicativity of the
// restricted norms extends the bound to every n.
// ---------------------------------------------------------------------------

struct HyperbolicityCertificate {
    double prefactor = 1.0;         // a >= 1
    double rate = 0.5;              // t in (0,1)
    double projection_bound = 1.0;  // b = max(||P_M||, ||P_N||), exact
    double inverse_norm = 1.0;      // ||T^{-1}||, exact (+inf if no inverse)
    int horizon = 1;                // n0
};

namespace detail {

inline std::optional<HyperbolicityCertificate> try_certify(
    const SplitOperator& op, const std::vector<double>& cm, const std::vector<double>& cn,
    double t, int max_horizon) {
    if (!(t > 0.0 && t < 1.0)) return std::nullopt;
    for (int n0 = 1; n0 <= max_horizon; ++n0) {
        const double tn = std::pow(t, n0);
        if (cm[static_cast<std::size_t>(n0)] <= tn && cn[static_cast<std::size_t>(n0)] <= tn) {
            double a = 1.0;
            for (int r = 1; r < n0; ++r) {
                const double c = std::max(cm[static_cast<std::size_t>(r)], cn[static_cast<std::size_t>(r)]);
                a = std::max(a, c / std::pow(t, r));
            }
            HyperbolicityCertificate cert;
            cert.prefactor = a;
            cert.rate = t;
            cert.projection_bound =
                std::max(1.0, std::max(op.stable_projection_norm(), op.unstable_projection_norm()));
            cert.inverse_norm = op.inverse_norm();
            cert.horizon = n0;
            return cert;
        }
    }
    return std::nullopt;
}

} // namespace detail

/// Certify decay constants at the supplied rate, or search for a rate when
/// none is given (coarse grid seeded by the n-th root of the restricted norm
/// at the search horizon).
inline HyperbolicityCertificate certify_constants(const SplitOperator& op,
                                                  std::optional<double> rate_candidate,
                                                  int search_horizon = 64) {
    if (search_horizon < 1) throw std::invalid_argument("search horizon must be positive");
    const auto [cm, cn] = op.restricted_power_norms(search_horizon);

    if (rate_candidate.has_value()) {
        if (!(*rate_candidate > 0.0 && *rate_candidate < 1.0))
            throw std::invalid_argument("rate candidate must lie in (0,1)");
        if (auto cert = detail::try_certify(op, cm, cn, *rate_candidate, search_horizon)) return *cert;
        throw certification_error("not certifiably (generalized) hyperbolic at rate t = " +
                                  std::to_string(*rate_candidate) + " within horizon " +
                                  std::to_string(search_horizon));
    }

    const auto h = static_cast<std::size_t>(search_horizon);
    double rho = 0.0;
    if (cm[h] > 0.0) rho = std::max(rho, std::pow(cm[h], 1.0 / search_horizon));
    if (cn[h] > 0.0) rho = std::max(rho, std::pow(cn[h], 1.0 / search_horizon));
    const double seed = 0.9 * rho + 0.1;
    if (seed < 1.0) {
        const int grid = 12;
        for (int i = 0; i < grid; ++i) {
            const double t = seed + i * (0.999 - seed) / grid;
            if (auto cert = detail::try_certify(op, cm, cn, t, search_horizon)) return *cert;
        }
    }
    throw certification_error("not certifiably (generalized) hyperbolic within horizon " +
                              std::to_string(search_horizon));
}

/// Perturbation smallness threshold: eps = min{(1-t)/(a b (1+t)), 1/||T^{-1}||} * delta.
inline double epsilon_threshold(const HyperbolicityCertificate& cert, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    const double structural =
        (1.0 - cert.rate) / (cert.prefactor * cert.projection_bound * (1.0 + cert.rate));
    const double inverse = 1.0 / cert.inverse_norm;  // 0 when no inverse exists
    return std::min(structural, inverse) * delta;
}

/// C = a b (1+t) / (1-t); bounds both the series inverse's norm and the
/// distance of the conjugating map from the identity per unit of perturbation.
inline double franks_constant(const HyperbolicityCertificate& cert) {
    return cert.prefactor * cert.projection_bound * (1.0 + cert.rate) / (1.0 - cert.rate);
}

/// Lipschitz constant of the tuple-to-conjugacy correspondence:
/// 2 a b (1+t) / ((1-delta)(1-t)). Independent of the tuple length.
inline double correspondence_lip_constant(const HyperbolicityCertificate& cert, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    return 2.0 * franks_constant(cert) / (1.0 - delta);
}

} // namespace conjulab
