#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>

#include "conjulab/operators.hpp"
#include "conjulab/perturbations.hpp"
#include "conjulab/vectorspace.hpp"

namespace conjulab {

// ---------------------------------------------------------------------------
// The product space X x Z_p and the lifted dynamics. A time-dependent product
// S_{p-1} o ... o S_0 becomes one autonomous map S(x, j) = (S_j(x), j+1 mod p)
// on the product; the unperturbed lift is T~(x, j) = (T(x), j+1 mod p).
// ---------------------------------------------------------------------------

inline int mod_fiber(int j, int p) {
    const int r = j % p;
    return r < 0 ? r + p : r;
}

struct TorusPoint {
    Vector x;
    int fiber = 0;
};

inline TorusPoint make_torus_point(Vector x, int j, int p) {
    return {std::move(x), mod_fiber(j, p)};
}

inline TorusPoint torus_T(const SplitOperator& op, const TorusPoint& pt, int p) {
    return {op.apply(pt.x), mod_fiber(pt.fiber + 1, p)};
}

inline TorusPoint torus_T_inverse(const SplitOperator& op, const TorusPoint& pt, int p) {
    return {op.apply_inverse(pt.x), mod_fiber(pt.fiber - 1, p)};
}

inline TorusPoint torus_S(const SplitOperator& op, const PerturbationTuple& maps,
                          const TorusPoint& pt) {
    return {apply_perturbed(op, maps.map(pt.fiber), pt.x), mod_fiber(pt.fiber + 1, maps.period())};
}

/// (S_{j-1}^{-1}(x), j-1 mod p); the inversion is solved to residual `tol`.
inline TorusPoint torus_S_inverse(const SplitOperator& op, const PerturbationTuple& maps,
                                  const TorusPoint& pt, double tol) {
    const int prev = mod_fiber(pt.fiber - 1, maps.period());
    return {invert_perturbed(op, maps.map(prev), pt.x, tol), prev};
}

/// The tuple lifted to a fiber-advancing map: (x, j) -> (L_j(x), j+1 mod p).
inline TorusPoint lbar_eval(const PerturbationTuple& maps, const TorusPoint& pt) {
    return {maps.map(pt.fiber).eval(pt.x), mod_fiber(pt.fiber + 1, maps.period())};
}

// ---------------------------------------------------------------------------
// Memoization for lazily evaluated fiber maps. Keys are exact: the byte image
// of (evaluation depth, fiber, vector) with no rounding, so hits can only
// return the identical value. Writes at the same key always carry equal
// payloads; last-write-wins under concurrency is therefore harmless.
// ---------------------------------------------------------------------------
class MemoCache {
public:
    static std::string key(int depth, int fiber, const Vector& x) {
        std::string k;
        k.reserve(48);
        const std::int32_t d = depth;
        const std::int32_t f = fiber;
        k.append(reinterpret_cast<const char*>(&d), sizeof d);
        k.append(reinterpret_cast<const char*>(&f), sizeof f);
        x.append_key_bytes(k);
        return k;
    }

    std::optional<Vector> find(const std::string& key) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = map_.find(key);
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    void store(const std::string& key, const Vector& value) {
        std::lock_guard<std::mutex> lock(mu_);
        map_.insert_or_assign(key, value);
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return map_.size();
    }

    void clear() {
        std::lock_guard<std::mutex> lock(mu_);
        map_.clear();
    }

private:
    mutable std::mutex mu_;
    std::unordered_map<std::string, Vector> map_;
};

// ---------------------------------------------------------------------------
// A lazily evaluable element of the two function spaces on the product:
// fiber-preserving maps send X x {j} into X x {j}; fiber-advancing maps send
// it into X x {j+1 mod p}. fiber_value(x, j) is the first coordinate of the
// image; the second coordinate is bookkeeping determined by the space tag.
// ---------------------------------------------------------------------------
enum class FiberSpace { preserving, advancing };

struct FunElem {
    FiberSpace space = FiberSpace::preserving;
    int period = 1;
    std::function<Vector(const Vector&, int)> fiber_value;
    double sup_bound = 0.0;
    std::optional<double> lip_bound;  // per-fiber Lipschitz bound, when known

    TorusPoint eval(const TorusPoint& pt) const {
        Vector v = fiber_value(pt.x, pt.fiber);
        const int j =
            space == FiberSpace::advancing ? mod_fiber(pt.fiber + 1, period) : pt.fiber;
        return {std::move(v), j};
    }
};

/// The zero element of either space: (x, j) -> (0, j) or (0, j+1).
inline FunElem zero_elem(FiberSpace space, int period) {
    return {space, period, [](const Vector& x, int) { return Vector::zero_like(x); }, 0.0, 0.0};
}

inline FunElem lbar_elem(PerturbationTuple maps) {
    const double sup = maps.max_sup();
    const double lip = maps.max_lip();
    const int p = maps.period();
    auto shared = std::make_shared<PerturbationTuple>(std::move(maps));
    return {FiberSpace::advancing, p,
            [shared](const Vector& x, int j) { return shared->map(j).eval(x); }, sup, lip};
}

} // namespace conjulab
