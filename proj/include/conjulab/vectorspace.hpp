#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace conjulab {

/// A state-space point under the sup norm. Two families:
///  - dense: fixed-dimension coordinate vector,
///  - sparse_bilateral: finitely supported map from Z to R.
///
/// Values are immutable after construction. Sparse storage never holds an
/// explicit zero entry, so arithmetic on the stored indices is exact.
class Vector {
public:
    enum class Family { dense, sparse_bilateral };

    Vector() = default;

    static Vector dense(std::vector<double> values) {
        Vector v;
        v.family_ = Family::dense;
        v.dense_ = std::move(values);
        return v;
    }

    static Vector sparse(std::map<std::int64_t, double> entries) {
        Vector v;
        v.family_ = Family::sparse_bilateral;
        for (const auto& [i, val] : entries)
            if (val != 0.0) v.sparse_.emplace(i, val);
        return v;
    }

    /// e_index scaled by value, in the bilateral sequence family.
    static Vector basis(std::int64_t index, double value = 1.0) {
        return sparse({{index, value}});
    }

    static Vector zero_like(const Vector& proto) {
        if (proto.family_ == Family::dense)
            return dense(std::vector<double>(proto.dense_.size(), 0.0));
        return sparse({});
    }

    Family family() const { return family_; }
    bool is_dense() const { return family_ == Family::dense; }

    std::size_t dimension() const {
        if (family_ != Family::dense)
            throw std::invalid_argument("dimension() is defined for dense vectors only");
        return dense_.size();
    }

    double get(std::int64_t index) const {
        if (family_ == Family::dense) {
            if (index < 0 || static_cast<std::size_t>(index) >= dense_.size())
                throw std::out_of_range("dense coordinate index out of range");
            return dense_[static_cast<std::size_t>(index)];
        }
        auto it = sparse_.find(index);
        return it == sparse_.end() ? 0.0 : it->second;
    }

    const std::vector<double>& dense_values() const {
        if (family_ != Family::dense)
            throw std::invalid_argument("not a dense vector");
        return dense_;
    }

    const std::map<std::int64_t, double>& sparse_entries() const {
        if (family_ != Family::sparse_bilateral)
            throw std::invalid_argument("not a sparse bilateral vector");
        return sparse_;
    }

    std::vector<std::int64_t> support() const {
        std::vector<std::int64_t> idx;
        if (family_ == Family::dense) {
            for (std::size_t i = 0; i < dense_.size(); ++i)
                if (dense_[i] != 0.0) idx.push_back(static_cast<std::int64_t>(i));
        } else {
            for (const auto& [i, v] : sparse_) idx.push_back(i);
        }
        return idx;
    }

    bool is_zero() const {
        if (family_ == Family::sparse_bilateral) return sparse_.empty();
        for (double v : dense_)
            if (v != 0.0) return false;
        return true;
    }

    bool compatible_with(const Vector& other) const {
        if (family_ != other.family_) return false;
        return family_ != Family::dense || dense_.size() == other.dense_.size();
    }

    /// Exact byte image of the value; memoization key component.
    void append_key_bytes(std::string& out) const {
        auto put = [&out](const void* p, std::size_t n) {
            out.append(static_cast<const char*>(p), n);
        };
        const char tag = family_ == Family::dense ? 'd' : 's';
        put(&tag, 1);
        if (family_ == Family::dense) {
            const std::uint64_t n = dense_.size();
            put(&n, sizeof n);
            if (n > 0) put(dense_.data(), dense_.size() * sizeof(double));
        } else {
            const std::uint64_t n = sparse_.size();
            put(&n, sizeof n);
            for (const auto& [i, v] : sparse_) {
                put(&i, sizeof i);
                put(&v, sizeof v);
            }
        }
    }

    /// Exact (bitwise value) comparison; no tolerance.
    friend bool operator==(const Vector& a, const Vector& b) {
        if (a.family_ != b.family_) return false;
        if (a.family_ == Family::dense) return a.dense_ == b.dense_;
        return a.sparse_ == b.sparse_;
    }

private:
    Family family_ = Family::dense;
    std::vector<double> dense_;
    std::map<std::int64_t, double> sparse_;
};

/// alpha*x + beta*y. Entries of a sparse result that are exactly zero are
/// dropped from storage.
inline Vector linear_combine(double alpha, const Vector& x, double beta, const Vector& y) {
    if (!x.compatible_with(y))
        throw std::invalid_argument("linear_combine: incompatible vector variants or dimensions");
    if (x.is_dense()) {
        const auto& xs = x.dense_values();
        const auto& ys = y.dense_values();
        std::vector<double> out(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = alpha * xs[i] + beta * ys[i];
        return Vector::dense(std::move(out));
    }
    std::map<std::int64_t, double> out;
    for (const auto& [i, v] : x.sparse_entries()) out[i] = alpha * v;
    for (const auto& [i, v] : y.sparse_entries()) out[i] += beta * v;
    return Vector::sparse(std::move(out));
}

inline Vector add(const Vector& x, const Vector& y) { return linear_combine(1.0, x, 1.0, y); }
inline Vector subtract(const Vector& x, const Vector& y) { return linear_combine(1.0, x, -1.0, y); }

inline Vector scale(double alpha, const Vector& x) {
    if (x.is_dense()) {
        std::vector<double> out(x.dense_values());
        for (double& v : out) v *= alpha;
        return Vector::dense(std::move(out));
    }
    std::map<std::int64_t, double> out;
    for (const auto& [i, v] : x.sparse_entries()) out[i] = alpha * v;
    return Vector::sparse(std::move(out));
}

inline double sup_norm(const Vector& x) {
    double m = 0.0;
    if (x.is_dense()) {
        for (double v : x.dense_values()) m = std::max(m, std::abs(v));
    } else {
        for (const auto& [i, v] : x.sparse_entries()) m = std::max(m, std::abs(v));
    }
    return m;
}

inline double distance(const Vector& x, const Vector& y) { return sup_norm(subtract(x, y)); }

} // namespace conjulab
